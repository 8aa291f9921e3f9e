#include "doctest.h"

#include "mhspna/betweenness.hpp"
#include "mhspna/error.hpp"
#include "oracle.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace mhspna;
using testing::chain;
using testing::line;

namespace {

MetricParams deterministic(double a = 0.5) {
  MetricParams p;
  p.a = a;
  p.sigma = 0.0;
  p.oversample = 1;
  return p;
}

AnalysisSpec everywhere_spec(BetweennessType type = BetweennessType::Elastic) {
  AnalysisSpec s;
  s.key = "t";
  s.type = type;
  s.origin_weight = "everywhere";
  s.destination_weight = "everywhere";
  s.radii = {RadiusBand{}};
  return s;
}

}  // namespace

TEST_CASE("od contribution shares") {
  const std::vector<std::size_t> path{0, 1, 2};
  CHECK(od_contribution(0, 0, 0, std::span<const std::size_t>(path.data(), 1)) == doctest::Approx(1.0 / 3.0));
  CHECK(od_contribution(0, 0, 2, path) == 0.5);
  CHECK(od_contribution(2, 0, 2, path) == 0.5);
  CHECK(od_contribution(1, 0, 2, path) == 1.0);
  CHECK(od_contribution(3, 0, 2, path) == 0.0);
  CHECK(od_contribution(1, 0, 0, path) == 0.0);
}

TEST_CASE("single link self-betweenness is one third") {
  const auto net = chain(1);
  const auto f = elastic_betweenness(net, everywhere_spec(), deterministic(), RadiusBand{});
  CHECK(f.values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("three-link path betweenness") {
  const auto net = chain(3);
  const auto f = elastic_betweenness(net, everywhere_spec(), deterministic(), RadiusBand{});
  CHECK(std::abs(f.values[0] - 7.0 / 3.0) < 1e-12);
  CHECK(std::abs(f.values[1] - 13.0 / 3.0) < 1e-12);
  CHECK(std::abs(f.values[2] - 7.0 / 3.0) < 1e-12);
}

TEST_CASE("radius excludes far destinations") {
  const auto net = chain(3);
  // Centres are 100 m apart: A reaches B but not C at 150 m.
  const auto f = elastic_betweenness(net, everywhere_spec(), deterministic(), RadiusBand{0.0, 150.0});
  // A: self 1/3 + (A,B),(B,A) = 4/3. B: self + 4 half-shares = 7/3.
  CHECK(std::abs(f.values[0] - 4.0 / 3.0) < 1e-12);
  CHECK(std::abs(f.values[1] - 7.0 / 3.0) < 1e-12);
  CHECK(f.diagnostics.total_trip_weight == doctest::Approx(7.0));
}

TEST_CASE("two-phase normalises each origin to its weight") {
  auto net = SpatialNetwork::build({line("A", {Point(0, 0), Point(100, 0)}, {{"w", 2.0}}),
                                    line("B", {Point(100, 0), Point(200, 0)}, {{"w", 1.0}}),
                                    line("C", {Point(200, 0), Point(300, 0)}, {{"w", 1.0}})});
  AnalysisSpec s = everywhere_spec(BetweennessType::TwoPhase);
  s.origin_weight = "w";
  s.destination_weight = "w";
  const auto f = two_phase_betweenness(net, s, deterministic(), RadiusBand{});
  CHECK(f.diagnostics.max_conservation_error < 1e-12);
  CHECK(f.diagnostics.total_trip_weight == doctest::Approx(4.0));
  // Origin A (weight 2) sends 1 to itself and 0.5 each to B and C.
  const auto expected = oracle::brute_betweenness(net, s, RadiusBand{}, deterministic());
  CHECK((f.values - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analysis spec json round trip and column names") {
  AnalysisSpec s;
  s.key = "s2s";
  s.type = BetweennessType::TwoPhase;
  s.origin_weight = "retail_m2";
  s.destination_weight = "retail_m2";
  s.radii = {{0.0, 200.0}, {100.0, 400.0}, {0.0, kInfinity}};
  s.continuous = true;
  CHECK(analysis_spec_from_json(to_json(s)) == s);
  CHECK(s.column(s.radii[0]) == "s2s@200");
  CHECK(s.column(s.radii[1]) == "s2s@100-400");
  CHECK(s.column(s.radii[2]) == "s2s@inf");
  CHECK_THROWS_AS(analysis_spec_from_json(nlohmann::json{{"key", "x"}, {"bogus", 1}}), DataError);
}

TEST_CASE("default battery has thirteen columns") {
  std::size_t columns = 0;
  for (const auto& s : default_battery()) columns += s.radii.size();
  CHECK(columns == 13);
}

TEST_CASE("missing weight fields are all named") {
  const auto net = chain(2);
  AnalysisSpec a = everywhere_spec();
  a.destination_weight = "shops";
  AnalysisSpec b = everywhere_spec();
  b.key = "u";
  b.origin_weight = "homes";
  try {
    check_weight_fields(net, {a, b});
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shops") != std::string::npos);
    CHECK(msg.find("homes") != std::string::npos);
  }
}

TEST_CASE("single origin resolution") {
  auto net = SpatialNetwork::build({line("A", {Point(0, 0), Point(100, 0)}, {{"stn", 1.0}}),
                                    line("B", {Point(100, 0), Point(200, 0)}, {{"stn", 0.0}})});
  AnalysisSpec s = everywhere_spec(BetweennessType::SingleOrigin);
  s.origin_weight = "stn";
  const auto f = single_origin_betweenness(net, s, deterministic(), RadiusBand{});
  CHECK(f.values[0] == doctest::Approx(1.0 / 3.0 + 0.5));
  CHECK(f.values[1] == doctest::Approx(0.5));
  s.origin_weight.clear();
  s.origin_link = "Z";
  CHECK_THROWS_AS(single_origin_betweenness(net, s, deterministic(), RadiusBand{}), DataError);
}

TEST_CASE("elastic run without origins returns zeros with a warning") {
  auto net = SpatialNetwork::build({line("A", {Point(0, 0), Point(100, 0)}, {{"o", 0.0}})});
  AnalysisSpec s = everywhere_spec();
  s.origin_weight = "o";
  const auto f = elastic_betweenness(net, s, deterministic(), RadiusBand{});
  CHECK(f.values.isZero());
  CHECK_FALSE(f.diagnostics.warnings.empty());
}

TEST_CASE("matches the brute-force enumerator on random lattices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const auto net = oracle::random_lattice(rng, 20);
    for (double a : {0.0, 0.5, 1.0}) {
      const MetricParams p = deterministic(a);
      std::vector<AnalysisSpec> specs(3);
      specs[0] = {"e", BetweennessType::Elastic, "pop", "", "retail", {{0.0, 250.0}, {100.0, kInfinity}}, false};
      specs[1] = {"s", BetweennessType::TwoPhase, "retail", "", "retail", {{0.0, 180.0}, {50.0, 300.0}}, true};
      specs[2] = {"q", BetweennessType::SingleOrigin, "solo", "", "retail", {{0.0, kInfinity}}, false};
      const auto fields = run_battery(net, specs, p, RunOptions{2});
      std::size_t k = 0;
      for (const auto& spec : specs) {
        for (const auto& band : spec.radii) {
          const auto expected = oracle::brute_betweenness(net, spec, band, p);
          INFO("trial " << trial << " a " << a << " column " << fields[k].column);
          CHECK((fields[k].values - expected).cwiseAbs().maxCoeff() < 1e-9);
          ++k;
        }
      }
    }
  }
}

TEST_CASE("randomised runs match the enumerator iteration by iteration") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const auto net = oracle::random_lattice(rng, 15);
    MetricParams p;
    p.a = 0.5;
    p.sigma = 1.0;
    p.oversample = 3;
    p.seed = 99;
    AnalysisSpec s{"e", BetweennessType::Elastic, "pop", "", "retail", {{0.0, 400.0}}, false};
    const auto f = run_battery(net, {s}, p, RunOptions{1}).front();
    const auto expected = oracle::brute_betweenness(net, s, s.radii[0], p);
    CHECK((f.values - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("results do not depend on the thread count") {
  std::mt19937_64 rng(3);
  const auto net = oracle::random_lattice(rng, 30);
  MetricParams p;
  p.oversample = 4;
  AnalysisSpec s{"e", BetweennessType::Elastic, "pop", "", "retail", {{0.0, 300.0}}, false};
  const auto one = run_battery(net, {s}, p, RunOptions{1}).front();
  const auto four = run_battery(net, {s}, p, RunOptions{4}).front();
  CHECK(one.values == four.values);
}

TEST_CASE("destination scaling") {
  std::mt19937_64 rng(5);
  const auto net = oracle::random_lattice(rng, 25);
  std::vector<Link> scaled_links = net.links();
  for (auto& l : scaled_links) {
    if (l.weights.contains("retail")) l.weights["retail"] *= 8.0;
  }
  const auto scaled = SpatialNetwork::build(std::move(scaled_links));
  const MetricParams p = deterministic();
  AnalysisSpec e{"e", BetweennessType::Elastic, "pop", "", "retail", {{0.0, 300.0}}, false};
  AnalysisSpec t{"t", BetweennessType::TwoPhase, "pop", "", "retail", {{0.0, 300.0}}, true};
  const auto base = run_battery(net, {e, t}, p);
  const auto big = run_battery(scaled, {e, t}, p);
  CHECK((big[0].values - 8.0 * base[0].values).cwiseAbs().maxCoeff() <= 1e-12 * base[0].values.cwiseAbs().maxCoeff());
  CHECK((big[1].values - base[1].values).cwiseAbs().maxCoeff() <= 1e-12 * base[1].values.cwiseAbs().maxCoeff());
}
