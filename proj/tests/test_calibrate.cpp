#include "doctest.h"

#include "mhspna/calibrate.hpp"
#include "mhspna/error.hpp"
#include "oracle.hpp"
#include "support.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace mhspna;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

Problem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 3.0);
  Problem out{Eigen::MatrixXd(n, p), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Eigen::VectorXd beta(p);
  for (Eigen::Index j = 0; j < p; ++j) beta[j] = z(rng) * 3.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out.x(i, j) = z(rng) * (j + 1) + j;
    out.y[i] = 5.0 + out.x.row(i).dot(beta) + z(rng);
    out.w[i] = u(rng);
  }
  return out;
}

CalibratedModel hand_model() {
  CalibratedModel m;
  m.columns = {"f@100"};
  m.intercept = 10.0;
  m.coefficients = Eigen::VectorXd::Constant(1, 2.0);
  m.mean = Eigen::VectorXd::Zero(1);
  m.std = Eigen::VectorXd::Constant(1, 4.0);
  return m;
}

CountPoint point(const std::string& id, std::size_t link, std::map<std::string, double> obs) {
  return CountPoint{id, Point(0, 0), std::to_string(link), link, std::move(obs)};
}

}  // namespace

TEST_CASE("observation weights") {
  Eigen::VectorXd y(3);
  y << 100.0, 1.0, 4.0;
  const auto w = observation_weights(y, 0.7);
  CHECK(w[0] == doctest::Approx(std::pow(100.0, -0.3)));
  CHECK(w[0] == doctest::Approx(0.2512).epsilon(1e-3));
  CHECK(w[1] == 1.0);
  CHECK(observation_weights(y, 1.0).isOnes());
  CHECK_THROWS_AS(observation_weights(y, 1.5), DataError);
  y[1] = 0.0;
  CHECK_THROWS_AS(observation_weights(y, 0.7), DataError);
}

TEST_CASE("ridge recovers an exact linear relation") {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  const Eigen::VectorXd y = 2.0 * x.col(0);
  const auto s = ridge_fit(x, y, Eigen::VectorXd::Ones(5), 0.0);
  CHECK(s.coefficients[0] == doctest::Approx(2.0));
  CHECK(std::abs(s.intercept) < 1e-12);
  CHECK(s.mean[0] == doctest::Approx(3.0));
  CHECK(s.std[0] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("a huge penalty leaves the weighted mean") {
  std::mt19937_64 rng(1);
  const auto pr = random_problem(rng, 40, 3);
  const auto s = ridge_fit(pr.x, pr.y, pr.w, 1e14);
  CHECK(s.standardized().norm() < 1e-8);
  CHECK(s.intercept + s.mean.dot(s.coefficients) == doctest::Approx(pr.y.dot(pr.w) / pr.w.sum()));
}

TEST_CASE("ridge agrees with the augmented least-squares reference") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pr = random_problem(rng, 50, 4);
    for (double lambda : {0.0, 0.1, 10.0, 1000.0}) {
      const auto s = ridge_fit(pr.x, pr.y, pr.w, lambda);
      const auto ref = oracle::ridge_reference(pr.x, pr.y, pr.w, lambda);
      CHECK((s.coefficients - ref.coefficients).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(s.intercept - ref.intercept) < 1e-8);
    }
  }
}

TEST_CASE("standardized coefficient norm shrinks along the grid") {
  std::mt19937_64 rng(3);
  const auto pr = random_problem(rng, 60, 5);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : default_penalty_grid(pr.w)) {
    const double norm = ridge_fit(pr.x, pr.y, pr.w, lambda).standardized().norm();
    CHECK(norm <= previous * (1.0 + 1e-12));
    previous = norm;
  }
}

TEST_CASE("penalty grid spans the weight sum") {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(10, 2.0);
  const auto g = default_penalty_grid(w);
  REQUIRE(g.size() == 60);
  CHECK(g.front() == doctest::Approx(20.0 * 1e-4));
  CHECK(g.back() == doctest::Approx(20.0 * 1e3));
}

TEST_CASE("collinear columns without a penalty are rejected") {
  Eigen::MatrixXd x(6, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 5, 7;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  CHECK_THROWS_AS(ridge_fit(x, y, w, 0.0), DataError);
  CHECK_NOTHROW(ridge_fit(x, y, w, 1.0));
}

TEST_CASE("nonnegative fits clip coefficients") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(30, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    x(i, 0) = z(rng);
    x(i, 1) = z(rng);
    y[i] = 20.0 + 3.0 * x(i, 0) - 2.0 * x(i, 1);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(30);
  const auto free = ridge_fit(x, y, w, 0.0);
  CHECK(free.coefficients[1] == doctest::Approx(-2.0));
  const auto clipped = ridge_fit(x, y, w, 0.0, FitOptions{true, true});
  CHECK(clipped.coefficients[1] == 0.0);
  CHECK(clipped.coefficients[0] > 0.0);
}

TEST_CASE("zero-variance columns are held at zero") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 7, 2, 7, 3, 7, 4, 7, 5, 7;
  Eigen::VectorXd y(5);
  y << 3, 5, 7, 9, 11;
  const auto s = ridge_fit(x, y, Eigen::VectorXd::Ones(5), 0.0);
  CHECK(s.zero_variance == std::vector<Eigen::Index>{1});
  CHECK(s.coefficients[1] == 0.0);
  CHECK(s.coefficients[0] == doctest::Approx(2.0));
}

TEST_CASE("no-intercept fits pass through the origin") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y(4);
  y << 3, 6, 9, 12;
  const auto s = ridge_fit(x, y, Eigen::VectorXd::Ones(4), 0.0, FitOptions{false, false});
  CHECK(s.intercept == 0.0);
  CHECK(s.coefficients[0] == doctest::Approx(3.0));
}

TEST_CASE("cross-validation") {
  std::mt19937_64 rng(5);
  const auto pr = random_problem(rng, 60, 3);
  CvOptions cv;
  cv.repetitions = 10;
  const auto a = cv_select_penalty(pr.x, pr.y, pr.w, cv);
  const auto b = cv_select_penalty(pr.x, pr.y, pr.w, cv);
  CHECK(a.lambda_r == b.lambda_r);
  CHECK(a.cv_r2 == b.cv_r2);
  CHECK(a.curve.size() == 60);
  CHECK(a.cv_r2 > 0.9);
  cv.threads = 1;
  CHECK(cv_select_penalty(pr.x, pr.y, pr.w, cv).cv_r2 == a.cv_r2);

  cv.lambda_r = 3.5;
  const auto manual = cv_select_penalty(pr.x, pr.y, pr.w, cv);
  CHECK(manual.lambda_r == 3.5);
  CHECK(manual.curve.size() == 1);

  CvOptions too_many;
  too_many.folds = 100;
  CHECK_THROWS_AS(cv_select_penalty(pr.x, pr.y, pr.w, too_many), DataError);
}

TEST_CASE("cross-validated r2 of pure noise is near zero") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(80, 3);
  Eigen::VectorXd y(80);
  for (int i = 0; i < 80; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = z(rng);
    y[i] = 50.0 + 5.0 * z(rng);
  }
  CvOptions cv;
  cv.repetitions = 20;
  const auto r = cv_select_penalty(x, y, observation_weights(y, 0.7), cv);
  CHECK(std::abs(r.cv_r2) < 0.1);
}

TEST_CASE("calibrated model bookkeeping") {
  std::mt19937_64 rng(7);
  const auto pr = random_problem(rng, 40, 2);
  DesignMatrix d;
  d.columns = {"e2s@400", "s2s@inf"};
  for (int i = 0; i < 40; ++i) d.point_ids.push_back("P" + std::to_string(i));
  d.x = pr.x;
  d.y = pr.y.cwiseAbs().array() + 1.0;
  CalibrationOptions options;
  options.cv.repetitions = 5;
  const auto m = calibrate(d, options);
  CHECK(m.points == 40);
  CHECK(m.column_index("s2s@inf") == 1);
  CHECK_THROWS_AS(m.column_index("x"), DataError);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(m.standardized_coefficients()[j] == m.coefficients[j] * m.std[j]);

  std::ostringstream csv;
  write_coefficients_csv(csv, m);
  const std::string text = csv.str();
  CHECK(text.rfind("variable,radius,coeff,std,stdcoeff\n", 0) == 0);
  CHECK(text.find("\ne2s,400,") != std::string::npos);
  CHECK(text.find("\ns2s,inf,") != std::string::npos);

  const auto back = calibrated_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.intercept == m.intercept);
  CHECK(back.columns == m.columns);
  FieldTable fields{{"e2s@400", Eigen::VectorXd::LinSpaced(5, 0, 40)}, {"s2s@inf", Eigen::VectorXd::LinSpaced(5, 3, 9)}};
  CHECK(predict_direct(back, fields).raw == predict_direct(m, fields).raw);

  auto bad = to_json(m);
  bad["surprise"] = 1;
  CHECK_THROWS_AS(calibrated_model_from_json(bad), DataError);
}

TEST_CASE("direct predictions are floored") {
  const auto m = hand_model();
  Eigen::VectorXd f(3);
  f << 1.0, -20.0, 3.0;
  const auto p = predict_direct(m, FieldTable{{"f@100", f}});
  CHECK(p.raw[0] == 12.0);
  CHECK(p.raw[1] == -30.0);
  CHECK(p.flow[1] == 0.0);
  CHECK(p.floored == std::vector<char>{0, 1, 0});
  CHECK_THROWS_AS(predict_direct(m, FieldTable{{"g@100", f}}), DataError);
}

TEST_CASE("incremental and null predictions") {
  const auto m = hand_model();
  Eigen::VectorXd f1(2), f2(2);
  f1 << 5.0, 7.0;
  f2 << 6.0, 4.0;
  const std::vector<CountPoint> pts{point("P1", 0, {{"t1", 100.0}}), point("P2", 1, {{"t1", 50.0}})};
  const auto inc = predict_incremental(m, FieldTable{{"f@100", f1}}, pts, FieldTable{{"f@100", f2}}, pts, "t1");
  CHECK(inc.at("P1") == doctest::Approx(102.0));
  CHECK(inc.at("P2") == doctest::Approx(44.0));

  const auto same = predict_incremental(m, FieldTable{{"f@100", f1}}, pts, FieldTable{{"f@100", f1}}, pts, "t1");
  const std::vector<CountSite> sites{{"P1", Point(0, 0), {{"t1", 100.0}}}, {"P2", Point(0, 0), {{"t1", 50.0}}}};
  CHECK(same == predict_null(sites, "t1"));
  CHECK_THROWS_AS(predict_null(sites, "t2"), DataError);
}

TEST_CASE("geh and evaluation") {
  CHECK(geh(105.0, 100.0) == doctest::Approx(0.4939).epsilon(1e-3));
  CHECK(geh(0.0, 0.0) == 0.0);
  CHECK(geh(100.0, 100.0) == 0.0);

  const PointValues obs{{"a", 10.0}, {"b", 20.0}, {"c", 40.0}, {"d", 35.0}};
  const PointValues pred{{"a", 12.0}, {"b", 18.0}, {"c", 45.0}, {"d", 30.0}};
  const auto r = evaluate(pred, obs);
  REQUIRE(r.r2);
  PointValues scaled;
  for (const auto& [k, v] : pred) scaled[k] = 3.0 * v + 7.0;
  CHECK(*evaluate(scaled, obs).r2 == doctest::Approx(*r.r2).epsilon(1e-12));
  CHECK(r.geh_under_5_fraction == 1.0);

  const PointValues flat{{"a", 5.0}, {"b", 5.0}, {"c", 5.0}, {"d", 5.0}};
  const auto undefined = evaluate(flat, obs);
  CHECK_FALSE(undefined.r2.has_value());
  CHECK(to_json(undefined)["r2"].is_null());
  CHECK(to_json(undefined)["r2_defined"] == false);

  const PointValues two{{"a", 1.0}, {"b", 2.0}};
  CHECK_THROWS_AS(evaluate(two, obs), DataError);

  const PointValues negative{{"a", -4.0}, {"b", 20.0}, {"c", 40.0}};
  CHECK(evaluate(negative, obs).points[0].geh == doctest::Approx(geh(0.0, 10.0)));
}

TEST_CASE("sigma sweep drops duplicate grid values") {
  const auto net = testing::chain(6);
  AnalysisSpec spec;
  spec.key = "e";
  spec.origin_weight = "everywhere";
  spec.destination_weight = "everywhere";
  std::vector<CountPoint> pts;
  for (std::size_t i = 0; i < 6; ++i) pts.push_back(point("P" + std::to_string(i), i, {{"y", 10.0 + 3.0 * i * i}}));
  SweepOptions options;
  options.sigma_grid = {0.0, 0.5, 0.5};
  options.a_grid = {0.25, 0.5};
  options.oversample = 2;
  const auto r = sweep_sigma(net, spec, RadiusBand{0.0, 250.0}, MetricParams{}, pts, "y", options);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].a == 0.25);
  CHECK(r.rows[1].sigma == 0.5);
  CHECK(r.warnings.size() == 1);
  for (const auto& row : r.rows) CHECK((row.r2 >= 0.0 && row.r2 <= 1.0));
}
