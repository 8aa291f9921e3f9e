#include "mhspna/betweenness.hpp"

#include "mhspna/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

namespace mhspna {

std::string_view to_string(BetweennessType type) {
  switch (type) {
    case BetweennessType::Elastic:
      return "elastic";
    case BetweennessType::TwoPhase:
      return "two_phase";
    case BetweennessType::SingleOrigin:
      return "single_origin";
  }
  return "elastic";
}

BetweennessType betweenness_type_from_string(std::string_view name) {
  if (name == "elastic") return BetweennessType::Elastic;
  if (name == "two_phase") return BetweennessType::TwoPhase;
  if (name == "single_origin") return BetweennessType::SingleOrigin;
  throw DataError("unknown betweenness type '" + std::string(name) + "'");
}

void AnalysisSpec::validate() const {
  if (key.empty()) throw DataError("analysis: key must not be empty");
  if (destination_weight.empty()) throw DataError("analysis '" + key + "': destination_weight is required");
  if (radii.empty()) throw DataError("analysis '" + key + "': radii must not be empty");
  for (const auto& r : radii) {
    if (!(r.rmin >= 0.0 && r.rmin < r.rmax)) {
      throw DataError("analysis '" + key + "': every radius needs 0 <= rmin < rmax");
    }
  }
  if (type == BetweennessType::SingleOrigin && origin_link.empty() && origin_weight.empty()) {
    throw DataError("analysis '" + key + "': single_origin needs origin_link or origin_weight");
  }
  if (type != BetweennessType::SingleOrigin && origin_weight.empty()) {
    throw DataError("analysis '" + key + "': origin_weight is required");
  }
}

namespace {

std::string format_radius(double r) {
  if (r == kInfinity) return "inf";
  std::ostringstream ss;
  if (r == std::floor(r) && std::abs(r) < 1e15) {
    ss << static_cast<long long>(r);
  } else {
    ss << r;
  }
  return ss.str();
}

nlohmann::json radius_to_json(double r) {
  if (r == kInfinity) return "inf";
  return r;
}

double radius_from_json(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return kInfinity;
  if (!j.is_number()) throw DataError("analysis: radius must be a number or \"inf\"");
  return j.get<double>();
}

}  // namespace

std::string AnalysisSpec::column(const RadiusBand& band) const {
  if (band.rmin > 0.0) return key + "@" + format_radius(band.rmin) + "-" + format_radius(band.rmax);
  return key + "@" + format_radius(band.rmax);
}

nlohmann::json to_json(const AnalysisSpec& spec) {
  nlohmann::json radii = nlohmann::json::array();
  for (const auto& r : spec.radii) {
    if (r.rmin == 0.0) {
      radii.push_back(radius_to_json(r.rmax));
    } else {
      radii.push_back({r.rmin, radius_to_json(r.rmax)});
    }
  }
  nlohmann::json j = {{"key", spec.key},
                      {"type", std::string(to_string(spec.type))},
                      {"destination_weight", spec.destination_weight},
                      {"radii", std::move(radii)},
                      {"continuous", spec.continuous}};
  if (!spec.origin_weight.empty()) j["origin_weight"] = spec.origin_weight;
  if (!spec.origin_link.empty()) j["origin_link"] = spec.origin_link;
  return j;
}

AnalysisSpec analysis_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("analysis: expected an object");
  AnalysisSpec spec;
  bool origin_weight_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "key") {
      spec.key = value.get<std::string>();
    } else if (key == "type") {
      spec.type = betweenness_type_from_string(value.get<std::string>());
    } else if (key == "origin_weight") {
      spec.origin_weight = value.get<std::string>();
      origin_weight_given = true;
    } else if (key == "origin_link") {
      spec.origin_link = value.get<std::string>();
    } else if (key == "destination_weight") {
      spec.destination_weight = value.get<std::string>();
    } else if (key == "continuous") {
      spec.continuous = value.get<bool>();
    } else if (key == "radii") {
      if (!value.is_array()) throw DataError("analysis: radii must be an array");
      for (const auto& r : value) {
        if (r.is_array()) {
          if (r.size() != 2) throw DataError("analysis: a radius band is [rmin, rmax]");
          spec.radii.push_back({radius_from_json(r[0]), radius_from_json(r[1])});
        } else {
          spec.radii.push_back({0.0, radius_from_json(r)});
        }
      }
    } else {
      throw DataError("analysis: unknown key '" + key + "'");
    }
  }
  if (spec.type == BetweennessType::SingleOrigin && !origin_weight_given) spec.origin_weight.clear();
  spec.validate();
  return spec;
}

std::vector<AnalysisSpec> default_battery() {
  using T = BetweennessType;
  auto bands = [](std::initializer_list<double> rs) {
    std::vector<RadiusBand> out;
    for (double r : rs) out.push_back({0.0, r});
    return out;
  };
  return {
      {"e2s", T::Elastic, std::string(kEverywhere), "", "retail_m2", bands({400, 800, 1200}), false},
      {"s2s", T::TwoPhase, "retail_m2", "", "retail_m2", bands({200, 400}), true},
      {"sq2s", T::SingleOrigin, "station_queen", "", "retail_m2", bands({600, 1000}), false},
      {"sc2s", T::SingleOrigin, "station_central", "", "retail_m2", bands({600, 1000}), false},
      {"p2s", T::Elastic, "carpark", "", "retail_m2", bands({600, 1000}), false},
      {"n2s", T::Elastic, "north_parking", "", "retail_m2", bands({600, 1000}), false},
  };
}

bool FlowDiagnostics::activity_consistent(double rel_tol) const {
  return std::abs(total_trip_weight - expected_trip_weight) <= rel_tol * std::max(1.0, std::abs(expected_trip_weight));
}

double od_contribution(std::size_t x, std::size_t y, std::size_t z, std::span<const std::size_t> path) {
  if (y == z) return x == y ? 1.0 / 3.0 : 0.0;
  if (x == y || x == z) return 0.5;
  return std::find(path.begin(), path.end(), x) != path.end() ? 1.0 : 0.0;
}

void check_weight_fields(const SpatialNetwork& net, const std::vector<AnalysisSpec>& specs) {
  std::set<std::string> missing;
  for (const auto& s : specs) {
    if (!net.has_weight_field(s.destination_weight)) missing.insert(s.destination_weight);
    if (s.type == BetweennessType::SingleOrigin && !s.origin_link.empty()) {
      if (!net.find(s.origin_link)) throw DataError("analysis '" + s.key + "': origin link '" + s.origin_link + "' missing");
    } else if (!net.has_weight_field(s.origin_weight)) {
      missing.insert(s.origin_weight);
    }
  }
  if (!missing.empty()) {
    std::string msg = "unknown weight field(s):";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
}

LinkColumns to_link_columns(const std::vector<FlowField>& fields) {
  LinkColumns out;
  for (const auto& f : fields) out.emplace_back(f.column, std::vector<double>(f.values.begin(), f.values.end()));
  return out;
}

// --- engine -----------------------------------------------------------------

namespace {

/// One output column of the battery with its resolved weights.
struct Column {
  BetweennessType type;
  RadiusBand band;
  bool continuous;
  std::vector<double> origin_weight;
  std::vector<double> destination_weight;
};

struct ColumnDiagnostics {
  std::size_t origins = 0;
  std::size_t origins_without_destinations = 0;
  double total = 0.0;
  double expected = 0.0;
  double max_conservation_error = 0.0;
};

/// Results for one fixed block of origins; blocks are reduced in order so the
/// sum never depends on scheduling.
struct ChunkResult {
  Eigen::MatrixXd flows;  // links x columns
  std::vector<ColumnDiagnostics> diagnostics;
};

constexpr std::size_t kChunkSize = 16;

struct Trip {
  std::size_t dest;
  double weight;
};

class Worker {
 public:
  Worker(const RoutingGraph& graph, const std::vector<Column>& columns, const MetricParams& params)
      : graph_(graph),
        columns_(columns),
        params_(params),
        radius_(graph),
        route_(graph),
        pass_(graph.state_count(), 0.0),
        own_(graph.state_count(), 0.0) {}

  void process(std::size_t origin, ChunkResult& out) {
    const SpatialNetwork& net = graph_.network();
    const std::size_t n = net.size();

    std::vector<std::size_t> active;
    double bound = 0.0;
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      if (columns_[k].origin_weight[origin] > 0.0) {
        active.push_back(k);
        bound = std::max(bound, columns_[k].band.rmax);
      }
    }
    if (active.empty()) return;

    radius_.radius(origin, bound);
    // Links touched by the bounded radius search.
    candidates_.clear();
    candidates_.push_back(origin);
    for (std::size_t z = 0; z < n; ++z) {
      if (z != origin && (radius_.settled(2 * z) || radius_.settled(2 * z + 1))) candidates_.push_back(z);
    }

    trips_.assign(columns_.size(), {});
    std::vector<std::size_t> targets;
    for (std::size_t k : active) {
      const Column& col = columns_[k];
      const double wy = col.origin_weight[origin];
      auto& trips = trips_[k];
      double dest_total = 0.0;
      for (std::size_t z : candidates_) {
        const double wz = col.destination_weight[z];
        if (!(wz > 0.0)) continue;
        double eff = 0.0;
        if (col.continuous) {
          eff = wz * fraction_within_radius(radius_, z, col.band.rmin, col.band.rmax);
        } else if (within_band(radius_.centre_cost(z), col.band.rmin, col.band.rmax)) {
          eff = wz;
        }
        if (eff > 0.0) {
          trips.push_back({z, eff});
          dest_total += eff;
        }
      }
      ColumnDiagnostics& diag = out.diagnostics[k];
      ++diag.origins;
      if (trips.empty()) ++diag.origins_without_destinations;
      if (col.type == BetweennessType::TwoPhase) {
        if (dest_total > 0.0) {
          double outgoing = 0.0;
          for (auto& t : trips) {
            t.weight = wy * t.weight / dest_total;
            outgoing += t.weight;
          }
          diag.total += outgoing;
          diag.expected += wy;
          diag.max_conservation_error = std::max(diag.max_conservation_error, std::abs(outgoing - wy));
        }
      } else {
        double outgoing = 0.0;
        for (auto& t : trips) {
          t.weight *= wy;
          outgoing += t.weight;
        }
        diag.total += outgoing;
        diag.expected += wy * dest_total;
      }
      for (const auto& t : trips) {
        if (t.dest != origin) targets.push_back(t.dest);
      }
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    // Endpoint and self contributions do not depend on the route.
    for (std::size_t k : active) {
      for (const auto& t : trips_[k]) {
        if (t.dest == origin) {
          out.flows(origin, k) += t.weight / 3.0;
        } else {
          out.flows(origin, k) += 0.5 * t.weight;
          out.flows(t.dest, k) += 0.5 * t.weight;
        }
      }
    }
    if (targets.empty()) return;

    const int iterations = params_.sigma == 0.0 ? 1 : params_.oversample;
    const double scale = 1.0 / iterations;
    for (int it = 0; it < iterations; ++it) {
      const RandStream stream = origin_stream(graph_, origin, params_, it);
      route_.route(origin, params_, stream, targets);
      const auto& order = route_.tree_order();
      for (std::size_t k : active) {
        if (trips_[k].empty()) continue;
        for (auto s : order) {
          pass_[s] = 0.0;
          own_[s] = 0.0;
        }
        for (const auto& t : trips_[k]) {
          if (t.dest == origin) continue;
          own_[2 * t.dest + static_cast<std::size_t>(index_of(route_.centre_entry(t.dest)))] += t.weight;
        }
        for (auto it_s = order.rbegin(); it_s != order.rend(); ++it_s) {
          const auto s = *it_s;
          const Predecessor p = route_.state_pred(s);
          if (p.is_state()) pass_[p.value] += own_[s] + pass_[s];
        }
        for (auto s : order) {
          if (pass_[s] != 0.0) out.flows(s / 2, k) += scale * pass_[s];
        }
      }
    }
  }

 private:
  const RoutingGraph& graph_;
  const std::vector<Column>& columns_;
  const MetricParams& params_;
  ShortestPathSearch radius_;
  ShortestPathSearch route_;
  std::vector<double> pass_;
  std::vector<double> own_;
  std::vector<std::size_t> candidates_;
  std::vector<std::vector<Trip>> trips_;
};

std::vector<double> resolve_weights(const SpatialNetwork& net, const std::string& field) {
  std::vector<double> w(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) w[i] = net.link(i).weight(field);
  return w;
}

std::vector<double> single_origin_weights(const SpatialNetwork& net, const AnalysisSpec& spec) {
  std::vector<double> w(net.size(), 0.0);
  if (!spec.origin_link.empty()) {
    auto idx = net.find(spec.origin_link);
    if (!idx) throw DataError("analysis '" + spec.key + "': origin link '" + spec.origin_link + "' missing");
    w[*idx] = 1.0;
    return w;
  }
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.link(i).weight(spec.origin_weight) > 0.0) hits.push_back(i);
  }
  if (hits.size() != 1) {
    throw DataError("analysis '" + spec.key + "': single_origin needs exactly one link with positive '" +
                    spec.origin_weight + "' (found " + std::to_string(hits.size()) + ")");
  }
  w[hits[0]] = 1.0;
  return w;
}

double neumaier_sum(const std::vector<double>& xs) {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

}  // namespace

std::vector<FlowField> run_battery(const SpatialNetwork& net, const std::vector<AnalysisSpec>& specs,
                                   const MetricParams& params, const RunOptions& options) {
  params.validate();
  for (const auto& s : specs) s.validate();
  if (specs.empty()) return {};
  check_weight_fields(net, specs);

  std::vector<Column> columns;
  std::vector<FlowField> fields;
  for (const auto& spec : specs) {
    const auto origin_w =
        spec.type == BetweennessType::SingleOrigin ? single_origin_weights(net, spec) : resolve_weights(net, spec.origin_weight);
    const auto dest_w = resolve_weights(net, spec.destination_weight);
    for (const auto& band : spec.radii) {
      columns.push_back({spec.type, band, spec.continuous, origin_w, dest_w});
      FlowField f;
      f.key = spec.key;
      f.radius = band;
      f.column = spec.column(band);
      fields.push_back(std::move(f));
    }
  }

  std::vector<std::size_t> origins;
  for (std::size_t y = 0; y < net.size(); ++y) {
    if (std::any_of(columns.begin(), columns.end(), [y](const Column& c) { return c.origin_weight[y] > 0.0; })) {
      origins.push_back(y);
    }
  }

  const RoutingGraph graph(net);
  const std::size_t n = net.size();
  const std::size_t k = columns.size();
  const std::size_t chunks = (origins.size() + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkResult> results(chunks);

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(chunks, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      Worker worker(graph, columns, params);
      for (std::size_t c = next++; c < chunks; c = next++) {
        ChunkResult& r = results[c];
        r.flows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
        r.diagnostics.assign(k, {});
        const std::size_t end = std::min(origins.size(), (c + 1) * kChunkSize);
        for (std::size_t i = c * kChunkSize; i < end; ++i) worker.process(origins[i], r);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> terms(chunks);
  for (std::size_t col = 0; col < k; ++col) {
    FlowField& f = fields[col];
    f.values.resize(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t c = 0; c < chunks; ++c) terms[c] = results[c].flows(x, col);
      f.values[x] = neumaier_sum(terms);
    }
    auto& d = f.diagnostics;
    std::vector<double> totals, expected;
    for (std::size_t c = 0; c < chunks; ++c) {
      const auto& cd = results[c].diagnostics[col];
      d.origins += cd.origins;
      d.origins_without_destinations += cd.origins_without_destinations;
      d.max_conservation_error = std::max(d.max_conservation_error, cd.max_conservation_error);
      totals.push_back(cd.total);
      expected.push_back(cd.expected);
    }
    d.total_trip_weight = neumaier_sum(totals);
    d.expected_trip_weight = neumaier_sum(expected);
    if (d.origins == 0) d.warnings.push_back(f.column + ": no origins with positive weight; field is all zero");
    if (d.origins_without_destinations > 0 && columns[col].type == BetweennessType::TwoPhase) {
      d.warnings.push_back(f.column + ": " + std::to_string(d.origins_without_destinations) +
                           " origin(s) had no destinations in range and emitted no trips");
    }
  }
  return fields;
}

namespace {

FlowField run_single(const SpatialNetwork& net, AnalysisSpec spec, BetweennessType expected,
                     const MetricParams& params, const RadiusBand& radius, const RunOptions& options) {
  if (spec.type != expected) {
    throw DataError("analysis '" + spec.key + "' is " + std::string(to_string(spec.type)) + ", expected " +
                    std::string(to_string(expected)));
  }
  spec.radii = {radius};
  return std::move(run_battery(net, {spec}, params, options).front());
}

}  // namespace

FlowField elastic_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec, const MetricParams& params,
                              const RadiusBand& radius, const RunOptions& options) {
  return run_single(net, spec, BetweennessType::Elastic, params, radius, options);
}

FlowField two_phase_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec, const MetricParams& params,
                                const RadiusBand& radius, const RunOptions& options) {
  return run_single(net, spec, BetweennessType::TwoPhase, params, radius, options);
}

FlowField single_origin_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec,
                                    const MetricParams& params, const RadiusBand& radius,
                                    const RunOptions& options) {
  return run_single(net, spec, BetweennessType::SingleOrigin, params, radius, options);
}

}  // namespace mhspna
