#pragma once

#include "mhspna/metric.hpp"
#include "mhspna/network.hpp"
#include "mhspna/routing.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace mhspna {

enum class BetweennessType { Elastic, TwoPhase, SingleOrigin };

std::string_view to_string(BetweennessType type);
BetweennessType betweenness_type_from_string(std::string_view name);

struct RadiusBand {
  double rmin = 0.0;
  double rmax = kInfinity;
  friend bool operator==(const RadiusBand&, const RadiusBand&) = default;
};

/// One flow variable: who travels (origin weights), to what (destination
/// weights), and over which trip-length bands.
struct AnalysisSpec {
  std::string key;
  BetweennessType type = BetweennessType::Elastic;
  /// Origin weight field. For single-origin analyses it may instead name a
  /// field that is positive on exactly one link.
  std::string origin_weight = std::string(kEverywhere);
  /// Single-origin analyses: explicit origin link id (takes precedence).
  std::string origin_link;
  std::string destination_weight;
  std::vector<RadiusBand> radii;
  /// Prorate destination weight by the fraction of each link inside the band.
  bool continuous = false;

  void validate() const;
  /// Output column name, `key@rmax` (or `key@rmin-rmax`).
  std::string column(const RadiusBand& band) const;
  friend bool operator==(const AnalysisSpec&, const AnalysisSpec&) = default;
};

nlohmann::json to_json(const AnalysisSpec& spec);
AnalysisSpec analysis_spec_from_json(const nlohmann::json& j);

/// The six-variable battery (13 columns) with the template field names
/// retail_m2, carpark, north_parking, station_queen and station_central.
std::vector<AnalysisSpec> default_battery();

struct FlowDiagnostics {
  std::size_t origins = 0;
  std::size_t origins_without_destinations = 0;
  /// Sum of every OD trip weight generated, per oversample iteration.
  double total_trip_weight = 0.0;
  /// Independently accumulated expectation: sum_y W(y) sum_{z in R} W(z)
  /// (elastic) or sum of W(y) over origins with destinations (two-phase).
  double expected_trip_weight = 0.0;
  /// Two-phase: max over origins of |outgoing trip weight - W(y)|.
  double max_conservation_error = 0.0;
  std::vector<std::string> warnings;

  bool activity_consistent(double rel_tol = 1e-9) const;
};

/// Per-link expected trips for one (analysis, radius) column, averaged over
/// oversample iterations.
struct FlowField {
  std::string key;
  RadiusBand radius;
  std::string column;
  Eigen::VectorXd values;
  FlowDiagnostics diagnostics;
};

struct RunOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Share of a trip y -> z credited to link x lying on `path` (y ... z).
double od_contribution(std::size_t x, std::size_t y, std::size_t z, std::span<const std::size_t> path);

FlowField elastic_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec, const MetricParams& params,
                              const RadiusBand& radius, const RunOptions& options = {});
FlowField two_phase_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec, const MetricParams& params,
                                const RadiusBand& radius, const RunOptions& options = {});
FlowField single_origin_betweenness(const SpatialNetwork& net, const AnalysisSpec& spec,
                                    const MetricParams& params, const RadiusBand& radius,
                                    const RunOptions& options = {});

/// One FlowField per (spec, radius), in spec then radius order. Every origin
/// shares one routing tree per oversample iteration across all columns.
/// Results do not depend on the thread count.
std::vector<FlowField> run_battery(const SpatialNetwork& net, const std::vector<AnalysisSpec>& specs,
                                   const MetricParams& params, const RunOptions& options = {});

/// Checks that every weight field referenced by `specs` exists on `net`;
/// throws DataError naming all missing fields.
void check_weight_fields(const SpatialNetwork& net, const std::vector<AnalysisSpec>& specs);

/// Flow fields as GeoJSON extra columns.
LinkColumns to_link_columns(const std::vector<FlowField>& fields);

}  // namespace mhspna
