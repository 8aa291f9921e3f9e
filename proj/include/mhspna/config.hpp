#pragma once

#include "mhspna/betweenness.hpp"
#include "mhspna/calibrate.hpp"
#include "mhspna/counts.hpp"
#include "mhspna/metric.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mhspna {

struct CalibrationConfig {
  double lambda_w = 0.7;
  int folds = 7;
  int repetitions = 50;
  std::vector<double> penalty_grid;  // empty = automatic
  std::optional<double> lambda_r;
  bool intercept = true;
  bool nonnegative = false;
  std::uint64_t seed = 1;
  friend bool operator==(const CalibrationConfig&, const CalibrationConfig&) = default;
};

struct SweepConfig {
  std::string analysis = "e2s";
  double radius = 800.0;
  std::vector<double> sigma_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> a_grid = {0.25, 0.5};
  int oversample = 5;
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct ProjectConfig {
  MetricParams metric;
  std::vector<AnalysisSpec> analyses = default_battery();
  double snap_tolerance = kDefaultSnapTolerance;
  double count_snap_tolerance = kDefaultCountSnapTolerance;
  CalibrationConfig calibration;
  SweepConfig sweep;
  std::map<std::string, std::string> paths;

  CalibrationOptions calibration_options(unsigned threads = 0) const;
  friend bool operator==(const ProjectConfig&, const ProjectConfig&) = default;
};

nlohmann::json to_json(const ProjectConfig& config);
/// Strict: unknown keys are rejected at every level.
ProjectConfig project_config_from_json(const nlohmann::json& j);
ProjectConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ProjectConfig& config);

}  // namespace mhspna
