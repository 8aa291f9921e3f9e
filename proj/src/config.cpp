#include "mhspna/config.hpp"

#include "mhspna/error.hpp"

#include <fstream>

namespace mhspna {

CalibrationOptions ProjectConfig::calibration_options(unsigned threads) const {
  CalibrationOptions o;
  o.lambda_w = calibration.lambda_w;
  o.cv.folds = calibration.folds;
  o.cv.repetitions = calibration.repetitions;
  o.cv.grid = calibration.penalty_grid;
  o.cv.lambda_r = calibration.lambda_r;
  o.cv.seed = calibration.seed;
  o.cv.threads = threads;
  o.fit.intercept = calibration.intercept;
  o.fit.nonnegative = calibration.nonnegative;
  return o;
}

namespace {

nlohmann::json to_json(const CalibrationConfig& c) {
  nlohmann::json j = {{"lambda_w", c.lambda_w},       {"folds", c.folds},         {"repetitions", c.repetitions},
                      {"penalty_grid", c.penalty_grid}, {"intercept", c.intercept}, {"nonnegative", c.nonnegative},
                      {"seed", c.seed}};
  if (c.lambda_r) j["lambda_r"] = *c.lambda_r;
  return j;
}

CalibrationConfig calibration_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("calibration: expected an object");
  CalibrationConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "lambda_w") {
      c.lambda_w = value.get<double>();
    } else if (key == "folds") {
      c.folds = value.get<int>();
    } else if (key == "repetitions") {
      c.repetitions = value.get<int>();
    } else if (key == "penalty_grid") {
      c.penalty_grid = value.get<std::vector<double>>();
    } else if (key == "lambda_r") {
      if (!value.is_null()) c.lambda_r = value.get<double>();
    } else if (key == "intercept") {
      c.intercept = value.get<bool>();
    } else if (key == "nonnegative") {
      c.nonnegative = value.get<bool>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw DataError("calibration: unknown key '" + key + "'");
    }
  }
  if (!(c.lambda_w >= 0.0 && c.lambda_w <= 1.0)) throw DataError("calibration: lambda_w must lie in [0, 1]");
  if (c.folds < 2) throw DataError("calibration: folds must be >= 2");
  if (c.repetitions < 1) throw DataError("calibration: repetitions must be >= 1");
  if (c.lambda_r && !(*c.lambda_r >= 0.0)) throw DataError("calibration: lambda_r must be >= 0");
  return c;
}

nlohmann::json to_json(const SweepConfig& s) {
  return {{"analysis", s.analysis},     {"radius", s.radius},         {"sigma_grid", s.sigma_grid},
          {"a_grid", s.a_grid},         {"oversample", s.oversample}};
}

SweepConfig sweep_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("sweep: expected an object");
  SweepConfig s;
  for (const auto& [key, value] : j.items()) {
    if (key == "analysis") {
      s.analysis = value.get<std::string>();
    } else if (key == "radius") {
      s.radius = value.get<double>();
    } else if (key == "sigma_grid") {
      s.sigma_grid = value.get<std::vector<double>>();
    } else if (key == "a_grid") {
      s.a_grid = value.get<std::vector<double>>();
    } else if (key == "oversample") {
      s.oversample = value.get<int>();
    } else {
      throw DataError("sweep: unknown key '" + key + "'");
    }
  }
  return s;
}

}  // namespace

nlohmann::json to_json(const ProjectConfig& config) {
  nlohmann::json analyses = nlohmann::json::array();
  for (const auto& a : config.analyses) analyses.push_back(to_json(a));
  nlohmann::json j = {{"schema_version", 1},
                      {"metric", to_json(config.metric)},
                      {"analyses", std::move(analyses)},
                      {"snap_tolerance", config.snap_tolerance},
                      {"count_snap_tolerance", config.count_snap_tolerance},
                      {"calibration", to_json(config.calibration)},
                      {"sweep", to_json(config.sweep)}};
  if (!config.paths.empty()) j["paths"] = config.paths;
  return j;
}

ProjectConfig project_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  try {
    ProjectConfig c;
    for (const auto& [key, value] : j.items()) {
      if (key == "schema_version") {
        if (value.get<int>() != 1) throw DataError("config: unsupported schema_version");
      } else if (key == "metric") {
        c.metric = metric_params_from_json(value);
      } else if (key == "analyses") {
        if (!value.is_array()) throw DataError("config: analyses must be an array");
        c.analyses.clear();
        for (const auto& a : value) c.analyses.push_back(analysis_spec_from_json(a));
      } else if (key == "snap_tolerance") {
        c.snap_tolerance = value.get<double>();
      } else if (key == "count_snap_tolerance") {
        c.count_snap_tolerance = value.get<double>();
      } else if (key == "calibration") {
        c.calibration = calibration_from_json(value);
      } else if (key == "sweep") {
        c.sweep = sweep_from_json(value);
      } else if (key == "paths") {
        c.paths = value.get<std::map<std::string, std::string>>();
      } else {
        throw DataError("config: unknown key '" + key + "'");
      }
    }
    if (!(c.snap_tolerance >= 0.0)) throw DataError("config: snap_tolerance must be >= 0");
    if (!(c.count_snap_tolerance >= 0.0)) throw DataError("config: count_snap_tolerance must be >= 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return project_config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ProjectConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path.string() + "'");
  out << to_json(config).dump(2) << '\n';
}

}  // namespace mhspna
