#pragma once

#include "mhspna/betweenness.hpp"
#include "mhspna/counts.hpp"
#include "mhspna/metric.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mhspna {

/// Regression inputs at count points: one row per point, one column per flow
/// field sampled at the point's link.
struct DesignMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> point_ids;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> warnings;
};

DesignMatrix assemble_design(const std::vector<FlowField>& fields, const std::vector<CountPoint>& points,
                             const std::string& year);

/// w_i = y_i^(lambda_w - 1).
Eigen::VectorXd observation_weights(const Eigen::VectorXd& y, double lambda_w);

struct FitOptions {
  bool intercept = true;
  /// Clip coefficients at zero (coordinate descent).
  bool nonnegative = false;
};

struct RidgeSolution {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // raw scale
  Eigen::VectorXd mean;          // weighted column means
  Eigen::VectorXd std;           // weighted population standard deviations
  std::vector<Eigen::Index> zero_variance;  // columns held at 0

  Eigen::VectorXd standardized() const { return coefficients.cwiseProduct(std); }
};

/// Minimizes sum w_i (y_i - b0 - x_i.b)^2 + lambda_r |b_std|^2 with the
/// penalty on standardized coefficients and the intercept unpenalized.
RidgeSolution ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda_r,
                        const FitOptions& options = {});

/// Weighted coefficient of determination 1 - SSE_w / SST_w.
double weighted_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, const Eigen::VectorXd& w);

/// 60 log-spaced penalties from 1e-4 s to 1e3 s, s = sum of weights.
std::vector<double> default_penalty_grid(const Eigen::VectorXd& w, int count = 60);

struct CvOptions {
  int folds = 7;
  int repetitions = 50;
  std::vector<double> grid;        // empty = default grid
  std::optional<double> lambda_r;  // manual penalty, bypasses the grid
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct CvPoint {
  double lambda_r;
  double score;
};

struct CvResult {
  double lambda_r = 0.0;
  double cv_r2 = 0.0;
  std::vector<CvPoint> curve;
};

/// Repeated k-fold cross-validation; each repetition scores the weighted r2
/// of its pooled held-out predictions.
CvResult cv_select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           const CvOptions& cv, const FitOptions& fit = {});

struct CalibrationOptions {
  double lambda_w = 0.7;
  CvOptions cv;
  FitOptions fit;
};

struct CalibratedModel {
  std::vector<std::string> columns;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  double lambda_w = 0.7;
  double lambda_r = 0.0;
  double cv_r2 = 0.0;
  bool fit_intercept = true;
  bool nonnegative = false;
  std::vector<CvPoint> cv_curve;
  std::string year;
  std::size_t points = 0;
  MetricParams metric;
  std::vector<AnalysisSpec> analyses;
  std::string config_hash;
  std::vector<std::string> warnings;

  Eigen::VectorXd standardized_coefficients() const { return coefficients.cwiseProduct(std); }
  std::size_t column_index(const std::string& column) const;  // throws DataError
};

CalibratedModel calibrate(const DesignMatrix& design, const CalibrationOptions& options);

/// Hex FNV-1a hash of the metric and analysis configuration.
std::string config_hash(const MetricParams& metric, const std::vector<AnalysisSpec>& analyses);

nlohmann::json to_json(const CalibratedModel& model);
CalibratedModel calibrated_model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const CalibratedModel& model);
CalibratedModel load_model(const std::filesystem::path& path);

/// `variable,radius,coeff,std,stdcoeff`.
void write_coefficients_csv(std::ostream& out, const CalibratedModel& model);

struct LinkPrediction {
  Eigen::VectorXd raw;
  Eigen::VectorXd flow;  // raw floored at zero
  std::vector<char> floored;
};

/// Named per-link field values, one vector per model column.
using FieldTable = std::map<std::string, Eigen::VectorXd, std::less<>>;

FieldTable field_table(const std::vector<FlowField>& fields);

LinkPrediction predict_direct(const CalibratedModel& model, const FieldTable& fields);
LinkPrediction predict_direct(const CalibratedModel& model, const std::vector<FlowField>& fields);

using PointValues = std::map<std::string, double>;

/// Unfloored direct predictions at each point's link.
PointValues predict_at_points(const CalibratedModel& model, const FieldTable& fields,
                              const std::vector<CountPoint>& points);

/// y_t2 = y_obs_t1 + direct_t2 - direct_t1, for every point with a baseline.
PointValues predict_incremental(const CalibratedModel& model, const FieldTable& fields_t1,
                                const std::vector<CountPoint>& points_t1, const FieldTable& fields_t2,
                                const std::vector<CountPoint>& points_t2, const std::string& baseline_year);

PointValues predict_null(const std::vector<CountSite>& baseline, const std::string& baseline_year);

double geh(double modelled, double counted);

struct PointEvaluation {
  std::string id;
  double predicted;
  double observed;
  double geh;
};

struct EvaluationReport {
  std::optional<double> r2;  // undefined for a constant vector
  double geh_mean = 0.0;
  double geh_under_5_fraction = 0.0;
  std::vector<PointEvaluation> points;
};

/// Squared Pearson correlation; nullopt when either vector is constant.
std::optional<double> pearson_r2(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

EvaluationReport evaluate(const PointValues& predictions, const PointValues& observations);
nlohmann::json to_json(const EvaluationReport& report);

struct SweepRow {
  double a;
  double sigma;
  double r2;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

struct SweepOptions {
  std::vector<double> sigma_grid;
  std::vector<double> a_grid;
  int oversample = 5;
  double lambda_w = 0.7;
  RunOptions run;
};

/// Runs `spec` at one radius for every (a, sigma) pair and reports the
/// weighted r2 of a single-predictor weighted fit at the count points.
SweepResult sweep_sigma(const SpatialNetwork& net, const AnalysisSpec& spec, const RadiusBand& radius,
                        const MetricParams& base, const std::vector<CountPoint>& points, const std::string& year,
                        const SweepOptions& options);

}  // namespace mhspna
