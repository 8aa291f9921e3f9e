#include "mhspna/calibrate.hpp"

#include "mhspna/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <thread>

namespace mhspna {

DesignMatrix assemble_design(const std::vector<FlowField>& fields, const std::vector<CountPoint>& points,
                             const std::string& year) {
  if (points.empty()) throw DataError("empty design: no count points");
  if (fields.empty()) throw DataError("empty design: no flow fields");
  DesignMatrix d;
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto p = static_cast<Eigen::Index>(fields.size());
  d.x.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const CountPoint& pt = points[static_cast<std::size_t>(i)];
    d.point_ids.push_back(pt.id);
    d.y[i] = pt.observation(year);
    if (!(d.y[i] > 0.0)) throw DataError("count point '" + pt.id + "' has a non-positive flow");
  }
  for (Eigen::Index c = 0; c < p; ++c) {
    const FlowField& f = fields[static_cast<std::size_t>(c)];
    d.columns.push_back(f.column);
    for (Eigen::Index i = 0; i < n; ++i) {
      const CountPoint& pt = points[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(pt.link) >= f.values.size()) {
        throw DataError("field '" + f.column + "' has no value for link '" + pt.link_id + "'");
      }
      d.x(i, c) = f.values[static_cast<Eigen::Index>(pt.link)];
    }
    if (d.x.col(c).maxCoeff() == d.x.col(c).minCoeff()) {
      d.warnings.push_back("column '" + f.column + "' is constant at the count points");
    }
  }
  return d;
}

Eigen::VectorXd observation_weights(const Eigen::VectorXd& y, double lambda_w) {
  if (!(lambda_w >= 0.0 && lambda_w <= 1.0)) throw DataError("lambda_w must lie in [0, 1]");
  Eigen::VectorXd w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) {
      throw DataError("observation weights y^(lambda_w - 1) need every flow > 0 (row " + std::to_string(i) + ")");
    }
    w[i] = std::pow(y[i], lambda_w - 1.0);
  }
  return w;
}

double weighted_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, const Eigen::VectorXd& w) {
  const double wsum = w.sum();
  const double ybar = w.dot(y) / wsum;
  const double sse = (w.array() * (y - fitted).array().square()).sum();
  const double sst = (w.array() * (y.array() - ybar).square()).sum();
  if (sst <= 0.0) return sse <= 0.0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

std::vector<double> default_penalty_grid(const Eigen::VectorXd& w, int count) {
  const double s = w.sum();
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double lo = std::log10(1e-4 * s);
  const double hi = std::log10(1e3 * s);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  }
  return grid;
}

namespace {

/// Standardized normal equations for one row subset, solvable for any
/// penalty without rebuilding.
class RidgeProblem {
 public:
  RidgeProblem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               const std::vector<Eigen::Index>& rows, const FitOptions& options)
      : options_(options) {
    const Eigen::Index p = x.cols();
    const double wsum = [&] {
      double s = 0.0;
      for (auto r : rows) s += w[r];
      return s;
    }();
    if (!(wsum > 0.0)) throw DataError("ridge: weights must be positive");
    mean_ = Eigen::VectorXd::Zero(p);
    std_ = Eigen::VectorXd::Zero(p);
    ybar_ = 0.0;
    if (options.intercept) {
      for (auto r : rows) {
        mean_ += w[r] * x.row(r).transpose();
        ybar_ += w[r] * y[r];
      }
      mean_ /= wsum;
      ybar_ /= wsum;
    }
    for (auto r : rows) std_ += w[r] * (x.row(r).transpose() - mean_).cwiseAbs2();
    std_ = (std_ / wsum).cwiseSqrt();

    for (Eigen::Index j = 0; j < p; ++j) {
      const double scale = std::max(1.0, std::abs(mean_[j]));
      if (std_[j] > 1e-14 * scale) {
        active_.push_back(j);
      } else {
        zero_variance_.push_back(j);
      }
    }
    const auto q = static_cast<Eigen::Index>(active_.size());
    gram_ = Eigen::MatrixXd::Zero(q, q);
    rhs_ = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd z(q);
    for (auto r : rows) {
      for (Eigen::Index k = 0; k < q; ++k) {
        const auto j = active_[static_cast<std::size_t>(k)];
        z[k] = (x(r, j) - mean_[j]) / std_[j];
      }
      gram_.selfadjointView<Eigen::Lower>().rankUpdate(z, w[r]);
      rhs_ += (w[r] * (y[r] - ybar_)) * z;
    }
    gram_ = gram_.selfadjointView<Eigen::Lower>();
  }

  RidgeSolution solve(double lambda_r) const {
    if (!(lambda_r >= 0.0) || !std::isfinite(lambda_r)) throw DataError("ridge: lambda_r must be >= 0");
    const auto q = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    if (q > 0) {
      const Eigen::MatrixXd a = gram_ + lambda_r * Eigen::MatrixXd::Identity(q, q);
      if (options_.nonnegative) {
        b = nonnegative_solve(a);
      } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12 ||
            d.minCoeff() < 1e-12 * d.maxCoeff()) {
          throw DataError("ridge: singular normal equations; use lambda_r > 0");
        }
        b = ldlt.solve(rhs_);
      }
    }
    RidgeSolution s;
    s.mean = mean_;
    s.std = std_;
    s.coefficients = Eigen::VectorXd::Zero(mean_.size());
    for (Eigen::Index k = 0; k < q; ++k) {
      const auto j = active_[static_cast<std::size_t>(k)];
      s.coefficients[j] = b[k] / std_[j];
    }
    s.intercept = options_.intercept ? ybar_ - mean_.dot(s.coefficients) : 0.0;
    s.zero_variance = zero_variance_;
    return s;
  }

 private:
  Eigen::VectorXd nonnegative_solve(const Eigen::MatrixXd& a) const {
    const Eigen::Index q = a.rows();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    const double tol = 1e-15 * std::max(1.0, rhs_.cwiseAbs().maxCoeff());
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (!(a(j, j) > 0.0)) continue;
        const double r = rhs_[j] - a.row(j).dot(b) + a(j, j) * b[j];
        const double next = std::max(0.0, r / a(j, j));
        change = std::max(change, std::abs(next - b[j]) * a(j, j));
        b[j] = next;
      }
      if (change <= tol) break;
    }
    return b;
  }

  FitOptions options_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
  double ybar_ = 0.0;
  std::vector<Eigen::Index> active_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
  std::vector<Eigen::Index> zero_variance_;
};

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (x.rows() != y.size() || y.size() != w.size()) throw DataError("ridge: mismatched dimensions");
  if (x.rows() < 2) throw DataError("ridge: need at least two rows");
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto work = [&] {
    try {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    } catch (...) {
      std::lock_guard lock(m);
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
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RidgeSolution ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda_r,
                        const FitOptions& options) {
  check_inputs(x, y, w);
  return RidgeProblem(x, y, w, all_rows(x.rows()), options).solve(lambda_r);
}

CvResult cv_select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           const CvOptions& cv, const FitOptions& fit) {
  check_inputs(x, y, w);
  if (cv.folds < 2) throw DataError("cross-validation needs at least 2 folds");
  if (cv.repetitions < 1) throw DataError("cross-validation needs at least 1 repetition");
  const Eigen::Index n = x.rows();
  if (n < cv.folds) {
    throw DataError("cross-validation: " + std::to_string(n) + " points is fewer than " + std::to_string(cv.folds) +
                    " folds");
  }
  std::vector<double> grid = cv.lambda_r ? std::vector<double>{*cv.lambda_r}
                                         : (cv.grid.empty() ? default_penalty_grid(w) : cv.grid);
  if (grid.empty()) throw DataError("cross-validation: empty penalty grid");

  const std::size_t g = grid.size();
  const auto reps = static_cast<std::size_t>(cv.repetitions);
  std::vector<std::vector<double>> scores(reps, std::vector<double>(g));
  parallel_for(reps, cv.threads, [&](std::size_t rep) {
    std::vector<Eigen::Index> perm = all_rows(n);
    std::mt19937_64 rng(cv.seed + rep);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % cv.folds);

    Eigen::MatrixXd pred(n, static_cast<Eigen::Index>(g));
    for (int f = 0; f < cv.folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      const RidgeProblem problem(x, y, w, train, fit);
      for (std::size_t k = 0; k < g; ++k) {
        const RidgeSolution s = problem.solve(grid[k]);
        for (auto i : test) pred(i, static_cast<Eigen::Index>(k)) = s.intercept + x.row(i).dot(s.coefficients);
      }
    }
    for (std::size_t k = 0; k < g; ++k) scores[rep][k] = weighted_r2(y, pred.col(static_cast<Eigen::Index>(k)), w);
  });

  CvResult out;
  out.cv_r2 = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g; ++k) {
    double mean = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) mean += scores[rep][k];
    mean /= static_cast<double>(reps);
    out.curve.push_back({grid[k], mean});
    if (mean > out.cv_r2) {
      out.cv_r2 = mean;
      out.lambda_r = grid[k];
    }
  }
  return out;
}

std::size_t CalibratedModel::column_index(const std::string& column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw DataError("model has no column '" + column + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

CalibratedModel calibrate(const DesignMatrix& design, const CalibrationOptions& options) {
  const Eigen::VectorXd w = observation_weights(design.y, options.lambda_w);
  const CvResult cv = cv_select_penalty(design.x, design.y, w, options.cv, options.fit);
  const RidgeSolution s = ridge_fit(design.x, design.y, w, cv.lambda_r, options.fit);
  CalibratedModel m;
  m.columns = design.columns;
  m.intercept = s.intercept;
  m.coefficients = s.coefficients;
  m.mean = s.mean;
  m.std = s.std;
  m.lambda_w = options.lambda_w;
  m.lambda_r = cv.lambda_r;
  m.cv_r2 = cv.cv_r2;
  m.fit_intercept = options.fit.intercept;
  m.nonnegative = options.fit.nonnegative;
  m.cv_curve = cv.curve;
  m.points = static_cast<std::size_t>(design.y.size());
  m.warnings = design.warnings;
  for (auto j : s.zero_variance) {
    m.warnings.push_back("column '" + design.columns[static_cast<std::size_t>(j)] +
                         "' has zero variance; its coefficient is fixed at 0");
  }
  return m;
}

std::string config_hash(const MetricParams& metric, const std::vector<AnalysisSpec>& analyses) {
  nlohmann::json j = {{"metric", to_json(metric)}, {"analyses", nlohmann::json::array()}};
  for (const auto& a : analyses) j["analyses"].push_back(to_json(a));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(element_key(j.dump())));
  return buf;
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const CalibratedModel& m) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& c : m.cv_curve) curve.push_back({c.lambda_r, c.score});
  nlohmann::json analyses = nlohmann::json::array();
  for (const auto& a : m.analyses) analyses.push_back(to_json(a));
  return {{"schema_version", 1},
          {"columns", m.columns},
          {"intercept", m.intercept},
          {"coefficients", vector_json(m.coefficients)},
          {"mean", vector_json(m.mean)},
          {"std", vector_json(m.std)},
          {"stdcoeff", vector_json(m.standardized_coefficients())},
          {"lambda_w", m.lambda_w},
          {"lambda_r", m.lambda_r},
          {"cv_r2", m.cv_r2},
          {"fit_intercept", m.fit_intercept},
          {"nonnegative", m.nonnegative},
          {"cv_curve", std::move(curve)},
          {"year", m.year},
          {"points", m.points},
          {"metric", to_json(m.metric)},
          {"analyses", std::move(analyses)},
          {"config_hash", m.config_hash},
          {"warnings", m.warnings}};
}

CalibratedModel calibrated_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("model: expected a JSON object");
  static const std::set<std::string> known = {
      "schema_version", "columns", "intercept", "coefficients", "mean",     "std",         "stdcoeff",
      "lambda_w",       "lambda_r", "cv_r2",    "fit_intercept", "nonnegative", "cv_curve", "year",
      "points",         "metric",  "analyses", "config_hash",   "warnings"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw DataError("model: unknown key '" + key + "'");
  }
  try {
    if (j.at("schema_version").get<int>() != 1) throw DataError("model: unsupported schema_version");
    CalibratedModel m;
    m.columns = j.at("columns").get<std::vector<std::string>>();
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = vector_from_json(j.at("coefficients"));
    m.mean = vector_from_json(j.at("mean"));
    m.std = vector_from_json(j.at("std"));
    const auto p = static_cast<Eigen::Index>(m.columns.size());
    if (m.coefficients.size() != p || m.mean.size() != p || m.std.size() != p) {
      throw DataError("model: column arrays have inconsistent lengths");
    }
    m.lambda_w = j.at("lambda_w").get<double>();
    m.lambda_r = j.at("lambda_r").get<double>();
    m.cv_r2 = j.at("cv_r2").get<double>();
    m.fit_intercept = j.at("fit_intercept").get<bool>();
    m.nonnegative = j.at("nonnegative").get<bool>();
    for (const auto& c : j.at("cv_curve")) m.cv_curve.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    m.year = j.at("year").get<std::string>();
    m.points = j.at("points").get<std::size_t>();
    m.metric = metric_params_from_json(j.at("metric"));
    for (const auto& a : j.at("analyses")) m.analyses.push_back(analysis_spec_from_json(a));
    m.config_hash = j.at("config_hash").get<std::string>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const CalibratedModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_json(model).dump(2) << '\n';
}

CalibratedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return calibrated_model_from_json(j);
}

void write_coefficients_csv(std::ostream& out, const CalibratedModel& model) {
  out << "variable,radius,coeff,std,stdcoeff\n";
  const Eigen::VectorXd sc = model.standardized_coefficients();
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    const auto& name = model.columns[c];
    const auto at = name.find('@');
    const auto i = static_cast<Eigen::Index>(c);
    out << name.substr(0, at) << ',' << (at == std::string::npos ? "" : name.substr(at + 1)) << ','
        << format_double(model.coefficients[i]) << ',' << format_double(model.std[i]) << ',' << format_double(sc[i])
        << '\n';
  }
}

FieldTable field_table(const std::vector<FlowField>& fields) {
  FieldTable t;
  for (const auto& f : fields) t[f.column] = f.values;
  return t;
}

namespace {

std::vector<const Eigen::VectorXd*> model_columns(const CalibratedModel& model, const FieldTable& fields) {
  std::vector<const Eigen::VectorXd*> cols;
  for (const auto& name : model.columns) {
    auto it = fields.find(name);
    if (it == fields.end()) throw DataError("prediction needs field '" + name + "', which is missing");
    cols.push_back(&it->second);
  }
  return cols;
}

double raw_prediction(const CalibratedModel& model, const std::vector<const Eigen::VectorXd*>& cols, Eigen::Index link) {
  double v = model.intercept;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (link >= cols[c]->size()) throw DataError("field '" + model.columns[c] + "' is shorter than the network");
    v += model.coefficients[static_cast<Eigen::Index>(c)] * (*cols[c])[link];
  }
  return v;
}

}  // namespace

LinkPrediction predict_direct(const CalibratedModel& model, const FieldTable& fields) {
  const auto cols = model_columns(model, fields);
  const Eigen::Index n = cols.empty() ? 0 : cols.front()->size();
  LinkPrediction p;
  p.raw.resize(n);
  p.flow.resize(n);
  p.floored.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.raw[i] = raw_prediction(model, cols, i);
    p.flow[i] = std::max(0.0, p.raw[i]);
    p.floored[static_cast<std::size_t>(i)] = p.raw[i] < 0.0;
  }
  return p;
}

LinkPrediction predict_direct(const CalibratedModel& model, const std::vector<FlowField>& fields) {
  return predict_direct(model, field_table(fields));
}

PointValues predict_at_points(const CalibratedModel& model, const FieldTable& fields,
                              const std::vector<CountPoint>& points) {
  const auto cols = model_columns(model, fields);
  PointValues out;
  for (const auto& p : points) out[p.id] = raw_prediction(model, cols, static_cast<Eigen::Index>(p.link));
  return out;
}

PointValues predict_incremental(const CalibratedModel& model, const FieldTable& fields_t1,
                                const std::vector<CountPoint>& points_t1, const FieldTable& fields_t2,
                                const std::vector<CountPoint>& points_t2, const std::string& baseline_year) {
  const PointValues d1 = predict_at_points(model, fields_t1, points_t1);
  const PointValues d2 = predict_at_points(model, fields_t2, points_t2);
  PointValues out;
  for (const auto& p : points_t1) {
    auto it = d2.find(p.id);
    if (it == d2.end()) throw DataError("point '" + p.id + "' is missing from the second epoch");
    out[p.id] = p.observation(baseline_year) + (it->second - d1.at(p.id));
  }
  return out;
}

PointValues predict_null(const std::vector<CountSite>& baseline, const std::string& baseline_year) {
  PointValues out;
  for (const auto& s : baseline) {
    auto it = s.observations.find(baseline_year);
    if (it == s.observations.end()) throw DataError("point '" + s.id + "' has no observation for " + baseline_year);
    out[s.id] = it->second;
  }
  return out;
}

double geh(double modelled, double counted) {
  const double s = modelled + counted;
  if (s <= 0.0) {
    if (modelled == counted) return 0.0;
    throw DataError("GEH is undefined when M + C <= 0");
  }
  const double d = modelled - counted;
  return std::sqrt(2.0 * d * d / s);
}

std::optional<double> pearson_r2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum();
  const double sbb = (db * db).sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  const double sab = (da * db).sum();
  return std::min(1.0, sab * sab / (saa * sbb));
}

EvaluationReport evaluate(const PointValues& predictions, const PointValues& observations) {
  EvaluationReport r;
  for (const auto& [id, obs] : observations) {
    auto it = predictions.find(id);
    if (it == predictions.end()) continue;
    r.points.push_back({id, it->second, obs, geh(std::max(0.0, it->second), obs)});
  }
  if (r.points.size() < 3) {
    throw DataError("evaluate needs at least 3 matched points, got " + std::to_string(r.points.size()));
  }
  const auto n = static_cast<Eigen::Index>(r.points.size());
  Eigen::VectorXd m(n), c(n);
  std::size_t under = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = r.points[static_cast<std::size_t>(i)];
    m[i] = p.predicted;
    c[i] = p.observed;
    r.geh_mean += p.geh;
    if (p.geh < 5.0) ++under;
  }
  r.geh_mean /= static_cast<double>(n);
  r.geh_under_5_fraction = static_cast<double>(under) / static_cast<double>(n);
  r.r2 = pearson_r2(m, c);
  return r;
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : report.points) {
    points.push_back({{"id", p.id}, {"predicted", p.predicted}, {"observed", p.observed}, {"geh", p.geh}});
  }
  nlohmann::json j = {{"schema_version", 1},
                      {"r2", nullptr},
                      {"r2_defined", report.r2.has_value()},
                      {"geh_mean", report.geh_mean},
                      {"geh_under_5_fraction", report.geh_under_5_fraction},
                      {"per_point", std::move(points)}};
  if (report.r2) j["r2"] = *report.r2;
  return j;
}

namespace {

std::vector<double> dedupe(const std::vector<double>& grid, const char* name, std::vector<std::string>& warnings) {
  std::vector<double> out;
  for (double v : grid) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  if (out.size() != grid.size()) warnings.push_back(std::string("duplicate values removed from the ") + name + " grid");
  return out;
}

}  // namespace

SweepResult sweep_sigma(const SpatialNetwork& net, const AnalysisSpec& spec, const RadiusBand& radius,
                        const MetricParams& base, const std::vector<CountPoint>& points, const std::string& year,
                        const SweepOptions& options) {
  if (options.sigma_grid.empty() || options.a_grid.empty()) throw DataError("sweep: grids must not be empty");
  SweepResult out;
  const auto sigmas = dedupe(options.sigma_grid, "sigma", out.warnings);
  const auto as = dedupe(options.a_grid, "a", out.warnings);
  AnalysisSpec single = spec;
  single.radii = {radius};
  for (double a : as) {
    for (double sigma : sigmas) {
      MetricParams params = base;
      params.a = a;
      params.sigma = sigma;
      params.oversample = options.oversample;
      const auto fields = run_battery(net, {single}, params, options.run);
      const DesignMatrix d = assemble_design(fields, points, year);
      const Eigen::VectorXd w = observation_weights(d.y, options.lambda_w);
      const RidgeSolution s = ridge_fit(d.x, d.y, w, 0.0);
      const Eigen::VectorXd fitted = (d.x * s.coefficients).array() + s.intercept;
      out.rows.push_back({a, sigma, weighted_r2(d.y, fitted, w)});
    }
  }
  return out;
}

}  // namespace mhspna
