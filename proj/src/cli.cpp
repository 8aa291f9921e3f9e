#include "mhspna/cli.hpp"

#include "mhspna/betweenness.hpp"
#include "mhspna/calibrate.hpp"
#include "mhspna/config.hpp"
#include "mhspna/counts.hpp"
#include "mhspna/error.hpp"
#include "mhspna/network.hpp"
#include "mhspna/synth.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <set>

namespace mhspna::cli {

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

ProjectConfig load_project(const Globals& g) {
  ProjectConfig c = g.config.empty() ? ProjectConfig{} : load_config(g.config);
  if (g.seed) {
    c.metric.seed = *g.seed;
    c.calibration.seed = *g.seed;
  }
  return c;
}

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void print_warnings(const std::vector<FlowField>& fields) {
  for (const auto& f : fields) {
    for (const auto& w : f.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
  }
}

/// Model columns read straight from a flows file when all are present,
/// otherwise recomputed from the model's own configuration.
FieldTable fields_for(const CalibratedModel& model, const SpatialNetwork& net, unsigned threads) {
  const bool present = std::all_of(model.columns.begin(), model.columns.end(),
                                   [&](const std::string& c) { return net.has_weight_field(c); });
  if (present) {
    FieldTable t;
    for (const auto& c : model.columns) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(net.size()));
      for (std::size_t i = 0; i < net.size(); ++i) v[static_cast<Eigen::Index>(i)] = net.link(i).weight(c);
      t[c] = std::move(v);
    }
    return t;
  }
  const auto fields = run_battery(net, model.analyses, model.metric, RunOptions{threads});
  print_warnings(fields);
  return field_table(fields);
}

std::vector<FlowField> fields_from_network(const SpatialNetwork& net, const ProjectConfig& config) {
  std::vector<FlowField> out;
  std::vector<std::string> missing;
  for (const auto& spec : config.analyses) {
    for (const auto& band : spec.radii) {
      FlowField f;
      f.key = spec.key;
      f.radius = band;
      f.column = spec.column(band);
      if (!net.has_weight_field(f.column)) {
        missing.push_back(f.column);
        continue;
      }
      f.values.resize(static_cast<Eigen::Index>(net.size()));
      for (std::size_t i = 0; i < net.size(); ++i) f.values[static_cast<Eigen::Index>(i)] = net.link(i).weight(f.column);
      out.push_back(std::move(f));
    }
  }
  if (!missing.empty()) {
    std::string msg = "flows file lacks column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return out;
}

void write_points_csv(const std::string& path, const PointValues& values, const std::vector<CountSite>& sites,
                      const std::string& year) {
  std::vector<CountSite> out;
  for (const auto& s : sites) {
    auto it = values.find(s.id);
    if (it == values.end()) continue;
    out.push_back({s.id, s.position, {{year, it->second}}});
  }
  std::ofstream f = open_out(path);
  f << "point_id,x,y,year,flow\n";
  for (const auto& s : out) {
    f << s.id << ',' << num(s.position.x()) << ',' << num(s.position.y()) << ',' << year << ','
      << num(s.observations.begin()->second) << '\n';
  }
}

PointValues point_values(const std::vector<CountSite>& sites, const std::string& year) {
  PointValues v;
  for (const auto& s : sites) {
    auto it = s.observations.find(year);
    if (it != s.observations.end()) v[s.id] = it->second;
  }
  return v;
}

std::string single_year(const std::vector<CountSite>& sites, const std::string& path) {
  std::set<std::string> years;
  for (const auto& s : sites) {
    for (const auto& [y, v] : s.observations) years.insert(y);
  }
  if (years.size() != 1) throw DataError(path + ": holds several years; choose one with a year flag");
  return *years.begin();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw IoError("empty value in list '" + text + "'");
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw IoError("not a number: '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"Multi-hybrid spatial network analysis: betweenness flows, calibration and prediction", "mhspna"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Project configuration JSON");
  app.add_option("--seed", g.seed, "Override every random seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.fallthrough();

  // prepare
  std::string prep_in, prep_out, prep_report;
  std::optional<double> prep_tol;
  bool keep_islands = false;
  auto* prepare = app.add_subcommand("prepare", "Split, de-duplicate and check connectivity of a network");
  prepare->add_option("--in", prep_in, "Input network GeoJSON")->required();
  prepare->add_option("--out", prep_out, "Prepared network GeoJSON")->required();
  prepare->add_option("--report", prep_report, "Report JSON (default: stdout)");
  prepare->add_option("--tolerance", prep_tol, "Junction snap tolerance in metres");
  prepare->add_flag("--keep-islands", keep_islands, "Flag disconnected components but keep them");

  // analyze
  std::string an_net, an_out, an_csv;
  auto* analyze = app.add_subcommand("analyze", "Compute the configured betweenness battery");
  analyze->add_option("--network", an_net, "Prepared network GeoJSON")->required();
  analyze->add_option("--out", an_out, "Flows GeoJSON")->required();
  analyze->add_option("--csv", an_csv, "Also write id,column... CSV");

  // calibrate
  std::string cal_flows, cal_counts, cal_year, cal_model, cal_coeff;
  std::optional<double> cal_lambda_r;
  bool cal_no_intercept = false, cal_nonneg = false;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit the regression model to counts");
  calibrate_cmd->add_option("--flows", cal_flows, "Flows GeoJSON from analyze")->required();
  calibrate_cmd->add_option("--counts", cal_counts, "Counts CSV")->required();
  calibrate_cmd->add_option("--year", cal_year, "Calibration year label")->required();
  calibrate_cmd->add_option("--model", cal_model, "Model JSON output")->required();
  calibrate_cmd->add_option("--coefficients", cal_coeff, "Coefficient table CSV output");
  calibrate_cmd->add_option("--lambda-r", cal_lambda_r, "Manual ridge penalty (skips the grid)");
  calibrate_cmd->add_flag("--no-intercept", cal_no_intercept, "Fit without an intercept");
  calibrate_cmd->add_flag("--nonnegative", cal_nonneg, "Constrain coefficients to be >= 0");

  // predict
  std::string pr_model, pr_net, pr_net1, pr_counts, pr_year, pr_mode = "direct", pr_out, pr_points;
  auto* predict = app.add_subcommand("predict", "Predict flows with the direct, incremental or null model");
  predict->add_option("--model", pr_model, "Model JSON");
  predict->add_option("--mode", pr_mode, "direct | incremental | null")
      ->check(CLI::IsMember({"direct", "incremental", "null"}));
  predict->add_option("--network", pr_net, "Network (or flows) GeoJSON for the predicted epoch");
  predict->add_option("--network-t1", pr_net1, "Network (or flows) GeoJSON for the baseline epoch");
  predict->add_option("--counts", pr_counts, "Baseline counts CSV");
  predict->add_option("--year", pr_year, "Baseline year label");
  predict->add_option("--out", pr_out, "Output: GeoJSON (direct) or counts CSV (incremental/null)")->required();
  predict->add_option("--points", pr_points, "Direct mode: also write predictions at the count points as CSV");

  // evaluate
  std::string ev_pred, ev_obs, ev_year, ev_pred_year, ev_out;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare predictions with observed counts");
  evaluate_cmd->add_option("--predictions", ev_pred, "Predictions in counts CSV format")->required();
  evaluate_cmd->add_option("--observations", ev_obs, "Observed counts CSV")->required();
  evaluate_cmd->add_option("--year", ev_year, "Observation year (default: the only one present)");
  evaluate_cmd->add_option("--prediction-year", ev_pred_year, "Prediction year label (default: the only one)");
  evaluate_cmd->add_option("--out", ev_out, "Report JSON (default: stdout)");

  // synth
  GridSpec grid;
  std::string sy_out, sy_plant, sy_counts, sy_year = "t1";
  bool sy_no_weights = false;
  std::size_t sy_points = 60;
  double sy_noise = 0.0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic grid network and planted counts");
  synth->add_option("--nx", grid.nx, "Junctions along x")->capture_default_str();
  synth->add_option("--ny", grid.ny, "Junctions along y")->capture_default_str();
  synth->add_option("--spacing", grid.spacing, "Junction spacing in metres")->capture_default_str();
  synth->add_flag("--no-weights", sy_no_weights, "Omit the default weight plan");
  synth->add_option("--out", sy_out, "Network GeoJSON")->required();
  synth->add_option("--plant", sy_plant, "Planted coefficients JSON {intercept, coefficients}");
  synth->add_option("--counts-out", sy_counts, "Planted counts CSV");
  synth->add_option("--points", sy_points, "Number of count points")->capture_default_str();
  synth->add_option("--noise", sy_noise, "Multiplicative noise standard deviation")->capture_default_str();
  synth->add_option("--year", sy_year, "Year label of the planted counts")->capture_default_str();

  // sweep-sigma
  std::string sw_net, sw_counts, sw_year, sw_out, sw_sigma, sw_a;
  auto* sweep = app.add_subcommand("sweep-sigma", "Tabulate fit quality over randomization levels");
  sweep->add_option("--network", sw_net, "Prepared network GeoJSON")->required();
  sweep->add_option("--counts", sw_counts, "Counts CSV")->required();
  sweep->add_option("--year", sw_year, "Count year label")->required();
  sweep->add_option("--out", sw_out, "Output CSV (default: stdout)");
  sweep->add_option("--sigma", sw_sigma, "Comma-separated sigma grid");
  sweep->add_option("--a", sw_a, "Comma-separated a grid");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    const ProjectConfig config = load_project(g);
    const RunOptions run_options{g.threads};

    if (*prepare) {
      const double tol = prep_tol.value_or(config.snap_tolerance);
      const auto prepared = prepare_network(load_network(prep_in, {}, tol), PrepareOptions{keep_islands});
      save_network(prep_out, prepared.network);
      const auto report = to_json(prepared.report);
      if (prep_report.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        write_json(prep_report, report);
      }
      return 0;
    }

    if (*analyze) {
      if (config.analyses.empty()) throw DataError("no analyses configured");
      const auto net = load_network(an_net, {}, config.snap_tolerance);
      const auto fields = run_battery(net, config.analyses, config.metric, run_options);
      print_warnings(fields);
      save_network(an_out, net, to_link_columns(fields));
      if (!an_csv.empty()) {
        std::ofstream out = open_out(an_csv);
        out << "id";
        for (const auto& f : fields) out << ',' << f.column;
        out << '\n';
        for (std::size_t i = 0; i < net.size(); ++i) {
          out << net.link(i).id;
          for (const auto& f : fields) out << ',' << num(f.values[static_cast<Eigen::Index>(i)]);
          out << '\n';
        }
      }
      std::cout << "wrote " << fields.size() << " flow columns for " << net.size() << " links\n";
      return 0;
    }

    if (*calibrate_cmd) {
      if (config.analyses.empty()) throw DataError("no analyses configured");
      const auto net = load_network(cal_flows, {}, config.snap_tolerance);
      const auto fields = fields_from_network(net, config);
      const auto points = snap_count_points(net, read_counts_csv(cal_counts), config.count_snap_tolerance);
      CalibrationOptions options = config.calibration_options(g.threads);
      if (cal_lambda_r) options.cv.lambda_r = cal_lambda_r;
      if (cal_no_intercept) options.fit.intercept = false;
      if (cal_nonneg) options.fit.nonnegative = true;
      const DesignMatrix design = assemble_design(fields, points, cal_year);
      CalibratedModel model = calibrate(design, options);
      model.year = cal_year;
      model.metric = config.metric;
      model.analyses = config.analyses;
      model.config_hash = config_hash(config.metric, config.analyses);
      save_model(cal_model, model);
      if (!cal_coeff.empty()) {
        std::ofstream out = open_out(cal_coeff);
        write_coefficients_csv(out, model);
      }
      for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "cv_r2 " << num(model.cv_r2) << "\nlambda_r " << num(model.lambda_r) << '\n';
      return 0;
    }

    if (*predict) {
      if (pr_mode == "null") {
        if (pr_counts.empty() || pr_year.empty()) throw IoError("null mode needs --counts and --year");
        const auto sites = read_counts_csv(pr_counts);
        write_points_csv(pr_out, predict_null(sites, pr_year), sites, pr_year);
        return 0;
      }
      if (pr_model.empty() || pr_net.empty()) throw IoError(pr_mode + " mode needs --model and --network");
      const CalibratedModel model = load_model(pr_model);
      const auto net2 = load_network(pr_net, {}, config.snap_tolerance);
      const FieldTable f2 = fields_for(model, net2, g.threads);
      if (pr_mode == "direct") {
        const LinkPrediction p = predict_direct(model, f2);
        std::vector<double> flow(p.flow.begin(), p.flow.end());
        std::vector<double> floored(p.floored.begin(), p.floored.end());
        save_network(pr_out, net2, {{"prediction", flow}, {"prediction_floored", floored}});
        if (!pr_points.empty()) {
          if (pr_counts.empty()) throw IoError("--points needs --counts for the point locations");
          const auto sites = read_counts_csv(pr_counts);
          const auto points = snap_count_points(net2, sites, config.count_snap_tolerance);
          auto values = predict_at_points(model, f2, points);
          for (auto& [id, v] : values) v = std::max(0.0, v);
          write_points_csv(pr_points, values, sites, pr_year.empty() ? "predicted" : pr_year);
        }
        return 0;
      }
      if (pr_net1.empty() || pr_counts.empty() || pr_year.empty()) {
        throw IoError("incremental mode needs --network-t1, --counts and --year");
      }
      const auto net1 = load_network(pr_net1, {}, config.snap_tolerance);
      const FieldTable f1 = fields_for(model, net1, g.threads);
      const auto sites = read_counts_csv(pr_counts);
      std::vector<CountSite> baseline;
      for (const auto& s : sites) {
        if (s.observations.contains(pr_year)) baseline.push_back(s);
      }
      const auto p1 = snap_count_points(net1, baseline, config.count_snap_tolerance);
      const auto p2 = snap_count_points(net2, baseline, config.count_snap_tolerance);
      write_points_csv(pr_out, predict_incremental(model, f1, p1, f2, p2, pr_year), baseline, pr_year);
      return 0;
    }

    if (*evaluate_cmd) {
      const auto pred = read_counts_csv(ev_pred);
      const auto obs = read_counts_csv(ev_obs);
      const std::string py = ev_pred_year.empty() ? single_year(pred, ev_pred) : ev_pred_year;
      const std::string oy = ev_year.empty() ? single_year(obs, ev_obs) : ev_year;
      const auto report = evaluate(point_values(pred, py), point_values(obs, oy));
      const auto j = to_json(report);
      if (ev_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        write_json(ev_out, j);
        std::cout << "r2 " << (report.r2 ? num(*report.r2) : std::string("undefined")) << '\n';
      }
      return 0;
    }

    if (*synth) {
      const WeightPlan plan;
      const std::uint64_t seed = g.seed.value_or(config.metric.seed);
      const auto net = synth_grid(grid, sy_no_weights ? nullptr : &plan, seed);
      save_network(sy_out, net);
      if (!sy_plant.empty()) {
        if (sy_counts.empty()) throw IoError("--plant needs --counts-out");
        const PlantedModel planted = planted_model_from_json(read_json(sy_plant));
        const auto fields = run_battery(net, config.analyses, config.metric, run_options);
        const auto links = choose_count_links(net, sy_points, seed);
        write_counts_csv(std::filesystem::path(sy_counts), plant_counts(net, fields, planted, links, sy_year, sy_noise, seed));
      }
      std::cout << "wrote " << net.size() << " links, " << net.junctions().size() << " junctions\n";
      return 0;
    }

    if (*sweep) {
      const auto net = load_network(sw_net, {}, config.snap_tolerance);
      const auto points = snap_count_points(net, read_counts_csv(sw_counts), config.count_snap_tolerance);
      auto spec = std::find_if(config.analyses.begin(), config.analyses.end(),
                               [&](const AnalysisSpec& a) { return a.key == config.sweep.analysis; });
      if (spec == config.analyses.end()) throw DataError("sweep: no analysis '" + config.sweep.analysis + "'");
      SweepOptions options;
      options.sigma_grid = sw_sigma.empty() ? config.sweep.sigma_grid : parse_list(sw_sigma);
      options.a_grid = sw_a.empty() ? config.sweep.a_grid : parse_list(sw_a);
      options.oversample = config.sweep.oversample;
      options.lambda_w = config.calibration.lambda_w;
      options.run = run_options;
      const auto result =
          sweep_sigma(net, *spec, RadiusBand{0.0, config.sweep.radius}, config.metric, points, sw_year, options);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      std::ostringstream table;
      table << "a,sigma,r2\n";
      for (const auto& r : result.rows) table << num(r.a) << ',' << num(r.sigma) << ',' << num(r.r2) << '\n';
      if (sw_out.empty()) {
        std::cout << table.str();
      } else {
        open_out(sw_out) << table.str();
      }
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace mhspna::cli
