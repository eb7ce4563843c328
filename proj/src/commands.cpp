#include "splinemsm/commands.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "splinemsm/config.hpp"
#include "splinemsm/errors.hpp"
#include "splinemsm/inference.hpp"
#include "splinemsm/io.hpp"
#include "splinemsm/markovcore.hpp"
#include "splinemsm/simulate.hpp"

namespace splinemsm {

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ValidationError("cannot create output directory '" + dir +
                          "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void print_pair_table(const Eigen::MatrixXi& table) {
  const int D = static_cast<int>(table.rows());
  std::cout << "observed state pairs (row = from, column = to):\n";
  std::cout << "      ";
  for (int s = 1; s <= D; ++s) std::cout << "\t" << s;
  std::cout << "\n";
  for (int r = 1; r <= D; ++r) {
    std::cout << "  " << r << "   ";
    for (int s = 1; s <= D; ++s) std::cout << "\t" << table(r - 1, s - 1);
    std::cout << "\n";
  }
}

Eigen::VectorXd parse_covariate_values(const std::string& spec,
                                       const std::vector<std::string>& names) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
  std::vector<bool> seen(names.size(), false);
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ValidationError("predict: covariate '" + item +
                            "' is not of the form name=value");
    const std::string name = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw ValidationError("predict: unknown covariate '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - names.begin());
    try {
      std::size_t used = 0;
      x[static_cast<Eigen::Index>(idx)] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ValidationError("predict: covariate value '" + value +
                            "' is not a number");
    }
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!seen[i])
      throw ValidationError("predict: missing value for covariate '" +
                            names[i] + "' (use --x " + names[i] + "=...)");
  return x;
}

Eigen::VectorXd parse_grid(const std::string& spec) {
  // "start:end:count", inclusive linear grid
  std::istringstream in(spec);
  std::string a, b, c;
  if (!std::getline(in, a, ':') || !std::getline(in, b, ':') ||
      !std::getline(in, c))
    throw ValidationError("predict: grid must be 'start:end:count'");
  double start = 0.0, end = 0.0;
  long count = 0;
  try {
    start = std::stod(a);
    end = std::stod(b);
    count = std::stol(c);
  } catch (const std::exception&) {
    throw ValidationError("predict: malformed grid '" + spec + "'");
  }
  if (count < 2 || !(end > start))
    throw ValidationError("predict: grid needs end > start and count >= 2");
  Eigen::VectorXd grid(count);
  for (long i = 0; i < count; ++i)
    grid[i] = start + (end - start) * static_cast<double>(i) /
                          static_cast<double>(count - 1);
  return grid;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
  Scenario scenario = scenario_from_config(cfg);
  if (args.seed) scenario.seed = *args.seed;

  ensure_dir(args.out_dir);
  const PanelDataset data = simulate_dataset(scenario);
  write_dataset_csv(join_path(args.out_dir, "data.csv"), data);

  const double t0 = cfg.has("simulate", "truth_t0")
                        ? cfg.get_double("simulate", "truth_t0")
                        : 0.0;
  const double t1 = cfg.has("simulate", "truth_t1")
                        ? cfg.get_double("simulate", "truth_t1")
                        : 10.0;
  const long n_paths = cfg.has("simulate", "truth_paths")
                           ? cfg.get_int("simulate", "truth_paths")
                           : 1000000;
  const Eigen::MatrixXd truth =
      true_transition_probabilities(scenario, t0, t1, n_paths, scenario.seed);

  CsvTable table;
  table.header = {"from", "to", "t0", "t1", "probability"};
  for (int r = 1; r <= 3; ++r)
    for (int s = 1; s <= 3; ++s)
      table.rows.push_back({std::to_string(r), std::to_string(s),
                            format_double(t0), format_double(t1),
                            format_double(truth(r - 1, s - 1))});
  write_csv(join_path(args.out_dir, "truth.csv"), table);

  std::cout << "simulated " << data.n_individuals() << " individuals, "
            << data.n_observations() << " observations (seed "
            << scenario.seed << ")\n";
  print_pair_table(data.pair_table());
  std::cout << "wrote " << join_path(args.out_dir, "data.csv") << " and "
            << join_path(args.out_dir, "truth.csv") << "\n";
  return kExitOk;
}

int cmd_fit(const FitArgs& args) {
  const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
  ModelConfig mc = ModelConfig::from_config(cfg);
  mc.controls.n_threads = args.threads;
  if (args.trace) mc.controls.trace = true;

  auto [data, report] = ingest(args.data_path, mc);
  std::cout << "ingested " << report.rows_read << " rows";
  if (report.rows_filtered > 0)
    std::cout << " (" << report.rows_filtered << " beyond the time filter)";
  std::cout << ", " << report.individuals << " individuals\n";
  if (!report.dropped_ids.empty()) {
    std::cout << "dropped " << report.dropped_ids.size()
              << " individuals left with <2 rows by the filter:";
    for (const auto& id : report.dropped_ids) std::cout << " " << id;
    std::cout << "\n";
  }
  print_pair_table(report.pair_table);

  const Model model = mc.build_model(data.pooled_times());
  std::cout << "model: " << model.n_params() << " parameters, "
            << model.spline_transitions().size() << " spline baselines\n";

  const FitResult fit = splinemsm::fit(model, data, mc.controls);

  ensure_dir(args.out_dir);
  save_fit(join_path(args.out_dir, "fit.json"), fit);

  // params.csv: name, estimate, standard error
  {
    CsvTable table;
    table.header = {"parameter", "estimate", "se"};
    const auto names = model.param_names();
    for (int k = 0; k < model.n_params(); ++k)
      table.rows.push_back(
          {names[static_cast<std::size_t>(k)], format_double(fit.theta[k]),
           format_double(std::sqrt(std::max(fit.v_theta(k, k), 0.0)))});
    write_csv(join_path(args.out_dir, "params.csv"), table);
  }

  // lambda.csv: per spline transition, smoothing parameter and edf
  {
    CsvTable table;
    table.header = {"transition", "lambda", "edf"};
    for (std::size_t b = 0; b < model.spline_transitions().size(); ++b) {
      const int ti = model.spline_transitions()[b];
      table.rows.push_back(
          {model.structure().transition_label(ti),
           format_double(fit.lambda[static_cast<Eigen::Index>(b)]),
           format_double(fit.edf_blocks[static_cast<Eigen::Index>(b)])});
    }
    table.rows.push_back({"total", "", format_double(fit.edf_total)});
    write_csv(join_path(args.out_dir, "lambda.csv"), table);
  }

  // trace.csv: the alternation history
  {
    CsvTable table;
    table.header = {"iteration", "pen_loglik", "ubre", "max_theta_change"};
    for (std::size_t b = 0; b < model.spline_transitions().size(); ++b)
      table.header.push_back(
          "lambda_" +
          model.structure().transition_label(model.spline_transitions()[b]));
    for (const auto& row : fit.trace) {
      std::vector<std::string> cells{
          std::to_string(row.iteration), format_double(row.pen_loglik),
          format_double(row.ubre), format_double(row.max_change)};
      for (Eigen::Index b = 0; b < row.lambda.size(); ++b)
        cells.push_back(format_double(row.lambda[b]));
      table.rows.push_back(std::move(cells));
    }
    write_csv(join_path(args.out_dir, "trace.csv"), table);
  }

  std::cout << (fit.converged ? "converged" : "did NOT converge") << " after "
            << fit.iterations << " outer iterations\n"
            << "loglik " << fit.loglik << ", penalised " << fit.pen_loglik
            << ", ubre " << fit.ubre << ", edf " << fit.edf_total << "\n";
  for (std::size_t b = 0; b < model.spline_transitions().size(); ++b)
    std::cout << "lambda[" << model.structure().transition_label(
                                  model.spline_transitions()[b])
              << "] = " << fit.lambda[static_cast<Eigen::Index>(b)]
              << " (edf " << fit.edf_blocks[static_cast<Eigen::Index>(b)]
              << ")\n";
  std::cout << "artifacts in " << args.out_dir << "\n";
  return fit.converged ? kExitOk : kExitNoConvergence;
}

int cmd_predict(const PredictArgs& args) {
  const FitResult fit = load_fit(args.fit_path);
  const Eigen::VectorXd x = parse_covariate_values(
      args.covariates, fit.model.structure().covariate_names());

  CsvTable table;
  if (args.mode == "matrix") {
    if (!(args.t1 >= args.t0))
      throw ValidationError("predict: need t1 >= t0");
    const MatrixPrediction pred = predict_interval_probs(
        fit, args.t0, args.t1, x, args.n_sims, args.level, args.seed);
    table.header = {"from", "to", "point", "lower", "upper"};
    const int D = fit.model.structure().n_states();
    for (int r = 1; r <= D; ++r)
      for (int s = 1; s <= D; ++s)
        table.rows.push_back({std::to_string(r), std::to_string(s),
                              format_double(pred.point(r - 1, s - 1)),
                              format_double(pred.lower(r - 1, s - 1)),
                              format_double(pred.upper(r - 1, s - 1))});
  } else if (args.mode == "hazard") {
    table.header = {"transition", "t", "point", "lower", "upper"};
    std::vector<int> wanted;
    const auto& structure = fit.model.structure();
    if (args.transition.empty() || args.transition == "all") {
      for (int ti = 0; ti < structure.n_transitions(); ++ti)
        wanted.push_back(ti);
    } else {
      const auto [r, s] = parse_transition_label(args.transition);
      const int ti = structure.transition_index(r, s);
      if (ti < 0)
        throw ValidationError("predict: transition " + args.transition +
                              " is not in the model");
      wanted.push_back(ti);
    }
    for (int ti : wanted) {
      Eigen::VectorXd grid;
      if (!args.grid.empty()) {
        grid = parse_grid(args.grid);
      } else if (fit.model.baseline(ti).is_spline()) {
        const auto& knots = fit.model.baseline(ti).basis().knots();
        grid = Eigen::VectorXd::LinSpaced(100, knots[0],
                                          knots[knots.size() - 1]);
      } else {
        grid = Eigen::VectorXd::LinSpaced(2, 0.0, 1.0);
      }
      const auto& [r, s] = structure.transitions()[ti];
      const HazardCurve curve = hazard_curve(fit, r, s, grid, x, args.n_sims,
                                             args.level, args.seed);
      if (curve.extrapolated)
        std::cerr << "warning: hazard grid for " << structure.transition_label(ti)
                  << " extends beyond the knot range; values there are the "
                     "linear extension of the log hazard\n";
      for (const auto& pt : curve.points)
        table.rows.push_back({structure.transition_label(ti),
                              format_double(pt.t), format_double(pt.point),
                              format_double(pt.lower),
                              format_double(pt.upper)});
    }
  } else {
    throw ValidationError("predict: mode must be 'matrix' or 'hazard'");
  }

  if (args.out_path.empty()) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
      std::cout << (i ? "," : "") << table.header[i];
    std::cout << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        std::cout << (i ? "," : "") << row[i];
      std::cout << "\n";
    }
  } else {
    write_csv(args.out_path, table);
    std::cout << "wrote " << args.out_path << "\n";
  }
  return kExitOk;
}

int cmd_cav_recipe() {
  std::cout <<
      R"(Export recipe: heart-transplant CAV panel data (R package 'msm').

The fitting examples for the 3-state CAV model expect a CSV with columns
id,time,state,dage,ihd where state 1 = no CAV, 2 = any CAV, 3 = dead.
Starting from the 4-state 'cav' data frame shipped with msm:

    library(msm)
    data(cav)
    d <- cav[!is.na(cav$state), c("PTNUM", "years", "state", "dage", "ihd")]
    d <- d[!is.na(d$dage) & !is.na(d$ihd), ]
    # collapse mild/severe CAV into one living illness state
    d$state[d$state == 2 | d$state == 3] <- 2
    d$state[d$state == 4] <- 3
    # the disease is progressive; observed regressions are measurement
    # error, so carry the worst state seen so far forward
    d$state <- as.integer(ave(d$state, d$PTNUM, FUN = cummax))
    # follow-up beyond 15 years is discarded
    d <- d[d$years <= 15, ]
    names(d) <- c("id", "time", "state", "dage", "ihd")
    write.csv(d, "cav.csv", row.names = FALSE, quote = FALSE)

Fit with exact_death = true, grid_width = 1.2, covariates dage and ihd
shared across transitions (share_beta = true); see the README for the
matching configuration file.
)";
  return kExitOk;
}

}  // namespace splinemsm
