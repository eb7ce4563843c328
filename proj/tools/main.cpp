// Command-line front end: simulate panel data, fit the penalised multistate
// model, and predict hazards or transition probabilities from a saved fit.

#include <CLI11.hpp>
#include <iostream>

#include "splinemsm/commands.hpp"
#include "splinemsm/errors.hpp"
#include "splinemsm/likelihood.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "splinemsm: spline-hazard multistate models for interval-censored "
      "panel data"};
  app.require_subcommand(1);

  splinemsm::SimulateArgs sim_args;
  std::uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand(
      "simulate", "generate an illness-death panel dataset plus ground truth");
  sim->add_option("--config", sim_args.config_path, "configuration file")
      ->required();
  sim->add_option("--out", sim_args.out_dir, "output directory")->required();
  auto* seed_opt =
      sim->add_option("--seed", sim_seed, "override [simulate].seed");

  splinemsm::FitArgs fit_args;
  fit_args.threads = splinemsm::env_thread_count();
  auto* fit = app.add_subcommand("fit", "fit the configured model to a CSV");
  fit->add_option("--data", fit_args.data_path, "panel data CSV")->required();
  fit->add_option("--config", fit_args.config_path, "configuration file")
      ->required();
  fit->add_option("--out", fit_args.out_dir, "output directory")->required();
  fit->add_option("--threads", fit_args.threads,
                  "worker threads (default: SPLINEMSM_THREADS or 1)");
  fit->add_flag("--trace", fit_args.trace, "print iteration rows to stderr");

  splinemsm::PredictArgs pred_args;
  auto* pred = app.add_subcommand("predict",
                                  "predictions from a saved fit.json");
  pred->add_option("--fit", pred_args.fit_path, "fit.json path")->required();
  pred->add_option("--mode", pred_args.mode, "matrix or hazard")->required();
  pred->add_option("--t0", pred_args.t0, "interval start (matrix mode)");
  pred->add_option("--t1", pred_args.t1, "interval end (matrix mode)");
  pred->add_option("--transition", pred_args.transition,
                   "transition like 1-2, or 'all' (hazard mode)");
  pred->add_option("--grid", pred_args.grid,
                   "time grid start:end:count (hazard mode)");
  pred->add_option("--x", pred_args.covariates,
                   "covariate values, e.g. dage=26,ihd=1");
  pred->add_option("--nsims", pred_args.n_sims, "simulation draws")
      ->check(CLI::PositiveNumber);
  pred->add_option("--level", pred_args.level, "interval level (default 0.05)");
  pred->add_option("--seed", pred_args.seed, "draw seed");
  pred->add_option("--out", pred_args.out_path, "output CSV (default stdout)");

  auto* recipe = app.add_subcommand(
      "cav-recipe", "print the CAV dataset export recipe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : splinemsm::kExitValidation;
  }

  try {
    if (sim->parsed()) {
      if (seed_opt->count() > 0) sim_args.seed = sim_seed;
      return splinemsm::cmd_simulate(sim_args);
    }
    if (fit->parsed()) return splinemsm::cmd_fit(fit_args);
    if (pred->parsed()) return splinemsm::cmd_predict(pred_args);
    if (recipe->parsed()) return splinemsm::cmd_cav_recipe();
  } catch (const splinemsm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return splinemsm::kExitValidation;
  } catch (const splinemsm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return splinemsm::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return splinemsm::kExitNumerical;
  }
  return splinemsm::kExitValidation;
}
