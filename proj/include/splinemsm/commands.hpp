#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace splinemsm {

// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitNoConvergence = 4;

// Generate a simulated panel dataset (data.csv) plus Monte-Carlo true
// transition probabilities (truth.csv) under the configured scenario.
struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;  // overrides [simulate].seed
};
int cmd_simulate(const SimulateArgs& args);

// Fit the configured model to a dataset; writes fit.json, params.csv,
// lambda.csv, and trace.csv into the output directory.  Returns
// kExitNoConvergence when the alternation hit its iteration cap.
struct FitArgs {
  std::string data_path;
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  bool trace = false;  // force iteration tracing on stderr
};
int cmd_fit(const FitArgs& args);

// Predictions from a saved fit: transition probability matrix between two
// times, or hazard curves on a time grid, with simulation intervals.
struct PredictArgs {
  std::string fit_path;
  std::string mode;        // "matrix" or "hazard"
  double t0 = 0.0;
  double t1 = 0.0;         // matrix mode
  std::string transition;  // hazard mode: "1-2" or "all"
  std::string grid;        // hazard mode: "start:end:count" (optional)
  std::string covariates;  // "name=value,..." matching the fitted model
  int n_sims = 1000;
  double level = 0.05;
  std::uint64_t seed = 1;
  std::string out_path;    // empty = stdout
};
int cmd_predict(const PredictArgs& args);

// Print the documented recipe for exporting the heart-transplant CAV
// dataset into the CSV layout this tool ingests.
int cmd_cav_recipe();

}  // namespace splinemsm
