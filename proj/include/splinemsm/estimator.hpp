#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "splinemsm/dataset.hpp"
#include "splinemsm/likelihood.hpp"
#include "splinemsm/model.hpp"

namespace splinemsm {

struct FitControls {
  double delta = 1e-6;      // convergence tolerance on max |theta change|
  int max_outer = 200;      // alternation iterations
  int max_inner = 100;      // scoring iterations per alternation
  int max_halvings = 30;    // step halvings within one scoring update
  double lambda_min = 1e-8;
  double lambda_max = 1e12;
  int nm_max_iter = 200;    // simplex iterations for the UBRE minimiser
  bool penalized_covariance = false;  // V = (M + S_lambda)^-1 instead of M^-1
  bool trace = false;       // print iteration rows to stderr
  std::optional<double> grid_width;
  int n_threads = 1;

  EvalOptions eval_options() const { return {grid_width, n_threads}; }
};

// Quantities of the penalised-scoring working model at a fixed theta:
// score g, the (eigenvalue-floored) Fisher approximation and its symmetric
// square root, and the working response z = sqrt(M) theta + sqrt(M)^-1 g.
struct WorkingQuantities {
  Eigen::VectorXd g;
  Eigen::MatrixXd I_fisher;     // floored M
  Eigen::MatrixXd sqrt_I;
  Eigen::MatrixXd sqrt_I_inv;
  Eigen::VectorXd eps;          // sqrt_I_inv * g
  Eigen::VectorXd z;            // sqrt_I * theta + eps
  double loglik = 0.0;

  // Influence matrix A_lambda = sqrt(M) (M + S_lambda)^-1 sqrt(M).
  Eigen::MatrixXd influence(const Eigen::MatrixXd& S_lambda) const;
};

WorkingQuantities working_quantities(const Model& model,
                                     const Eigen::VectorXd& theta,
                                     const PanelDataset& data,
                                     const EvalOptions& opts = {});

// Assemble working quantities from a raw score and Fisher approximation.
// Eigenvalues of M below max_eig * 1e-10 are floored before the square
// roots are formed; throws NumericalError when M has no positive eigenvalue.
WorkingQuantities make_working(const Eigen::VectorXd& g,
                               const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& theta);

// One penalised Fisher scoring update with step halving.  The raw update is
//   theta' = (M + S_lambda)^-1 (M theta + g);
// if it does not improve pen_loglik the step is halved toward theta up to
// max_halvings times, and `stalled` reports that no improvement was found.
// Candidates whose likelihood cannot be evaluated (hazard overflow, interval
// probabilities underflowing to zero) count as non-improving; only the input
// theta must be evaluable.
struct StepResult {
  Eigen::VectorXd theta;
  WorkingQuantities working;  // at the input theta
  bool stalled = false;
  double pen_loglik = 0.0;    // at the returned theta
};

StepResult scoring_step(const Model& model, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& lambda, const PanelDataset& data,
                        const FitControls& controls = {});

// Inner loop: scoring steps at fixed lambda until the update moves theta by
// less than controls.delta (or stalls, or hits max_inner).
struct InnerResult {
  Eigen::VectorXd theta;
  bool converged = false;
  int iterations = 0;
  double pen_loglik = 0.0;
};

InnerResult fit_theta(const Model& model, const Eigen::VectorXd& lambda,
                      const Eigen::VectorXd& theta0, const PanelDataset& data,
                      const FitControls& controls = {});

// Un-biased risk estimate of the working linear model:
//   V(lambda) = ||z - A_lambda z||^2 - q + 2 tr(A_lambda).
// The additive constant q does not affect the minimiser.
double ubre(const Model& model, const WorkingQuantities& working,
            const Eigen::VectorXd& lambda);

// Same criterion evaluated against an explicit penalty matrix.
double ubre_value(const WorkingQuantities& working,
                  const Eigen::MatrixXd& S_lambda);

// Derivative-free UBRE minimisation over log(lambda), componentwise clamped
// to [lambda_min, lambda_max].  Never returns a lambda with a higher UBRE
// value than the input; on optimiser failure the input is returned with
// `warned` set.
struct LambdaResult {
  Eigen::VectorXd lambda;
  bool warned = false;
};

LambdaResult optimize_lambda(const Model& model,
                             const WorkingQuantities& working,
                             const Eigen::VectorXd& lambda_init,
                             const FitControls& controls = {});

// Starting values: each alpha block constant at the log crude rate of its
// transition (observed pair count over time at risk, zero counts replaced by
// 0.5), betas at zero.
Eigen::VectorXd initial_theta(const Model& model, const PanelDataset& data);

struct TraceRow {
  int iteration = 0;
  double pen_loglik = 0.0;
  double ubre = 0.0;
  double max_change = 0.0;
  Eigen::VectorXd lambda;
};

struct FitResult {
  Model model;
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda;        // one entry per spline transition
  Eigen::MatrixXd v_theta;
  Eigen::VectorXd edf_blocks;    // per spline transition
  double edf_total = 0.0;
  bool converged = false;
  int iterations = 0;
  double pen_loglik = 0.0;
  double ubre = 0.0;
  double loglik = 0.0;
  std::optional<double> grid_width;
  std::vector<TraceRow> trace;
};

// Full alternation: update lambda by UBRE at the current estimate, refit
// theta at the new lambda, and repeat until the combined update stops moving
// theta.  The returned theta is the penalised optimum at the returned lambda.
// Non-convergence is reported through the converged flag, not an exception.
FitResult fit(const Model& model, const PanelDataset& data,
              const FitControls& controls = {});

}  // namespace splinemsm
