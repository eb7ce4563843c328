#pragma once

#include <Eigen/Dense>
#include <optional>

#include "splinemsm/dataset.hpp"
#include "splinemsm/model.hpp"

namespace splinemsm {

// Evaluation controls shared by the likelihood entry points.  grid_width
// switches on the fixed-grid refinement of the piecewise-constant
// approximation; n_threads > 1 evaluates individuals concurrently (the
// reduction order stays fixed, so results do not depend on the thread count).
struct EvalOptions {
  std::optional<double> grid_width;
  int n_threads = 1;
};

// Thread count from the SPLINEMSM_THREADS environment variable (default 1).
int env_thread_count();

// Log-likelihood contribution of a single observed interval.  For an
// ordinary interval this is log P_{y0,y1}(t0,t1).  For an exactly observed
// death (y1 = D with the death_exact flag) it is
//   log sum_s P_{y0,s}(t0,t1) q_{sD}(t0, x)
// over living states s with an allowed s->D transition, the intensity taken
// at the interval's left endpoint.  A pair the transition graph cannot
// produce raises ValidationError; a possible pair whose probability
// underflows at an extreme theta yields -inf so optimisers can reject the
// step (the derivative-bearing entry points raise NumericalError instead,
// since the score is undefined there).
double interval_contribution(const Model& model, const Eigen::VectorXd& theta,
                             double t0, int y0, const Eigen::VectorXd& x,
                             double t1, int y1, bool death_exact,
                             std::optional<double> grid_width = std::nullopt);

double loglik(const Model& model, const Eigen::VectorXd& theta,
              const PanelDataset& data, const EvalOptions& opts = {});

// loglik minus the quadratic roughness penalty theta' S_lambda theta / 2.
double pen_loglik(const Model& model, const Eigen::VectorXd& theta,
                  const PanelDataset& data, const Eigen::VectorXd& lambda,
                  const EvalOptions& opts = {});

// Unpenalised score (gradient of loglik in theta).
Eigen::VectorXd score(const Model& model, const Eigen::VectorXd& theta,
                      const PanelDataset& data, const EvalOptions& opts = {});

// Outer-product Fisher information approximation: the sum over observation
// intervals of u u' where u is that interval's contribution to the score.
Eigen::MatrixXd fisher_approx(const Model& model, const Eigen::VectorXd& theta,
                              const PanelDataset& data,
                              const EvalOptions& opts = {});

// One-pass evaluation of the loglik, score, and Fisher approximation.
struct LikelihoodParts {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd fisher;
};

LikelihoodParts likelihood_parts(const Model& model,
                                 const Eigen::VectorXd& theta,
                                 const PanelDataset& data,
                                 const EvalOptions& opts = {});

}  // namespace splinemsm
