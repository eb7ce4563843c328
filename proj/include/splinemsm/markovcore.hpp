#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "splinemsm/model.hpp"

namespace splinemsm {

// Condition-number threshold above which an eigenvector matrix is considered
// too ill-conditioned for the spectral transition-probability path.
inline constexpr double kEigenConditionLimit = 1e8;

// Relative eigenvalue gap below which two eigenvalues are treated as equal
// when forming divided differences of the exponential.
inline constexpr double kEigenvalueGap = 1e-8;

// Tolerance for discarding imaginary parts, clamping small negative
// probabilities, and checking row sums.
inline constexpr double kProbTolerance = 1e-8;

// Generator matrix Q at (t, x): off-diagonal (r,s) entries are the transition
// intensities q_rs(t,x) for allowed transitions, zero otherwise; diagonal
// entries make every row sum to zero.
Eigen::MatrixXd build_generator(const Model& model,
                                const Eigen::VectorXd& theta, double t,
                                const Eigen::VectorXd& x);

// Derivative of the generator with respect to one coordinate of theta.  For
// an alpha or per-transition beta coordinate the result has nonzero entries
// only in the row of its transition; a shared beta coordinate contributes to
// every transition's row.
Eigen::MatrixXd dQ_dtheta(const Model& model, const Eigen::VectorXd& theta,
                          double t, const Eigen::VectorXd& x, int k);

// Eigendecomposition of a generator, Q = V diag(values) V^{-1}, with the
// condition number of V.  `usable` is false when the decomposition should not
// be trusted (ill-conditioned V or a failed solver), in which case callers
// fall back to scaling-and-squaring and finite differences.
struct GeneratorDecomposition {
  Eigen::MatrixXcd vectors;   // V
  Eigen::MatrixXcd inverse;   // V^{-1}
  Eigen::VectorXcd values;    // eigenvalues
  double condition = 0.0;
  bool usable = false;
};

GeneratorDecomposition decompose_generator(const Eigen::MatrixXd& Q);

// exp(dt * Q) through the decomposition.  Returns nullopt when the result is
// not acceptably real or not acceptably stochastic, signalling the caller to
// use the scaling-and-squaring path instead.
std::optional<Eigen::MatrixXd> transition_matrix_spectral(
    const GeneratorDecomposition& decomp, double dt);

// exp(dt * Q) by scaling and squaring with Pade approximants.
Eigen::MatrixXd transition_matrix_pade(const Eigen::MatrixXd& Q, double dt);

// exp(dt * Q) with automatic method choice and the stochasticity checks:
// entries below -1e-8 or row sums off by more than 1e-8 raise NumericalError,
// small violations are clamped.  dt must be >= 0.
Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& Q, double dt);

// Directional derivative of P = exp(dt Q) for a generator perturbation dQ,
// computed through the spectral decomposition: with G = V^{-1} dQ V and the
// divided-difference kernel
//   W_lm = (exp(b_l dt) - exp(b_m dt)) / (b_l - b_m),  W_ll = dt exp(b_l dt),
// the derivative is V (G o W) V^{-1} (o = elementwise product).  Throws
// NumericalError if the imaginary residue exceeds tolerance.
Eigen::MatrixXd dP_dtheta(const GeneratorDecomposition& decomp,
                          const Eigen::MatrixXd& dQ, double dt);

// Interval transition probability matrix P(t0, t1) under the
// piecewise-constant approximation: the generator is frozen at the left
// endpoint of each sub-interval.  Without a grid width the whole interval is
// one piece; with grid width h it is split into ceil((t1-t0)/h) equal pieces.
Eigen::MatrixXd interval_prob(const Model& model, const Eigen::VectorXd& theta,
                              double t0, double t1, const Eigen::VectorXd& x,
                              std::optional<double> grid_width = std::nullopt);

// Interval probabilities together with derivatives with respect to every
// model parameter (product rule across grid pieces).  Falls back to central
// finite differences on pieces whose eigendecomposition is unusable.
struct IntervalDerivatives {
  Eigen::MatrixXd prob;                 // D x D
  std::vector<Eigen::MatrixXd> dprob;   // n_params matrices, D x D
};

IntervalDerivatives interval_prob_derivs(
    const Model& model, const Eigen::VectorXd& theta, double t0, double t1,
    const Eigen::VectorXd& x, std::optional<double> grid_width = std::nullopt);

}  // namespace splinemsm
