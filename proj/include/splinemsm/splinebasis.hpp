#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace splinemsm {

// Knot placement: K quantiles of the distinct supplied times at evenly
// spaced probabilities 0, 1/(K-1), ..., 1, using linear interpolation
// between order statistics.  Duplicates are collapsed first because panel
// observation times repeat the shared visit schedule, which would otherwise
// drag knots onto the common visit times.  Throws ValidationError when
// there are fewer distinct times than knots.
Eigen::VectorXd place_knots(std::span<const double> times, int n_knots);

// Natural cubic spline in value-at-knot form.  The coefficient vector holds
// the function values at the K knots; second derivatives at interior knots
// follow from the natural interpolation conditions (zero curvature at the
// boundary knots), so the basis has exactly K degrees of freedom.  Outside
// the knot range the function continues linearly.
//
// The curvature map is the solution of the tridiagonal system R m = C a,
// where a are the knot values, m the interior second derivatives,
//   R[i][i]   = (h_i + h_{i+1}) / 3,   R[i][i+1] = R[i+1][i] = h_{i+1} / 6,
//   C[i]      = (a_i/h_i) - a_{i+1}(1/h_i + 1/h_{i+1}) + (a_{i+2}/h_{i+1}),
// with h_i the knot spacings.  The same matrices give the exact integrated
// squared second derivative of the interpolant as the quadratic form
// a' C' R^{-1} C a, which is the roughness penalty used here.
class CubicSplineBasis {
 public:
  explicit CubicSplineBasis(Eigen::VectorXd knots);

  int dimension() const { return static_cast<int>(knots_.size()); }
  const Eigen::VectorXd& knots() const { return knots_; }

  // Row of basis values at t: f(t) = evaluate(t).dot(coefficients).
  Eigen::RowVectorXd evaluate(double t) const;

  // Stacked rows for several evaluation points.
  Eigen::MatrixXd evaluate_many(const Eigen::VectorXd& times) const;

  // K x K penalty matrix S with coef' S coef = integral of f''(t)^2 over the
  // knot range.  Symmetric positive semidefinite with a two-dimensional null
  // space (constant and linear coefficient vectors).
  const Eigen::MatrixXd& penalty() const { return penalty_; }

  // Map from knot values to second derivatives at all K knots (boundary rows
  // are zero).  Exposed for tests of continuity and curvature.
  const Eigen::MatrixXd& curvature_map() const { return curvature_; }

 private:
  Eigen::VectorXd knots_;
  Eigen::VectorXd h_;           // knot spacings, length K-1
  Eigen::MatrixXd curvature_;   // K x K, rows = second derivative at knot i
  Eigen::RowVectorXd slope_left_, slope_right_;  // boundary derivative rows
  Eigen::MatrixXd penalty_;
};

}  // namespace splinemsm
