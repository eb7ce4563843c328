#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "splinemsm/estimator.hpp"

namespace splinemsm {

// n draws from N(theta_hat, V_theta) via the symmetric square root of the
// covariance (negative eigenvalues within tolerance are clamped to zero;
// materially negative ones raise NumericalError).  Row m is draw m, fully
// determined by (seed, m).
Eigen::MatrixXd draw_params(const FitResult& fit, int n, std::uint64_t seed);

struct CiResult {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Simulation interval for a scalar function of the parameters: point value
// at theta_hat, empirical level/2 and 1-level/2 quantiles across the draws.
CiResult ci_of_function(const FitResult& fit,
                        const std::function<double(const Eigen::VectorXd&)>& f,
                        int n_sims = 1000, double level = 0.05,
                        std::uint64_t seed = 1);

// Entrywise simulation intervals for the transition probability matrix
// P(t0, t1) at covariates x, all entries sharing one set of draws.  Rows of
// absorbing states are exact with degenerate intervals.
struct MatrixPrediction {
  Eigen::MatrixXd point, lower, upper;
};

MatrixPrediction predict_interval_probs(const FitResult& fit, double t0,
                                        double t1, const Eigen::VectorXd& x,
                                        int n_sims = 1000, double level = 0.05,
                                        std::uint64_t seed = 1);

// Pointwise hazard curve for one transition on a strictly increasing time
// grid, with simulation intervals sharing draws across grid points.  Grid
// points beyond the spline's knot range use the linear extension of the
// log hazard; `extrapolated` reports whether that happened.
struct CurvePoint {
  double t = 0.0;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct HazardCurve {
  std::vector<CurvePoint> points;
  bool extrapolated = false;
};

HazardCurve hazard_curve(const FitResult& fit, int from, int to,
                         const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                         int n_sims = 1000, double level = 0.05,
                         std::uint64_t seed = 1);

}  // namespace splinemsm
