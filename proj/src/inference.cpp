#include "splinemsm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "splinemsm/errors.hpp"
#include "splinemsm/markovcore.hpp"
#include "splinemsm/rng.hpp"
#include "splinemsm/stats.hpp"

namespace splinemsm {

namespace {

void check_request(int n_sims, double level) {
  if (n_sims < 2)
    throw ValidationError("inference: need at least 2 simulation draws");
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("inference: level must lie strictly in (0,1)");
}

CiResult interval_from_values(double point, std::vector<double> values,
                              double level) {
  std::sort(values.begin(), values.end());
  CiResult ci;
  ci.point = point;
  ci.lower = quantile_sorted(values, level / 2.0);
  ci.upper = quantile_sorted(values, 1.0 - level / 2.0);
  return ci;
}

}  // namespace

Eigen::MatrixXd draw_params(const FitResult& fit, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("draw_params: need n >= 1");
  const Eigen::Index q = fit.theta.size();
  if (fit.v_theta.rows() != q || fit.v_theta.cols() != q)
    throw ValidationError("draw_params: covariance shape mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      (fit.v_theta + fit.v_theta.transpose()) / 2.0);
  if (eig.info() != Eigen::Success)
    throw NumericalError("draw_params: eigendecomposition of V_theta failed");
  const double max_eig = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, max_eig))
    throw NumericalError("draw_params: V_theta is not positive semidefinite");
  const Eigen::VectorXd d = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd root = eig.eigenvectors() *
                               d.cwiseSqrt().asDiagonal() *
                               eig.eigenvectors().transpose();

  Eigen::MatrixXd draws(n, q);
  Eigen::VectorXd xi(q);
  for (int m = 0; m < n; ++m) {
    Rng rng(seed, static_cast<std::uint64_t>(m));
    for (Eigen::Index i = 0; i < q; ++i) xi[i] = rng.normal();
    draws.row(m) = (fit.theta + root * xi).transpose();
  }
  return draws;
}

CiResult ci_of_function(const FitResult& fit,
                        const std::function<double(const Eigen::VectorXd&)>& f,
                        int n_sims, double level, std::uint64_t seed) {
  check_request(n_sims, level);
  const Eigen::MatrixXd draws = draw_params(fit, n_sims, seed);
  std::vector<double> values(static_cast<std::size_t>(n_sims));
  for (int m = 0; m < n_sims; ++m)
    values[static_cast<std::size_t>(m)] = f(draws.row(m).transpose());
  return interval_from_values(f(fit.theta), std::move(values), level);
}

MatrixPrediction predict_interval_probs(const FitResult& fit, double t0,
                                        double t1, const Eigen::VectorXd& x,
                                        int n_sims, double level,
                                        std::uint64_t seed) {
  check_request(n_sims, level);
  const int D = fit.model.structure().n_states();

  MatrixPrediction out;
  out.point = interval_prob(fit.model, fit.theta, t0, t1, x, fit.grid_width);
  out.lower = Eigen::MatrixXd(D, D);
  out.upper = Eigen::MatrixXd(D, D);

  const Eigen::MatrixXd draws = draw_params(fit, n_sims, seed);
  std::vector<Eigen::MatrixXd> sims;
  sims.reserve(static_cast<std::size_t>(n_sims));
  for (int m = 0; m < n_sims; ++m)
    sims.push_back(interval_prob(fit.model, draws.row(m).transpose(), t0, t1,
                                 x, fit.grid_width));

  std::vector<double> values(static_cast<std::size_t>(n_sims));
  for (int r = 0; r < D; ++r) {
    if (fit.model.structure().is_absorbing(r + 1)) {
      out.point.row(r).setZero();
      out.point(r, r) = 1.0;
      out.lower.row(r) = out.point.row(r);
      out.upper.row(r) = out.point.row(r);
      continue;
    }
    for (int c = 0; c < D; ++c) {
      for (int m = 0; m < n_sims; ++m)
        values[static_cast<std::size_t>(m)] =
            sims[static_cast<std::size_t>(m)](r, c);
      const CiResult ci =
          interval_from_values(out.point(r, c), values, level);
      out.lower(r, c) = ci.lower;
      out.upper(r, c) = ci.upper;
    }
  }
  return out;
}

HazardCurve hazard_curve(const FitResult& fit, int from, int to,
                         const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                         int n_sims, double level, std::uint64_t seed) {
  check_request(n_sims, level);
  const int ti = fit.model.structure().transition_index(from, to);
  if (ti < 0)
    throw ValidationError("hazard_curve: transition " + std::to_string(from) +
                          "-" + std::to_string(to) + " is not in the model");
  if (grid.size() == 0)
    throw ValidationError("hazard_curve: empty time grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("hazard_curve: grid must increase strictly");

  HazardCurve curve;
  if (fit.model.baseline(ti).is_spline()) {
    const auto& knots = fit.model.baseline(ti).basis().knots();
    if (grid[0] < knots[0] || grid[grid.size() - 1] > knots[knots.size() - 1])
      curve.extrapolated = true;
  }

  const Eigen::MatrixXd draws = draw_params(fit, n_sims, seed);
  std::vector<double> values(static_cast<std::size_t>(n_sims));
  curve.points.reserve(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    for (int m = 0; m < n_sims; ++m)
      values[static_cast<std::size_t>(m)] =
          fit.model.hazard(draws.row(m).transpose(), ti, t, x);
    const CiResult ci = interval_from_values(
        fit.model.hazard(fit.theta, ti, t, x), values, level);
    curve.points.push_back({t, ci.point, ci.lower, ci.upper});
  }
  return curve;
}

}  // namespace splinemsm
