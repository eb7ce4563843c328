#include "splinemsm/splinebasis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "splinemsm/errors.hpp"
#include "splinemsm/stats.hpp"

namespace splinemsm {

Eigen::VectorXd place_knots(std::span<const double> times, int n_knots) {
  if (n_knots < 3)
    throw ValidationError("place_knots: need at least 3 knots");
  if (times.empty())
    throw ValidationError("place_knots: no observation times supplied");
  std::vector<double> sorted(times.begin(), times.end());
  for (double t : sorted)
    if (!std::isfinite(t))
      throw ValidationError("place_knots: non-finite observation time");
  std::sort(sorted.begin(), sorted.end());
  // Panel data repeats the shared visit schedule (everyone is observed at
  // time zero, most at the same follow-up times), so quantiles are taken
  // over the distinct times; repetition carries no weight.
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (static_cast<int>(sorted.size()) < n_knots) {
    std::ostringstream msg;
    msg << "place_knots: " << sorted.size()
        << " distinct observation times cannot support " << n_knots
        << " knots";
    throw ValidationError(msg.str());
  }

  Eigen::VectorXd knots(n_knots);
  for (int k = 0; k < n_knots; ++k) {
    const double p = static_cast<double>(k) / (n_knots - 1);
    knots[k] = quantile_sorted(sorted, p);
  }
  for (int k = 1; k < n_knots; ++k) {
    if (!(knots[k] > knots[k - 1])) {
      std::ostringstream msg;
      msg << "place_knots: observation times give degenerate knots (" << n_knots
          << " requested, quantiles " << knots[k - 1] << " and " << knots[k]
          << " coincide); too few distinct times";
      throw ValidationError(msg.str());
    }
  }
  return knots;
}

CubicSplineBasis::CubicSplineBasis(Eigen::VectorXd knots)
    : knots_(std::move(knots)) {
  const int K = static_cast<int>(knots_.size());
  if (K < 3) throw ValidationError("CubicSplineBasis: need at least 3 knots");
  for (int k = 0; k < K; ++k) {
    if (!std::isfinite(knots_[k]))
      throw ValidationError("CubicSplineBasis: non-finite knot");
    if (k > 0 && !(knots_[k] > knots_[k - 1]))
      throw ValidationError("CubicSplineBasis: knots must increase strictly");
  }

  h_ = knots_.tail(K - 1) - knots_.head(K - 1);
  const int ni = K - 2;  // interior knots

  // R (ni x ni, symmetric tridiagonal) and C (ni x K, banded) from the
  // natural-spline interpolation equations.
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(ni, ni);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ni, K);
  for (int i = 0; i < ni; ++i) {
    R(i, i) = (h_[i] + h_[i + 1]) / 3.0;
    if (i + 1 < ni) {
      R(i, i + 1) = h_[i + 1] / 6.0;
      R(i + 1, i) = h_[i + 1] / 6.0;
    }
    C(i, i) = 1.0 / h_[i];
    C(i, i + 1) = -1.0 / h_[i] - 1.0 / h_[i + 1];
    C(i, i + 2) = 1.0 / h_[i + 1];
  }

  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw NumericalError("CubicSplineBasis: interpolation system not SPD");

  // Interior curvature rows and the exact roughness penalty C' R^{-1} C.
  const Eigen::MatrixXd inner = llt.solve(C);  // ni x K
  curvature_ = Eigen::MatrixXd::Zero(K, K);
  curvature_.block(1, 0, ni, K) = inner;
  penalty_ = C.transpose() * inner;
  penalty_ = ((penalty_ + penalty_.transpose()) / 2.0).eval();

  // One-sided first derivatives at the boundary knots, as rows acting on the
  // coefficient vector; used for linear extrapolation.
  slope_left_ = -(h_[0] / 6.0) * curvature_.row(1);
  slope_left_[0] -= 1.0 / h_[0];
  slope_left_[1] += 1.0 / h_[0];
  slope_right_ = (h_[K - 2] / 6.0) * curvature_.row(K - 2);
  slope_right_[K - 2] -= 1.0 / h_[K - 2];
  slope_right_[K - 1] += 1.0 / h_[K - 2];
}

Eigen::RowVectorXd CubicSplineBasis::evaluate(double t) const {
  if (!std::isfinite(t))
    throw ValidationError("CubicSplineBasis: non-finite evaluation point");
  const int K = dimension();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(K);

  if (t <= knots_[0]) {
    row[0] = 1.0;
    row += (t - knots_[0]) * slope_left_;
    return row;
  }
  if (t >= knots_[K - 1]) {
    row[K - 1] = 1.0;
    row += (t - knots_[K - 1]) * slope_right_;
    return row;
  }

  // Locate the interval [knot_k, knot_{k+1}) containing t.
  const double* begin = knots_.data();
  int k = static_cast<int>(std::upper_bound(begin, begin + K, t) - begin) - 1;
  k = std::min(std::max(k, 0), K - 2);

  const double h = h_[k];
  const double u = (t - knots_[k]) / h;
  const double v = 1.0 - u;
  row[k] += v;
  row[k + 1] += u;
  const double scale = h * h / 6.0;
  row += scale * ((v * v * v - v) * curvature_.row(k) +
                  (u * u * u - u) * curvature_.row(k + 1));
  return row;
}

Eigen::MatrixXd CubicSplineBasis::evaluate_many(
    const Eigen::VectorXd& times) const {
  Eigen::MatrixXd out(times.size(), dimension());
  for (Eigen::Index i = 0; i < times.size(); ++i)
    out.row(i) = evaluate(times[i]);
  return out;
}

}  // namespace splinemsm
