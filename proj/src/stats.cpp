#include "splinemsm/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "splinemsm/errors.hpp"
#include "splinemsm/rng.hpp"

namespace splinemsm {

namespace {
const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("normal_quantile: p must lie strictly in (0,1)");
  return boost::math::quantile(kStdNormal, p);
}

double normal_cdf(double x) { return boost::math::cdf(kStdNormal, x); }

double Rng::normal() { return boost::math::quantile(kStdNormal, uniform()); }

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty())
    throw ValidationError("quantile_sorted: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("quantile_sorted: p must lie in [0,1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> quantiles(std::vector<double> values,
                              const std::vector<double>& probs) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile_sorted(values, p));
  return out;
}

}  // namespace splinemsm
