#pragma once

#include <Eigen/Dense>
#include <vector>

namespace splinemsm {

// Standard normal quantile function (inverse CDF).
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

// Linear-interpolation sample quantile (the common "type 7" definition:
// h = (n-1)p, interpolate between order statistics floor(h) and floor(h)+1).
// `sorted` must be ascending; p in [0,1].
double quantile_sorted(const std::vector<double>& sorted, double p);

// Convenience: sorts a copy and evaluates several probabilities.
std::vector<double> quantiles(std::vector<double> values,
                              const std::vector<double>& probs);

}  // namespace splinemsm
