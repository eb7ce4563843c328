#include <doctest.h>

#include <cmath>
#include <vector>

#include "splinemsm/rng.hpp"
#include "splinemsm/stats.hpp"
#include "support.hpp"

using namespace splinemsm;

TEST_SUITE("rngstats") {

TEST_CASE("rng is deterministic per (seed, stream)") {
  Rng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool same = true, diff_stream = false, diff_seed = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t ra = a.raw();
    same = same && (ra == b.raw());
    diff_stream = diff_stream || (ra != c.raw());
    diff_seed = diff_seed || (ra != d.raw());
  }
  CHECK(same);
  CHECK(diff_stream);
  CHECK(diff_seed);
}

TEST_CASE("uniforms lie strictly inside (0,1) and look uniform") {
  Rng rng(123);
  const int n = 10000;
  std::vector<double> u(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    u[static_cast<std::size_t>(i)] = rng.uniform();
    CHECK(u[static_cast<std::size_t>(i)] > 0.0);
    CHECK(u[static_cast<std::size_t>(i)] < 1.0);
    mean += u[static_cast<std::size_t>(i)];
  }
  mean /= n;
  CHECK(std::abs(mean - 0.5) < 0.012);  // 4 sigma at n = 1e4
  const double ks =
      testsupport::ks_statistic(u, [](double x) { return x; });
  CHECK(ks < 0.02);
}

TEST_CASE("normal draws match the standard normal distribution") {
  Rng rng(321);
  const int n = 20000;
  std::vector<double> z(n);
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    z[static_cast<std::size_t>(i)] = rng.normal();
    mean += z[static_cast<std::size_t>(i)];
    sq += z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
  }
  mean /= n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sd - 1.0) < 0.03);
  const double ks = testsupport::ks_statistic(z, normal_cdf);
  CHECK(ks < 0.015);
}

TEST_CASE("normal quantile and CDF agree with reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(normal_quantile(0.123)) == doctest::Approx(0.123).epsilon(1e-12));
}

TEST_CASE("sample quantiles interpolate order statistics") {
  // Reference values from the linear-interpolation definition h = (n-1)p.
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(quantile_sorted(x, 0.25) == doctest::Approx(3.25).epsilon(1e-14));
  CHECK(quantile_sorted(x, 0.1) == doctest::Approx(1.9).epsilon(1e-14));
  CHECK(quantile_sorted(x, 0.0) == doctest::Approx(1.0));
  CHECK(quantile_sorted(x, 1.0) == doctest::Approx(10.0));

  std::vector<double> two{3.0, 5.0};
  CHECK(quantile_sorted(two, 0.5) == doctest::Approx(4.0));
  std::vector<double> one{7.0};
  CHECK(quantile_sorted(one, 0.3) == doctest::Approx(7.0));

  const auto qs = quantiles({5.0, 1.0, 3.0, 2.0, 4.0}, {0.5, 0.75});
  CHECK(qs[0] == doctest::Approx(3.0));
  CHECK(qs[1] == doctest::Approx(4.0));
}

}  // TEST_SUITE
