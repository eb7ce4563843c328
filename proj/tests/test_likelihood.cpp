#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "splinemsm/errors.hpp"
#include "splinemsm/likelihood.hpp"
#include "splinemsm/rng.hpp"
#include "support.hpp"

using namespace splinemsm;
using testsupport::fd_gradient;
using testsupport::illness_death;
using testsupport::progressive_matrix;
using testsupport::random_panel;
using testsupport::random_theta;

namespace {

Individual simple_individual(std::string id, std::vector<double> times,
                             std::vector<int> states, bool death_exact = false,
                             int p = 0) {
  Individual ind;
  ind.id = std::move(id);
  ind.covariates =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), p);
  ind.times = std::move(times);
  ind.states = std::move(states);
  ind.death_exact = death_exact;
  return ind;
}

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("two-state survival interval has the textbook log probability") {
  TransitionStructure structure(2, {{1, 2}});
  Model model = testsupport::constant_model(structure);
  Eigen::VectorXd theta(1);
  theta << std::log(0.5);

  PanelDataset data({simple_individual("a", {0.0, 1.0}, {1, 1})}, 2);
  CHECK(loglik(model, theta, data) == doctest::Approx(-0.5).epsilon(1e-12));

  const Eigen::VectorXd x(0);
  CHECK(interval_contribution(model, theta, 0.0, 1, x, 1.0, 1, false) ==
        doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("exactly observed death sums paths into the death intensity") {
  const double q12 = 0.4, q13 = 0.15, q23 = 0.6;
  Model model = testsupport::constant_model(illness_death());
  Eigen::VectorXd theta(3);
  theta << std::log(q12), std::log(q13), std::log(q23);

  PanelDataset data({simple_individual("a", {0.0, 2.0, 3.7}, {1, 1, 3}, true)},
                    3);

  const Eigen::MatrixXd P1 = progressive_matrix(q12, q13, q23, 2.0);
  const Eigen::MatrixXd P2 = progressive_matrix(q12, q13, q23, 1.7);
  // Survive (0,2] in state 1, then exact death at 3.7: the dead state can be
  // entered directly (intensity q13) or through an unobserved illness
  // (intensity q23), both evaluated at the interval's left endpoint.
  const double expected =
      std::log(P1(0, 0)) + std::log(P2(0, 0) * q13 + P2(0, 1) * q23);
  CHECK(loglik(model, theta, data) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("log-likelihood is additive over individuals") {
  Rng rng(41);
  Model model = testsupport::constant_model(illness_death());
  const Eigen::VectorXd theta = random_theta(model, rng);

  auto a = simple_individual("a", {0.0, 1.0, 2.5}, {1, 1, 2});
  auto b = simple_individual("b", {0.0, 2.0}, {1, 3});
  PanelDataset da({a}, 3), db({b}, 3), dab({a, b}, 3);
  CHECK(loglik(model, theta, dab) ==
        doctest::Approx(loglik(model, theta, da) + loglik(model, theta, db))
            .epsilon(1e-12));
}

TEST_CASE("individual order does not change the result") {
  Rng rng(42);
  const auto structure = illness_death();
  Model model = testsupport::spline_model(structure, 4, 6.0);
  const Eigen::VectorXd theta = random_theta(model, rng);
  PanelDataset data = random_panel(structure, 12, rng);

  auto shuffled = data.individuals();
  std::reverse(shuffled.begin(), shuffled.end());
  PanelDataset again(shuffled, 3);
  // Construction re-sorts by id, so accumulation order is identical.
  CHECK(loglik(model, theta, data) == loglik(model, theta, again));
}

TEST_CASE("threaded evaluation reproduces the serial result") {
  Rng rng(43);
  const auto structure = illness_death({"z"});
  Model model = testsupport::spline_model(structure, 4, 6.0);
  const Eigen::VectorXd theta = random_theta(model, rng);
  PanelDataset data = random_panel(structure, 15, rng, 1.0, 5, true);

  const LikelihoodParts serial = likelihood_parts(model, theta, data, {});
  const LikelihoodParts threaded =
      likelihood_parts(model, theta, data, {std::nullopt, 3});
  CHECK(serial.loglik == threaded.loglik);
  CHECK((serial.score - threaded.score).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.fisher - threaded.fisher).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("score matches finite differences across model variants") {
  Rng rng(44);
  struct Variant {
    bool spline;
    bool share;
    bool exact_death;
    std::optional<double> grid;
  };
  const std::vector<Variant> variants{
      {false, false, false, std::nullopt},
      {true, false, true, std::nullopt},
      {true, true, true, std::optional<double>(0.7)},
      {false, true, false, std::optional<double>(1.3)},
  };
  for (const auto& v : variants) {
    const auto structure = illness_death({"age", "trt"});
    Model model = v.spline
                      ? testsupport::spline_model(structure, 4, 8.0, v.share)
                      : testsupport::constant_model(structure, v.share);
    const Eigen::VectorXd theta = random_theta(model, rng);
    PanelDataset data = random_panel(structure, 20, rng, 1.0, 6, v.exact_death);

    const EvalOptions opts{v.grid, 1};
    const Eigen::VectorXd analytic = score(model, theta, data, opts);
    const Eigen::VectorXd fd = fd_gradient(
        [&](const Eigen::VectorXd& th) { return loglik(model, th, data, opts); },
        theta);
    CHECK(testsupport::max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("penalised score is the score minus the penalty gradient") {
  Rng rng(45);
  const auto structure = illness_death();
  Model model = testsupport::spline_model(structure, 4, 6.0);
  const Eigen::VectorXd theta = random_theta(model, rng);
  PanelDataset data = random_panel(structure, 15, rng);
  Eigen::VectorXd lambda(3);
  lambda << 2.0, 0.5, 7.0;

  const Eigen::MatrixXd S = model.penalty_matrix(lambda);
  const Eigen::VectorXd analytic = score(model, theta, data) - S * theta;
  const Eigen::VectorXd fd = fd_gradient(
      [&](const Eigen::VectorXd& th) {
        return pen_loglik(model, th, data, lambda);
      },
      theta);
  CHECK(testsupport::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("the penalty is the blockwise quadratic form") {
  Rng rng(46);
  const auto structure = illness_death();
  Model model = testsupport::spline_model(structure, 5, 6.0);
  const Eigen::VectorXd theta = random_theta(model, rng);
  PanelDataset data = random_panel(structure, 8, rng);
  Eigen::VectorXd lambda(3);
  lambda << 1.5, 3.0, 0.25;

  double penalty = 0.0;
  for (std::size_t b = 0; b < model.spline_transitions().size(); ++b) {
    const int ti = model.spline_transitions()[b];
    const Eigen::VectorXd alpha =
        theta.segment(model.alpha_offset(ti), model.alpha_dim(ti));
    penalty += lambda[static_cast<Eigen::Index>(b)] *
               alpha.dot(model.penalty_block(ti) * alpha);
  }
  CHECK(pen_loglik(model, theta, data, lambda) ==
        doctest::Approx(loglik(model, theta, data) - 0.5 * penalty)
            .epsilon(1e-12));

  // Linear log-hazards escape the penalty entirely.
  Eigen::VectorXd linear = Eigen::VectorXd::Zero(model.n_params());
  for (std::size_t b = 0; b < model.spline_transitions().size(); ++b) {
    const int ti = model.spline_transitions()[b];
    const auto& knots = model.baseline(ti).basis().knots();
    linear.segment(model.alpha_offset(ti), model.alpha_dim(ti)) =
        (-2.0 + 0.1 * knots.array()).matrix();
  }
  CHECK(pen_loglik(model, linear, data, lambda) ==
        doctest::Approx(loglik(model, linear, data)).epsilon(1e-10));
}

TEST_CASE("structurally impossible observations raise a validation error") {
  Model model = testsupport::constant_model(illness_death());
  Eigen::VectorXd theta(3);
  theta << -1.0, -1.5, -0.5;

  // Recovery 2 -> 1 cannot happen under the illness-death structure.
  PanelDataset data({simple_individual("bad", {0.0, 1.0, 2.0}, {1, 2, 1})}, 3);
  CHECK_THROWS_WITH_AS(loglik(model, theta, data),
                       doctest::Contains("individual 'bad'"), ValidationError);

  const Eigen::VectorXd x(0);
  CHECK_THROWS_AS(
      interval_contribution(model, theta, 0.0, 2, x, 1.0, 1, false),
      ValidationError);
  // Starting in the absorbing state is rejected up front.
  CHECK_THROWS_AS(
      interval_contribution(model, theta, 0.0, 3, x, 1.0, 3, false),
      ValidationError);
  // Exact-death intervals must end in the death state.
  CHECK_THROWS_AS(
      interval_contribution(model, theta, 0.0, 1, x, 1.0, 2, true),
      ValidationError);
  CHECK_THROWS_AS(
      interval_contribution(model, theta, 1.0, 1, x, 1.0, 2, false),
      ValidationError);
}

TEST_CASE("reachability follows the transition graph") {
  TransitionStructure id = illness_death();
  CHECK(id.reachable(1, 1));
  CHECK(id.reachable(1, 2));
  CHECK(id.reachable(1, 3));
  CHECK(id.reachable(2, 3));
  CHECK_FALSE(id.reachable(2, 1));
  CHECK_FALSE(id.reachable(3, 1));
  CHECK_FALSE(id.reachable(0, 1));
  CHECK_FALSE(id.reachable(1, 4));

  // Multi-hop chains count; disconnected components do not.
  TransitionStructure chain(5, {{1, 2}, {2, 3}, {3, 4}});
  CHECK(chain.reachable(1, 4));
  CHECK_FALSE(chain.reachable(1, 5));
  CHECK_FALSE(chain.reachable(4, 1));
}

TEST_CASE("underflowed probabilities of possible pairs are -inf, not errors") {
  // A log-hazard of 100 makes exp(-integral) flush to exactly zero over a
  // unit interval; the pair 1 -> 1 stays structurally possible throughout.
  TransitionStructure structure(2, {{1, 2}});
  Model model = testsupport::constant_model(structure);
  Eigen::VectorXd theta(1);
  theta << 100.0;
  const Eigen::VectorXd x(0);

  const double c = interval_contribution(model, theta, 0.0, 1, x, 1.0, 1, false);
  CHECK(std::isinf(c));
  CHECK(c < 0.0);

  PanelDataset data({simple_individual("a", {0.0, 1.0}, {1, 1})}, 2);
  CHECK(loglik(model, theta, data) == -std::numeric_limits<double>::infinity());
  // The score is undefined where the probability collapsed.
  CHECK_THROWS_AS(likelihood_parts(model, theta, data), NumericalError);

  // Sane theta on the same data stays finite, so the collapse is attributable
  // to the parameter value alone.
  theta << std::log(0.5);
  CHECK(std::isfinite(loglik(model, theta, data)));
}

TEST_CASE("an exact death no allowed path can explain is still an error") {
  // State 3 owns the only transition into 4 and cannot be reached from 1.
  TransitionStructure structure(4, {{1, 2}, {3, 4}});
  Model model = testsupport::constant_model(structure);
  Eigen::VectorXd theta(2);
  theta << -1.0, -1.0;
  const Eigen::VectorXd x(0);
  CHECK_THROWS_AS(interval_contribution(model, theta, 0.0, 1, x, 1.0, 4, true),
                  ValidationError);
}

TEST_CASE("fisher approximation is symmetric positive semidefinite") {
  Rng rng(47);
  const auto structure = illness_death({"z"});
  Model model = testsupport::spline_model(structure, 4, 6.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd theta = random_theta(model, rng);
    PanelDataset data = random_panel(structure, 12, rng, 1.0, 5, rep % 2 == 1);
    const Eigen::MatrixXd M = fisher_approx(model, theta, data);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    CHECK(eig.eigenvalues().minCoeff() >
          -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("a single-interval Fisher term is the score outer product") {
  Rng rng(48);
  Model model = testsupport::constant_model(illness_death());
  const Eigen::VectorXd theta = random_theta(model, rng);
  PanelDataset data({simple_individual("a", {0.0, 1.5}, {1, 2})}, 3);
  const LikelihoodParts parts = likelihood_parts(model, theta, data);
  const Eigen::MatrixXd outer = parts.score * parts.score.transpose();
  CHECK((parts.fisher - outer).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generating parameters beat perturbed ones on fresh data") {
  Rng rng(49);
  const auto structure = illness_death();
  Model model = testsupport::constant_model(structure);
  int wins = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    Rng local(900 + rep);
    // random_panel draws its generating rates from `local` first, so recover
    // the matching truth before the individuals are generated.
    std::vector<double> rates(3);
    Rng preview(900 + rep);
    for (auto& r : rates) r = 0.3 * std::exp(0.5 * preview.normal());
    PanelDataset data = random_panel(structure, 100, local, 1.0, 5, true);

    Eigen::VectorXd truth(3);
    truth << std::log(rates[0]), std::log(rates[1]), std::log(rates[2]);
    Eigen::VectorXd perturbed = truth;
    for (int k = 0; k < 3; ++k) perturbed[k] += 0.6 * rng.normal();
    if (loglik(model, truth, data) > loglik(model, perturbed, data)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("model and dataset shape mismatches are rejected") {
  Model model = testsupport::constant_model(illness_death());
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, -1.0);
  PanelDataset two_state({simple_individual("a", {0.0, 1.0}, {1, 2})}, 2);
  CHECK_THROWS_AS(loglik(model, theta, two_state), ValidationError);

  Model with_cov = testsupport::constant_model(illness_death({"z"}));
  PanelDataset no_cov({simple_individual("a", {0.0, 1.0}, {1, 2})}, 3);
  CHECK_THROWS_AS(
      loglik(with_cov, Eigen::VectorXd::Constant(6, -1.0), no_cov),
      ValidationError);
}

}  // TEST_SUITE
