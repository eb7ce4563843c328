#pragma once

// Shared fixtures and independent numerical oracles for the test suite.  The
// oracles deliberately avoid the production code paths: the matrix
// exponential here is a plain Taylor series, gradients come from central
// differences, and reference distributions use textbook formulas.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splinemsm/dataset.hpp"
#include "splinemsm/model.hpp"
#include "splinemsm/rng.hpp"
#include "splinemsm/splinebasis.hpp"

namespace testsupport {

using splinemsm::Baseline;
using splinemsm::CubicSplineBasis;
using splinemsm::Individual;
using splinemsm::Model;
using splinemsm::PanelDataset;
using splinemsm::Rng;
using splinemsm::TransitionStructure;

// Matrix exponential by scaling and squaring of a truncated Taylor series.
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& A) {
  int s = 0;
  double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++s;
  }
  const Eigen::MatrixXd B = A / std::pow(2.0, s);
  Eigen::MatrixXd term =
      Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * B) / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    const double up = f(xp);
    xp[k] = x[k] - h;
    const double down = f(xp);
    xp[k] = x[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// Relative disagreement with a unit floor, so near-zero references compare
// absolutely.
inline double rel_err(double got, double want, double floor_at = 1.0) {
  return std::abs(got - want) / std::max(floor_at, std::abs(want));
}

inline double max_rel_err(const Eigen::VectorXd& got,
                          const Eigen::VectorXd& want, double floor_at = 1.0) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < got.size(); ++k)
    worst = std::max(worst, rel_err(got[k], want[k], floor_at));
  return worst;
}

// Closed-form transition matrix of the progressive three-state model with
// constant intensities q12, q13, q23 (states: healthy, ill, dead), assuming
// q12 + q13 != q23.
inline Eigen::MatrixXd progressive_matrix(double q12, double q13, double q23,
                                          double t) {
  const double q1 = q12 + q13;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3, 3);
  P(0, 0) = std::exp(-q1 * t);
  P(1, 1) = std::exp(-q23 * t);
  P(0, 1) = q12 * (std::exp(-q23 * t) - std::exp(-q1 * t)) / (q1 - q23);
  P(0, 2) = 1.0 - P(0, 0) - P(0, 1);
  P(1, 2) = 1.0 - P(1, 1);
  P(2, 2) = 1.0;
  return P;
}

// Composite Simpson quadrature on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int n = 2000) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i)
    sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - F));
    d = std::max(d, std::abs(static_cast<double>(i) / n - F));
  }
  return d;
}

inline TransitionStructure illness_death(
    std::vector<std::string> covariates = {}) {
  return TransitionStructure(3, {{1, 2}, {1, 3}, {2, 3}},
                             std::move(covariates));
}

inline Model constant_model(const TransitionStructure& structure,
                            bool share_beta = false) {
  std::vector<Baseline> baselines(
      static_cast<std::size_t>(structure.n_transitions()),
      Baseline::constant());
  return Model(structure, std::move(baselines), share_beta);
}

// All-spline model with one common set of equally spaced knots.
inline Model spline_model(const TransitionStructure& structure, int n_knots,
                          double t_max, bool share_beta = false) {
  const Eigen::VectorXd knots =
      Eigen::VectorXd::LinSpaced(n_knots, 0.0, t_max);
  std::vector<Baseline> baselines;
  for (int i = 0; i < structure.n_transitions(); ++i)
    baselines.push_back(Baseline::spline(knots));
  return Model(structure, std::move(baselines), share_beta);
}

// Random parameter vector: alpha coordinates near log(0.3), betas near zero.
inline Eigen::VectorXd random_theta(const Model& model, Rng& rng,
                                    double alpha_sd = 0.3,
                                    double beta_sd = 0.3) {
  const int q = model.n_params();
  Eigen::VectorXd theta(q);
  for (int k = 0; k < q; ++k) theta[k] = beta_sd * rng.normal();
  for (int ti = 0; ti < model.structure().n_transitions(); ++ti)
    for (int j = 0; j < model.alpha_dim(ti); ++j)
      theta[model.alpha_offset(ti) + j] =
          std::log(0.3) + alpha_sd * rng.normal();
  return theta;
}

// Panel data from a time-homogeneous Markov chain on the given structure
// (whose last state must be absorbing), observed at slightly irregular visit
// times.  Covariates are constant per individual; the generating intensities
// ignore them, which is fine for likelihood identities that only require the
// observed pairs to be structurally possible.
inline PanelDataset random_panel(const TransitionStructure& structure,
                                 int n_individuals, Rng& rng,
                                 double visit_gap = 1.0, int max_visits = 6,
                                 bool exact_death = false,
                                 double base_rate = 0.3) {
  const int D = structure.n_states();
  const int p = structure.n_covariates();
  const int n_tr = structure.n_transitions();

  std::vector<double> rates(static_cast<std::size_t>(n_tr));
  for (int ti = 0; ti < n_tr; ++ti)
    rates[static_cast<std::size_t>(ti)] =
        base_rate * std::exp(0.5 * rng.normal());

  std::vector<Individual> individuals;
  for (int i = 0; i < n_individuals; ++i) {
    Eigen::RowVectorXd xrow(p);
    for (int m = 0; m < p; ++m) xrow[m] = 0.7 * rng.normal();

    // Exact event-time path of the chain, truncated at the last visit.
    int state = 1;
    double now = 0.0;
    std::vector<std::pair<double, int>> events{{0.0, 1}};
    const double horizon = visit_gap * (max_visits + 1);
    while (!structure.is_absorbing(state)) {
      double total = 0.0;
      for (int ti = 0; ti < n_tr; ++ti)
        if (structure.transitions()[static_cast<std::size_t>(ti)].first ==
            state)
          total += rates[static_cast<std::size_t>(ti)];
      if (total <= 0.0) break;
      now += -std::log(rng.uniform()) / total;
      if (now > horizon) break;
      double pick = rng.uniform() * total;
      int next = state;
      for (int ti = 0; ti < n_tr; ++ti) {
        const auto& [r, s] = structure.transitions()[static_cast<std::size_t>(ti)];
        if (r != state) continue;
        pick -= rates[static_cast<std::size_t>(ti)];
        if (pick <= 0.0) {
          next = s;
          break;
        }
      }
      if (next == state) break;
      state = next;
      events.emplace_back(now, state);
    }

    const bool died = events.back().second == D && events.back().first > 0.0;
    const double death_time = died ? events.back().first : 0.0;

    Individual ind;
    ind.id = "r" + std::to_string(1000 + i);
    double visit = 0.0;
    for (int v = 0; v <= max_visits; ++v) {
      if (died && exact_death && visit >= death_time) break;
      int occupied = 1;
      for (const auto& [te, se] : events)
        if (te <= visit) occupied = se;
      ind.times.push_back(visit);
      ind.states.push_back(occupied);
      if (occupied == D) break;
      visit += visit_gap * (0.5 + rng.uniform());
    }
    if (died && exact_death && (ind.states.empty() || ind.states.back() != D)) {
      ind.times.push_back(death_time);
      ind.states.push_back(D);
      ind.death_exact = true;
    }
    if (ind.times.size() < 2) {
      ind.times = {0.0, visit_gap};
      ind.states = {1, 1};
      ind.death_exact = false;
    }
    ind.covariates = xrow.replicate(static_cast<Eigen::Index>(ind.times.size()), 1);
    individuals.push_back(std::move(ind));
  }
  return PanelDataset(std::move(individuals), D, structure.covariate_names());
}

}  // namespace testsupport
