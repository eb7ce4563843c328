#include "splinemsm/likelihood.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "splinemsm/errors.hpp"
#include "splinemsm/markovcore.hpp"

namespace splinemsm {

int env_thread_count() {
  const char* raw = std::getenv("SPLINEMSM_THREADS");
  if (raw == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || n < 1) return 1;
  return static_cast<int>(n);
}

namespace {

void check_compat(const Model& model, const PanelDataset& data) {
  if (data.n_states() != model.structure().n_states())
    throw ValidationError("likelihood: dataset and model disagree on the state count");
  if (data.n_covariates() != model.n_covariates())
    throw ValidationError(
        "likelihood: dataset and model disagree on the covariate count");
}

[[noreturn]] void throw_impossible(int y0, int y1, const std::string& context) {
  std::ostringstream msg;
  msg << "likelihood: observed pair " << y0 << "->" << y1
      << " has probability <= 0 under the model structure (" << context << ")";
  throw ValidationError(msg.str());
}

// Whether the observed pair can carry positive probability for some theta:
// y1 must be reachable from y0 through allowed transitions, or for an exact
// death time some state with a transition into D must be.
bool structurally_possible(const TransitionStructure& st, int y0, int y1,
                           bool death_exact) {
  if (!death_exact) return st.reachable(y0, y1);
  const int D = st.n_states();
  for (int s = 1; s < D; ++s)
    if (st.transition_index(s, D) >= 0 && st.reachable(y0, s)) return true;
  return false;
}

// A nonpositive interval probability has two very different causes: the
// transition graph simply cannot produce the pair (a data/model mismatch,
// always an error), or theta is extreme enough that a possible pair's
// probability underflowed, which a line search must see as -inf so it can
// back the step off.
double nonpositive_contribution(const Model& model, int y0, int y1,
                                bool death_exact, const std::string& context,
                                bool with_derivs) {
  if (!structurally_possible(model.structure(), y0, y1, death_exact))
    throw_impossible(y0, y1, context);
  if (with_derivs)
    throw NumericalError(
        "likelihood: interval probability underflowed to zero at this theta (" +
        context + "); score undefined here");
  return -std::numeric_limits<double>::infinity();
}

// Log contribution of one interval; when `u` is non-null, also adds the
// interval's score vector into it (u must be zero-initialised, length q).
double eval_interval(const Model& model, const Eigen::VectorXd& theta,
                     double t0, int y0, const Eigen::VectorXd& x, double t1,
                     int y1, bool death_exact, std::optional<double> grid_width,
                     const std::string& context, Eigen::VectorXd* u) {
  const int D = model.structure().n_states();
  const int a = y0 - 1;
  const int p = model.n_covariates();

  if (u == nullptr) {
    const Eigen::MatrixXd P =
        interval_prob(model, theta, t0, t1, x, grid_width);
    double c = 0.0;
    if (death_exact) {
      for (int s = 1; s < D; ++s) {
        const int ti = model.structure().transition_index(s, D);
        if (ti < 0) continue;
        c += P(a, s - 1) * model.hazard(theta, ti, t0, x);
      }
    } else {
      c = P(a, y1 - 1);
    }
    if (!(c > 0.0))
      return nonpositive_contribution(model, y0, y1, death_exact, context,
                                      false);
    return std::log(c);
  }

  const IntervalDerivatives d =
      interval_prob_derivs(model, theta, t0, t1, x, grid_width);
  const int q = model.n_params();
  double c = 0.0;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(q);
  if (death_exact) {
    for (int s = 1; s < D; ++s) {
      const int ti = model.structure().transition_index(s, D);
      if (ti < 0) continue;
      const double haz = model.hazard(theta, ti, t0, x);
      const double mass = d.prob(a, s - 1);
      c += mass * haz;
      // Product rule: the dP part for every coordinate, then the dq part on
      // the coordinates of the s->D intensity itself.
      for (int k = 0; k < q; ++k)
        dc[k] += d.dprob[static_cast<std::size_t>(k)](a, s - 1) * haz;
      const Eigen::RowVectorXd row = model.baseline(ti).design_row(t0);
      const int a_off = model.alpha_offset(ti);
      for (int j = 0; j < model.alpha_dim(ti); ++j)
        dc[a_off + j] += mass * haz * row[j];
      if (p > 0) {
        const int b_off = model.beta_offset(ti);
        for (int m = 0; m < p; ++m) dc[b_off + m] += mass * haz * x[m];
      }
    }
  } else {
    c = d.prob(a, y1 - 1);
    for (int k = 0; k < q; ++k)
      dc[k] = d.dprob[static_cast<std::size_t>(k)](a, y1 - 1);
  }
  if (!(c > 0.0))
    return nonpositive_contribution(model, y0, y1, death_exact, context, true);
  *u += dc / c;
  return std::log(c);
}

struct IndividualParts {
  double ll = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd M;
};

IndividualParts eval_individual(const Model& model,
                                const Eigen::VectorXd& theta,
                                const Individual& ind,
                                const EvalOptions& opts, bool with_derivs) {
  const int q = model.n_params();
  IndividualParts parts;
  if (with_derivs) {
    parts.g = Eigen::VectorXd::Zero(q);
    parts.M = Eigen::MatrixXd::Zero(q, q);
  }
  const std::size_t n = ind.times.size();
  Eigen::VectorXd u(q);
  for (std::size_t j = 1; j < n; ++j) {
    const bool death = ind.death_exact && j + 1 == n;
    std::ostringstream context;
    context << "individual '" << ind.id << "', interval " << j;
    const Eigen::VectorXd x = ind.covariates.row(j - 1);
    if (with_derivs) {
      u.setZero();
      parts.ll += eval_interval(model, theta, ind.times[j - 1],
                                ind.states[j - 1], x, ind.times[j],
                                ind.states[j], death, opts.grid_width,
                                context.str(), &u);
      parts.g += u;
      parts.M.selfadjointView<Eigen::Lower>().rankUpdate(u);
    } else {
      parts.ll += eval_interval(model, theta, ind.times[j - 1],
                                ind.states[j - 1], x, ind.times[j],
                                ind.states[j], death, opts.grid_width,
                                context.str(), nullptr);
    }
  }
  if (with_derivs)
    parts.M = parts.M.selfadjointView<Eigen::Lower>();
  return parts;
}

// Evaluate every individual (possibly concurrently), then reduce in the
// dataset's sorted order so results are independent of the thread count.
std::vector<IndividualParts> eval_all(const Model& model,
                                      const Eigen::VectorXd& theta,
                                      const PanelDataset& data,
                                      const EvalOptions& opts,
                                      bool with_derivs) {
  const auto& inds = data.individuals();
  const int n = static_cast<int>(inds.size());
  std::vector<IndividualParts> results(static_cast<std::size_t>(n));
  const int n_threads = std::max(1, std::min(opts.n_threads, n));

  if (n_threads == 1) {
    for (int i = 0; i < n; ++i)
      results[static_cast<std::size_t>(i)] = eval_individual(
          model, theta, inds[static_cast<std::size_t>(i)], opts, with_derivs);
    return results;
  }

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
  workers.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t]() {
      try {
        for (int i = t; i < n; i += n_threads)
          results[static_cast<std::size_t>(i)] =
              eval_individual(model, theta, inds[static_cast<std::size_t>(i)],
                              opts, with_derivs);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace

double interval_contribution(const Model& model, const Eigen::VectorXd& theta,
                             double t0, int y0, const Eigen::VectorXd& x,
                             double t1, int y1, bool death_exact,
                             std::optional<double> grid_width) {
  const int D = model.structure().n_states();
  if (y0 < 1 || y0 > D || y1 < 1 || y1 > D)
    throw ValidationError("interval_contribution: state outside 1..D");
  if (!(t1 > t0))
    throw ValidationError("interval_contribution: need t1 > t0");
  if (model.structure().is_absorbing(y0))
    throw ValidationError(
        "interval_contribution: interval starts in an absorbing state");
  if (death_exact && y1 != D)
    throw ValidationError(
        "interval_contribution: death_exact interval must end in state D");
  std::ostringstream context;
  context << "interval (" << t0 << "," << t1 << "]";
  return eval_interval(model, theta, t0, y0, x, t1, y1, death_exact,
                       grid_width, context.str(), nullptr);
}

double loglik(const Model& model, const Eigen::VectorXd& theta,
              const PanelDataset& data, const EvalOptions& opts) {
  check_compat(model, data);
  const auto results = eval_all(model, theta, data, opts, false);
  double ll = 0.0;
  for (const auto& r : results) ll += r.ll;
  return ll;
}

double pen_loglik(const Model& model, const Eigen::VectorXd& theta,
                  const PanelDataset& data, const Eigen::VectorXd& lambda,
                  const EvalOptions& opts) {
  const Eigen::MatrixXd S = model.penalty_matrix(lambda);
  return loglik(model, theta, data, opts) - 0.5 * theta.dot(S * theta);
}

Eigen::VectorXd score(const Model& model, const Eigen::VectorXd& theta,
                      const PanelDataset& data, const EvalOptions& opts) {
  return likelihood_parts(model, theta, data, opts).score;
}

Eigen::MatrixXd fisher_approx(const Model& model, const Eigen::VectorXd& theta,
                              const PanelDataset& data,
                              const EvalOptions& opts) {
  return likelihood_parts(model, theta, data, opts).fisher;
}

LikelihoodParts likelihood_parts(const Model& model,
                                 const Eigen::VectorXd& theta,
                                 const PanelDataset& data,
                                 const EvalOptions& opts) {
  check_compat(model, data);
  const int q = model.n_params();
  const auto results = eval_all(model, theta, data, opts, true);
  LikelihoodParts out;
  out.score = Eigen::VectorXd::Zero(q);
  out.fisher = Eigen::MatrixXd::Zero(q, q);
  for (const auto& r : results) {
    out.loglik += r.ll;
    out.score += r.g;
    out.fisher += r.M;
  }
  if (!out.score.allFinite() || !out.fisher.allFinite())
    throw NumericalError("likelihood: non-finite score or Fisher matrix");
  return out;
}

}  // namespace splinemsm
