#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splinemsm/splinebasis.hpp"

namespace splinemsm {

// The directed graph of allowed instantaneous transitions on states
// 1..n_states, plus covariate names shared by all transition intensities.
// Transitions are stored deduplicated in row-major order (by source state,
// then target state), which fixes the canonical parameter-block order used
// everywhere else.
class TransitionStructure {
 public:
  TransitionStructure(int n_states,
                      std::vector<std::pair<int, int>> transitions,
                      std::vector<std::string> covariate_names = {});

  int n_states() const { return n_states_; }
  int n_transitions() const { return static_cast<int>(transitions_.size()); }
  int n_covariates() const { return static_cast<int>(covariate_names_.size()); }
  const std::vector<std::pair<int, int>>& transitions() const {
    return transitions_;
  }
  const std::vector<std::string>& covariate_names() const {
    return covariate_names_;
  }

  bool allows(int from, int to) const { return transition_index(from, to) >= 0; }
  // Position of (from,to) in the canonical order, or -1 if not allowed.
  int transition_index(int from, int to) const;
  // A state with no outgoing transitions.
  bool is_absorbing(int state) const;
  // Whether `to` can be reached from `from` through zero or more allowed
  // transitions.
  bool reachable(int from, int to) const;
  // Label like "1-2" for messages and file headers.
  std::string transition_label(int index) const;

 private:
  int n_states_;
  std::vector<std::pair<int, int>> transitions_;
  std::vector<std::string> covariate_names_;
  std::vector<int> lookup_;  // n_states^2 table of transition indices
};

// Baseline log-hazard shape for one transition: either a natural cubic
// spline on K knots or a single constant (time-homogeneous) intercept.
class Baseline {
 public:
  static Baseline spline(Eigen::VectorXd knots) {
    return Baseline(CubicSplineBasis(std::move(knots)));
  }
  static Baseline constant() { return Baseline(); }

  bool is_spline() const { return basis_.has_value(); }
  int dimension() const { return basis_ ? basis_->dimension() : 1; }
  const CubicSplineBasis& basis() const;

  // Design row multiplying this transition's alpha block at time t.
  Eigen::RowVectorXd design_row(double t) const {
    if (basis_) return basis_->evaluate(t);
    return Eigen::RowVectorXd::Ones(1);
  }

 private:
  Baseline() = default;
  explicit Baseline(CubicSplineBasis basis) : basis_(std::move(basis)) {}
  std::optional<CubicSplineBasis> basis_;
};

// Full model: structure, one baseline per transition, and the covariate
// coefficient layout.  The parameter vector theta concatenates the alpha
// block of every transition in canonical order; covariate coefficients
// either follow each transition's alpha block (separate betas) or sit in a
// single shared block at the end (share_beta).
//
// The log intensity of transition (r,s) at time t with covariates x is
//   log q_rs(t, x) = design_row(t) . alpha_rs + x . beta_rs.
class Model {
 public:
  Model(TransitionStructure structure, std::vector<Baseline> baselines,
        bool share_beta = false);

  const TransitionStructure& structure() const { return structure_; }
  const Baseline& baseline(int transition) const {
    return baselines_.at(static_cast<std::size_t>(transition));
  }
  bool share_beta() const { return share_beta_; }

  int n_params() const { return n_params_; }
  int n_covariates() const { return structure_.n_covariates(); }

  int alpha_offset(int transition) const { return alpha_offset_[transition]; }
  int alpha_dim(int transition) const {
    return baselines_[transition].dimension();
  }
  // Offset of the beta block applying to `transition`; -1 when the model has
  // no covariates.  With share_beta all transitions return the same offset.
  int beta_offset(int transition) const { return beta_offset_[transition]; }

  // Transitions with a spline baseline, i.e. the owners of penalty blocks,
  // in canonical order.
  const std::vector<int>& spline_transitions() const {
    return spline_transitions_;
  }

  // Block-diagonal penalty sum(lambda_b * S_b) embedded in the q x q
  // parameter space; lambda has one entry per spline transition.
  Eigen::MatrixXd penalty_matrix(const Eigen::VectorXd& lambda) const;
  // The raw K x K penalty block of one spline transition.
  const Eigen::MatrixXd& penalty_block(int transition) const;

  double log_hazard(const Eigen::VectorXd& theta, int transition, double t,
                    const Eigen::VectorXd& x) const;
  double hazard(const Eigen::VectorXd& theta, int transition, double t,
                const Eigen::VectorXd& x) const;

  // Human-readable parameter names in layout order, e.g. "alpha[1-2].3",
  // "beta[1-2].age", "beta[shared].age".
  std::vector<std::string> param_names() const;

 private:
  void check_theta(const Eigen::VectorXd& theta) const;
  void check_covariates(const Eigen::VectorXd& x) const;

  TransitionStructure structure_;
  std::vector<Baseline> baselines_;
  bool share_beta_;
  int n_params_;
  std::vector<int> alpha_offset_;
  std::vector<int> beta_offset_;
  std::vector<int> spline_transitions_;
};

}  // namespace splinemsm
