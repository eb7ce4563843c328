#include "splinemsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "splinemsm/errors.hpp"

namespace splinemsm {

TransitionStructure::TransitionStructure(
    int n_states, std::vector<std::pair<int, int>> transitions,
    std::vector<std::string> covariate_names)
    : n_states_(n_states),
      transitions_(std::move(transitions)),
      covariate_names_(std::move(covariate_names)) {
  if (n_states_ < 2)
    throw ValidationError("TransitionStructure: need at least 2 states");
  if (transitions_.empty())
    throw ValidationError("TransitionStructure: need at least one transition");
  for (auto [r, s] : transitions_) {
    if (r < 1 || r > n_states_ || s < 1 || s > n_states_) {
      std::ostringstream msg;
      msg << "TransitionStructure: transition " << r << "-" << s
          << " outside state range 1.." << n_states_;
      throw ValidationError(msg.str());
    }
    if (r == s)
      throw ValidationError("TransitionStructure: self-transition not allowed");
  }
  std::sort(transitions_.begin(), transitions_.end());
  transitions_.erase(std::unique(transitions_.begin(), transitions_.end()),
                     transitions_.end());

  std::set<std::string> seen;
  for (const auto& name : covariate_names_) {
    if (name.empty())
      throw ValidationError("TransitionStructure: empty covariate name");
    if (!seen.insert(name).second)
      throw ValidationError("TransitionStructure: duplicate covariate name '" +
                            name + "'");
  }

  lookup_.assign(static_cast<std::size_t>(n_states_) * n_states_, -1);
  for (int i = 0; i < n_transitions(); ++i) {
    auto [r, s] = transitions_[i];
    lookup_[static_cast<std::size_t>(r - 1) * n_states_ + (s - 1)] = i;
  }
}

int TransitionStructure::transition_index(int from, int to) const {
  if (from < 1 || from > n_states_ || to < 1 || to > n_states_) return -1;
  return lookup_[static_cast<std::size_t>(from - 1) * n_states_ + (to - 1)];
}

bool TransitionStructure::is_absorbing(int state) const {
  for (auto [r, s] : transitions_)
    if (r == state) return false;
  return true;
}

bool TransitionStructure::reachable(int from, int to) const {
  if (from < 1 || from > n_states_ || to < 1 || to > n_states_) return false;
  if (from == to) return true;
  std::vector<bool> seen(static_cast<std::size_t>(n_states_), false);
  std::vector<int> frontier{from};
  seen[static_cast<std::size_t>(from - 1)] = true;
  while (!frontier.empty()) {
    const int r = frontier.back();
    frontier.pop_back();
    for (int s = 1; s <= n_states_; ++s) {
      if (!allows(r, s) || seen[static_cast<std::size_t>(s - 1)]) continue;
      if (s == to) return true;
      seen[static_cast<std::size_t>(s - 1)] = true;
      frontier.push_back(s);
    }
  }
  return false;
}

std::string TransitionStructure::transition_label(int index) const {
  const auto& [r, s] = transitions_.at(static_cast<std::size_t>(index));
  return std::to_string(r) + "-" + std::to_string(s);
}

const CubicSplineBasis& Baseline::basis() const {
  if (!basis_)
    throw ValidationError("Baseline: constant baseline has no spline basis");
  return *basis_;
}

Model::Model(TransitionStructure structure, std::vector<Baseline> baselines,
             bool share_beta)
    : structure_(std::move(structure)),
      baselines_(std::move(baselines)),
      share_beta_(share_beta) {
  const int nt = structure_.n_transitions();
  if (static_cast<int>(baselines_.size()) != nt)
    throw ValidationError("Model: need one baseline per transition");
  const int p = structure_.n_covariates();

  alpha_offset_.resize(nt);
  beta_offset_.assign(nt, -1);
  int offset = 0;
  for (int i = 0; i < nt; ++i) {
    alpha_offset_[i] = offset;
    offset += baselines_[i].dimension();
    if (p > 0 && !share_beta_) {
      beta_offset_[i] = offset;
      offset += p;
    }
    if (baselines_[i].is_spline()) spline_transitions_.push_back(i);
  }
  if (p > 0 && share_beta_) {
    std::fill(beta_offset_.begin(), beta_offset_.end(), offset);
    offset += p;
  }
  n_params_ = offset;
}

void Model::check_theta(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_params_) {
    std::ostringstream msg;
    msg << "Model: parameter vector has length " << theta.size()
        << ", expected " << n_params_;
    throw ValidationError(msg.str());
  }
}

void Model::check_covariates(const Eigen::VectorXd& x) const {
  if (x.size() != n_covariates()) {
    std::ostringstream msg;
    msg << "Model: covariate vector has length " << x.size() << ", expected "
        << n_covariates();
    throw ValidationError(msg.str());
  }
}

Eigen::MatrixXd Model::penalty_matrix(const Eigen::VectorXd& lambda) const {
  const auto& owners = spline_transitions_;
  if (lambda.size() != static_cast<Eigen::Index>(owners.size()))
    throw ValidationError(
        "Model: lambda needs one entry per spline transition");
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n_params_, n_params_);
  for (std::size_t b = 0; b < owners.size(); ++b) {
    const double lam = lambda[static_cast<Eigen::Index>(b)];
    if (!(lam >= 0.0) || !std::isfinite(lam))
      throw ValidationError("Model: smoothing parameters must be >= 0");
    const int ti = owners[b];
    const int off = alpha_offset_[ti];
    const int dim = baselines_[ti].dimension();
    S.block(off, off, dim, dim) = lam * baselines_[ti].basis().penalty();
  }
  return S;
}

const Eigen::MatrixXd& Model::penalty_block(int transition) const {
  return baselines_.at(static_cast<std::size_t>(transition)).basis().penalty();
}

double Model::log_hazard(const Eigen::VectorXd& theta, int transition,
                         double t, const Eigen::VectorXd& x) const {
  check_theta(theta);
  check_covariates(x);
  const Baseline& base = baselines_.at(static_cast<std::size_t>(transition));
  double eta =
      base.design_row(t).dot(theta.segment(alpha_offset_[transition],
                                           base.dimension()));
  if (n_covariates() > 0)
    eta += x.dot(theta.segment(beta_offset_[transition], n_covariates()));
  return eta;
}

double Model::hazard(const Eigen::VectorXd& theta, int transition, double t,
                     const Eigen::VectorXd& x) const {
  return std::exp(log_hazard(theta, transition, t, x));
}

std::vector<std::string> Model::param_names() const {
  std::vector<std::string> names(static_cast<std::size_t>(n_params_));
  const int p = n_covariates();
  for (int ti = 0; ti < structure_.n_transitions(); ++ti) {
    const std::string label = structure_.transition_label(ti);
    for (int j = 0; j < alpha_dim(ti); ++j)
      names[static_cast<std::size_t>(alpha_offset_[ti] + j)] =
          "alpha[" + label + "]." + std::to_string(j + 1);
    if (p > 0 && !share_beta_)
      for (int m = 0; m < p; ++m)
        names[static_cast<std::size_t>(beta_offset_[ti] + m)] =
            "beta[" + label + "]." + structure_.covariate_names()[m];
  }
  if (p > 0 && share_beta_)
    for (int m = 0; m < p; ++m)
      names[static_cast<std::size_t>(beta_offset_[0] + m)] =
          "beta[shared]." + structure_.covariate_names()[m];
  return names;
}

}  // namespace splinemsm
