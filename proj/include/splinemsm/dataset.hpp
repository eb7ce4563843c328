#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace splinemsm {

// One study subject: observation times, observed states (1-based), and the
// covariate row recorded at each observation.  death_exact marks a terminal
// observation that is an exactly observed entry into the final state D
// (rather than the usual interval-censored state reading).
struct Individual {
  std::string id;
  std::vector<double> times;
  std::vector<int> states;
  Eigen::MatrixXd covariates;  // n_obs x p
  bool death_exact = false;
};

// Interval-censored panel data for a fixed state space 1..n_states, with the
// convention that state n_states is the absorbing death state.  Construction
// validates every documented invariant and sorts individuals by id so that
// likelihood accumulation order is deterministic.
class PanelDataset {
 public:
  PanelDataset(std::vector<Individual> individuals, int n_states,
               std::vector<std::string> covariate_names = {});

  const std::vector<Individual>& individuals() const { return individuals_; }
  int n_states() const { return n_states_; }
  int n_covariates() const { return static_cast<int>(covariate_names_.size()); }
  const std::vector<std::string>& covariate_names() const {
    return covariate_names_;
  }

  int n_individuals() const { return static_cast<int>(individuals_.size()); }
  int n_observations() const;
  int n_intervals() const;

  // Counts of successive observed state pairs, n_states x n_states.
  Eigen::MatrixXi pair_table() const;

  // All observation times pooled across individuals (knot placement input).
  std::vector<double> pooled_times() const;

 private:
  std::vector<Individual> individuals_;
  int n_states_;
  std::vector<std::string> covariate_names_;
};

}  // namespace splinemsm
