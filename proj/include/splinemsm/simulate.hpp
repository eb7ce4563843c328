#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "splinemsm/dataset.hpp"
#include "splinemsm/rng.hpp"

namespace splinemsm {

// Illness-death generating process: healthy (1) to ill (2) with a log-normal
// onset time, healthy to dead (3) with an exponential time, ill to dead with
// a Gompertz time on the baseline clock conditioned to exceed the onset time.
// Individuals are examined at fixed visit intervals and death times are
// observed exactly.
struct Scenario {
  double lognormal_mu = 1.25;
  double lognormal_sigma = 1.0;
  double exp_rate = 0.0820849986238988;       // exp(-2.5)
  double gompertz_shape = 0.1;
  double gompertz_rate = 0.0820849986238988;  // exp(-2.5)
  double study_length = 15.0;
  double followup_interval = 1.0;
  int n_individuals = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

// Inverse CDFs of the event-time laws, exposed so the sampling can be tested
// distributionally.  The conditional variants sample from the law restricted
// to (u, infinity) on the same clock.
double lognormal_quantile(double mu, double sigma, double p);
double lognormal_conditional_quantile(double mu, double sigma, double u,
                                      double p);
double exponential_quantile(double rate, double p);
double exponential_conditional_quantile(double rate, double u, double p);
double gompertz_quantile(double shape, double rate, double p);
double gompertz_conditional_quantile(double shape, double rate, double u,
                                     double p);

// One latent trajectory: state changes with their exact times, truncated at
// the study end.  Always starts with (0, state 1).
struct PathEvent {
  double time = 0.0;
  int state = 1;
};

std::vector<PathEvent> sample_path(const Scenario& scenario, Rng& rng);

// Interval censoring: the living state is read at visit times 0, h, 2h, ...
// up to the study end; a death before study end replaces the remaining
// visits with one exactly timed record of state 3.
Individual observe_path(const std::vector<PathEvent>& path,
                        const Scenario& scenario, std::string id);

PanelDataset simulate_dataset(const Scenario& scenario);

// Monte-Carlo transition probability matrix P(t0, t1) of the generating
// process (row r = state occupied at t1 given state r at t0), used as the
// ground truth in validation.
Eigen::MatrixXd true_transition_probabilities(const Scenario& scenario,
                                              double t0, double t1,
                                              long n_paths = 1000000,
                                              std::uint64_t seed = 9001);

}  // namespace splinemsm
