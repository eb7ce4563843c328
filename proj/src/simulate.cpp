#include "splinemsm/simulate.hpp"

#include <cmath>
#include <sstream>

#include "splinemsm/errors.hpp"
#include "splinemsm/stats.hpp"

namespace splinemsm {

void Scenario::validate() const {
  if (!(lognormal_sigma > 0.0))
    throw ValidationError("Scenario: lognormal sigma must be positive");
  if (!(exp_rate > 0.0) || !(gompertz_rate > 0.0))
    throw ValidationError("Scenario: event rates must be positive");
  if (!(gompertz_shape > 0.0))
    throw ValidationError("Scenario: Gompertz shape must be positive");
  if (!(study_length > 0.0))
    throw ValidationError("Scenario: study length must be positive");
  if (!(followup_interval > 0.0) || followup_interval > study_length)
    throw ValidationError(
        "Scenario: follow-up interval must lie in (0, study_length]");
  if (n_individuals < 1)
    throw ValidationError("Scenario: need at least one individual");
}

namespace {

void check_p(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("quantile: probability must lie strictly in (0,1)");
}

}  // namespace

double lognormal_quantile(double mu, double sigma, double p) {
  check_p(p);
  return std::exp(mu + sigma * normal_quantile(p));
}

double lognormal_conditional_quantile(double mu, double sigma, double u,
                                      double p) {
  check_p(p);
  if (u <= 0.0) return lognormal_quantile(mu, sigma, p);
  const double Fu = normal_cdf((std::log(u) - mu) / sigma);
  return lognormal_quantile(mu, sigma, Fu + p * (1.0 - Fu));
}

double exponential_quantile(double rate, double p) {
  check_p(p);
  return -std::log1p(-p) / rate;
}

double exponential_conditional_quantile(double rate, double u, double p) {
  return std::max(u, 0.0) + exponential_quantile(rate, p);
}

double gompertz_quantile(double shape, double rate, double p) {
  check_p(p);
  // F(t) = 1 - exp(-(rate/shape)(e^{shape t} - 1))
  return std::log1p(-(shape / rate) * std::log1p(-p)) / shape;
}

double gompertz_conditional_quantile(double shape, double rate, double u,
                                     double p) {
  check_p(p);
  if (u <= 0.0) return gompertz_quantile(shape, rate, p);
  // S(t)/S(u) = 1-p solved on the e^{shape t} scale.
  const double eat =
      std::exp(shape * u) - (shape / rate) * std::log1p(-p);
  return std::log(eat) / shape;
}

std::vector<PathEvent> sample_path(const Scenario& scenario, Rng& rng) {
  scenario.validate();
  std::vector<PathEvent> path{{0.0, 1}};
  const double onset =
      lognormal_quantile(scenario.lognormal_mu, scenario.lognormal_sigma,
                         rng.uniform());
  const double direct_death =
      exponential_quantile(scenario.exp_rate, rng.uniform());

  if (onset < direct_death) {
    if (onset > scenario.study_length) return path;
    path.push_back({onset, 2});
    const double death = gompertz_conditional_quantile(
        scenario.gompertz_shape, scenario.gompertz_rate, onset, rng.uniform());
    if (death <= scenario.study_length) path.push_back({death, 3});
  } else {
    if (direct_death > scenario.study_length) return path;
    path.push_back({direct_death, 3});
  }
  return path;
}

Individual observe_path(const std::vector<PathEvent>& path,
                        const Scenario& scenario, std::string id) {
  if (path.empty() || path.front().time != 0.0 || path.front().state != 1)
    throw ValidationError("observe_path: path must start in state 1 at time 0");

  const bool died = path.back().state == 3;
  const double death_time = died ? path.back().time : 0.0;

  Individual ind;
  ind.id = std::move(id);
  const double h = scenario.followup_interval;
  const double horizon = scenario.study_length * (1.0 + 1e-12);
  for (int k = 0;; ++k) {
    const double visit = k * h;
    if (visit > horizon) break;
    if (died && visit >= death_time) break;
    int state = 1;
    for (const auto& ev : path)
      if (ev.time <= visit) state = ev.state;
    ind.times.push_back(visit);
    ind.states.push_back(state);
  }
  if (died) {
    ind.times.push_back(death_time);
    ind.states.push_back(3);
    ind.death_exact = true;
  }
  ind.covariates = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(ind.times.size()), 0);
  return ind;
}

PanelDataset simulate_dataset(const Scenario& scenario) {
  scenario.validate();
  std::vector<Individual> individuals;
  individuals.reserve(static_cast<std::size_t>(scenario.n_individuals));

  int width = 1;
  for (int n = scenario.n_individuals; n >= 10; n /= 10) ++width;

  for (int i = 0; i < scenario.n_individuals; ++i) {
    Rng rng(scenario.seed, static_cast<std::uint64_t>(i));
    const auto path = sample_path(scenario, rng);
    std::ostringstream id;
    id << "ind";
    id.width(width);
    id.fill('0');
    id << i + 1;
    individuals.push_back(observe_path(path, scenario, id.str()));
  }
  return PanelDataset(std::move(individuals), 3, {});
}

Eigen::MatrixXd true_transition_probabilities(const Scenario& scenario,
                                              double t0, double t1,
                                              long n_paths,
                                              std::uint64_t seed) {
  scenario.validate();
  if (!(t1 >= t0) || t0 < 0.0)
    throw ValidationError(
        "true_transition_probabilities: need 0 <= t0 <= t1");
  if (n_paths < 1)
    throw ValidationError("true_transition_probabilities: need n_paths >= 1");

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3, 3);
  P(2, 2) = 1.0;
  if (t1 == t0) {
    P(0, 0) = 1.0;
    P(1, 1) = 1.0;
    return P;
  }

  // Row 1: alive and healthy at t0 means both competing times exceed t0.
  Eigen::Vector3d row1 = Eigen::Vector3d::Zero();
  for (long i = 0; i < n_paths; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    const double onset = lognormal_conditional_quantile(
        scenario.lognormal_mu, scenario.lognormal_sigma, t0, rng.uniform());
    const double direct = exponential_conditional_quantile(
        scenario.exp_rate, t0, rng.uniform());
    if (std::min(onset, direct) > t1) {
      row1[0] += 1.0;
    } else if (direct <= onset) {
      row1[2] += 1.0;
    } else {
      const double death = gompertz_conditional_quantile(
          scenario.gompertz_shape, scenario.gompertz_rate, onset,
          rng.uniform());
      row1[death > t1 ? 1 : 2] += 1.0;
    }
  }
  P.row(0) = row1.transpose() / static_cast<double>(n_paths);

  // Row 2: ill at t0, only the Gompertz death clock remains.
  Eigen::Vector3d row2 = Eigen::Vector3d::Zero();
  for (long i = 0; i < n_paths; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(n_paths + i));
    const double death = gompertz_conditional_quantile(
        scenario.gompertz_shape, scenario.gompertz_rate, t0, rng.uniform());
    row2[death > t1 ? 1 : 2] += 1.0;
  }
  P.row(1) = row2.transpose() / static_cast<double>(n_paths);
  return P;
}

}  // namespace splinemsm
