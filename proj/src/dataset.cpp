#include "splinemsm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "splinemsm/errors.hpp"

namespace splinemsm {

namespace {

void check_individual(const Individual& ind, int n_states, int n_cov) {
  const std::size_t n = ind.times.size();
  if (n != ind.states.size())
    throw ValidationError("PanelDataset: individual '" + ind.id +
                          "' has mismatched time/state lengths");
  if (n < 2)
    throw ValidationError("PanelDataset: individual '" + ind.id +
                          "' has fewer than 2 observations");
  if (ind.covariates.rows() != static_cast<Eigen::Index>(n) ||
      ind.covariates.cols() != n_cov)
    throw ValidationError("PanelDataset: individual '" + ind.id +
                          "' has a covariate block of the wrong shape");
  if (!ind.covariates.allFinite())
    throw ValidationError("PanelDataset: individual '" + ind.id +
                          "' has non-finite covariates");
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(ind.times[j]))
      throw ValidationError("PanelDataset: individual '" + ind.id +
                            "' has a non-finite observation time");
    if (j > 0 && !(ind.times[j] > ind.times[j - 1])) {
      std::ostringstream msg;
      msg << "PanelDataset: individual '" << ind.id
          << "' has non-increasing times at observation " << j + 1;
      throw ValidationError(msg.str());
    }
    const int y = ind.states[j];
    if (y < 1 || y > n_states) {
      std::ostringstream msg;
      msg << "PanelDataset: individual '" << ind.id << "' has state " << y
          << " outside 1.." << n_states;
      throw ValidationError(msg.str());
    }
    if (y == n_states && j + 1 < n) {
      std::ostringstream msg;
      msg << "PanelDataset: individual '" << ind.id << "' occupies state "
          << n_states << " before its final observation";
      throw ValidationError(msg.str());
    }
  }
  if (ind.death_exact && ind.states.back() != n_states)
    throw ValidationError("PanelDataset: individual '" + ind.id +
                          "' is flagged death_exact but does not end in state " +
                          std::to_string(n_states));
}

}  // namespace

PanelDataset::PanelDataset(std::vector<Individual> individuals, int n_states,
                           std::vector<std::string> covariate_names)
    : individuals_(std::move(individuals)),
      n_states_(n_states),
      covariate_names_(std::move(covariate_names)) {
  if (n_states_ < 2)
    throw ValidationError("PanelDataset: need at least 2 states");
  if (individuals_.empty())
    throw ValidationError("PanelDataset: no individuals");
  const int p = static_cast<int>(covariate_names_.size());
  for (const auto& ind : individuals_) check_individual(ind, n_states_, p);

  std::sort(individuals_.begin(), individuals_.end(),
            [](const Individual& a, const Individual& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < individuals_.size(); ++i)
    if (individuals_[i].id == individuals_[i - 1].id)
      throw ValidationError("PanelDataset: duplicate individual id '" +
                            individuals_[i].id + "'");
}

int PanelDataset::n_observations() const {
  int n = 0;
  for (const auto& ind : individuals_) n += static_cast<int>(ind.times.size());
  return n;
}

int PanelDataset::n_intervals() const {
  return n_observations() - n_individuals();
}

Eigen::MatrixXi PanelDataset::pair_table() const {
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(n_states_, n_states_);
  for (const auto& ind : individuals_)
    for (std::size_t j = 1; j < ind.states.size(); ++j)
      table(ind.states[j - 1] - 1, ind.states[j] - 1) += 1;
  return table;
}

std::vector<double> PanelDataset::pooled_times() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_observations()));
  for (const auto& ind : individuals_)
    out.insert(out.end(), ind.times.begin(), ind.times.end());
  return out;
}

}  // namespace splinemsm
