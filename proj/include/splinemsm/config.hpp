#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "splinemsm/estimator.hpp"
#include "splinemsm/model.hpp"
#include "splinemsm/simulate.hpp"

namespace splinemsm {

// Minimal INI-style configuration file:
//   - `[section]` headers, `key = value` lines;
//   - `#` or `;` start a comment (full line or trailing);
//   - whitespace around sections, keys, and values is ignored;
//   - list values are comma separated;
//   - duplicate keys within a section are an error.
// The full grammar is documented in the README.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  int get_int(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section,
                        const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key) const;

  // Keys present in a section (empty set if the section is absent).
  std::set<std::string> keys(const std::string& section) const;
  bool has_section(const std::string& section) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Typed view of the [model], [baseline], and [fit] sections.
struct BaselineChoice {
  bool is_spline = true;
  int knots = 10;
};

struct ModelConfig {
  int n_states = 0;
  std::vector<std::pair<int, int>> transitions;  // canonical order
  std::vector<std::string> covariates;
  bool share_beta = false;
  bool exact_death = false;
  std::optional<double> grid_width;
  std::optional<double> max_time;               // ingest filter
  std::vector<BaselineChoice> baselines;        // canonical order
  FitControls controls;

  static ModelConfig from_config(const ConfigFile& cfg);

  TransitionStructure structure() const;

  // Build the model, placing spline knots at quantiles of the pooled
  // observation times.
  Model build_model(const std::vector<double>& pooled_times) const;
};

// Typed view of the [simulate] section (missing keys keep the defaults).
Scenario scenario_from_config(const ConfigFile& cfg);

// Parse a transition label like "1-2".
std::pair<int, int> parse_transition_label(const std::string& label);

}  // namespace splinemsm
