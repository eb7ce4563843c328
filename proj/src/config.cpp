#include "splinemsm/config.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <fstream>
#include <sstream>

#include "splinemsm/errors.hpp"
#include "splinemsm/splinebasis.hpp"

namespace splinemsm {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: " + what + " is not a number: '" + text +
                          "'");
  }
}

long long parse_ll(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: " + what + " is not an integer: '" + text +
                          "'");
  }
}

void check_known_keys(const ConfigFile& cfg, const std::string& section,
                      const std::set<std::string>& known,
                      bool allow_transition_suffix = false) {
  for (const auto& key : cfg.keys(section)) {
    if (known.count(key)) continue;
    if (allow_transition_suffix) {
      // Per-transition overrides: "<r>-<s>" or "knots.<r>-<s>".
      std::string label = key;
      if (label.rfind("knots.", 0) == 0) label = label.substr(6);
      try {
        parse_transition_label(label);
        continue;
      } catch (const ValidationError&) {
      }
    }
    throw ValidationError("config: unknown key '" + key + "' in section [" +
                          section + "]");
  }
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError("config: malformed section header at line " +
                              std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ValidationError("config: empty section name at line " +
                              std::to_string(line_no));
      cfg.sections_[section];  // register even if empty
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: expected 'key = value' at line " +
                            std::to_string(line_no));
    if (section.empty())
      throw ValidationError("config: key outside any section at line " +
                            std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError("config: empty key at line " +
                            std::to_string(line_no));
    auto& sec = cfg.sections_[section];
    if (sec.count(key))
      throw ValidationError("config: duplicate key '" + key +
                            "' in section [" + section + "]");
    sec[key] = value;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto sit = sections_.find(section);
  return sit != sections_.end() && sit->second.count(key) > 0;
}

bool ConfigFile::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

std::string ConfigFile::get(const std::string& section,
                            const std::string& key) const {
  const auto sit = sections_.find(section);
  if (sit != sections_.end()) {
    const auto kit = sit->second.find(key);
    if (kit != sit->second.end()) return kit->second;
  }
  throw ValidationError("config: missing key '" + key + "' in section [" +
                        section + "]");
}

std::string ConfigFile::get_or(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key) const {
  return parse_double(get(section, key), "[" + section + "]." + key);
}

int ConfigFile::get_int(const std::string& section,
                        const std::string& key) const {
  const long long v = parse_ll(get(section, key), "[" + section + "]." + key);
  if (v < INT_MIN || v > INT_MAX)
    throw ValidationError("config: [" + section + "]." + key +
                          " out of integer range");
  return static_cast<int>(v);
}

std::uint64_t ConfigFile::get_u64(const std::string& section,
                                  const std::string& key) const {
  const long long v = parse_ll(get(section, key), "[" + section + "]." + key);
  if (v < 0)
    throw ValidationError("config: [" + section + "]." + key +
                          " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool ConfigFile::get_bool(const std::string& section,
                          const std::string& key) const {
  const std::string v = lower(get(section, key));
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ValidationError("config: [" + section + "]." + key +
                        " must be true or false");
}

std::vector<std::string> ConfigFile::get_list(const std::string& section,
                                              const std::string& key) const {
  const std::string raw = get(section, key);
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(raw);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::set<std::string> ConfigFile::keys(const std::string& section) const {
  std::set<std::string> out;
  const auto sit = sections_.find(section);
  if (sit != sections_.end())
    for (const auto& [k, v] : sit->second) out.insert(k);
  return out;
}

std::pair<int, int> parse_transition_label(const std::string& label) {
  const auto dash = label.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= label.size())
    throw ValidationError("config: malformed transition label '" + label +
                          "' (expected like '1-2')");
  const long long r = parse_ll(label.substr(0, dash), "transition source");
  const long long s = parse_ll(label.substr(dash + 1), "transition target");
  return {static_cast<int>(r), static_cast<int>(s)};
}

ModelConfig ModelConfig::from_config(const ConfigFile& cfg) {
  check_known_keys(cfg, "model",
                   {"states", "transitions", "covariates", "share_beta",
                    "exact_death", "grid_width", "max_time"});
  check_known_keys(cfg, "baseline", {"default", "knots"}, true);
  check_known_keys(cfg, "fit",
                   {"delta", "max_outer", "max_inner", "lambda_min",
                    "lambda_max", "penalized_covariance", "trace"});

  ModelConfig mc;
  mc.n_states = cfg.get_int("model", "states");

  for (const auto& label : cfg.get_list("model", "transitions"))
    mc.transitions.push_back(parse_transition_label(label));
  if (cfg.has("model", "covariates"))
    mc.covariates = cfg.get_list("model", "covariates");
  if (cfg.has("model", "share_beta"))
    mc.share_beta = cfg.get_bool("model", "share_beta");
  if (cfg.has("model", "exact_death"))
    mc.exact_death = cfg.get_bool("model", "exact_death");
  if (cfg.has("model", "grid_width")) {
    mc.grid_width = cfg.get_double("model", "grid_width");
    if (!(*mc.grid_width > 0.0))
      throw ValidationError("config: [model].grid_width must be positive");
  }
  if (cfg.has("model", "max_time")) {
    mc.max_time = cfg.get_double("model", "max_time");
    if (!(*mc.max_time > 0.0))
      throw ValidationError("config: [model].max_time must be positive");
  }

  // Canonical transition order comes from the structure, so build it first
  // and resolve the per-transition baseline choices against it.
  const TransitionStructure structure(mc.n_states, mc.transitions,
                                      mc.covariates);
  mc.transitions = structure.transitions();

  const std::string default_kind = lower(cfg.get_or("baseline", "default", "spline"));
  if (default_kind != "spline" && default_kind != "constant")
    throw ValidationError(
        "config: [baseline].default must be 'spline' or 'constant'");
  int default_knots = 10;
  if (cfg.has("baseline", "knots"))
    default_knots = cfg.get_int("baseline", "knots");

  mc.baselines.resize(mc.transitions.size());
  for (std::size_t i = 0; i < mc.transitions.size(); ++i) {
    const std::string label = structure.transition_label(static_cast<int>(i));
    BaselineChoice choice;
    const std::string kind =
        lower(cfg.get_or("baseline", label, default_kind));
    if (kind != "spline" && kind != "constant")
      throw ValidationError("config: [baseline]." + label +
                            " must be 'spline' or 'constant'");
    choice.is_spline = (kind == "spline");
    choice.knots = cfg.has("baseline", "knots." + label)
                       ? cfg.get_int("baseline", "knots." + label)
                       : default_knots;
    if (choice.is_spline && choice.knots < 3)
      throw ValidationError("config: [baseline] transition " + label +
                            " needs at least 3 knots");
    mc.baselines[i] = choice;
  }

  // A per-transition override naming a transition the model does not have is
  // a silent no-op above, so reject it explicitly.
  for (const auto& key : cfg.keys("baseline")) {
    if (key == "default" || key == "knots") continue;
    std::string label = key;
    if (label.rfind("knots.", 0) == 0) label = label.substr(6);
    const auto [r, s] = parse_transition_label(label);
    if (!structure.allows(r, s))
      throw ValidationError("config: [baseline] key '" + key +
                            "' names a transition that is not in the model");
  }

  if (cfg.has("fit", "delta")) mc.controls.delta = cfg.get_double("fit", "delta");
  if (cfg.has("fit", "max_outer"))
    mc.controls.max_outer = cfg.get_int("fit", "max_outer");
  if (cfg.has("fit", "max_inner"))
    mc.controls.max_inner = cfg.get_int("fit", "max_inner");
  if (cfg.has("fit", "lambda_min"))
    mc.controls.lambda_min = cfg.get_double("fit", "lambda_min");
  if (cfg.has("fit", "lambda_max"))
    mc.controls.lambda_max = cfg.get_double("fit", "lambda_max");
  if (cfg.has("fit", "penalized_covariance"))
    mc.controls.penalized_covariance =
        cfg.get_bool("fit", "penalized_covariance");
  if (cfg.has("fit", "trace")) mc.controls.trace = cfg.get_bool("fit", "trace");
  if (!(mc.controls.delta > 0.0))
    throw ValidationError("config: [fit].delta must be positive");
  if (mc.controls.max_outer < 1 || mc.controls.max_inner < 1)
    throw ValidationError("config: iteration caps must be at least 1");
  if (!(mc.controls.lambda_min > 0.0) ||
      !(mc.controls.lambda_max > mc.controls.lambda_min))
    throw ValidationError("config: need 0 < lambda_min < lambda_max");
  mc.controls.grid_width = mc.grid_width;
  return mc;
}

TransitionStructure ModelConfig::structure() const {
  return TransitionStructure(n_states, transitions, covariates);
}

Model ModelConfig::build_model(const std::vector<double>& pooled_times) const {
  TransitionStructure s = structure();
  std::vector<Baseline> bases;
  bases.reserve(baselines.size());
  for (std::size_t i = 0; i < baselines.size(); ++i) {
    if (baselines[i].is_spline) {
      try {
        bases.push_back(Baseline::spline(
            place_knots(pooled_times, baselines[i].knots)));
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (transition " +
                              s.transition_label(static_cast<int>(i)) + ")");
      }
    } else {
      bases.push_back(Baseline::constant());
    }
  }
  return Model(std::move(s), std::move(bases), share_beta);
}

Scenario scenario_from_config(const ConfigFile& cfg) {
  check_known_keys(cfg, "simulate",
                   {"n_individuals", "seed", "study_length",
                    "followup_interval", "lognormal_mu", "lognormal_sigma",
                    "exp_rate", "gompertz_shape", "gompertz_rate", "truth_t0",
                    "truth_t1", "truth_paths"});
  Scenario sc;
  if (cfg.has("simulate", "n_individuals"))
    sc.n_individuals = cfg.get_int("simulate", "n_individuals");
  if (cfg.has("simulate", "seed")) sc.seed = cfg.get_u64("simulate", "seed");
  if (cfg.has("simulate", "study_length"))
    sc.study_length = cfg.get_double("simulate", "study_length");
  if (cfg.has("simulate", "followup_interval"))
    sc.followup_interval = cfg.get_double("simulate", "followup_interval");
  if (cfg.has("simulate", "lognormal_mu"))
    sc.lognormal_mu = cfg.get_double("simulate", "lognormal_mu");
  if (cfg.has("simulate", "lognormal_sigma"))
    sc.lognormal_sigma = cfg.get_double("simulate", "lognormal_sigma");
  if (cfg.has("simulate", "exp_rate"))
    sc.exp_rate = cfg.get_double("simulate", "exp_rate");
  if (cfg.has("simulate", "gompertz_shape"))
    sc.gompertz_shape = cfg.get_double("simulate", "gompertz_shape");
  if (cfg.has("simulate", "gompertz_rate"))
    sc.gompertz_rate = cfg.get_double("simulate", "gompertz_rate");
  sc.validate();
  return sc;
}

}  // namespace splinemsm
