#include "splinemsm/io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "splinemsm/errors.hpp"

namespace splinemsm {

using nlohmann::json;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw ValidationError("csv: row " +
                              std::to_string(table.rows.size() + 2) + " of '" +
                              path + "' has " + std::to_string(fields.size()) +
                              " fields, header has " +
                              std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (first)
    throw ValidationError("csv: '" + path + "' is empty");
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out)
    throw ValidationError("csv: cannot write '" + path + "'");
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out)
    throw ValidationError("csv: failed writing '" + path + "'");
}

namespace {

double parse_field_double(const std::string& text, long row,
                          const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("ingest: row " + std::to_string(row) + " column '" +
                          column + "' is not a number: '" + text + "'");
  }
}

int parse_field_int(const std::string& text, long row,
                    const std::string& column) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ValidationError("ingest: row " + std::to_string(row) + " column '" +
                          column + "' is not an integer: '" + text + "'");
  }
}

}  // namespace

std::pair<PanelDataset, IngestReport> ingest(const std::string& path,
                                             const ModelConfig& config) {
  const CsvTable table = read_csv(path);

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < table.header.size(); ++i)
    col[table.header[i]] = i;
  for (const std::string& required : {std::string("id"), std::string("time"),
                                      std::string("state")})
    if (!col.count(required))
      throw ValidationError("ingest: '" + path + "' is missing column '" +
                            required + "'");
  std::vector<std::size_t> cov_cols;
  for (const auto& name : config.covariates) {
    if (!col.count(name))
      throw ValidationError("ingest: '" + path +
                            "' is missing covariate column '" + name + "'");
    cov_cols.push_back(col[name]);
  }

  struct Raw {
    std::vector<double> times;
    std::vector<int> states;
    std::vector<Eigen::VectorXd> covs;
    long raw_rows = 0;
  };
  std::unordered_map<std::string, Raw> groups;
  std::vector<std::string> order;

  IngestReport report;
  const int p = static_cast<int>(config.covariates.size());
  long row_no = 1;
  for (const auto& row : table.rows) {
    ++row_no;
    ++report.rows_read;
    const std::string& id = row[col["id"]];
    if (id.empty())
      throw ValidationError("ingest: row " + std::to_string(row_no) +
                            " has an empty id");
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.raw_rows += 1;

    const double time = parse_field_double(row[col["time"]], row_no, "time");
    if (config.max_time && time > *config.max_time) {
      ++report.rows_filtered;
      continue;
    }
    const int state = parse_field_int(row[col["state"]], row_no, "state");
    Eigen::VectorXd x(p);
    for (int m = 0; m < p; ++m)
      x[m] = parse_field_double(row[cov_cols[static_cast<std::size_t>(m)]],
                                row_no, config.covariates[static_cast<std::size_t>(m)]);
    it->second.times.push_back(time);
    it->second.states.push_back(state);
    it->second.covs.push_back(std::move(x));
  }

  std::vector<Individual> individuals;
  individuals.reserve(order.size());
  for (const auto& id : order) {
    Raw& raw = groups[id];
    if (raw.raw_rows < 2)
      throw ValidationError("ingest: individual '" + id +
                            "' has fewer than 2 rows");
    if (raw.times.size() < 2) {
      // Lost to the time filter; drop with a report rather than an error.
      report.dropped_ids.push_back(id);
      continue;
    }
    Individual ind;
    ind.id = id;
    ind.times = std::move(raw.times);
    ind.states = std::move(raw.states);
    ind.covariates.resize(static_cast<Eigen::Index>(ind.times.size()), p);
    for (std::size_t j = 0; j < raw.covs.size(); ++j)
      ind.covariates.row(static_cast<Eigen::Index>(j)) =
          raw.covs[j].transpose();
    ind.death_exact =
        config.exact_death && ind.states.back() == config.n_states;
    individuals.push_back(std::move(ind));
  }
  if (individuals.empty())
    throw ValidationError("ingest: no usable individuals in '" + path + "'");

  PanelDataset data(std::move(individuals), config.n_states,
                    config.covariates);
  report.individuals = data.n_individuals();
  report.pair_table = data.pair_table();
  return {std::move(data), std::move(report)};
}

void write_dataset_csv(const std::string& path, const PanelDataset& data) {
  CsvTable table;
  table.header = {"id", "time", "state"};
  for (const auto& name : data.covariate_names()) table.header.push_back(name);
  for (const auto& ind : data.individuals()) {
    for (std::size_t j = 0; j < ind.times.size(); ++j) {
      std::vector<std::string> row{ind.id, format_double(ind.times[j]),
                                   std::to_string(ind.states[j])};
      for (int m = 0; m < data.n_covariates(); ++m)
        row.push_back(
            format_double(ind.covariates(static_cast<Eigen::Index>(j), m)));
      table.rows.push_back(std::move(row));
    }
  }
  write_csv(path, table);
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]
                    .get<double>();
  return m;
}

constexpr const char* kFitFormat = "splinemsm-fit/1";

}  // namespace

void save_fit(const std::string& path, const FitResult& fit) {
  const auto& structure = fit.model.structure();
  json model;
  model["states"] = structure.n_states();
  model["transitions"] = json::array();
  for (int ti = 0; ti < structure.n_transitions(); ++ti)
    model["transitions"].push_back(structure.transition_label(ti));
  model["covariates"] = structure.covariate_names();
  model["share_beta"] = fit.model.share_beta();
  model["baselines"] = json::array();
  for (int ti = 0; ti < structure.n_transitions(); ++ti) {
    const Baseline& base = fit.model.baseline(ti);
    json b;
    if (base.is_spline()) {
      b["type"] = "spline";
      b["knots"] = vector_to_json(base.basis().knots());
    } else {
      b["type"] = "constant";
    }
    model["baselines"].push_back(std::move(b));
  }

  json doc;
  doc["format"] = kFitFormat;
  doc["model"] = std::move(model);
  if (fit.grid_width)
    doc["grid_width"] = *fit.grid_width;
  else
    doc["grid_width"] = nullptr;
  doc["theta"] = vector_to_json(fit.theta);
  doc["lambda"] = vector_to_json(fit.lambda);
  doc["v_theta"] = matrix_to_json(fit.v_theta);
  doc["edf_total"] = fit.edf_total;
  doc["edf_blocks"] = vector_to_json(fit.edf_blocks);
  doc["converged"] = fit.converged;
  doc["iterations"] = fit.iterations;
  doc["loglik"] = fit.loglik;
  doc["pen_loglik"] = fit.pen_loglik;
  doc["ubre"] = fit.ubre;
  doc["param_names"] = fit.model.param_names();

  std::ofstream out(path);
  if (!out)
    throw ValidationError("save_fit: cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
  if (!out)
    throw ValidationError("save_fit: failed writing '" + path + "'");
}

FitResult load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("load_fit: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ValidationError("load_fit: '" + path + "' is not valid JSON: " +
                          e.what());
  }
  if (!doc.contains("format") || doc["format"] != kFitFormat)
    throw ValidationError("load_fit: '" + path +
                          "' is not a recognised fit file");

  try {
    const json& jm = doc.at("model");
    std::vector<std::pair<int, int>> transitions;
    for (const auto& label : jm.at("transitions"))
      transitions.push_back(
          parse_transition_label(label.get<std::string>()));
    TransitionStructure structure(
        jm.at("states").get<int>(), std::move(transitions),
        jm.at("covariates").get<std::vector<std::string>>());

    std::vector<Baseline> baselines;
    for (const auto& jb : jm.at("baselines")) {
      if (jb.at("type") == "spline")
        baselines.push_back(Baseline::spline(vector_from_json(jb.at("knots"))));
      else
        baselines.push_back(Baseline::constant());
    }
    Model model(std::move(structure), std::move(baselines),
                jm.at("share_beta").get<bool>());

    FitResult fit{.model = std::move(model),
                  .theta = vector_from_json(doc.at("theta")),
                  .lambda = vector_from_json(doc.at("lambda")),
                  .v_theta = matrix_from_json(doc.at("v_theta")),
                  .edf_blocks = vector_from_json(doc.at("edf_blocks")),
                  .edf_total = doc.at("edf_total").get<double>(),
                  .converged = doc.at("converged").get<bool>(),
                  .iterations = doc.at("iterations").get<int>(),
                  .pen_loglik = doc.at("pen_loglik").get<double>(),
                  .ubre = doc.at("ubre").get<double>(),
                  .loglik = doc.at("loglik").get<double>()};
    if (!doc.at("grid_width").is_null())
      fit.grid_width = doc.at("grid_width").get<double>();
    if (fit.theta.size() != fit.model.n_params())
      throw ValidationError("load_fit: theta length does not match the model");
    if (fit.v_theta.rows() != fit.theta.size() ||
        fit.v_theta.cols() != fit.theta.size())
      throw ValidationError("load_fit: covariance shape mismatch");
    return fit;
  } catch (const json::exception& e) {
    throw ValidationError("load_fit: '" + path + "' is malformed: " + e.what());
  }
}

}  // namespace splinemsm
