#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "splinemsm/config.hpp"
#include "splinemsm/dataset.hpp"
#include "splinemsm/estimator.hpp"

namespace splinemsm {

// Shortest representation that round-trips a double (17 significant digits).
std::string format_double(double x);

// Plain comma-separated tables; no quoting, fields must not contain commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

// Panel data ingestion from a CSV with columns id, time, state, plus one
// column per configured covariate (extra columns are ignored).  Applies the
// configured time filter, groups rows by id, flags exact deaths, and
// validates everything the PanelDataset invariants require.  Individuals
// reduced below two rows by the filter are dropped and reported; individuals
// with fewer than two rows in the raw file are an error.
struct IngestReport {
  long rows_read = 0;
  long rows_filtered = 0;
  int individuals = 0;
  std::vector<std::string> dropped_ids;
  Eigen::MatrixXi pair_table;
};

std::pair<PanelDataset, IngestReport> ingest(const std::string& path,
                                             const ModelConfig& config);

// Dataset writer producing the same column layout ingest reads.
void write_dataset_csv(const std::string& path, const PanelDataset& data);

// Fit results as a single JSON document carrying the model (including spline
// knots), estimates, covariance, and diagnostics; enough to reload and
// predict without the original data.
void save_fit(const std::string& path, const FitResult& fit);
FitResult load_fit(const std::string& path);

}  // namespace splinemsm
