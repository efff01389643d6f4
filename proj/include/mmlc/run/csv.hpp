#pragma once

#include <string>
#include <vector>

#include "mmlc/run/result.hpp"

namespace mmlc::run {

// Long-format row: one metric value per line. `rep` is a repetition index,
// or "mean"/"std" for aggregates, or "analytic" for the d_z = 0 anchors.
struct CsvRow {
  std::string experiment;
  int d_z = 0;
  std::string rep;
  std::string metric;
  double value = 0.0;

  bool is_raw() const {
    return rep != "mean" && rep != "std" && rep != "analytic";
  }
};

// Raw rows in deterministic order: (d_z sweep order, rep, metric order),
// each ok cell closed by a status row (1 ok / 0 failed).
std::vector<CsvRow> result_rows(const SweepResult& r);

// mean/std per (d_z, metric) plus analytic d_z = 0 readout anchors.
std::vector<CsvRow> aggregate_rows(const SweepResult& r);

void write_csv(const std::string& path, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(const std::string& path);

// Rebuilds cells from raw rows (inverse of result_rows).
SweepResult result_from_rows(const std::vector<CsvRow>& rows,
                             const std::string& experiment);

}  // namespace mmlc::run
