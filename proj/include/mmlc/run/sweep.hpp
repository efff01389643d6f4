#pragma once

#include <iosfwd>
#include <string>

#include "mmlc/run/config.hpp"
#include "mmlc/run/result.hpp"

namespace mmlc::run {

struct SweepOptions {
  int jobs = 1;
  bool resume = false;
  bool write_maps = true;      // robot per-cell error maps
  std::ostream* log = nullptr;
};

// Runs every (d_z, repetition) cell, incrementally rewriting
// <out>/results.csv (raw rows + aggregates) after each completion.
// Failed cells are recorded with status 0 and the sweep continues.
SweepResult run_sweep(const RunConfig& cfg, const SweepOptions& opts);

// One cell, dispatched on cfg.kind; exceptions escape to the caller.
CellResult run_cell(const RunConfig& cfg, int d_z, int rep,
                    bool write_maps = false);

// Raw-modality probes of the arm dataset: what is recoverable from
// proprioception alone, vision alone, and both (gate checks for the
// robot experiments). Writes <out>/probes.csv.
struct ProbeReport {
  std::vector<std::pair<std::string, double>> metrics;

  const double* find(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return &v;
    return nullptr;
  }
};

ProbeReport run_probes(const RunConfig& cfg, std::ostream* log);

std::string results_csv_path(const RunConfig& cfg);

}  // namespace mmlc::run
