#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace mmlc::run {

// One (d_z, repetition) cell. Metrics keep insertion order so emitted rows
// are deterministic.
struct CellResult {
  int d_z = 0;
  int rep = 0;
  bool ok = false;
  std::string error;
  std::vector<std::pair<std::string, double>> metrics;

  void add(const std::string& name, double value) { metrics.emplace_back(name, value); }

  const double* find(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return &v;
    return nullptr;
  }

  bool operator==(const CellResult& o) const {
    return d_z == o.d_z && rep == o.rep && ok == o.ok && metrics == o.metrics;
  }
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

struct SweepResult {
  std::string experiment;
  std::vector<CellResult> cells;

  const CellResult* cell(int d_z, int rep) const {
    for (const auto& c : cells)
      if (c.d_z == d_z && c.rep == rep) return &c;
    return nullptr;
  }

  bool all_ok() const {
    for (const auto& c : cells)
      if (!c.ok) return false;
    return !cells.empty();
  }

  // mean/std over repetitions of one metric at one d_z (ok cells only);
  // sample standard deviation, zero for a single repetition.
  Aggregate aggregate(int d_z, const std::string& metric) const {
    Aggregate a;
    double sum = 0.0;
    std::vector<double> vals;
    for (const auto& c : cells) {
      if (c.d_z != d_z || !c.ok) continue;
      if (const double* v = c.find(metric)) {
        vals.push_back(*v);
        sum += *v;
      }
    }
    a.count = static_cast<int>(vals.size());
    if (a.count == 0) return a;
    a.mean = sum / a.count;
    if (a.count > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - a.mean) * (v - a.mean);
      a.stddev = std::sqrt(ss / (a.count - 1));
    }
    return a;
  }

  std::vector<int> d_z_values() const {
    std::vector<int> out;
    for (const auto& c : cells) {
      bool seen = false;
      for (int z : out) seen = seen || z == c.d_z;
      if (!seen) out.push_back(c.d_z);
    }
    return out;
  }

  // Union of metric names across ok cells, first-seen order.
  std::vector<std::string> metric_names() const {
    std::vector<std::string> out;
    for (const auto& c : cells) {
      if (!c.ok) continue;
      for (const auto& [k, v] : c.metrics) {
        bool seen = false;
        for (const auto& m : out) seen = seen || m == k;
        if (!seen) out.push_back(k);
      }
    }
    return out;
  }

  bool operator==(const SweepResult& o) const {
    return experiment == o.experiment && cells == o.cells;
  }
};

}  // namespace mmlc::run
