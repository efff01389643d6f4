#include "mmlc/run/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mmlc/io/container.hpp"

namespace mmlc::run {

namespace {

// Readout-error metrics have a theoretical chance anchor of exactly 1.0
// at d_z = 0 (never trained).
bool has_analytic_zero(const std::string& metric) {
  const bool readout = metric.rfind("readout_", 0) == 0;
  const bool synthetic = metric == "r_m" || metric == "r_e" ||
                         metric.rfind("r_e_mod", 0) == 0;
  const bool se = metric.size() > 3 && metric.compare(metric.size() - 3, 3, "_se") == 0;
  return (readout || synthetic) && !se;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<CsvRow> result_rows(const SweepResult& r) {
  std::vector<CsvRow> rows;
  for (const auto& c : r.cells) {
    const std::string rep = std::to_string(c.rep);
    for (const auto& [k, v] : c.metrics) {
      rows.push_back({r.experiment, c.d_z, rep, k, v});
    }
    rows.push_back({r.experiment, c.d_z, rep, "status", c.ok ? 1.0 : 0.0});
  }
  return rows;
}

std::vector<CsvRow> aggregate_rows(const SweepResult& r) {
  std::vector<CsvRow> rows;
  const auto metrics = r.metric_names();
  for (const auto& m : metrics) {
    if (has_analytic_zero(m)) {
      rows.push_back({r.experiment, 0, "analytic", m, 1.0});
    }
  }
  for (int z : r.d_z_values()) {
    for (const auto& m : metrics) {
      const Aggregate a = r.aggregate(z, m);
      if (a.count == 0) continue;
      rows.push_back({r.experiment, z, "mean", m, a.mean});
      rows.push_back({r.experiment, z, "std", m, a.stddev});
    }
  }
  return rows;
}

void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw io::IoError("cannot open for writing: " + tmp);
    out << "experiment,d_z,rep,metric,value\n";
    for (const auto& r : rows) {
      out << r.experiment << ',' << r.d_z << ',' << r.rep << ',' << r.metric
          << ',' << format_value(r.value) << '\n';
    }
    if (!out) throw io::IoError("failed writing " + tmp);
  }
  std::rename(tmp.c_str(), path.c_str());
}

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::IoError("cannot open for reading: " + path);
  std::vector<CsvRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "experiment,d_z,rep,metric,value") {
    throw io::IoError("bad csv header in " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CsvRow r;
    std::string dz, value;
    if (!std::getline(ls, r.experiment, ',') || !std::getline(ls, dz, ',') ||
        !std::getline(ls, r.rep, ',') || !std::getline(ls, r.metric, ',') ||
        !std::getline(ls, value)) {
      throw io::IoError("bad csv row in " + path + ": " + line);
    }
    r.d_z = std::stoi(dz);
    r.value = std::stod(value);
    rows.push_back(std::move(r));
  }
  return rows;
}

SweepResult result_from_rows(const std::vector<CsvRow>& rows,
                             const std::string& experiment) {
  SweepResult out;
  out.experiment = experiment;
  auto cell_of = [&](int d_z, int rep) -> CellResult& {
    for (auto& c : out.cells) {
      if (c.d_z == d_z && c.rep == rep) return c;
    }
    out.cells.push_back(CellResult{d_z, rep, false, "", {}});
    return out.cells.back();
  };
  for (const auto& r : rows) {
    if (r.experiment != experiment || !r.is_raw()) continue;
    CellResult& c = cell_of(r.d_z, std::stoi(r.rep));
    if (r.metric == "status") {
      c.ok = r.value != 0.0;
    } else {
      c.add(r.metric, r.value);
    }
  }
  return out;
}

}  // namespace mmlc::run
