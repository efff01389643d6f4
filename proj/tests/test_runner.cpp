#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmlc/run/csv.hpp"
#include "mmlc/run/seeds.hpp"
#include "mmlc/run/svg_plot.hpp"
#include "mmlc/run/sweep.hpp"

using namespace mmlc;
using namespace mmlc::run;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_synthetic_config(const std::string& out) {
  RunConfig cfg;
  cfg.kind = "synthetic_je";
  cfg.seed = 555;
  cfg.repetitions = 1;
  cfg.d_z = {1, 2};
  cfg.out = out;
  cfg.train.batches = 40;
  cfg.train.batch_size = 16;
  cfg.readout = cfg.train;
  cfg.eval_batches = 50;
  cfg.synthetic.d_m = 1;
  cfg.synthetic.d_e = 1;
  cfg.synthetic.k = 2;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config text parses with defaults and rejects bad input") {
  const std::string text = R"(
# comment
[experiment]
kind = synthetic_cm
seed = 99
d_z = 2, 4, 8
repetitions = 2

[synthetic]
d_e = 10
)";
  RunConfig cfg = parse_config_text(text);
  CHECK(cfg.kind == "synthetic_cm");
  CHECK(cfg.seed == 99);
  CHECK(cfg.d_z == std::vector<int>{2, 4, 8});
  CHECK(cfg.repetitions == 2);
  CHECK(cfg.synthetic.d_e == 10);
  CHECK(cfg.synthetic.d_m == 4);      // default untouched
  CHECK(cfg.train.batches == 2500);   // paper schedule default

  CHECK_THROWS_AS(parse_config_text("[experiment]\nkind = nonsense\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[experiment]\nbogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[experiment]\nd_z = 0,1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[experiment]\nkind = robot_je\n"), ConfigError);
  CHECK_NOTHROW(parse_config_text(default_config_text()));
}

TEST_CASE("cell seeds are pure and distinct across coordinates") {
  const auto a = cell_seed(1, "synthetic_je", 4, 0);
  CHECK(a == cell_seed(1, "synthetic_je", 4, 0));
  CHECK(a != cell_seed(1, "synthetic_je", 4, 1));
  CHECK(a != cell_seed(1, "synthetic_je", 5, 0));
  CHECK(a != cell_seed(1, "synthetic_cm", 4, 0));
  CHECK(a != cell_seed(2, "synthetic_je", 4, 0));
}

TEST_CASE("csv: empty file, round trip, aggregate recomputation") {
  TempDir tmp("mmlc_csv_test");
  const std::string path = (tmp.path / "t.csv").string();

  write_csv(path, {});
  CHECK(read_csv(path).empty());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "experiment,d_z,rep,metric,value");

  SweepResult r;
  r.experiment = "synthetic_je";
  RngStream rng(1, 0);
  for (int z : {1, 2, 3}) {
    for (int rep = 0; rep < 3; ++rep) {
      CellResult c{z, rep, true, "", {}};
      c.add("r_m", rng.uniform01());
      c.add("r_e", rng.uniform01() * 1e-17);  // exercise extreme formatting
      r.cells.push_back(c);
    }
  }
  auto rows = result_rows(r);
  auto agg = aggregate_rows(r);
  rows.insert(rows.end(), agg.begin(), agg.end());
  write_csv(path, rows);

  auto parsed_rows = read_csv(path);
  SweepResult parsed = result_from_rows(parsed_rows, "synthetic_je");
  CHECK(parsed == r);

  // Aggregates in the file equal an independent mean/std recomputation.
  for (const auto& row : parsed_rows) {
    if (row.rep != "mean" && row.rep != "std") continue;
    double sum = 0.0;
    int n = 0;
    for (const auto& c : r.cells) {
      if (c.d_z != row.d_z) continue;
      sum += *c.find(row.metric);
      ++n;
    }
    const double mean = sum / n;
    if (row.rep == "mean") {
      CHECK(row.value == doctest::Approx(mean).epsilon(1e-15));
    } else {
      double ss = 0.0;
      for (const auto& c : r.cells) {
        if (c.d_z != row.d_z) continue;
        ss += (*c.find(row.metric) - mean) * (*c.find(row.metric) - mean);
      }
      CHECK(row.value == doctest::Approx(std::sqrt(ss / (n - 1))).epsilon(1e-12));
    }
  }

  // Analytic chance anchors at d_z = 0 for the readout metrics.
  bool analytic_r_m = false;
  for (const auto& row : parsed_rows) {
    if (row.rep == "analytic" && row.metric == "r_m" && row.d_z == 0) {
      analytic_r_m = row.value == 1.0;
    }
  }
  CHECK(analytic_r_m);
}

TEST_CASE("sweep counting: 30 d_z x 3 reps gives 90 cells, 30 aggregate groups") {
  SweepResult r;
  r.experiment = "synthetic_je";
  for (int z = 1; z <= 30; ++z) {
    for (int rep = 0; rep < 3; ++rep) {
      CellResult c{z, rep, true, "", {}};
      c.add("r_m", 0.5);
      r.cells.push_back(c);
    }
  }
  CHECK(r.cells.size() == 90);
  CHECK(r.d_z_values().size() == 30);
  auto agg = aggregate_rows(r);
  int mean_rows = 0;
  for (const auto& row : agg) mean_rows += row.rep == "mean";
  CHECK(mean_rows == 30);
}

TEST_CASE("run_sweep: determinism, resume recomputes only missing cells") {
  TempDir tmp("mmlc_sweep_test");
  RunConfig cfg = tiny_synthetic_config((tmp.path / "a").string());
  SweepOptions opts;
  opts.jobs = 1;

  SweepResult first = run_sweep(cfg, opts);
  CHECK(first.all_ok());
  CHECK(first.cells.size() == 2);

  // Parallel rerun into a fresh directory: identical values.
  RunConfig cfg2 = cfg;
  cfg2.out = (tmp.path / "b").string();
  SweepOptions par;
  par.jobs = 2;
  SweepResult second = run_sweep(cfg2, par);
  CHECK(second == first);

  // Drop one cell from the csv, resume, and get the same numbers back.
  const std::string csv = results_csv_path(cfg);
  auto rows = read_csv(csv);
  std::vector<CsvRow> kept;
  for (const auto& row : rows) {
    if (row.is_raw() && row.d_z == 2) continue;  // delete cell d_z=2
    kept.push_back(row);
  }
  write_csv(csv, kept);

  SweepOptions resume;
  resume.jobs = 1;
  resume.resume = true;
  SweepResult third = run_sweep(cfg, resume);
  CHECK(third == first);
}

TEST_CASE("run_sweep records failures and keeps going") {
  TempDir tmp("mmlc_sweep_fail");
  RunConfig cfg;
  cfg.kind = "robot_je";
  cfg.dataset = (tmp.path / "missing.bin").string();
  cfg.out = (tmp.path / "out").string();
  cfg.d_z = {1, 2};
  cfg.repetitions = 1;
  SweepOptions opts;
  SweepResult r = run_sweep(cfg, opts);
  CHECK_FALSE(r.all_ok());
  CHECK(r.cells.size() == 2);
  for (const auto& c : r.cells) {
    CHECK_FALSE(c.ok);
    CHECK_FALSE(c.error.empty());
  }
  auto rows = read_csv(results_csv_path(cfg));
  int status_zero = 0;
  for (const auto& row : rows) status_zero += row.metric == "status" && row.value == 0.0;
  CHECK(status_zero == 2);
}

TEST_CASE("plots: marker at d_min, single point validity, points match aggregates") {
  SweepResult r;
  r.experiment = "synthetic_je";
  RngStream rng(2, 0);
  for (int z : {2, 4, 6, 8, 10, 12, 16, 24, 30}) {
    for (int rep = 0; rep < 3; ++rep) {
      CellResult c{z, rep, true, "", {}};
      c.add("r_m", 0.1 + 0.5 * rng.uniform01());
      c.add("r_e", 0.2 + 0.5 * rng.uniform01());
      r.cells.push_back(c);
    }
  }
  PlotSpec spec = synthetic_plot(r, 12);
  REQUIRE(spec.vlines.size() == 1);
  CHECK(spec.vlines[0] == 12.0);

  const std::string svg = render_svg(spec);
  PlotGeometry g{spec.x_min, spec.x_max, spec.y_min, spec.y_max};
  CHECK(svg.find("stroke-dasharray='2,4'") != std::string::npos);
  CHECK(svg.find("x1='" + format_coord(g.px(12)) + "'") != std::string::npos);

  // The polyline for r_m must encode exactly the csv aggregates (plus the
  // analytic point at d_z = 0).
  std::vector<PlotPoint> expect;
  expect.push_back({0.0, 1.0, 0.0});
  for (int z : r.d_z_values()) {
    auto a = r.aggregate(z, "r_m");
    expect.push_back({static_cast<double>(z), a.mean, a.stddev});
  }
  CHECK(svg.find("points='" + polyline_points(expect, g) + "'") != std::string::npos);

  // Degenerate single-point sweep still renders.
  SweepResult one;
  one.experiment = "synthetic_je";
  CellResult c{5, 0, true, "", {}};
  c.add("r_m", 0.4);
  c.add("r_e", 0.6);
  one.cells.push_back(c);
  const std::string svg1 = render_svg(synthetic_plot(one, 12));
  CHECK(svg1.find("<svg") != std::string::npos);
  CHECK(svg1.find("circle") != std::string::npos);
}

TEST_CASE("probe runner needs a dataset path") {
  RunConfig cfg;
  cfg.kind = "synthetic_je";
  CHECK_THROWS_AS(run_probes(cfg, nullptr), ConfigError);
}
