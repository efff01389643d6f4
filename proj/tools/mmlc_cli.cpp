// Experiment harness: generate data, run sweeps, plot, probe, report.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "mmlc/run/csv.hpp"
#include "mmlc/run/sweep.hpp"
#include "mmlc/run/svg_plot.hpp"
#include "mmlc/sim/arm.hpp"

namespace fs = std::filesystem;
using namespace mmlc;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

run::RunConfig load_config(const CommonArgs& a) {
  run::RunConfig cfg = a.config.empty() ? run::RunConfig{}
                                        : run::parse_config_file(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  if (!a.out.empty()) cfg.out = a.out;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "config file (key = value sections)");
  cmd->add_option("--out", a.out, "output directory override");
  cmd->add_option("--seed", a.seed, "master seed override")
      ->each([&a](const std::string&) { a.seed_set = true; });
}

int cmd_gen_data(const CommonArgs& a, int export_frames) {
  run::RunConfig cfg = load_config(a);
  if (cfg.dataset.empty()) cfg.dataset = (fs::path(cfg.out) / "arm_dataset.bin").string();
  fs::create_directories(cfg.out);
  if (fs::path(cfg.dataset).has_parent_path()) {
    fs::create_directories(fs::path(cfg.dataset).parent_path());
  }

  std::cout << "generating " << cfg.dataset_n << " samples ("
            << cfg.arm.height << "x" << cfg.arm.width << ", " << cfg.arm.joints
            << " joints per arm)..." << std::endl;
  sim::Dataset ds = sim::generate_dataset(cfg.arm, cfg.dataset_n, cfg.seed);
  sim::save_dataset(cfg.dataset, ds);
  std::cout << "wrote " << cfg.dataset << " (" << ds.n << " samples, eval from "
            << ds.eval_start << ")" << std::endl;

  for (int i = 0; i < export_frames && i < ds.n; ++i) {
    const std::string path =
        (fs::path(cfg.out) / ("frame_" + std::to_string(i) + ".pgm")).string();
    sim::write_frame_pgm(path, ds.images.data() + static_cast<std::size_t>(i) * ds.config.pixels(),
                         ds.config.height, ds.config.width);
  }
  if (export_frames > 0) {
    std::cout << "exported " << std::min(export_frames, ds.n) << " frames to "
              << cfg.out << std::endl;
  }
  return 0;
}

int cmd_run(const CommonArgs& a, int jobs, bool resume) {
  run::RunConfig cfg = load_config(a);
  run::SweepOptions opts;
  opts.jobs = jobs;
  opts.resume = resume;
  opts.log = &std::cout;
  run::SweepResult result = run::run_sweep(cfg, opts);
  const bool ok = result.all_ok();
  std::cout << (ok ? "sweep complete" : "sweep finished with failures") << ": "
            << run::results_csv_path(cfg) << std::endl;
  return ok ? 0 : 1;
}

int cmd_plot(const CommonArgs& a) {
  run::RunConfig cfg = load_config(a);
  const auto rows = run::read_csv(run::results_csv_path(cfg));
  run::SweepResult result = run::result_from_rows(rows, cfg.experiment_name());
  if (result.cells.empty()) {
    std::cerr << "no rows for experiment " << cfg.experiment_name() << std::endl;
    return 1;
  }
  if (cfg.is_robot()) {
    const std::string base = (fs::path(cfg.out) / cfg.experiment_name()).string();
    run::write_plot(base + "_readout.svg", run::robot_readout_plot(result));
    run::write_plot(base + "_vision.svg", run::robot_vision_plot(result));
    std::cout << "wrote " << base << "_readout.svg and _vision.svg" << std::endl;
  } else {
    const std::string path =
        (fs::path(cfg.out) / (cfg.experiment_name() + ".svg")).string();
    run::write_plot(path, run::synthetic_plot(result, cfg.synthetic.d_min()));
    std::cout << "wrote " << path << std::endl;
  }
  return 0;
}

int cmd_probe(const CommonArgs& a) {
  run::RunConfig cfg = load_config(a);
  run::run_probes(cfg, &std::cout);
  std::cout << "wrote " << (fs::path(cfg.out) / "probes.csv").string() << std::endl;
  return 0;
}

int cmd_report(const CommonArgs& a) {
  run::RunConfig cfg = load_config(a);
  const auto rows = run::read_csv(run::results_csv_path(cfg));
  run::SweepResult result = run::result_from_rows(rows, cfg.experiment_name());

  // Stored aggregates must match a recomputation from the raw rows.
  for (const auto& row : rows) {
    if (row.rep != "mean" && row.rep != "std") continue;
    const run::Aggregate agg = result.aggregate(row.d_z, row.metric);
    const double expect = row.rep == "mean" ? agg.mean : agg.stddev;
    if (std::abs(expect - row.value) > 1e-12 * std::max(1.0, std::abs(expect))) {
      std::cerr << "aggregate mismatch for " << row.metric << " at d_z=" << row.d_z
                << ": file " << row.value << " vs recomputed " << expect << std::endl;
      return 1;
    }
  }

  std::cout << "experiment: " << result.experiment << "\n";
  auto zs = result.d_z_values();
  std::sort(zs.begin(), zs.end());
  const auto metrics = result.metric_names();
  for (int z : zs) {
    std::cout << "d_z=" << z << "\n";
    for (const auto& m : metrics) {
      const run::Aggregate agg = result.aggregate(z, m);
      if (agg.count == 0) continue;
      std::cout << "  " << m << " = " << agg.mean << " +- " << agg.stddev
                << " (n=" << agg.count << ")\n";
    }
  }
  std::cout << "aggregates verified against raw rows" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal lossy-compression laboratory"};
  app.require_subcommand(1);

  CommonArgs gen_args, run_args, plot_args, probe_args, report_args;
  int export_frames = 0, jobs = 1;
  bool resume = false;
  bool dump_config = false;

  auto* gen = app.add_subcommand("gen-data", "generate the two-arm dataset");
  add_common(gen, gen_args);
  gen->add_option("--export-frames", export_frames, "write the first K frames as PGM");

  auto* runc = app.add_subcommand("run", "run a sweep over d_z x repetitions");
  add_common(runc, run_args);
  runc->add_option("--jobs", jobs, "parallel cells");
  runc->add_flag("--resume", resume, "skip cells already in results.csv");
  runc->add_flag("--dump-config", dump_config, "print the default config and exit");

  auto* plot = app.add_subcommand("plot", "render SVG figures from results.csv");
  add_common(plot, plot_args);

  auto* probe = app.add_subcommand("probe", "raw-modality probes of the arm dataset");
  add_common(probe, probe_args);

  auto* report = app.add_subcommand("report", "print aggregates and verify them");
  add_common(report, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args, export_frames);
    if (runc->parsed()) {
      if (dump_config) {
        std::cout << run::default_config_text();
        return 0;
      }
      return cmd_run(run_args, jobs, resume);
    }
    if (plot->parsed()) return cmd_plot(plot_args);
    if (probe->parsed()) return cmd_probe(probe_args);
    if (report->parsed()) return cmd_report(report_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
