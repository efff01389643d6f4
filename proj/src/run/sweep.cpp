#include "mmlc/run/sweep.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <thread>

#include "mmlc/arch/robot.hpp"
#include "mmlc/arch/synthetic_arch.hpp"
#include "mmlc/core/metrics.hpp"
#include "mmlc/readout/readout.hpp"
#include "mmlc/run/csv.hpp"
#include "mmlc/run/seeds.hpp"

namespace mmlc::run {

namespace {

namespace fs = std::filesystem;

// ---- shared, read-only caches ----------------------------------------

const sim::Dataset& dataset_cache(const std::string& path) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<sim::Dataset>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(path);
  if (it == cache.end()) {
    auto ds = std::make_unique<sim::Dataset>(sim::load_dataset(path));
    it = cache.emplace(path, std::move(ds)).first;
  }
  return *it->second;
}

struct AesBundle {
  arch::AesPreEncoder pre;
  arch::AesCodes codes;
  double recon_eval = 0.0;  // round-trip frame MSE on the eval split
};

// One pre-encoder per (master seed, repetition); shared by the JE and CM
// AES experiments and across d_z.
std::shared_ptr<const AesBundle> aes_cache(const RunConfig& cfg,
                                           const sim::Dataset& ds, int rep) {
  static std::mutex mu;
  static std::map<std::uint64_t, std::shared_ptr<const AesBundle>> cache;
  const std::uint64_t seed = cell_seed(cfg.seed, "aes_pre", 0, rep);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(seed);
    if (it != cache.end()) return it->second;
  }
  auto bundle = std::make_shared<AesBundle>();
  bundle->pre = arch::train_aes_pre(ds, cfg.aes, seed);
  bundle->codes = arch::compute_aes_codes(bundle->pre, ds);

  auto recon = [&](const std::vector<int>& idx) {
    return bundle->pre.decode_codes(bundle->codes.batch(idx));
  };
  const auto round_trip = readout::vision_errors(ds, recon);
  bundle->recon_eval = (round_trip.left_mse + round_trip.right_mse) / 2.0;

  std::lock_guard<std::mutex> lock(mu);
  cache[seed] = bundle;
  return bundle;
}

// ---- synthetic cells --------------------------------------------------

void add_eval_metrics(CellResult& cell, const readout::SyntheticEval& ev) {
  if (std::isfinite(ev.r_m.value)) {
    cell.add("r_m", ev.r_m.value);
    cell.add("r_m_se", ev.r_m.se);
  }
  if (std::isfinite(ev.r_e.value)) {
    cell.add("r_e", ev.r_e.value);
    cell.add("r_e_se", ev.r_e.se);
    for (std::size_t i = 0; i < ev.r_e_per_modality.size(); ++i) {
      cell.add("r_e_mod" + std::to_string(i), ev.r_e_per_modality[i]);
    }
  }
}

double recon_diag(const synth::SyntheticSpec& spec,
                  const std::vector<synth::ConstructionNet>& nets,
                  const std::function<Tensorf(const synth::ModalityBatch&,
                                              const synth::SourceBatch&)>& recon_err_dim,
                  std::uint64_t seed) {
  // recon_err_dim returns per-sample squared-error sums already divided by
  // the component dimension; averaged over 20 fresh batches.
  OnlineMean acc;
  RngStream rng(seed, 6);
  for (int b = 0; b < 20; ++b) {
    auto s = synth::sample_sources(spec, 128, rng);
    auto m = synth::construct_modalities(nets, s);
    Tensorf per = recon_err_dim(m, s);
    for (Eigen::Index i = 0; i < per.size(); ++i) acc.add(per[i]);
  }
  return acc.mean();
}

Tensorf per_sample_mse_rows(const Tensorf& a, const Tensorf& b) {
  Tensorf out({a.dim(0), 1});
  const int d = a.dim(1);
  for (int r = 0; r < a.dim(0); ++r) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double e = static_cast<double>(a[static_cast<Eigen::Index>(r) * d + c]) -
                       static_cast<double>(b[static_cast<Eigen::Index>(r) * d + c]);
      s += e * e;
    }
    out[r] = static_cast<float>(s / d);
  }
  return out;
}

CellResult run_synthetic_cell(const RunConfig& cfg, int d_z, int rep) {
  CellResult cell{d_z, rep, false, "", {}};
  const std::string exp = cfg.experiment_name();
  const std::uint64_t seed = cell_seed(cfg.seed, exp, d_z, rep);

  synth::SyntheticSpec spec = cfg.synthetic;
  spec.seed = cell_seed(cfg.seed, exp + "/nets", 0, rep);
  auto nets = synth::build_construction_nets(spec);

  readout::EncodeFn encode;
  if (cfg.kind == "synthetic_je") {
    auto ae = std::make_shared<arch::AutoencoderJE>(
        arch::train_je(spec, nets, d_z, cfg.train, seed));
    cell.add("ae_loss_first10", ae->log.mean_first(10));
    cell.add("ae_loss_last10", ae->log.mean_last(10));
    cell.add("recon_mse", recon_diag(spec, nets,
                                     [ae](const synth::ModalityBatch& m, const synth::SourceBatch&) {
                                       return per_sample_mse_rows(ae->decode(ae->encode(m.y_concat)), m.y_concat);
                                     },
                                     seed));
    encode = [ae](const synth::ModalityBatch& m) { return ae->encode(m.y_concat); };
  } else if (cfg.kind == "synthetic_control") {
    auto ae = std::make_shared<arch::ControlAE>(
        arch::train_control(spec, nets, d_z, cfg.train, seed));
    cell.add("ae_loss_first10", ae->log.mean_first(10));
    cell.add("ae_loss_last10", ae->log.mean_last(10));
    cell.add("recon_mse", recon_diag(spec, nets,
                                     [ae](const synth::ModalityBatch& m, const synth::SourceBatch& s) {
                                       return per_sample_mse_rows(ae->decode(ae->encode(m.y_concat)), s.x_concat);
                                     },
                                     seed));
    encode = [ae](const synth::ModalityBatch& m) { return ae->encode(m.y_concat); };
  } else {  // synthetic_cm
    auto cm = std::make_shared<arch::CmPipeline>(
        arch::train_cm_pipeline(spec, nets, d_z, cfg.train, seed));
    cell.add("ae_loss_first10", cm->ae.log.mean_first(10));
    cell.add("ae_loss_last10", cm->ae.log.mean_last(10));
    cell.add("cm_pred_mse", cm->predictors.final_mean_prediction_mse);
    encode = [cm](const synth::ModalityBatch& m) { return cm->encode(m); };
  }

  auto readouts = readout::train_synthetic_readouts(spec, nets, encode, d_z,
                                                    cfg.readout, seed);
  auto ev = readout::evaluate_synthetic_readouts(spec, nets, encode, readouts,
                                                 cfg.eval_batches,
                                                 cfg.readout.batch_size, seed);
  add_eval_metrics(cell, ev);
  cell.ok = true;
  return cell;
}

// ---- robot cells ------------------------------------------------------

CellResult run_robot_cell(const RunConfig& cfg, int d_z, int rep, bool write_maps) {
  CellResult cell{d_z, rep, false, "", {}};
  const std::string exp = cfg.experiment_name();
  const std::uint64_t seed = cell_seed(cfg.seed, exp, d_z, rep);
  const sim::Dataset& ds = dataset_cache(cfg.dataset);
  const bool aes = cfg.option == "aes";
  const bool cm = cfg.kind == "robot_cm";

  std::shared_ptr<const AesBundle> bundle;
  const arch::AesCodes* codes = nullptr;
  const arch::AesPreEncoder* pre = nullptr;
  if (aes) {
    bundle = aes_cache(cfg, ds, rep);
    codes = &bundle->codes;
    pre = &bundle->pre;
    cell.add("aes_recon", bundle->recon_eval);
  }

  const arch::RobotOption opt = aes ? arch::RobotOption::Aes : arch::RobotOption::Default;
  std::shared_ptr<arch::RobotPipeline> pipe;
  std::shared_ptr<arch::RobotCmPredictors> predictors;
  if (cm) {
    auto trained = std::make_shared<arch::RobotCm>(arch::train_robot_cm(
        ds, opt, codes, d_z, cfg.split_index, cfg.train, seed));
    cell.add("mv_loss_last10", trained->predictors.log_v.mean_last(10));
    cell.add("mp_loss_last10", trained->predictors.log_p.mean_last(10));
    predictors = std::shared_ptr<arch::RobotCmPredictors>(trained, &trained->predictors);
    pipe = std::shared_ptr<arch::RobotPipeline>(trained, &trained->ae);
  } else {
    pipe = std::make_shared<arch::RobotPipeline>(arch::train_robot_je(
        ds, opt, codes, d_z, cfg.split_index, cfg.train, seed));
  }
  cell.add("ae_loss_first10", pipe->log.mean_first(10));
  cell.add("ae_loss_last10", pipe->log.mean_last(10));

  auto encode = arch::make_robot_encoder(*pipe, predictors.get(), ds, codes);
  auto net = arch::train_robot_readout(ds, encode, d_z, cfg.readout, seed);
  auto per_stream = arch::evaluate_robot_readout(ds, encode, net);
  for (const auto& [stream, metric] : per_stream) {
    cell.add(std::string("readout_") + sim::stream_name(stream), metric.value);
    cell.add(std::string("readout_") + sim::stream_name(stream) + "_se", metric.se);
  }

  auto recon = arch::make_frame_recon(*pipe, predictors.get(), ds, pre, codes);
  auto vis = readout::vision_errors(ds, recon);
  const auto chance = readout::vision_chance(ds);
  cell.add("vision_left", vis.left_mse);
  cell.add("vision_right", vis.right_mse);
  cell.add("vision_chance_left", chance.first);
  cell.add("vision_chance_right", chance.second);

  if (write_maps) {
    const fs::path dir = fs::path(cfg.out) / "maps";
    fs::create_directories(dir);
    const std::string base = (dir / (exp + "_dz" + std::to_string(d_z) + "_rep" +
                                     std::to_string(rep))).string();
    readout::write_error_map(base, vis, ds.config.height, ds.config.width);
  }
  cell.ok = true;
  return cell;
}

}  // namespace

CellResult run_cell(const RunConfig& cfg, int d_z, int rep, bool write_maps) {
  return cfg.is_robot() ? run_robot_cell(cfg, d_z, rep, write_maps)
                        : run_synthetic_cell(cfg, d_z, rep);
}

std::string results_csv_path(const RunConfig& cfg) {
  return (fs::path(cfg.out) / "results.csv").string();
}

SweepResult run_sweep(const RunConfig& cfg, const SweepOptions& opts) {
  cfg.validate();
  fs::create_directories(cfg.out);
  const std::string csv_path = results_csv_path(cfg);

  SweepResult result;
  result.experiment = cfg.experiment_name();

  // Seed result slots in canonical order; recover completed cells on resume.
  SweepResult previous;
  if (opts.resume && fs::exists(csv_path)) {
    previous = result_from_rows(read_csv(csv_path), result.experiment);
  }
  struct Todo {
    int d_z, rep;
    std::size_t slot;
  };
  std::vector<Todo> todo;
  for (int z : cfg.d_z) {
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      const CellResult* prev = previous.cell(z, rep);
      if (prev != nullptr && prev->ok) {
        result.cells.push_back(*prev);
      } else {
        result.cells.push_back(CellResult{z, rep, false, "pending", {}});
        todo.push_back({z, rep, result.cells.size() - 1});
      }
    }
  }

  std::mutex mu;
  auto flush = [&] {
    std::vector<CsvRow> rows = result_rows(result);
    auto agg = aggregate_rows(result);
    rows.insert(rows.end(), agg.begin(), agg.end());
    write_csv(csv_path, rows);
  };
  {
    std::lock_guard<std::mutex> lock(mu);
    flush();
  }

  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, opts.jobs);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const Todo& t = todo[i];
      CellResult cell;
      try {
        cell = run_cell(cfg, t.d_z, t.rep, opts.write_maps && cfg.is_robot());
      } catch (const std::exception& e) {
        cell = CellResult{t.d_z, t.rep, false, e.what(), {}};
      } catch (...) {
        cell = CellResult{t.d_z, t.rep, false, "unknown error", {}};
      }
      std::lock_guard<std::mutex> lock(mu);
      result.cells[t.slot] = cell;
      flush();
      if (opts.log != nullptr) {
        *opts.log << result.experiment << " d_z=" << t.d_z << " rep=" << t.rep
                  << (cell.ok ? " done" : " FAILED: " + cell.error) << std::endl;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return result;
}

ProbeReport run_probes(const RunConfig& cfg, std::ostream* log) {
  if (cfg.dataset.empty()) {
    throw ConfigError("probes need robot.dataset in the config");
  }
  const sim::Dataset& ds = dataset_cache(cfg.dataset);
  const int px = ds.config.pixels();
  const int dp = ds.config.proprio_dim();
  ProbeReport report;

  enum class In { Proprio, Vision, Both };
  struct Spec {
    const char* name;
    In input;
    sim::Stream stream;
  };
  const Spec probes[] = {
      {"probe_yp_pos_right", In::Proprio, sim::Stream::PosR},
      {"probe_yp_vel_right", In::Proprio, sim::Stream::VelR},
      {"probe_yp_ee_right", In::Proprio, sim::Stream::EeR},
      {"probe_yv_pos_left", In::Vision, sim::Stream::PosL},
      {"probe_yv_ee_left", In::Vision, sim::Stream::EeL},
      {"probe_yv_pos_right", In::Vision, sim::Stream::PosR},
      {"probe_both_vel_left", In::Both, sim::Stream::VelL},
  };

  for (const Spec& p : probes) {
    const auto range = sim::stream_range(ds.config, p.stream);
    const int in_dim = p.input == In::Proprio ? dp : (p.input == In::Vision ? px : px + dp);
    const std::uint64_t seed = cell_seed(cfg.seed, std::string("probe/") + p.name, 0, 0);

    RngStream data(seed, 80);
    auto fill = [&](const std::vector<int>& idx, Tensorf& input, Tensorf& target) {
      const int b = static_cast<int>(idx.size());
      Tensorf imgs, pro;
      if (p.input != In::Proprio) imgs = ds.image_batch(idx).reshaped({b, px});
      if (p.input != In::Vision) pro = ds.proprio_batch(idx);
      if (p.input == In::Proprio) {
        input = pro;
      } else if (p.input == In::Vision) {
        input = imgs;
      } else {
        input = Tensorf({b, px + dp});
        input.mat().leftCols(px) = imgs.mat();
        input.mat().rightCols(dp) = pro.mat();
      }
      Tensorf full = ds.target_batch(idx);
      target = Tensorf({b, range.len});
      target.mat() = full.mat().middleCols(range.offset, range.len);
    };

    auto make_batch = [&](int, Tensorf& input, std::vector<Tensorf>& targets) {
      std::vector<int> idx(static_cast<std::size_t>(cfg.readout.batch_size));
      for (auto& i : idx) {
        i = static_cast<int>(data.uniform01() * ds.train_count());
        if (i >= ds.train_count()) i = ds.train_count() - 1;
      }
      targets.resize(1);
      fill(idx, input, targets[0]);
    };
    auto net = readout::train_probe(in_dim, range.len, cfg.readout, seed, make_batch);

    OnlineMean acc;
    for (int at = ds.eval_start; at < ds.n; at += 128) {
      std::vector<int> idx;
      for (int i = at; i < std::min(ds.n, at + 128); ++i) idx.push_back(i);
      Tensorf input, target;
      fill(idx, input, target);
      Tensorf pred = net.apply(input);
      accumulate_per_sample_mse(pred, target, acc);
    }
    report.metrics.emplace_back(p.name, acc.mean());
    if (log != nullptr) {
      *log << p.name << " = " << acc.mean() << std::endl;
    }
  }

  fs::create_directories(cfg.out);
  std::vector<CsvRow> rows;
  for (const auto& [name, value] : report.metrics) {
    rows.push_back({"probe", 0, "0", name, value});
  }
  write_csv((fs::path(cfg.out) / "probes.csv").string(), rows);
  return report;
}

}  // namespace mmlc::run
