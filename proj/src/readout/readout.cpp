#include "mmlc/readout/readout.hpp"

#include <cmath>
#include <stdexcept>

#include "mmlc/io/container.hpp"

namespace mmlc::readout {

namespace {
constexpr int kHidden = 200;
}

std::vector<ReadoutNet> train_readout_heads(int in_dim,
                                            const std::vector<int>& head_dims,
                                            const Schedule& schedule,
                                            std::uint64_t seed,
                                            const BatchFn& make_batch) {
  std::vector<ReadoutNet> heads(head_dims.size());
  std::vector<Adam<float>> opts;
  RngStream init(seed, 3);
  for (std::size_t h = 0; h < head_dims.size(); ++h) {
    heads[h].net = Mlp<float>::make(heads[h].params, "R" + std::to_string(h), in_dim,
                                    {kHidden, kHidden, head_dims[h]}, init);
    opts.emplace_back(schedule.lr);
  }

  Tensorf input;
  std::vector<Tensorf> targets(head_dims.size());
  for (int step = 0; step < schedule.batches; ++step) {
    make_batch(step, input, targets);
    for (std::size_t h = 0; h < head_dims.size(); ++h) {
      Tape<float> t;
      Val pred = heads[h].net.forward(t, t.leaf(input), true);
      Val loss = t.mse_sum_batch(pred, t.leaf(targets[h]),
                                 static_cast<float>(head_dims[h]));
      ensure_finite(t.value(loss)[0], "train_readout");
      t.backward(loss);
      opts[h].step(heads[h].params);
      heads[h].log.losses.push_back(t.value(loss)[0]);
    }
  }
  for (auto& h : heads) h.params.freeze();
  return heads;
}

ReadoutNet train_probe(int in_dim, int out_dim, const Schedule& schedule,
                       std::uint64_t seed, const BatchFn& make_batch) {
  auto heads = train_readout_heads(in_dim, {out_dim}, schedule, seed, make_batch);
  return std::move(heads.front());
}

MetricWithSe evaluate_head(const ReadoutNet& head, int head_index, int batches,
                           const BatchFn& make_batch, int slice_from,
                           int slice_len) {
  OnlineMean acc;
  Tensorf input;
  std::vector<Tensorf> targets;
  for (int b = 0; b < batches; ++b) {
    make_batch(b, input, targets);
    Tensorf pred = head.apply(input);
    const Tensorf& target = targets.at(static_cast<std::size_t>(head_index));
    if (slice_len < 0) {
      accumulate_per_sample_mse(pred, target, acc);
    } else {
      Tensorf ps({pred.dim(0), slice_len}), ts({pred.dim(0), slice_len});
      ps.mat() = pred.mat().middleCols(slice_from, slice_len);
      ts.mat() = target.mat().middleCols(slice_from, slice_len);
      accumulate_per_sample_mse(ps, ts, acc);
    }
  }
  return {acc.mean(), acc.std_error()};
}

SyntheticReadouts train_synthetic_readouts(const synth::SyntheticSpec& spec,
                                           const std::vector<synth::ConstructionNet>& nets,
                                           const EncodeFn& encode, int d_z,
                                           const Schedule& schedule,
                                           std::uint64_t seed) {
  if (d_z < 1) throw std::invalid_argument("readout training needs d_z >= 1");
  SyntheticReadouts r;
  std::vector<int> dims;
  if (spec.d_m > 0) {
    r.has_mutual = true;
    dims.push_back(spec.d_m);
  }
  if (spec.d_e > 0) {
    r.exclusive_heads = spec.n;
    for (int i = 0; i < spec.n; ++i) dims.push_back(spec.d_x());
  }

  RngStream data(seed, 4);
  const std::size_t n_heads = dims.size();
  auto make_batch = [&, n_heads](int, Tensorf& input, std::vector<Tensorf>& targets) {
    synth::SourceBatch s = synth::sample_sources(spec, schedule.batch_size, data);
    synth::ModalityBatch m = synth::construct_modalities(nets, s);
    input = encode(m);
    targets.resize(n_heads);
    std::size_t h = 0;
    if (spec.d_m > 0) targets[h++] = s.x_m;
    if (spec.d_e > 0) {
      for (int i = 0; i < spec.n; ++i) targets[h++] = s.x_i[static_cast<std::size_t>(i)];
    }
  };
  r.heads = train_readout_heads(d_z, dims, schedule, seed, make_batch);
  return r;
}

SyntheticEval evaluate_synthetic_readouts(const synth::SyntheticSpec& spec,
                                          const std::vector<synth::ConstructionNet>& nets,
                                          const EncodeFn& encode,
                                          const SyntheticReadouts& readouts,
                                          int eval_batches, int batch_size,
                                          std::uint64_t seed) {
  SyntheticEval out;
  out.r_m = {std::nan(""), 0.0};
  out.r_e = {std::nan(""), 0.0};

  RngStream data(seed, 5);
  OnlineMean m_acc;
  std::vector<OnlineMean> e_acc(static_cast<std::size_t>(readouts.exclusive_heads));
  OnlineMean e_all;

  for (int b = 0; b < eval_batches; ++b) {
    synth::SourceBatch s = synth::sample_sources(spec, batch_size, data);
    synth::ModalityBatch m = synth::construct_modalities(nets, s);
    Tensorf z = encode(m);

    std::size_t h = 0;
    if (readouts.has_mutual) {
      Tensorf pred = readouts.heads[h++].apply(z);
      accumulate_per_sample_mse(pred, s.x_m, m_acc);
    }
    for (int i = 0; i < readouts.exclusive_heads; ++i, ++h) {
      Tensorf pred = readouts.heads[h].apply(z);
      // r_e measures the exclusive slice (the leading d_e components of x_i).
      Tensorf ps({pred.dim(0), spec.d_e}), ts({pred.dim(0), spec.d_e});
      ps.mat() = pred.mat().leftCols(spec.d_e);
      ts.mat() = s.x_i[static_cast<std::size_t>(i)].mat().leftCols(spec.d_e);
      accumulate_per_sample_mse(ps, ts, e_acc[static_cast<std::size_t>(i)]);
      accumulate_per_sample_mse(ps, ts, e_all);
    }
  }

  if (readouts.has_mutual) out.r_m = {m_acc.mean(), m_acc.std_error()};
  if (readouts.exclusive_heads > 0) {
    out.r_e = {e_all.mean(), e_all.std_error()};
    for (auto& acc : e_acc) out.r_e_per_modality.push_back(acc.mean());
  }
  return out;
}

VisionErrorReport vision_errors(const sim::Dataset& ds, const ReconFn& recon,
                                int chunk) {
  const int h = ds.config.height, w = ds.config.width;
  if (w % 2 != 0) throw std::invalid_argument("vision_errors: image width must be even");
  VisionErrorReport rep;
  rep.error_map.assign(static_cast<std::size_t>(h) * w, 0.0);
  OnlineMean left, right;

  std::vector<int> idx;
  std::int64_t count = 0;
  for (int at = ds.eval_start; at < ds.n; at += chunk) {
    idx.clear();
    for (int i = at; i < std::min(ds.n, at + chunk); ++i) idx.push_back(i);
    Tensorf pred = recon(idx);
    for (std::size_t bi = 0; bi < idx.size(); ++bi) {
      const float* truth =
          ds.images.data() + static_cast<std::size_t>(idx[bi]) * ds.config.pixels();
      const float* p = pred.data() + static_cast<Eigen::Index>(bi) * ds.config.pixels();
      double lsum = 0.0, rsum = 0.0;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double e = static_cast<double>(p[r * w + c]) - truth[r * w + c];
          const double e2 = e * e;
          rep.error_map[static_cast<std::size_t>(r) * w + c] += e2;
          (c < w / 2 ? lsum : rsum) += e2;
        }
      }
      left.add(lsum / (h * (w / 2)));
      right.add(rsum / (h * (w / 2)));
      ++count;
    }
  }
  for (auto& v : rep.error_map) v /= static_cast<double>(count);
  rep.left_mse = left.mean();
  rep.right_mse = right.mean();
  return rep;
}

std::pair<double, double> vision_chance(const sim::Dataset& ds) {
  const int h = ds.config.height, w = ds.config.width, px = ds.config.pixels();
  // Per-pixel mean over the eval split, then the MSE that constant scores.
  std::vector<double> mean(static_cast<std::size_t>(px), 0.0);
  const int n_eval = ds.eval_count();
  for (int i = ds.eval_start; i < ds.n; ++i) {
    const float* img = ds.images.data() + static_cast<std::size_t>(i) * px;
    for (int p = 0; p < px; ++p) mean[static_cast<std::size_t>(p)] += img[p];
  }
  for (auto& v : mean) v /= n_eval;

  double lsum = 0.0, rsum = 0.0;
  for (int i = ds.eval_start; i < ds.n; ++i) {
    const float* img = ds.images.data() + static_cast<std::size_t>(i) * px;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double e = img[r * w + c] - mean[static_cast<std::size_t>(r) * w + c];
        (c < w / 2 ? lsum : rsum) += e * e;
      }
    }
  }
  const double denom = static_cast<double>(n_eval) * h * (w / 2);
  return {lsum / denom, rsum / denom};
}

void write_error_map(const std::string& path_base, const VisionErrorReport& rep,
                     int height, int width) {
  double mx = 0.0;
  for (double v : rep.error_map) mx = std::max(mx, v);
  const double scale = mx > 0.0 ? 255.0 / mx : 0.0;

  std::ofstream pgm(path_base + ".pgm", std::ios::binary);
  if (!pgm) throw io::IoError("cannot open for writing: " + path_base + ".pgm");
  pgm << "P5\n" << width << " " << height << "\n255\n";
  for (double v : rep.error_map) {
    pgm.put(static_cast<char>(static_cast<int>(std::lround(v * scale))));
  }

  io::Writer raw(path_base + ".f32");
  raw.magic("MMLCMAP1");
  raw.u32(static_cast<std::uint32_t>(height));
  raw.u32(static_cast<std::uint32_t>(width));
  for (double v : rep.error_map) raw.f32(static_cast<float>(v));
  raw.close();
}

}  // namespace mmlc::readout
