#include "mmlc/arch/synthetic_arch.hpp"

#include <stdexcept>

#include "mmlc/core/metrics.hpp"

namespace mmlc::arch {

using synth::ModalityBatch;
using synth::SourceBatch;
using synth::SyntheticSpec;

namespace {

constexpr int kHidden = 200;

// Stream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDataStream = 2;

void check_dz(int d_z) {
  if (d_z < 1) throw std::invalid_argument("latent dimension d_z must be >= 1");
}

}  // namespace

Tensorf CrossModalPredictors::code(const ModalityBatch& m) const {
  const int n = static_cast<int>(nets.size());
  const int batch = m.y_concat.dim(0);
  const int part = nets[0].out_dim();  // (n-1)*d_y
  Tensorf c({batch, n * part});
  for (int i = 0; i < n; ++i) {
    Tensorf p = predict_others(i, m.y[static_cast<std::size_t>(i)]);
    c.mat().middleCols(i * part, part) = p.mat();
  }
  return c;
}

AutoencoderJE train_je(const SyntheticSpec& spec,
                       const std::vector<synth::ConstructionNet>& nets, int d_z,
                       const Schedule& schedule, std::uint64_t seed) {
  check_dz(d_z);
  spec.validate();
  const int d_in = spec.n * spec.d_y();

  AutoencoderJE ae;
  RngStream init(seed, kInitStream);
  ae.encoder = Mlp<float>::make(ae.params, "E", d_in, {kHidden, kHidden, d_z}, init);
  ae.decoder = Mlp<float>::make(ae.params, "D", d_z, {kHidden, kHidden, d_in}, init);

  Adam<float> opt(schedule.lr);
  RngStream data(seed, kDataStream);
  for (int step = 0; step < schedule.batches; ++step) {
    SourceBatch s = synth::sample_sources(spec, schedule.batch_size, data);
    ModalityBatch m = synth::construct_modalities(nets, s);

    Tape<float> t;
    Val y = t.leaf(m.y_concat);
    Val z = ae.encoder.forward(t, y, true);
    Val recon = ae.decoder.forward(t, z, true);
    Val loss = t.mse_sum_batch(recon, y, static_cast<float>(d_in));
    ensure_finite(t.value(loss)[0], "train_je");
    t.backward(loss);
    opt.step(ae.params);
    ae.log.losses.push_back(t.value(loss)[0]);
  }
  ae.params.freeze();
  return ae;
}

ControlAE train_control(const SyntheticSpec& spec,
                        const std::vector<synth::ConstructionNet>& nets, int d_z,
                        const Schedule& schedule, std::uint64_t seed) {
  check_dz(d_z);
  spec.validate();
  const int d_in = spec.n * spec.d_y();
  const int d_out = spec.n * spec.d_x();

  ControlAE ae;
  RngStream init(seed, kInitStream);
  ae.encoder = Mlp<float>::make(ae.params, "E", d_in, {kHidden, kHidden, d_z}, init);
  ae.decoder = Mlp<float>::make(ae.params, "D", d_z, {kHidden, kHidden, d_out}, init);

  Adam<float> opt(schedule.lr);
  RngStream data(seed, kDataStream);
  for (int step = 0; step < schedule.batches; ++step) {
    SourceBatch s = synth::sample_sources(spec, schedule.batch_size, data);
    ModalityBatch m = synth::construct_modalities(nets, s);

    Tape<float> t;
    Val z = ae.encoder.forward(t, t.leaf(m.y_concat), true);
    Val recon = ae.decoder.forward(t, z, true);
    Val loss = t.mse_sum_batch(recon, t.leaf(s.x_concat), static_cast<float>(d_out));
    ensure_finite(t.value(loss)[0], "train_control");
    t.backward(loss);
    opt.step(ae.params);
    ae.log.losses.push_back(t.value(loss)[0]);
  }
  ae.params.freeze();
  return ae;
}

CrossModalPredictors train_cross_modal(const SyntheticSpec& spec,
                                       const std::vector<synth::ConstructionNet>& nets,
                                       const Schedule& schedule, std::uint64_t seed) {
  spec.validate();
  const int n = spec.n;
  const int d_y = spec.d_y();
  const int d_out = (n - 1) * d_y;

  CrossModalPredictors cm;
  cm.params.resize(static_cast<std::size_t>(n));
  RngStream init(seed, kInitStream);
  std::vector<Adam<float>> opts;
  for (int i = 0; i < n; ++i) {
    cm.nets.push_back(Mlp<float>::make(cm.params[static_cast<std::size_t>(i)],
                                       "M" + std::to_string(i), d_y,
                                       {kHidden, kHidden, d_out}, init));
    opts.emplace_back(schedule.lr);
  }

  // The predictors are independent; they share the fresh sample stream.
  RngStream data(seed, kDataStream);
  OnlineMean tail_mse;
  const int tail_from = schedule.batches - std::max(1, schedule.batches / 20);
  for (int step = 0; step < schedule.batches; ++step) {
    SourceBatch s = synth::sample_sources(spec, schedule.batch_size, data);
    ModalityBatch m = synth::construct_modalities(nets, s);

    float batch_loss = 0.f;
    for (int i = 0; i < n; ++i) {
      Tensorf target({schedule.batch_size, d_out});
      int at = 0;
      for (int q = 0; q < n; ++q) {
        if (q == i) continue;
        target.mat().middleCols(at, d_y) = m.y[static_cast<std::size_t>(q)].mat();
        at += d_y;
      }

      Tape<float> t;
      Val pred = cm.nets[static_cast<std::size_t>(i)].forward(
          t, t.leaf(m.y[static_cast<std::size_t>(i)]), true);
      Val loss = t.mse_sum_batch(pred, t.leaf(target), static_cast<float>(d_out));
      ensure_finite(t.value(loss)[0], "train_cross_modal");
      t.backward(loss);
      opts[static_cast<std::size_t>(i)].step(cm.params[static_cast<std::size_t>(i)]);
      batch_loss += t.value(loss)[0];
      if (step >= tail_from) {
        tail_mse.add(t.value(loss)[0] / schedule.batch_size);  // per data point
      }
    }
    cm.log.losses.push_back(batch_loss);
  }
  cm.final_mean_prediction_mse = tail_mse.mean();
  for (auto& p : cm.params) p.freeze();
  return cm;
}

CmPipeline train_cm_pipeline(const SyntheticSpec& spec,
                             const std::vector<synth::ConstructionNet>& nets, int d_z,
                             const Schedule& schedule, std::uint64_t seed) {
  check_dz(d_z);
  CmPipeline pipe;
  pipe.predictors = train_cross_modal(spec, nets, schedule, seed);

  const int d_code = spec.n * (spec.n - 1) * spec.d_y();
  RngStream init(seed, kInitStream + 10);
  pipe.ae.encoder = Mlp<float>::make(pipe.ae.params, "E", d_code, {kHidden, kHidden, d_z}, init);
  pipe.ae.decoder = Mlp<float>::make(pipe.ae.params, "D", d_z, {kHidden, kHidden, d_code}, init);

  Adam<float> opt(schedule.lr);
  RngStream data(seed, kDataStream + 10);
  for (int step = 0; step < schedule.batches; ++step) {
    SourceBatch s = synth::sample_sources(spec, schedule.batch_size, data);
    ModalityBatch m = synth::construct_modalities(nets, s);
    Tensorf code = pipe.predictors.code(m);

    Tape<float> t;
    Val c = t.leaf(code);
    Val z = pipe.ae.encoder.forward(t, c, true);
    Val recon = pipe.ae.decoder.forward(t, z, true);
    Val loss = t.mse_sum_batch(recon, c, static_cast<float>(d_code));
    ensure_finite(t.value(loss)[0], "train_cm_pipeline");
    t.backward(loss);
    opt.step(pipe.ae.params);
    pipe.ae.log.losses.push_back(t.value(loss)[0]);
  }
  pipe.ae.params.freeze();
  return pipe;
}

}  // namespace mmlc::arch
