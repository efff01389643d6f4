#include "mmlc/arch/robot.hpp"

#include <stdexcept>

namespace mmlc::arch {

using readout::MetricWithSe;
using readout::ReadoutNet;
using sim::Dataset;
using sim::Stream;

namespace {

constexpr int kHidden = 200;
constexpr int kChan1 = 32;
constexpr int kChan2 = 64;
constexpr int kCode = 100;

void check_conv_shape(int height, int width) {
  if (height % 4 != 0 || width % 4 != 0 || height < 8 || width < 8) {
    throw std::invalid_argument(
        "image extents must be divisible by 4 for the two-stage conv stack");
  }
}

std::vector<int> sample_train_indices(RngStream& rng, const Dataset& ds, int batch) {
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) {
    i = static_cast<int>(rng.uniform01() * ds.train_count());
    if (i >= ds.train_count()) i = ds.train_count() - 1;
  }
  return idx;
}

std::vector<int> eval_chunk(const Dataset& ds, int from, int chunk) {
  std::vector<int> idx;
  for (int i = from; i < std::min(ds.n, from + chunk); ++i) idx.push_back(i);
  return idx;
}

}  // namespace

VisionEncoder VisionEncoder::make(ParamStore<float>& store, const std::string& name,
                                  int height, int width, int code, RngStream& rng) {
  check_conv_shape(height, width);
  VisionEncoder e;
  e.c1 = Conv2dLayer<float>::make(store, name + ".c1", 1, kChan1, 4, 2, 1, Act::Relu, rng);
  e.c2 = Conv2dLayer<float>::make(store, name + ".c2", kChan1, kChan2, 4, 2, 1, Act::Relu, rng);
  e.flat = (height / 4) * (width / 4) * kChan2;
  e.head = DenseLayer<float>::make(store, name + ".head", e.flat, code, Act::Linear, rng);
  return e;
}

Val VisionEncoder::forward(Tape<float>& t, Val img, bool trainable) const {
  Val h = c2.forward(t, c1.forward(t, img, trainable), trainable);
  const int batch = t.value(h).dim(0);
  return head.forward(t, t.reshape(h, {batch, flat}), trainable);
}

Tensorf VisionEncoder::apply(const Tensorf& imgs) const {
  Tape<float> t;
  return t.value(forward(t, t.leaf(imgs), false));
}

VisionDecoder VisionDecoder::make(ParamStore<float>& store, const std::string& name,
                                  int height, int width, int code, RngStream& rng) {
  check_conv_shape(height, width);
  VisionDecoder d;
  d.h4 = height / 4;
  d.w4 = width / 4;
  d.expand = DenseLayer<float>::make(store, name + ".expand", code,
                                     d.h4 * d.w4 * kChan2, Act::Relu, rng);
  d.d1 = Deconv2dLayer<float>::make(store, name + ".d1", kChan2, kChan1, 4, 2, 1, Act::Relu, rng);
  d.d2 = Deconv2dLayer<float>::make(store, name + ".d2", kChan1, 1, 4, 2, 1, Act::Linear, rng);
  return d;
}

Val VisionDecoder::forward(Tape<float>& t, Val code, bool trainable) const {
  Val h = expand.forward(t, code, trainable);
  const int batch = t.value(h).dim(0);
  Val img = t.reshape(h, {batch, h4, w4, kChan2});
  return d2.forward(t, d1.forward(t, img, trainable), trainable);
}

Tensorf VisionDecoder::apply(const Tensorf& codes) const {
  Tape<float> t;
  return t.value(forward(t, t.leaf(codes), false));
}

AesPreEncoder train_aes_pre(const Dataset& ds, const Schedule& schedule,
                            std::uint64_t seed) {
  AesPreEncoder aes;
  RngStream init(seed, 30);
  aes.enc = VisionEncoder::make(aes.params, "B.enc", ds.config.height,
                                ds.config.width, kCode, init);
  aes.dec = VisionDecoder::make(aes.params, "B.dec", ds.config.height,
                                ds.config.width, kCode, init);

  Adam<float> opt(schedule.lr);
  RngStream data(seed, 31);
  const float d_v = static_cast<float>(ds.config.pixels());
  for (int step = 0; step < schedule.batches; ++step) {
    const auto idx = sample_train_indices(data, ds, schedule.batch_size);
    Tensorf imgs = ds.image_batch(idx);

    Tape<float> t;
    Val x = t.leaf(imgs);
    Val code = aes.enc.forward(t, x, true);
    Val recon = aes.dec.forward(t, code, true);
    Val loss = t.mse_sum_batch(recon, x, d_v);
    ensure_finite(t.value(loss)[0], "train_aes_pre");
    t.backward(loss);
    opt.step(aes.params);
    aes.log.losses.push_back(t.value(loss)[0]);
  }
  aes.params.freeze();
  return aes;
}

AesCodes compute_aes_codes(const AesPreEncoder& aes, const Dataset& ds) {
  AesCodes table;
  table.dim = aes.code_dim;
  table.codes.resize(static_cast<std::size_t>(ds.n) * aes.code_dim);
  for (int at = 0; at < ds.n; at += 256) {
    const auto idx = eval_chunk(ds, at, 256);
    Tensorf codes = aes.encode_images(ds.image_batch(idx));
    std::copy(codes.data(), codes.data() + codes.size(),
              table.codes.begin() + static_cast<std::size_t>(at) * aes.code_dim);
  }
  return table;
}

Tensorf AesCodes::batch(const std::vector<int>& idx) const {
  Tensorf t({static_cast<int>(idx.size()), dim});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const float* src = codes.data() + static_cast<std::size_t>(idx[i]) * dim;
    std::copy(src, src + dim, t.data() + static_cast<Eigen::Index>(i) * dim);
  }
  return t;
}

Tensorf RobotPipeline::encode(const Tensorf& y_v, const Tensorf& y_p) const {
  Tape<float> t;
  Val code = option == RobotOption::Default
                 ? e_v.forward(t, t.leaf(y_v), false)
                 : t.leaf(y_v);
  Val z_pre = t.concat_cols({code, t.leaf(y_p)});
  return t.value(e_pre.forward(t, z_pre, false));
}

RobotPipeline::Decoded RobotPipeline::decode(const Tensorf& z) const {
  Tape<float> t;
  Val z_post = d_post.forward(t, t.leaf(z), false);
  Val vis = t.slice_cols(z_post, 0, split_index);
  const int d_p = t.value(z_post).dim(1) - split_index;
  Val pro = t.slice_cols(z_post, split_index, d_p);
  Decoded out;
  out.proprio = t.value(pro);
  out.vision = option == RobotOption::Default ? t.value(d_v.forward(t, vis, false))
                                              : t.value(vis);
  return out;
}

RobotPipeline train_robot_je(const Dataset& ds, RobotOption option,
                             const AesCodes* aes_codes, int d_z, int split_index,
                             const Schedule& schedule, std::uint64_t seed) {
  if (d_z < 1) throw std::invalid_argument("latent dimension d_z must be >= 1");
  if (option == RobotOption::Aes) {
    if (aes_codes == nullptr) throw std::invalid_argument("AES option needs precomputed codes");
    if (split_index != aes_codes->dim) {
      throw std::invalid_argument("AES option: split index must equal the code width");
    }
  }

  RobotPipeline pipe;
  pipe.option = option;
  pipe.d_z = d_z;
  pipe.split_index = split_index;
  pipe.code_dim = option == RobotOption::Default ? kCode : aes_codes->dim;
  const int d_p = ds.config.proprio_dim();
  const float norm_v = 2.f * (option == RobotOption::Default
                                  ? static_cast<float>(ds.config.pixels())
                                  : static_cast<float>(aes_codes->dim));
  const float norm_p = 2.f * static_cast<float>(d_p);

  RngStream init(seed, 40);
  if (option == RobotOption::Default) {
    pipe.e_v = VisionEncoder::make(pipe.params, "E_v", ds.config.height,
                                   ds.config.width, kCode, init);
    pipe.d_v = VisionDecoder::make(pipe.params, "D_v", ds.config.height,
                                   ds.config.width, split_index, init);
  }
  pipe.e_pre = Mlp<float>::make(pipe.params, "E_pre", pipe.code_dim + d_p,
                                {kHidden, kHidden, d_z}, init);
  pipe.d_post = Mlp<float>::make(pipe.params, "D_post", d_z,
                                 {kHidden, kHidden, split_index + d_p}, init);

  Adam<float> opt(schedule.lr);
  RngStream data(seed, 41);
  for (int step = 0; step < schedule.batches; ++step) {
    const auto idx = sample_train_indices(data, ds, schedule.batch_size);
    Tensorf y_p = ds.proprio_batch(idx);
    Tensorf y_v = option == RobotOption::Default ? ds.image_batch(idx)
                                                 : aes_codes->batch(idx);

    Tape<float> t;
    Val vis_in = t.leaf(y_v);
    Val pro_in = t.leaf(y_p);
    Val code = option == RobotOption::Default ? pipe.e_v.forward(t, vis_in, true) : vis_in;
    Val z = pipe.e_pre.forward(t, t.concat_cols({code, pro_in}), true);
    Val z_post = pipe.d_post.forward(t, z, true);
    Val vis_part = t.slice_cols(z_post, 0, split_index);
    Val pro_part = t.slice_cols(z_post, split_index, d_p);
    Val vis_out = option == RobotOption::Default
                      ? pipe.d_v.forward(t, vis_part, true)
                      : vis_part;
    Val loss = t.add(t.mse_sum_batch(pro_part, pro_in, norm_p),
                     t.mse_sum_batch(vis_out, vis_in, norm_v));
    ensure_finite(t.value(loss)[0], "train_robot_je");
    t.backward(loss);
    opt.step(pipe.params);
    pipe.log.losses.push_back(t.value(loss)[0]);
  }
  pipe.params.freeze();
  return pipe;
}

Tensorf RobotCmPredictors::predict_vision(const Tensorf& y_p) const {
  Tape<float> t;
  if (option == RobotOption::Aes) {
    return t.value(mv_mlp.forward(t, t.leaf(y_p), false));
  }
  Val h = mv_expand.forward(t, t.leaf(y_p), false);
  const int batch = t.value(h).dim(0);
  Val img = t.reshape(h, {batch, mv_h4, mv_w4, kChan2});
  return t.value(mv_d2.forward(t, mv_d1.forward(t, img, false), false));
}

Tensorf RobotCmPredictors::predict_proprio(const Tensorf& y_v) const {
  Tape<float> t;
  if (option == RobotOption::Aes) {
    return t.value(mp_mlp.forward(t, t.leaf(y_v), false));
  }
  Val h = mp_c2.forward(t, mp_c1.forward(t, t.leaf(y_v), false), false);
  const int batch = t.value(h).dim(0);
  return t.value(mp_head.forward(t, t.reshape(h, {batch, mp_flat}), false));
}

RobotCmPredictors train_robot_cm_predictors(const Dataset& ds, RobotOption option,
                                            const AesCodes* aes_codes,
                                            const Schedule& schedule,
                                            std::uint64_t seed) {
  RobotCmPredictors cm;
  cm.option = option;
  const int d_p = ds.config.proprio_dim();
  const int h = ds.config.height, w = ds.config.width;

  RngStream init(seed, 50);
  if (option == RobotOption::Default) {
    check_conv_shape(h, w);
    cm.mv_h4 = h / 4;
    cm.mv_w4 = w / 4;
    cm.mv_expand = DenseLayer<float>::make(cm.params_v, "M_v.expand", d_p,
                                           cm.mv_h4 * cm.mv_w4 * kChan2, Act::Relu, init);
    cm.mv_d1 = Deconv2dLayer<float>::make(cm.params_v, "M_v.d1", kChan2, kChan1, 4, 2, 1, Act::Relu, init);
    cm.mv_d2 = Deconv2dLayer<float>::make(cm.params_v, "M_v.d2", kChan1, 1, 4, 2, 1, Act::Linear, init);
    cm.mp_c1 = Conv2dLayer<float>::make(cm.params_p, "M_p.c1", 1, kChan1, 4, 2, 1, Act::Relu, init);
    cm.mp_c2 = Conv2dLayer<float>::make(cm.params_p, "M_p.c2", kChan1, kChan2, 4, 2, 1, Act::Relu, init);
    cm.mp_flat = (h / 4) * (w / 4) * kChan2;
    cm.mp_head = DenseLayer<float>::make(cm.params_p, "M_p.head", cm.mp_flat, d_p, Act::Linear, init);
  } else {
    if (aes_codes == nullptr) throw std::invalid_argument("AES option needs precomputed codes");
    cm.mv_mlp = Mlp<float>::make(cm.params_v, "M_v", d_p, {kHidden, kHidden, aes_codes->dim}, init);
    cm.mp_mlp = Mlp<float>::make(cm.params_p, "M_p", aes_codes->dim, {kHidden, kHidden, d_p}, init);
  }

  const float d_v = option == RobotOption::Default ? static_cast<float>(ds.config.pixels())
                                                   : static_cast<float>(aes_codes->dim);
  Adam<float> opt_v(schedule.lr), opt_p(schedule.lr);
  RngStream data(seed, 51);
  for (int step = 0; step < schedule.batches; ++step) {
    const auto idx = sample_train_indices(data, ds, schedule.batch_size);
    Tensorf y_p = ds.proprio_batch(idx);
    Tensorf y_v = option == RobotOption::Default ? ds.image_batch(idx)
                                                 : aes_codes->batch(idx);

    {  // M_v: proprioception -> vision
      Tape<float> t;
      Val pred;
      if (option == RobotOption::Default) {
        Val hv = cm.mv_expand.forward(t, t.leaf(y_p), true);
        Val img = t.reshape(hv, {schedule.batch_size, cm.mv_h4, cm.mv_w4, kChan2});
        pred = cm.mv_d2.forward(t, cm.mv_d1.forward(t, img, true), true);
      } else {
        pred = cm.mv_mlp.forward(t, t.leaf(y_p), true);
      }
      Val loss = t.mse_sum_batch(pred, t.leaf(y_v), d_v);
      ensure_finite(t.value(loss)[0], "train_robot_cm_predictors/M_v");
      t.backward(loss);
      opt_v.step(cm.params_v);
      cm.log_v.losses.push_back(t.value(loss)[0]);
    }
    {  // M_p: vision -> proprioception
      Tape<float> t;
      Val pred;
      if (option == RobotOption::Default) {
        Val hh = cm.mp_c2.forward(t, cm.mp_c1.forward(t, t.leaf(y_v), true), true);
        pred = cm.mp_head.forward(t, t.reshape(hh, {schedule.batch_size, cm.mp_flat}), true);
      } else {
        pred = cm.mp_mlp.forward(t, t.leaf(y_v), true);
      }
      Val loss = t.mse_sum_batch(pred, t.leaf(y_p), static_cast<float>(d_p));
      ensure_finite(t.value(loss)[0], "train_robot_cm_predictors/M_p");
      t.backward(loss);
      opt_p.step(cm.params_p);
      cm.log_p.losses.push_back(t.value(loss)[0]);
    }
  }
  cm.params_v.freeze();
  cm.params_p.freeze();
  return cm;
}

RobotCm train_robot_cm(const Dataset& ds, RobotOption option,
                       const AesCodes* aes_codes, int d_z, int split_index,
                       const Schedule& schedule, std::uint64_t seed) {
  if (d_z < 1) throw std::invalid_argument("latent dimension d_z must be >= 1");
  RobotCm out;
  out.predictors = train_robot_cm_predictors(ds, option, aes_codes, schedule, seed);

  RobotPipeline& pipe = out.ae;
  pipe.option = option;
  pipe.d_z = d_z;
  pipe.split_index = split_index;
  pipe.code_dim = option == RobotOption::Default ? kCode : aes_codes->dim;
  const int d_p = ds.config.proprio_dim();
  const float norm_v = 2.f * (option == RobotOption::Default
                                  ? static_cast<float>(ds.config.pixels())
                                  : static_cast<float>(aes_codes->dim));
  const float norm_p = 2.f * static_cast<float>(d_p);
  if (option == RobotOption::Aes && split_index != aes_codes->dim) {
    throw std::invalid_argument("AES option: split index must equal the code width");
  }

  RngStream init(seed, 60);
  if (option == RobotOption::Default) {
    pipe.e_v = VisionEncoder::make(pipe.params, "E_v", ds.config.height,
                                   ds.config.width, kCode, init);
    pipe.d_v = VisionDecoder::make(pipe.params, "D_v", ds.config.height,
                                   ds.config.width, split_index, init);
  }
  pipe.e_pre = Mlp<float>::make(pipe.params, "E_pre", pipe.code_dim + d_p,
                                {kHidden, kHidden, d_z}, init);
  pipe.d_post = Mlp<float>::make(pipe.params, "D_post", d_z,
                                 {kHidden, kHidden, split_index + d_p}, init);

  // The autoencoder sees only the cross-modality predictions.
  Adam<float> opt(schedule.lr);
  RngStream data(seed, 61);
  for (int step = 0; step < schedule.batches; ++step) {
    const auto idx = sample_train_indices(data, ds, schedule.batch_size);
    Tensorf y_p = ds.proprio_batch(idx);
    Tensorf y_v = option == RobotOption::Default ? ds.image_batch(idx)
                                                 : aes_codes->batch(idx);
    Tensorf pred_vision = out.predictors.predict_vision(y_p);
    Tensorf pred_proprio = out.predictors.predict_proprio(y_v);

    Tape<float> t;
    Val vis_in = t.leaf(pred_vision);
    Val pro_in = t.leaf(pred_proprio);
    Val code = option == RobotOption::Default ? pipe.e_v.forward(t, vis_in, true) : vis_in;
    Val z = pipe.e_pre.forward(t, t.concat_cols({code, pro_in}), true);
    Val z_post = pipe.d_post.forward(t, z, true);
    Val vis_part = t.slice_cols(z_post, 0, split_index);
    Val pro_part = t.slice_cols(z_post, split_index, d_p);
    Val vis_out = option == RobotOption::Default
                      ? pipe.d_v.forward(t, vis_part, true)
                      : vis_part;
    Val loss = t.add(t.mse_sum_batch(pro_part, pro_in, norm_p),
                     t.mse_sum_batch(vis_out, vis_in, norm_v));
    ensure_finite(t.value(loss)[0], "train_robot_cm");
    t.backward(loss);
    opt.step(pipe.params);
    pipe.log.losses.push_back(t.value(loss)[0]);
  }
  pipe.params.freeze();
  return out;
}

RobotEncode make_robot_encoder(const RobotPipeline& pipe,
                               const RobotCmPredictors* cm, const Dataset& ds,
                               const AesCodes* aes_codes) {
  const bool aes = pipe.option == RobotOption::Aes;
  return [&pipe, cm, &ds, aes_codes, aes](const std::vector<int>& idx) {
    Tensorf y_p = ds.proprio_batch(idx);
    Tensorf y_v = aes ? aes_codes->batch(idx) : ds.image_batch(idx);
    if (cm != nullptr) {
      Tensorf pv = cm->predict_vision(y_p);
      Tensorf pp = cm->predict_proprio(y_v);
      return pipe.encode(pv, pp);
    }
    return pipe.encode(y_v, y_p);
  };
}

readout::ReconFn make_frame_recon(const RobotPipeline& pipe,
                                  const RobotCmPredictors* cm, const Dataset& ds,
                                  const AesPreEncoder* aes,
                                  const AesCodes* aes_codes) {
  const bool is_aes = pipe.option == RobotOption::Aes;
  if (is_aes && aes == nullptr) {
    throw std::invalid_argument("AES frame reconstruction needs the pre-encoder");
  }
  RobotEncode enc = make_robot_encoder(pipe, cm, ds, aes_codes);
  return [&pipe, enc, aes, is_aes](const std::vector<int>& idx) {
    Tensorf z = enc(idx);
    RobotPipeline::Decoded dec = pipe.decode(z);
    return is_aes ? aes->decode_codes(dec.vision) : dec.vision;
  };
}

ReadoutNet train_robot_readout(const Dataset& ds, const RobotEncode& encode,
                               int d_z, const Schedule& schedule,
                               std::uint64_t seed) {
  RngStream data(seed, 70);
  auto make_batch = [&](int, Tensorf& input, std::vector<Tensorf>& targets) {
    const auto idx = sample_train_indices(data, ds, schedule.batch_size);
    input = encode(idx);
    targets.resize(1);
    targets[0] = ds.target_batch(idx);
  };
  auto heads = readout::train_readout_heads(d_z, {ds.config.target_dim()},
                                            schedule, seed, make_batch);
  return std::move(heads.front());
}

std::map<Stream, MetricWithSe> evaluate_robot_readout(const Dataset& ds,
                                                      const RobotEncode& encode,
                                                      const ReadoutNet& net,
                                                      int chunk) {
  const Stream streams[] = {Stream::PosL, Stream::VelL, Stream::EeL,
                            Stream::PosR, Stream::VelR, Stream::EeR};
  std::map<Stream, OnlineMean> acc;
  for (int at = ds.eval_start; at < ds.n; at += chunk) {
    const auto idx = eval_chunk(ds, at, chunk);
    Tensorf pred = net.apply(encode(idx));
    Tensorf truth = ds.target_batch(idx);
    for (Stream s : streams) {
      const auto range = sim::stream_range(ds.config, s);
      Tensorf ps({pred.dim(0), range.len}), ts({pred.dim(0), range.len});
      ps.mat() = pred.mat().middleCols(range.offset, range.len);
      ts.mat() = truth.mat().middleCols(range.offset, range.len);
      accumulate_per_sample_mse(ps, ts, acc[s]);
    }
  }
  std::map<Stream, MetricWithSe> out;
  for (auto& [s, a] : acc) out[s] = {a.mean(), a.std_error()};
  return out;
}

}  // namespace mmlc::arch
