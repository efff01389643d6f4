#pragma once

#include <cstdint>
#include <map>
#include <memory>

#include "mmlc/core/adam.hpp"
#include "mmlc/core/train.hpp"
#include "mmlc/readout/readout.hpp"
#include "mmlc/sim/arm.hpp"

namespace mmlc::arch {

enum class RobotOption { Default, Aes };

// Two stride-2 k4 convolutions (half padding) and a linear code layer.
struct VisionEncoder {
  Conv2dLayer<float> c1, c2;
  DenseLayer<float> head;
  int flat = 0;  // H/4 * W/4 * 64

  static VisionEncoder make(ParamStore<float>& store, const std::string& name,
                            int height, int width, int code, RngStream& rng);
  Val forward(Tape<float>& t, Val img, bool trainable) const;
  Tensorf apply(const Tensorf& imgs) const;
};

// Mirror: dense expansion then two transposed convolutions back to 1 channel.
struct VisionDecoder {
  DenseLayer<float> expand;
  Deconv2dLayer<float> d1, d2;
  int h4 = 0, w4 = 0;

  static VisionDecoder make(ParamStore<float>& store, const std::string& name,
                            int height, int width, int code, RngStream& rng);
  Val forward(Tape<float>& t, Val code, bool trainable) const;
  Tensorf apply(const Tensorf& codes) const;
};

// Convolutional autoencoder learning the 100-dim visual code used by the
// AES option; frozen before any joint training.
struct AesPreEncoder {
  ParamStore<float> params;
  VisionEncoder enc;
  VisionDecoder dec;
  TrainLog log;
  int code_dim = 100;

  Tensorf encode_images(const Tensorf& imgs) const { return enc.apply(imgs); }
  Tensorf decode_codes(const Tensorf& codes) const { return dec.apply(codes); }
};

// Dataset-wide table of frozen AES codes.
struct AesCodes {
  int dim = 0;
  std::vector<float> codes;  // [n, dim]
  Tensorf batch(const std::vector<int>& idx) const;
};

AesPreEncoder train_aes_pre(const sim::Dataset& ds, const Schedule& schedule,
                            std::uint64_t seed);
AesCodes compute_aes_codes(const AesPreEncoder& aes, const sim::Dataset& ds);

// Joint autoencoder over (vision, proprioception). Under Default the vision
// leg is convolutional; under AES both legs are identity maps into the MLP
// trunk and `vision` means the frozen 100-dim code.
struct RobotPipeline {
  RobotOption option = RobotOption::Default;
  int d_z = 0;
  int split_index = 100;  // z_post prefix routed to the vision leg
  int code_dim = 100;
  ParamStore<float> params;
  VisionEncoder e_v;
  VisionDecoder d_v;
  Mlp<float> e_pre;   // (code + d_p) -> 200 -> 200 -> d_z
  Mlp<float> d_post;  // d_z -> 200 -> 200 -> (split_index + d_p)
  TrainLog log;

  Tensorf encode(const Tensorf& y_v, const Tensorf& y_p) const;

  struct Decoded {
    Tensorf vision;   // image (Default) or code (AES)
    Tensorf proprio;  // [B, d_p]
  };
  Decoded decode(const Tensorf& z) const;
};

// Cross-modality predictors for the robot data: M_v guesses the visual
// modality from proprioception, M_p the reverse.
struct RobotCmPredictors {
  RobotOption option = RobotOption::Default;
  ParamStore<float> params_v, params_p;
  // Default option nets.
  DenseLayer<float> mv_expand;
  Deconv2dLayer<float> mv_d1, mv_d2;
  int mv_h4 = 0, mv_w4 = 0;
  Conv2dLayer<float> mp_c1, mp_c2;
  DenseLayer<float> mp_head;
  int mp_flat = 0;
  // AES option nets.
  Mlp<float> mv_mlp, mp_mlp;
  TrainLog log_v, log_p;

  Tensorf predict_vision(const Tensorf& y_p) const;   // image or code
  Tensorf predict_proprio(const Tensorf& y_v) const;  // [B, d_p]
};

RobotPipeline train_robot_je(const sim::Dataset& ds, RobotOption option,
                             const AesCodes* aes_codes, int d_z, int split_index,
                             const Schedule& schedule, std::uint64_t seed);

RobotCmPredictors train_robot_cm_predictors(const sim::Dataset& ds,
                                            RobotOption option,
                                            const AesCodes* aes_codes,
                                            const Schedule& schedule,
                                            std::uint64_t seed);

struct RobotCm {
  RobotCmPredictors predictors;
  RobotPipeline ae;
};

RobotCm train_robot_cm(const sim::Dataset& ds, RobotOption option,
                       const AesCodes* aes_codes, int d_z, int split_index,
                       const Schedule& schedule, std::uint64_t seed);

// ---- evaluation plumbing ---------------------------------------------

// Latent codes for dataset rows, through whichever stages the experiment
// prescribes (CM pipelines encode predictions, not raw modalities).
using RobotEncode = std::function<Tensorf(const std::vector<int>& idx)>;

RobotEncode make_robot_encoder(const RobotPipeline& pipe,
                               const RobotCmPredictors* cm,
                               const sim::Dataset& ds, const AesCodes* aes_codes);

// Frame reconstructions for dataset rows (AES variants decode the code leg
// through the frozen pre-encoder's decoder).
readout::ReconFn make_frame_recon(const RobotPipeline& pipe,
                                  const RobotCmPredictors* cm,
                                  const sim::Dataset& ds,
                                  const AesPreEncoder* aes,
                                  const AesCodes* aes_codes);

readout::ReadoutNet train_robot_readout(const sim::Dataset& ds,
                                        const RobotEncode& encode, int d_z,
                                        const Schedule& schedule,
                                        std::uint64_t seed);

std::map<sim::Stream, readout::MetricWithSe> evaluate_robot_readout(
    const sim::Dataset& ds, const RobotEncode& encode,
    const readout::ReadoutNet& net, int chunk = 128);

}  // namespace mmlc::arch
