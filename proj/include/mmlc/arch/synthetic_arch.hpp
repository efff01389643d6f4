#pragma once

#include <cstdint>
#include <vector>

#include "mmlc/core/adam.hpp"
#include "mmlc/core/train.hpp"
#include "mmlc/synth/synthetic.hpp"

namespace mmlc::arch {

// Joint encoding: autoencode the concatenated modalities.
struct AutoencoderJE {
  ParamStore<float> params;
  Mlp<float> encoder;  // n*d_y -> 200 -> 200 -> d_z
  Mlp<float> decoder;  // d_z -> 200 -> 200 -> n*d_y
  TrainLog log;

  Tensorf encode(const Tensorf& y_concat) const { return synth::mlp_apply(encoder, y_concat); }
  Tensorf decode(const Tensorf& z) const { return synth::mlp_apply(decoder, z); }
};

// Control: encode y but reconstruct the original sources x.
struct ControlAE {
  ParamStore<float> params;
  Mlp<float> encoder;  // n*d_y -> ... -> d_z
  Mlp<float> decoder;  // d_z -> ... -> n*d_x
  TrainLog log;

  Tensorf encode(const Tensorf& y_concat) const { return synth::mlp_apply(encoder, y_concat); }
  Tensorf decode(const Tensorf& z) const { return synth::mlp_apply(decoder, z); }
};

// Per-modality nets predicting all the other modalities.
struct CrossModalPredictors {
  std::vector<ParamStore<float>> params;  // one store per M_i
  std::vector<Mlp<float>> nets;           // d_y -> 200 -> 200 -> (n-1)*d_y
  TrainLog log;                           // summed prediction loss per batch
  double final_mean_prediction_mse = 0.0; // per-component, across modalities

  // Concatenation of y_j predictions for j != i, ascending j.
  Tensorf predict_others(int i, const Tensorf& y_i) const {
    return synth::mlp_apply(nets[static_cast<std::size_t>(i)], y_i);
  }

  // The shared-information code: predictions of every modality stacked,
  // i ascending. Width n*(n-1)*d_y.
  Tensorf code(const synth::ModalityBatch& m) const;
};

// CM: predictors first, then an autoencoder over their concatenated output.
struct CmPipeline {
  CrossModalPredictors predictors;
  AutoencoderJE ae;  // over the prediction code

  Tensorf encode(const synth::ModalityBatch& m) const {
    return ae.encode(predictors.code(m));
  }
};

AutoencoderJE train_je(const synth::SyntheticSpec& spec,
                       const std::vector<synth::ConstructionNet>& nets, int d_z,
                       const Schedule& schedule, std::uint64_t seed);

ControlAE train_control(const synth::SyntheticSpec& spec,
                        const std::vector<synth::ConstructionNet>& nets, int d_z,
                        const Schedule& schedule, std::uint64_t seed);

CrossModalPredictors train_cross_modal(const synth::SyntheticSpec& spec,
                                       const std::vector<synth::ConstructionNet>& nets,
                                       const Schedule& schedule, std::uint64_t seed);

CmPipeline train_cm_pipeline(const synth::SyntheticSpec& spec,
                             const std::vector<synth::ConstructionNet>& nets, int d_z,
                             const Schedule& schedule, std::uint64_t seed);

}  // namespace mmlc::arch
