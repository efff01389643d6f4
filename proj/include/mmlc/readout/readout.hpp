#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mmlc/core/adam.hpp"
#include "mmlc/core/metrics.hpp"
#include "mmlc/core/train.hpp"
#include "mmlc/sim/arm.hpp"
#include "mmlc/synth/synthetic.hpp"

namespace mmlc::readout {

// Probe trained on a frozen representation to reconstruct a target stream.
struct ReadoutNet {
  ParamStore<float> params;
  Mlp<float> net;  // in -> 200 -> 200 -> target dim
  TrainLog log;

  Tensorf apply(const Tensorf& z) const { return synth::mlp_apply(net, z); }
};

struct MetricWithSe {
  double value = 0.0;
  double se = 0.0;
};

// Fills `input` [B, in_dim] and one target tensor per head for one batch.
using BatchFn = std::function<void(int step, Tensorf& input, std::vector<Tensorf>& targets)>;

// Trains several heads against a shared frozen input stream; every head
// sees the full schedule. The producer is called once per batch.
std::vector<ReadoutNet> train_readout_heads(int in_dim,
                                            const std::vector<int>& head_dims,
                                            const Schedule& schedule,
                                            std::uint64_t seed,
                                            const BatchFn& make_batch);

ReadoutNet train_probe(int in_dim, int out_dim, const Schedule& schedule,
                       std::uint64_t seed, const BatchFn& make_batch);

// Mean per-data-point (1/d)|err|^2 of one head over `batches` evaluation
// draws, with its Monte Carlo standard error. `component_range` restricts
// the measured slice of the head output/target (e.g. the exclusive part).
MetricWithSe evaluate_head(const ReadoutNet& head, int head_index, int batches,
                           const BatchFn& make_batch, int slice_from = 0,
                           int slice_len = -1);

// ---- synthetic flow -------------------------------------------------

using EncodeFn = std::function<Tensorf(const synth::ModalityBatch&)>;

// R_m reconstructs x_m; one R_e per modality reconstructs x_i (the
// exclusive-then-shared per-modality source vector). Heads are omitted
// when their stream has zero width.
struct SyntheticReadouts {
  std::vector<ReadoutNet> heads;
  bool has_mutual = false;
  int exclusive_heads = 0;
};

SyntheticReadouts train_synthetic_readouts(const synth::SyntheticSpec& spec,
                                           const std::vector<synth::ConstructionNet>& nets,
                                           const EncodeFn& encode, int d_z,
                                           const Schedule& schedule,
                                           std::uint64_t seed);

struct SyntheticEval {
  MetricWithSe r_m;                     // per-component shared readout error
  MetricWithSe r_e;                     // averaged over modalities
  std::vector<double> r_e_per_modality;
};

SyntheticEval evaluate_synthetic_readouts(const synth::SyntheticSpec& spec,
                                          const std::vector<synth::ConstructionNet>& nets,
                                          const EncodeFn& encode,
                                          const SyntheticReadouts& readouts,
                                          int eval_batches, int batch_size,
                                          std::uint64_t seed);

// ---- vision evaluation ----------------------------------------------

// Reconstructed frames [B,H,W,1] for the given dataset indices.
using ReconFn = std::function<Tensorf(const std::vector<int>& idx)>;

struct VisionErrorReport {
  double left_mse = 0.0;
  double right_mse = 0.0;
  std::vector<double> error_map;  // [H*W] mean squared error per pixel
};

// Per-half and per-pixel MSE against the true frames of the eval split.
VisionErrorReport vision_errors(const sim::Dataset& ds, const ReconFn& recon,
                                int chunk = 128);

// Best-constant-image (per-pixel mean) MSE per half on the eval split:
// the chance level any reconstruction is compared against.
std::pair<double, double> vision_chance(const sim::Dataset& ds);

// 8-bit graymap (scaled to the max error) plus raw f32 sidecar.
void write_error_map(const std::string& path_base, const VisionErrorReport& rep,
                     int height, int width);

}  // namespace mmlc::readout
