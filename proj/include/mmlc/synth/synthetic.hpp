#pragma once

#include <cstdint>
#include <vector>

#include "mmlc/core/layers.hpp"
#include "mmlc/core/rng.hpp"
#include "mmlc/core/tensor.hpp"

namespace mmlc::synth {

// Dimensions of the generated world: a shared source of width d_m, one
// exclusive source of width d_e per modality, n modalities, and an
// expansion factor k so that each observed vector has width d_y = k * d_x.
struct SyntheticSpec {
  int d_m = 4;
  int d_e = 4;
  int n = 2;
  int k = 10;
  std::uint64_t seed = 0;

  int d_x() const { return d_m + d_e; }
  int d_y() const { return k * d_x(); }
  int d_min() const { return d_m + n * d_e; }

  void validate() const;
};

// One batch of hidden causes. Per modality, x_i is the exclusive part
// followed by the shared part; x_concat strings the x_i together.
struct SourceBatch {
  Tensorf x_m;                 // [B, d_m]
  std::vector<Tensorf> x_e;    // n of [B, d_e]
  std::vector<Tensorf> x_i;    // n of [B, d_x]
  Tensorf x_concat;            // [B, n*d_x]

  int batch() const { return x_m.dim(0); }
};

// Observed modalities after the frozen construction networks.
struct ModalityBatch {
  std::vector<Tensorf> y;  // n of [B, d_y]
  Tensorf y_concat;        // [B, n*d_y]
};

// Frozen random 3-layer MLP with per-component output normalization.
// Weights are never updated after construction; mu/sigma come from a
// one-off calibration sample.
class ConstructionNet {
 public:
  static ConstructionNet build(const SyntheticSpec& spec, std::uint64_t seed,
                               std::uint64_t stream_id);

  // (C(x) - mu) / sigma, computed without a tape.
  Tensorf apply(const Tensorf& x) const;

  const Tensorf& mu() const { return mu_; }
  const Tensorf& sigma() const { return sigma_; }

 private:
  ParamStore<float> store_;
  Mlp<float> net_;
  Tensorf mu_, sigma_;
};

SourceBatch sample_sources(const SyntheticSpec& spec, int batch, RngStream& rng);

// n independent frozen nets; resamples a net whose output has a
// near-constant component (normalization would divide by ~0).
std::vector<ConstructionNet> build_construction_nets(const SyntheticSpec& spec);

ModalityBatch construct_modalities(const std::vector<ConstructionNet>& nets,
                                   const SourceBatch& sources);

// Forward through an MLP without recording a tape (frozen-path fast lane;
// bitwise identical to the tape forward).
Tensorf mlp_apply(const Mlp<float>& net, const Tensorf& x);

// Oracle-exchange dump: header then raw little-endian f32 batches, each
// batch laid out as x_m, x_e[0..n), y[0..n).
void write_dump(const std::string& path, const SyntheticSpec& spec,
                const std::vector<ConstructionNet>& nets, int n_batches,
                int batch_size, RngStream& rng);

struct DumpContent {
  SyntheticSpec spec;
  int n_batches = 0;
  int batch_size = 0;
  std::vector<float> payload;
};

DumpContent read_dump(const std::string& path);

}  // namespace mmlc::synth
