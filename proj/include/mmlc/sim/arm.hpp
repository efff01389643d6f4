#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmlc/core/rng.hpp"
#include "mmlc/core/tensor.hpp"

namespace mmlc::sim {

// Planar two-arm world. The left arm lives in the left half of the frame,
// the right arm in the right half; only right-arm proprioception is
// observed. Link lengths are fractions of the image width.
struct ArmConfig {
  int joints = 3;
  std::vector<float> links = {0.09375f, 0.078125f, 0.046875f};  // 6,5,3 px at W=64
  float limit_base = 3.14159265f;  // joint 0 range, +- radians
  float limit_rest = 2.0f;         // remaining joints, +- radians
  int height = 32;
  int width = 64;
  int steps_per_target = 10;
  float dt = 0.2f;
  float omega = 2.0f;             // critically damped tracking frequency
  float line_halfwidth = 0.75f;   // rendered arm half thickness, px
  bool hide_right_tip = false;    // drop the last right-arm segment when drawing

  int proprio_dim() const { return 2 * joints; }
  int target_dim() const { return 4 * joints + 4; }  // pos/vel both arms + 2-d ees
  int pixels() const { return height * width; }
  float link_px(int j) const { return links.at(static_cast<std::size_t>(j)) * static_cast<float>(width); }
  float reach_px() const;
  void validate() const;
};

struct ArmState {
  std::vector<double> phi, phi_dot, target;  // one arm, length J
};

struct WorldState {
  ArmState left, right;
};

// Ground-truth stream layout inside the readout target vector.
enum class Stream { PosL, VelL, EeL, PosR, VelR, EeR };
struct StreamRange {
  int offset = 0;
  int len = 0;
};
StreamRange stream_range(const ArmConfig& cfg, Stream s);
const char* stream_name(Stream s);

// Planar chain tip position.
std::array<double, 2> forward_kinematics(const std::vector<double>& phi,
                                         const std::vector<double>& links_px,
                                         double base_x, double base_y);

// One critically damped tracking step for every joint of one arm.
void step_toward_target(ArmState& s, const ArmConfig& cfg);

// Anti-aliased grayscale render of both arms, values in [-1, 1].
std::vector<float> render(const WorldState& w, const ArmConfig& cfg);

// Generated dataset with z-scored proprioception and readout targets.
// Samples are ordered; the last tenth of the episodes form the eval split.
struct Dataset {
  ArmConfig config;
  std::uint64_t seed = 0;
  int n = 0;
  int eval_start = 0;
  std::vector<float> images;   // [n, H*W], in [-1, 1]
  std::vector<float> proprio;  // [n, 2J], z-scored right-arm phi ++ phi_dot
  std::vector<float> targets;  // [n, 4J+4], z-scored stream layout above
  std::vector<float> proprio_mean, proprio_std;
  std::vector<float> target_mean, target_std;

  int train_count() const { return eval_start; }
  int eval_count() const { return n - eval_start; }

  Tensorf image_batch(const std::vector<int>& idx) const;    // [B,H,W,1]
  Tensorf proprio_batch(const std::vector<int>& idx) const;  // [B,2J]
  Tensorf target_batch(const std::vector<int>& idx) const;   // [B,4J+4]
};

Dataset generate_dataset(const ArmConfig& cfg, int n, std::uint64_t seed);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Frame export for eyeballing; [-1,1] mapped to 8-bit gray.
void write_frame_pgm(const std::string& path, const float* pixels, int h, int w);

}  // namespace mmlc::sim
