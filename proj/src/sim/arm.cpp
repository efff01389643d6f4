#include "mmlc/sim/arm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmlc/core/metrics.hpp"
#include "mmlc/io/container.hpp"

namespace mmlc::sim {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double joint_limit(const ArmConfig& cfg, int j) {
  return j == 0 ? cfg.limit_base : cfg.limit_rest;
}

std::vector<double> links_px(const ArmConfig& cfg) {
  std::vector<double> l(static_cast<std::size_t>(cfg.joints));
  for (int j = 0; j < cfg.joints; ++j) l[static_cast<std::size_t>(j)] = cfg.link_px(j);
  return l;
}

struct Bases {
  double lx, ly, rx, ry;
};

Bases bases(const ArmConfig& cfg) {
  // Each arm is anchored at the center of its half.
  return {cfg.width * 0.25, cfg.height * 0.5, cfg.width * 0.75, cfg.height * 0.5};
}

// Distance from point p to segment [a, b].
double segment_distance(double px, double py, double ax, double ay, double bx,
                        double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = clamp(t, 0.0, 1.0);
  const double cx = ax + t * dx - px, cy = ay + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

void draw_arm(std::vector<float>& coverage, const ArmConfig& cfg,
              const ArmState& arm, double base_x, double base_y,
              bool skip_last_segment) {
  const auto links = links_px(cfg);
  double x = base_x, y = base_y, angle = 0.0;
  const int segments = cfg.joints - (skip_last_segment ? 1 : 0);
  for (int j = 0; j < segments; ++j) {
    angle += arm.phi[static_cast<std::size_t>(j)];
    const double nx = x + links[static_cast<std::size_t>(j)] * std::cos(angle);
    const double ny = y + links[static_cast<std::size_t>(j)] * std::sin(angle);

    const double pad = cfg.line_halfwidth + 1.0;
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(x, nx) - pad)));
    const int c1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(std::max(x, nx) + pad)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(y, ny) - pad)));
    const int r1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(std::max(y, ny) + pad)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = segment_distance(c + 0.5, r + 0.5, x, y, nx, ny);
        const double cov = clamp(cfg.line_halfwidth + 0.5 - d, 0.0, 1.0);
        auto& px = coverage[static_cast<std::size_t>(r) * cfg.width + c];
        px = std::max(px, static_cast<float>(cov));
      }
    }
    x = nx;
    y = ny;
  }
}

}  // namespace

float ArmConfig::reach_px() const {
  float r = 0.f;
  for (int j = 0; j < joints; ++j) r += link_px(j);
  return r;
}

void ArmConfig::validate() const {
  if (joints < 1 || static_cast<int>(links.size()) != joints) {
    throw std::invalid_argument("arm config: need one link length per joint");
  }
  if (height < 8 || width < 16 || width % 2 != 0) {
    throw std::invalid_argument("arm config: bad image extents");
  }
  if (steps_per_target < 1 || dt <= 0.f || omega <= 0.f) {
    throw std::invalid_argument("arm config: bad dynamics parameters");
  }
  // Halves never mix: the reach plus rendering margin must stay inside
  // each arm's half of the frame and inside the frame vertically.
  const auto b = bases(*this);
  const double margin = line_halfwidth + 0.5;
  const double reach = reach_px();
  if (b.lx + reach + margin > width / 2.0 || b.lx - reach - margin < 0.0 ||
      b.rx - reach - margin < width / 2.0 || b.rx + reach + margin > width ||
      b.ly + reach + margin > height || b.ly - reach - margin < 0.0) {
    throw std::invalid_argument("arm config: arms can leave their half-frames");
  }
}

StreamRange stream_range(const ArmConfig& cfg, Stream s) {
  const int j = cfg.joints;
  switch (s) {
    case Stream::PosL: return {0, j};
    case Stream::VelL: return {j, j};
    case Stream::EeL: return {2 * j, 2};
    case Stream::PosR: return {2 * j + 2, j};
    case Stream::VelR: return {3 * j + 2, j};
    case Stream::EeR: return {4 * j + 2, 2};
  }
  throw std::logic_error("unknown stream");
}

const char* stream_name(Stream s) {
  switch (s) {
    case Stream::PosL: return "pos_left";
    case Stream::VelL: return "vel_left";
    case Stream::EeL: return "ee_left";
    case Stream::PosR: return "pos_right";
    case Stream::VelR: return "vel_right";
    case Stream::EeR: return "ee_right";
  }
  return "?";
}

std::array<double, 2> forward_kinematics(const std::vector<double>& phi,
                                         const std::vector<double>& links_px,
                                         double base_x, double base_y) {
  if (phi.size() != links_px.size()) {
    throw std::invalid_argument("forward_kinematics: phi/link count mismatch");
  }
  double x = base_x, y = base_y, angle = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    angle += phi[j];
    x += links_px[j] * std::cos(angle);
    y += links_px[j] * std::sin(angle);
  }
  return {x, y};
}

void step_toward_target(ArmState& s, const ArmConfig& cfg) {
  // phi'' = w^2 (target - phi) - 2 w phi', semi-implicit Euler.
  const double w = cfg.omega, dt = cfg.dt;
  for (int j = 0; j < cfg.joints; ++j) {
    auto& phi = s.phi[static_cast<std::size_t>(j)];
    auto& vel = s.phi_dot[static_cast<std::size_t>(j)];
    const double acc = w * w * (s.target[static_cast<std::size_t>(j)] - phi) - 2.0 * w * vel;
    vel += dt * acc;
    phi += dt * vel;
    const double lim = joint_limit(cfg, j);
    if (phi > lim) { phi = lim; vel = 0.0; }
    if (phi < -lim) { phi = -lim; vel = 0.0; }
  }
}

std::vector<float> render(const WorldState& w, const ArmConfig& cfg) {
  std::vector<float> coverage(static_cast<std::size_t>(cfg.pixels()), 0.f);
  const auto b = bases(cfg);
  draw_arm(coverage, cfg, w.left, b.lx, b.ly, false);
  draw_arm(coverage, cfg, w.right, b.rx, b.ry, cfg.hide_right_tip);
  for (auto& v : coverage) v = -1.f + 2.f * v;
  return coverage;
}

Dataset generate_dataset(const ArmConfig& cfg, int n, std::uint64_t seed) {
  cfg.validate();
  if (n < cfg.steps_per_target || n % cfg.steps_per_target != 0) {
    throw std::invalid_argument("dataset size must be a positive multiple of steps_per_target");
  }

  Dataset ds;
  ds.config = cfg;
  ds.seed = seed;
  ds.n = n;
  const int episodes = n / cfg.steps_per_target;
  const int eval_episodes = std::max(1, episodes / 10);
  ds.eval_start = (episodes - eval_episodes) * cfg.steps_per_target;

  const int j = cfg.joints;
  const int dp = cfg.proprio_dim();
  const int dt_dim = cfg.target_dim();
  ds.images.resize(static_cast<std::size_t>(n) * cfg.pixels());
  ds.proprio.resize(static_cast<std::size_t>(n) * dp);
  ds.targets.resize(static_cast<std::size_t>(n) * dt_dim);

  RngStream rng(seed, 424242);
  WorldState w;
  for (ArmState* arm : {&w.left, &w.right}) {
    arm->phi.assign(static_cast<std::size_t>(j), 0.0);
    arm->phi_dot.assign(static_cast<std::size_t>(j), 0.0);
    arm->target.assign(static_cast<std::size_t>(j), 0.0);
  }
  const auto lp = links_px(cfg);
  const auto b = bases(cfg);

  int at = 0;
  for (int e = 0; e < episodes; ++e) {
    for (ArmState* arm : {&w.left, &w.right}) {
      for (int q = 0; q < j; ++q) {
        const double lim = joint_limit(cfg, q);
        arm->target[static_cast<std::size_t>(q)] = rng.uniform(-lim, lim);
      }
    }
    for (int t = 0; t < cfg.steps_per_target; ++t, ++at) {
      step_toward_target(w.left, cfg);
      step_toward_target(w.right, cfg);

      const auto frame = render(w, cfg);
      std::copy(frame.begin(), frame.end(),
                ds.images.begin() + static_cast<std::size_t>(at) * cfg.pixels());

      float* pr = ds.proprio.data() + static_cast<std::size_t>(at) * dp;
      for (int q = 0; q < j; ++q) pr[q] = static_cast<float>(w.right.phi[static_cast<std::size_t>(q)]);
      for (int q = 0; q < j; ++q) pr[j + q] = static_cast<float>(w.right.phi_dot[static_cast<std::size_t>(q)]);

      const auto ee_l = forward_kinematics(w.left.phi, lp, b.lx, b.ly);
      const auto ee_r = forward_kinematics(w.right.phi, lp, b.rx, b.ry);
      float* tg = ds.targets.data() + static_cast<std::size_t>(at) * dt_dim;
      for (int q = 0; q < j; ++q) tg[q] = static_cast<float>(w.left.phi[static_cast<std::size_t>(q)]);
      for (int q = 0; q < j; ++q) tg[j + q] = static_cast<float>(w.left.phi_dot[static_cast<std::size_t>(q)]);
      tg[2 * j] = static_cast<float>(ee_l[0]);
      tg[2 * j + 1] = static_cast<float>(ee_l[1]);
      for (int q = 0; q < j; ++q) tg[2 * j + 2 + q] = static_cast<float>(w.right.phi[static_cast<std::size_t>(q)]);
      for (int q = 0; q < j; ++q) tg[3 * j + 2 + q] = static_cast<float>(w.right.phi_dot[static_cast<std::size_t>(q)]);
      tg[4 * j + 2] = static_cast<float>(ee_r[0]);
      tg[4 * j + 3] = static_cast<float>(ee_r[1]);
    }
  }

  // Z-score proprioception and targets over the whole dataset.
  auto zscore = [n](std::vector<float>& data, int width, std::vector<float>& mean,
                    std::vector<float>& std_out) {
    mean.assign(static_cast<std::size_t>(width), 0.f);
    std_out.assign(static_cast<std::size_t>(width), 1.f);
    std::vector<OnlineMean> acc(static_cast<std::size_t>(width));
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < width; ++c) {
        acc[static_cast<std::size_t>(c)].add(data[static_cast<std::size_t>(i) * width + c]);
      }
    }
    for (int c = 0; c < width; ++c) {
      mean[static_cast<std::size_t>(c)] = static_cast<float>(acc[static_cast<std::size_t>(c)].mean());
      const double sd = std::sqrt(acc[static_cast<std::size_t>(c)].variance());
      std_out[static_cast<std::size_t>(c)] = static_cast<float>(sd > 1e-9 ? sd : 1.0);
    }
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < width; ++c) {
        auto& v = data[static_cast<std::size_t>(i) * width + c];
        v = (v - mean[static_cast<std::size_t>(c)]) / std_out[static_cast<std::size_t>(c)];
      }
    }
  };
  zscore(ds.proprio, dp, ds.proprio_mean, ds.proprio_std);
  zscore(ds.targets, dt_dim, ds.target_mean, ds.target_std);
  return ds;
}

Tensorf Dataset::image_batch(const std::vector<int>& idx) const {
  const int b = static_cast<int>(idx.size());
  Tensorf t({b, config.height, config.width, 1});
  for (int i = 0; i < b; ++i) {
    const float* src = images.data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * config.pixels();
    std::copy(src, src + config.pixels(), t.data() + static_cast<Eigen::Index>(i) * config.pixels());
  }
  return t;
}

Tensorf Dataset::proprio_batch(const std::vector<int>& idx) const {
  const int b = static_cast<int>(idx.size());
  const int d = config.proprio_dim();
  Tensorf t({b, d});
  for (int i = 0; i < b; ++i) {
    const float* src = proprio.data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * d;
    std::copy(src, src + d, t.data() + static_cast<Eigen::Index>(i) * d);
  }
  return t;
}

Tensorf Dataset::target_batch(const std::vector<int>& idx) const {
  const int b = static_cast<int>(idx.size());
  const int d = config.target_dim();
  Tensorf t({b, d});
  for (int i = 0; i < b; ++i) {
    const float* src = targets.data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * d;
    std::copy(src, src + d, t.data() + static_cast<Eigen::Index>(i) * d);
  }
  return t;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  io::Writer w(path);
  w.magic("MMLCARM1");
  w.u32(1);  // version
  w.u32(static_cast<std::uint32_t>(ds.config.height));
  w.u32(static_cast<std::uint32_t>(ds.config.width));
  w.u32(static_cast<std::uint32_t>(ds.config.joints));
  w.u32(static_cast<std::uint32_t>(ds.n));
  w.u32(static_cast<std::uint32_t>(ds.eval_start));
  w.u64(ds.seed);
  w.u32(static_cast<std::uint32_t>(ds.config.steps_per_target));
  w.f32(ds.config.dt);
  w.f32(ds.config.omega);
  w.f32(ds.config.line_halfwidth);
  w.u32(ds.config.hide_right_tip ? 1 : 0);
  for (float l : ds.config.links) w.f32(l);
  w.f32(ds.config.limit_base);
  w.f32(ds.config.limit_rest);
  w.f32s(ds.proprio_mean.data(), ds.proprio_mean.size());
  w.f32s(ds.proprio_std.data(), ds.proprio_std.size());
  w.f32s(ds.target_mean.data(), ds.target_mean.size());
  w.f32s(ds.target_std.data(), ds.target_std.size());
  w.f32s(ds.images.data(), ds.images.size());
  w.f32s(ds.proprio.data(), ds.proprio.size());
  w.f32s(ds.targets.data(), ds.targets.size());
  w.close();
}

Dataset load_dataset(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("MMLCARM1");
  if (r.u32() != 1) throw io::IoError("unsupported dataset version in " + path);
  Dataset ds;
  ds.config.height = static_cast<int>(r.u32());
  ds.config.width = static_cast<int>(r.u32());
  ds.config.joints = static_cast<int>(r.u32());
  ds.n = static_cast<int>(r.u32());
  ds.eval_start = static_cast<int>(r.u32());
  ds.seed = r.u64();
  ds.config.steps_per_target = static_cast<int>(r.u32());
  ds.config.dt = r.f32();
  ds.config.omega = r.f32();
  ds.config.line_halfwidth = r.f32();
  ds.config.hide_right_tip = r.u32() != 0;
  ds.config.links.resize(static_cast<std::size_t>(ds.config.joints));
  for (auto& l : ds.config.links) l = r.f32();
  ds.config.limit_base = r.f32();
  ds.config.limit_rest = r.f32();
  const int dp = ds.config.proprio_dim(), dt_dim = ds.config.target_dim();
  ds.proprio_mean.resize(static_cast<std::size_t>(dp));
  ds.proprio_std.resize(static_cast<std::size_t>(dp));
  ds.target_mean.resize(static_cast<std::size_t>(dt_dim));
  ds.target_std.resize(static_cast<std::size_t>(dt_dim));
  r.f32s(ds.proprio_mean.data(), ds.proprio_mean.size());
  r.f32s(ds.proprio_std.data(), ds.proprio_std.size());
  r.f32s(ds.target_mean.data(), ds.target_mean.size());
  r.f32s(ds.target_std.data(), ds.target_std.size());
  ds.images.resize(static_cast<std::size_t>(ds.n) * ds.config.pixels());
  ds.proprio.resize(static_cast<std::size_t>(ds.n) * dp);
  ds.targets.resize(static_cast<std::size_t>(ds.n) * dt_dim);
  r.f32s(ds.images.data(), ds.images.size());
  r.f32s(ds.proprio.data(), ds.proprio.size());
  r.f32s(ds.targets.data(), ds.targets.size());
  return ds;
}

void write_frame_pgm(const std::string& path, const float* pixels, int h, int w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::IoError("cannot open for writing: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  for (int i = 0; i < h * w; ++i) {
    const float v = std::min(1.f, std::max(-1.f, pixels[i]));
    out.put(static_cast<char>(static_cast<int>(std::lround((v + 1.f) * 127.5f))));
  }
  if (!out) throw io::IoError("failed writing " + path);
}

}  // namespace mmlc::sim
