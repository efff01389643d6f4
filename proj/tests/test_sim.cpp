#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>

#include "mmlc/sim/arm.hpp"

using namespace mmlc;
using namespace mmlc::sim;

namespace {

ArmConfig small_config() {
  // Scaled-down world for fast tests; validate() still holds.
  ArmConfig cfg;
  cfg.height = 16;
  cfg.width = 32;
  cfg.links = {0.09375f, 0.0625f, 0.046875f};  // 3, 2, 1.5 px
  return cfg;
}

}  // namespace

TEST_CASE("forward kinematics: axis poses and rotation oracle") {
  const std::vector<double> links = {1.0, 1.0, 1.0};
  auto p = forward_kinematics({0.0, 0.0, 0.0}, links, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(3.0));
  CHECK(p[1] == doctest::Approx(0.0));

  auto q = forward_kinematics({M_PI / 2, 0.0, 0.0}, links, 0.0, 0.0);
  CHECK(q[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(3.0));

  // Independent oracle: accumulate unit rotations as complex products.
  RngStream rng(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> phi = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    std::vector<double> lk = {rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
    std::complex<double> pos(0.4, -0.7), rot(1.0, 0.0);
    for (int j = 0; j < 3; ++j) {
      rot *= std::polar(1.0, phi[static_cast<std::size_t>(j)]);
      pos += lk[static_cast<std::size_t>(j)] * rot;
    }
    auto r = forward_kinematics(phi, lk, 0.4, -0.7);
    CHECK(std::abs(r[0] - pos.real()) < 1e-12);
    CHECK(std::abs(r[1] - pos.imag()) < 1e-12);
  }
}

TEST_CASE("tracking dynamics: fixed point, monotone approach, mirror symmetry") {
  ArmConfig cfg = small_config();
  ArmState s;
  s.phi = {0.5, -0.25, 1.0};
  s.phi_dot = {0.0, 0.0, 0.0};
  s.target = s.phi;
  ArmState before = s;
  step_toward_target(s, cfg);
  for (int j = 0; j < 3; ++j) {
    CHECK(s.phi[j] == before.phi[j]);
    CHECK(s.phi_dot[j] == 0.0);
  }

  // From rest, the gap to the target shrinks every step.
  ArmState a;
  a.phi = {0.0, 0.0, 0.0};
  a.phi_dot = {0.0, 0.0, 0.0};
  a.target = {1.2, -0.8, 1.9};
  std::vector<double> gap = {1.2, 0.8, 1.9};
  for (int t = 0; t < 10; ++t) {
    step_toward_target(a, cfg);
    for (int j = 0; j < 3; ++j) {
      const double g = std::abs(a.target[j] - a.phi[j]);
      CHECK(g < gap[j]);
      gap[j] = g;
    }
  }

  // Mirrored target, mirrored trajectory.
  ArmState b;
  b.phi = {0.0, 0.0, 0.0};
  b.phi_dot = {0.0, 0.0, 0.0};
  b.target = {-1.2, 0.8, -1.9};
  ArmState a2;
  a2.phi = {0.0, 0.0, 0.0};
  a2.phi_dot = {0.0, 0.0, 0.0};
  a2.target = {1.2, -0.8, 1.9};
  for (int t = 0; t < 10; ++t) {
    step_toward_target(a2, cfg);
    step_toward_target(b, cfg);
    for (int j = 0; j < 3; ++j) CHECK(b.phi[j] == -a2.phi[j]);
  }
}

TEST_CASE("render: arms confined to halves, left-only changes, value range") {
  ArmConfig cfg = small_config();
  cfg.validate();
  WorldState w;
  for (ArmState* arm : {&w.left, &w.right}) {
    arm->phi = {0.3, -0.4, 0.7};
    arm->phi_dot = {0, 0, 0};
    arm->target = {0, 0, 0};
  }
  auto frame = render(w, cfg);

  bool left_any = false, right_any = false;
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      if (frame[r * cfg.width + c] > -1.f) {
        (c < cfg.width / 2 ? left_any : right_any) = true;
      }
    }
  }
  CHECK(left_any);
  CHECK(right_any);

  WorldState w2 = w;
  w2.left.phi = {-0.9, 0.2, -0.1};
  auto frame2 = render(w2, cfg);
  bool right_identical = true, left_differs = false;
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const bool same = frame[r * cfg.width + c] == frame2[r * cfg.width + c];
      if (c >= cfg.width / 2) right_identical = right_identical && same;
      else left_differs = left_differs || !same;
    }
  }
  CHECK(right_identical);
  CHECK(left_differs);

  RngStream rng(7, 1);
  float lo = 0.f, hi = 0.f;
  for (int rep = 0; rep < 1000; ++rep) {
    WorldState v;
    for (ArmState* arm : {&v.left, &v.right}) {
      arm->phi = {rng.uniform(-cfg.limit_base, cfg.limit_base),
                  rng.uniform(-cfg.limit_rest, cfg.limit_rest),
                  rng.uniform(-cfg.limit_rest, cfg.limit_rest)};
      arm->phi_dot = {0, 0, 0};
      arm->target = {0, 0, 0};
    }
    auto f = render(v, cfg);
    for (float px : f) {
      lo = std::min(lo, px);
      hi = std::max(hi, px);
    }
  }
  CHECK(lo >= -1.f);
  CHECK(hi <= 1.f);
}

TEST_CASE("invalid configurations are rejected") {
  ArmConfig cfg = small_config();
  cfg.links = {0.2f, 0.2f, 0.2f};  // reach beyond the half frame
  CHECK_THROWS(cfg.validate());

  ArmConfig odd = small_config();
  odd.width = 31;
  CHECK_THROWS(odd.validate());

  ArmConfig cfg2 = small_config();
  CHECK_THROWS(generate_dataset(cfg2, 95, 1));  // not a multiple of 10
}

TEST_CASE("dataset: episode structure, z-scored stats, determinism, io") {
  ArmConfig cfg = small_config();
  Dataset ds = generate_dataset(cfg, 100, 11);
  CHECK(ds.n == 100);
  CHECK(ds.eval_start == 90);  // 10 episodes, last one held out

  Dataset big = generate_dataset(cfg, 1000, 12);
  const int dp = cfg.proprio_dim();
  for (int c = 0; c < dp; ++c) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < big.n; ++i) mean += big.proprio[i * dp + c];
    mean /= big.n;
    for (int i = 0; i < big.n; ++i) {
      const double d = big.proprio[i * dp + c] - mean;
      var += d * d;
    }
    var /= (big.n - 1);
    CHECK(std::abs(mean) < 1e-4);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.01));
  }

  Dataset again = generate_dataset(cfg, 100, 11);
  CHECK(again.images == ds.images);
  CHECK(again.proprio == ds.proprio);
  CHECK(again.targets == ds.targets);

  const std::string path = "arm_dataset_test.bin";
  save_dataset(path, ds);
  Dataset loaded = load_dataset(path);
  CHECK(loaded.images == ds.images);
  CHECK(loaded.proprio == ds.proprio);
  CHECK(loaded.targets == ds.targets);
  CHECK(loaded.eval_start == ds.eval_start);
  CHECK(loaded.config.width == cfg.width);
  std::filesystem::remove(path);

  write_frame_pgm("frame_test.pgm", ds.images.data(), cfg.height, cfg.width);
  CHECK(std::filesystem::file_size("frame_test.pgm") > 0);
  std::filesystem::remove("frame_test.pgm");
}

TEST_CASE("stream layout covers the target vector") {
  ArmConfig cfg = small_config();
  int total = 0;
  for (Stream s : {Stream::PosL, Stream::VelL, Stream::EeL, Stream::PosR,
                   Stream::VelR, Stream::EeR}) {
    total += stream_range(cfg, s).len;
  }
  CHECK(total == cfg.target_dim());
  CHECK(stream_range(cfg, Stream::EeR).offset + 2 == cfg.target_dim());
}
