#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fd_check.hpp"
#include "mmlc/core/adam.hpp"
#include "mmlc/core/layers.hpp"
#include "mmlc/core/metrics.hpp"
#include "mmlc/core/rng.hpp"
#include "mmlc/core/tape.hpp"
#include "mmlc/core/tensor.hpp"
#include "mmlc/core/train.hpp"

using namespace mmlc;

namespace {

template <typename S>
Tensor<S> make_tensor(std::vector<int> shape, std::vector<S> vals) {
  Tensor<S> t(shape);
  REQUIRE(t.size() == static_cast<Eigen::Index>(vals.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = vals[static_cast<std::size_t>(i)];
  return t;
}

template <typename S>
void fill_normal(Tensor<S>& t, RngStream& rng) {
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.normal());
}

}  // namespace

TEST_CASE("tensor shape/data invariant") {
  Tensorf t({2, 3});
  CHECK(t.size() == 6);
  CHECK(Tensorf({4, 0}).size() == 0);
  CHECK_THROWS(Tensorf({2, -1}));
  CHECK_THROWS(t.reshaped({4, 2}));
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("dense forward: identity, relu clamp, hand-computed affine") {
  ParamStore<float> store;
  RngStream rng(1);
  auto layer = DenseLayer<float>::make(store, "d", 2, 2, Act::Linear, rng);
  layer.W->value = make_tensor<float>({2, 2}, {1, 0, 0, 1});
  layer.b->value = make_tensor<float>({2}, {0, 0});

  Tape<float> t;
  Val x = t.leaf(make_tensor<float>({1, 2}, {3, -1}));
  Val y = layer.forward(t, x, false);
  CHECK(t.value(y)[0] == doctest::Approx(3));
  CHECK(t.value(y)[1] == doctest::Approx(-1));

  layer.act = Act::Relu;
  Tape<float> t2;
  Val y2 = layer.forward(t2, t2.leaf(make_tensor<float>({1, 2}, {3, -1})), false);
  CHECK(t2.value(y2)[0] == doctest::Approx(3));
  CHECK(t2.value(y2)[1] == doctest::Approx(0));

  layer.act = Act::Linear;
  layer.W->value = make_tensor<float>({2, 2}, {1, 2, 0, 1});
  layer.b->value = make_tensor<float>({2}, {1, 1});
  Tape<float> t3;
  Val y3 = layer.forward(t3, t3.leaf(make_tensor<float>({1, 2}, {1, 1})), false);
  CHECK(t3.value(y3)[0] == doctest::Approx(4));
  CHECK(t3.value(y3)[1] == doctest::Approx(2));
}

TEST_CASE("dense forward rejects shape mismatch") {
  ParamStore<float> store;
  RngStream rng(1);
  auto layer = DenseLayer<float>::make(store, "d", 3, 2, Act::Linear, rng);
  Tape<float> t;
  Val x = t.leaf(Tensorf({1, 4}));
  CHECK_THROWS_AS(layer.forward(t, x, false), ShapeError);
}

TEST_CASE("mse: zero on equality, hand value, unit chance on normal targets") {
  Tape<float> t;
  Val a = t.leaf(make_tensor<float>({1, 2}, {0.5f, -2.0f}));
  Val b = t.leaf(make_tensor<float>({1, 2}, {0.5f, -2.0f}));
  CHECK(t.value(t.mse_sum_batch(a, b, 2.0f))[0] == doctest::Approx(0));

  Val p = t.leaf(make_tensor<float>({1, 2}, {1, 1}));
  Val q = t.leaf(make_tensor<float>({1, 2}, {0, 0}));
  CHECK(t.value(t.mse_sum_batch(p, q, 2.0f))[0] == doctest::Approx(1.0));

  // A zero predictor against standard-normal targets scores ~1 per data point.
  RngStream rng(2024, 5);
  const int n = 20000, d = 8;
  Tensorf target({n, d});
  fill_normal(target, rng);
  Tensorf zeros({n, d});
  OnlineMean acc;
  accumulate_per_sample_mse(zeros, target, acc);
  CHECK(acc.mean() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("backward: single linear layer matches the closed form") {
  // L = (1/d) * |W x + b - t|^2 ; dL/dW = (2/d) (Wx+b-t) x^T
  ParamStore<double> store;
  RngStream rng(3);
  auto layer = DenseLayer<double>::make(store, "d", 3, 2, Act::Linear, rng);
  Tensord x = make_tensor<double>({1, 3}, {0.5, -1.25, 2.0});
  Tensord tgt = make_tensor<double>({1, 2}, {1.0, -0.5});

  Tape<double> t;
  Val xv = t.leaf(x);
  Val y = layer.forward(t, xv, true);
  Val loss = t.mse_sum_batch(y, t.leaf(tgt), 2.0);
  store.zero_grad();
  t.backward(loss);

  Eigen::Vector2d r;
  r(0) = t.value(y)[0] - tgt[0];
  r(1) = t.value(y)[1] - tgt[1];
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 3; ++i) {
      const double expect = 2.0 / 2.0 * r(o) * x[i];
      CHECK(layer.W->grad[o * 3 + i] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(layer.b->grad[o] == doctest::Approx(2.0 / 2.0 * r(o)).epsilon(1e-12));
  }
}

TEST_CASE("backward: 3-layer relu mlp gradients match central differences") {
  ParamStore<double> store;
  RngStream rng(11);
  auto mlp = Mlp<double>::make(store, "m", 8, {9, 7, 5}, rng);
  Tensord x({4, 8}), tgt({4, 5});
  fill_normal(x, rng);
  fill_normal(tgt, rng);

  auto loss_fn = [&](bool train) {
    Tape<double> t;
    Val y = mlp.forward(t, t.leaf(x), train);
    Val loss = t.mse_sum_batch(y, t.leaf(tgt), 5.0);
    if (train) t.backward(loss);
    return t.value(loss)[0];
  };
  CHECK(mmlc::testing::max_fd_rel_error(store, loss_fn) < 1e-3);
}

TEST_CASE("backward: conv -> dense stack gradients match central differences") {
  ParamStore<double> store;
  RngStream rng(12);
  auto conv = Conv2dLayer<double>::make(store, "c", 1, 3, 4, 2, 0, Act::Relu, rng);
  // 8x8 input, valid conv k4 s2 -> 3x3x3 = 27 features.
  auto head = DenseLayer<double>::make(store, "h", 27, 2, Act::Linear, rng);
  Tensord x({2, 8, 8, 1}), tgt({2, 2});
  fill_normal(x, rng);
  fill_normal(tgt, rng);

  auto loss_fn = [&](bool train) {
    Tape<double> t;
    Val h = conv.forward(t, t.leaf(x), train);
    Val flat = t.reshape(h, {2, 27});
    Val y = head.forward(t, flat, train);
    Val loss = t.mse_sum_batch(y, t.leaf(tgt), 2.0);
    if (train) t.backward(loss);
    return t.value(loss)[0];
  };
  CHECK(mmlc::testing::max_fd_rel_error(store, loss_fn) < 1e-3);
}

TEST_CASE("backward: deconv, concat and slice gradients match central differences") {
  ParamStore<double> store;
  RngStream rng(13);
  auto deconv = Deconv2dLayer<double>::make(store, "dc", 2, 1, 4, 2, 1, Act::Linear, rng);
  Tensord x({2, 3, 3, 2}), side({2, 4}), tgt({2, 40});
  fill_normal(x, rng);
  fill_normal(side, rng);
  fill_normal(tgt, rng);

  auto loss_fn = [&](bool train) {
    Tape<double> t;
    Val y = deconv.forward(t, t.leaf(x), train);  // [2,6,6,1]
    Val flat = t.reshape(y, {2, 36});
    Val both = t.concat_cols({flat, t.leaf(side)});
    Val view = t.slice_cols(both, 0, 40);
    Val loss = t.mse_sum_batch(view, t.leaf(tgt), 4.0);
    if (train) t.backward(loss);
    return t.value(loss)[0];
  };
  CHECK(mmlc::testing::max_fd_rel_error(store, loss_fn) < 1e-3);
}

TEST_CASE("backward usage errors") {
  Tape<float> t;
  CHECK_THROWS_AS(t.backward(Val{0}), std::exception);
  Val x = t.leaf(Tensorf({2, 2}));
  CHECK_THROWS_AS(t.backward(x), std::logic_error);
}

TEST_CASE("relu output is non-negative and idempotent") {
  RngStream rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    Tensorf x({5, 7});
    fill_normal(x, rng);
    Tape<float> t;
    Val y = t.relu(t.leaf(x));
    Val yy = t.relu(y);
    bool nonneg = true, idem = true;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      nonneg = nonneg && t.value(y)[i] >= 0.0f;
      idem = idem && t.value(y)[i] == t.value(yy)[i];
    }
    CHECK(nonneg);
    CHECK(idem);
  }
}

TEST_CASE("adam: zero gradient is a no-op, first step has closed form") {
  ParamStore<float> store;
  auto& p = store.add("w", {3});
  p.value = make_tensor<float>({3}, {0.5f, -0.25f, 2.0f});

  Adam<float> opt(1e-3f);
  store.zero_grad();
  opt.step(store);
  CHECK(p.value[0] == doctest::Approx(0.5f));
  CHECK(p.value[1] == doctest::Approx(-0.25f));
  CHECK(p.value[2] == doctest::Approx(2.0f));

  // Constant unit gradient: the bias-corrected first step is lr * g/(|g|+eps').
  ParamStore<float> s2;
  auto& q = s2.add("w", {1});
  q.value[0] = 1.0f;
  Adam<float> opt2(1e-3f);
  q.grad[0] = 1.0f;
  opt2.step(s2);
  CHECK(q.value[0] == doctest::Approx(1.0f - 1e-3f).epsilon(1e-5));

  const float after_one = q.value[0];
  q.grad[0] = 1.0f;
  opt2.step(s2);
  CHECK(q.value[0] < after_one);  // keeps moving against the gradient sign
}

TEST_CASE("conv/deconv shape round trip, valid and half padding") {
  RngStream rng(31);
  for (int extent : {4, 6, 8, 12, 16}) {
    ParamStore<float> store;
    auto c = Conv2dLayer<float>::make(store, "c", 1, 2, 4, 2, 0, Act::Linear, rng);
    auto d = Deconv2dLayer<float>::make(store, "d", 2, 1, 4, 2, 0, Act::Linear, rng);
    Tensorf x({1, extent, extent + 2, 1});
    Tape<float> t;
    Val y = c.forward(t, t.leaf(x), false);
    Val z = d.forward(t, y, false);
    CHECK(t.value(z).dim(1) == extent);
    CHECK(t.value(z).dim(2) == extent + 2);
  }
  // pad 1 halves/doubles the extents: 32x64 -> 16x32 -> 8x16 and back.
  ParamStore<float> store;
  auto c1 = Conv2dLayer<float>::make(store, "c1", 1, 2, 4, 2, 1, Act::Linear, rng);
  auto c2 = Conv2dLayer<float>::make(store, "c2", 2, 3, 4, 2, 1, Act::Linear, rng);
  auto d1 = Deconv2dLayer<float>::make(store, "d1", 3, 2, 4, 2, 1, Act::Linear, rng);
  auto d2 = Deconv2dLayer<float>::make(store, "d2", 2, 1, 4, 2, 1, Act::Linear, rng);
  Tape<float> t;
  Val h = c2.forward(t, c1.forward(t, t.leaf(Tensorf({1, 32, 64, 1})), false), false);
  CHECK(t.value(h).dim(1) == 8);
  CHECK(t.value(h).dim(2) == 16);
  Val r = d2.forward(t, d1.forward(t, h, false), false);
  CHECK(t.value(r).dim(1) == 32);
  CHECK(t.value(r).dim(2) == 64);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [] {
    ParamStore<float> store;
    RngStream init(77, 0);
    auto mlp = Mlp<float>::make(store, "m", 6, {16, 16, 6}, init);
    Adam<float> opt(1e-3f);
    RngStream data(77, 1);
    std::vector<float> losses;
    for (int step = 0; step < 25; ++step) {
      Tensorf x({8, 6});
      fill_normal(x, data);
      Tape<float> t;
      Val xv = t.leaf(x);
      Val y = mlp.forward(t, xv, true);
      Val loss = t.mse_sum_batch(y, xv, 6.0f);
      t.backward(loss);
      opt.step(store);
      losses.push_back(t.value(loss)[0]);
    }
    return losses;
  };
  auto a = run();
  auto b = run();
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; identical && i < a.size(); ++i) identical = (a[i] == b[i]);
  CHECK(identical);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  CHECK_THROWS_AS(ensure_finite(std::nan(""), "unit"), NumericalError);
  CHECK_THROWS_AS(ensure_finite(std::numeric_limits<double>::infinity(), "unit"),
                  NumericalError);
  CHECK_NOTHROW(ensure_finite(0.125, "unit"));

  Tensorf bad({2});
  bad[0] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(bad.all_finite());
}
