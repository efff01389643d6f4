#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "mmlc/core/rng.hpp"
#include "mmlc/core/tape.hpp"
#include "mmlc/core/tensor.hpp"

namespace mmlc {

// Owns parameter blocks with their optimizer state. References into the
// store stay valid for its lifetime. A store trains as a unit; freeze()
// turns every later tape binding into a constant (forward-only).
template <typename S>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;             // layers hold block pointers
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) noexcept = default;        // deque keeps blocks in place
  ParamStore& operator=(ParamStore&&) noexcept = default;

  ParamBlock<S>& add(std::string name, std::vector<int> shape) {
    blocks_.push_back(ParamBlock<S>{std::move(name), Tensor<S>(shape),
                                    Tensor<S>(shape), Tensor<S>(shape),
                                    Tensor<S>(shape)});
    return blocks_.back();
  }

  void freeze() { trainable_ = false; }
  bool trainable() const { return trainable_; }

  void zero_grad() {
    for (auto& b : blocks_) b.grad.array().setZero();
  }

  std::deque<ParamBlock<S>>& blocks() { return blocks_; }
  const std::deque<ParamBlock<S>>& blocks() const { return blocks_; }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks_) n += b.value.size();
    return n;
  }

 private:
  std::deque<ParamBlock<S>> blocks_;
  bool trainable_ = true;
};

// Uniform Glorot: +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
void glorot_fill(Tensor<S>& t, int fan_in, int fan_out, RngStream& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<S>(rng.uniform(-bound, bound));
}

enum class Act { Relu, Linear };

template <typename S>
struct DenseLayer {
  ParamBlock<S>* W = nullptr;  // [out, in]
  ParamBlock<S>* b = nullptr;  // [out]
  Act act = Act::Linear;

  static DenseLayer make(ParamStore<S>& store, const std::string& name, int in,
                         int out, Act act, RngStream& rng) {
    DenseLayer l;
    l.W = &store.add(name + ".W", {out, in});
    l.b = &store.add(name + ".b", {out});
    l.act = act;
    glorot_fill(l.W->value, in, out, rng);
    return l;
  }

  int in_dim() const { return W->value.dim(1); }
  int out_dim() const { return W->value.dim(0); }

  Val forward(Tape<S>& t, Val x, bool trainable) const {
    Val y = t.linear(x, t.param(*W, trainable), t.param(*b, trainable));
    return act == Act::Relu ? t.relu(y) : y;
  }
};

template <typename S>
struct Conv2dLayer {
  ParamBlock<S>* K = nullptr;  // [kh, kw, in_ch, out_ch]
  ParamBlock<S>* b = nullptr;  // [out_ch]
  int stride = 1;
  int pad = 0;
  Act act = Act::Linear;

  static Conv2dLayer make(ParamStore<S>& store, const std::string& name,
                          int in_ch, int out_ch, int k, int stride, int pad,
                          Act act, RngStream& rng) {
    Conv2dLayer l;
    l.K = &store.add(name + ".K", {k, k, in_ch, out_ch});
    l.b = &store.add(name + ".b", {out_ch});
    l.stride = stride;
    l.pad = pad;
    l.act = act;
    glorot_fill(l.K->value, in_ch * k * k, out_ch * k * k, rng);
    return l;
  }

  Val forward(Tape<S>& t, Val x, bool trainable) const {
    Val y = t.conv2d(x, t.param(*K, trainable), t.param(*b, trainable), stride, pad);
    return act == Act::Relu ? t.relu(y) : y;
  }
};

template <typename S>
struct Deconv2dLayer {
  ParamBlock<S>* K = nullptr;  // [in_ch, kh, kw, out_ch]
  ParamBlock<S>* b = nullptr;  // [out_ch]
  int stride = 1;
  int pad = 0;
  Act act = Act::Linear;

  static Deconv2dLayer make(ParamStore<S>& store, const std::string& name,
                            int in_ch, int out_ch, int k, int stride, int pad,
                            Act act, RngStream& rng) {
    Deconv2dLayer l;
    l.K = &store.add(name + ".K", {in_ch, k, k, out_ch});
    l.b = &store.add(name + ".b", {out_ch});
    l.stride = stride;
    l.pad = pad;
    l.act = act;
    glorot_fill(l.K->value, in_ch * k * k, out_ch * k * k, rng);
    return l;
  }

  Val forward(Tape<S>& t, Val x, bool trainable) const {
    Val y = t.deconv2d(x, t.param(*K, trainable), t.param(*b, trainable), stride, pad);
    return act == Act::Relu ? t.relu(y) : y;
  }
};

// Fully-connected stack; hidden layers ReLU, final layer linear.
template <typename S>
struct Mlp {
  std::vector<DenseLayer<S>> layers;

  static Mlp make(ParamStore<S>& store, const std::string& name, int in,
                  const std::vector<int>& widths, RngStream& rng) {
    Mlp m;
    int prev = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const bool last = (i + 1 == widths.size());
      m.layers.push_back(DenseLayer<S>::make(store, name + ".l" + std::to_string(i),
                                             prev, widths[i],
                                             last ? Act::Linear : Act::Relu, rng));
      prev = widths[i];
    }
    return m;
  }

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  Val forward(Tape<S>& t, Val x, bool trainable) const {
    Val h = x;
    for (const auto& l : layers) h = l.forward(t, h, trainable);
    return h;
  }
};

}  // namespace mmlc
