#pragma once

#include <cmath>
#include <stdexcept>

#include "mmlc/core/layers.hpp"

namespace mmlc {

// Adam with bias correction. One instance owns the step counter for the
// stores it updates; moment buffers live in the ParamBlocks.
template <typename S>
class Adam {
 public:
  explicit Adam(S lr = S(1e-3), S beta1 = S(0.9), S beta2 = S(0.999),
                S eps = S(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  long step_count() const { return step_; }

  // Applies one update from the accumulated gradients, then clears them.
  void step(ParamStore<S>& store) {
    if (!store.trainable()) throw std::logic_error("adam: store is frozen");
    ++step_;
    const S c1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1_), step_));
    const S c2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2_), step_));
    for (auto& p : store.blocks()) {
      p.m.array() = beta1_ * p.m.array() + (S(1) - beta1_) * p.grad.array();
      p.v.array() = beta2_ * p.v.array() + (S(1) - beta2_) * p.grad.array().square();
      p.value.array() -=
          lr_ * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + eps_);
      p.grad.array().setZero();
    }
  }

 private:
  S lr_, beta1_, beta2_, eps_;
  long step_ = 0;
};

}  // namespace mmlc
