#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mmlc/core/tensor.hpp"

namespace mmlc {

// Welford accumulator over per-sample values; 64-bit throughout so reported
// metrics do not depend on accumulation order quirks of float.
class OnlineMean {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }

  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }

  double std_error() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Accumulates the average per-data-point mean squared error between
// [batch, d] prediction/target pairs: mean over samples of (1/d)*|err|^2.
template <typename S>
void accumulate_per_sample_mse(const Tensor<S>& pred, const Tensor<S>& target,
                               OnlineMean& acc) {
  if (!pred.same_shape(target) || pred.ndim() != 2) {
    throw std::invalid_argument("per-sample mse: need matching [batch, d] tensors");
  }
  const int batch = pred.dim(0), d = pred.dim(1);
  for (int i = 0; i < batch; ++i) {
    double s = 0.0;
    const S* p = pred.data() + static_cast<Eigen::Index>(i) * d;
    const S* t = target.data() + static_cast<Eigen::Index>(i) * d;
    for (int j = 0; j < d; ++j) {
      const double e = static_cast<double>(p[j]) - static_cast<double>(t[j]);
      s += e * e;
    }
    acc.add(s / d);
  }
}

}  // namespace mmlc
