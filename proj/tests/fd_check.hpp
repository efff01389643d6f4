#pragma once

// Test-only finite-difference oracle. Independent of the tape's backward
// path: it re-runs the forward closure with perturbed parameters and
// compares central differences against the recorded gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mmlc/core/adam.hpp"
#include "mmlc/core/layers.hpp"
#include "mmlc/core/tape.hpp"

namespace mmlc::testing {

// `loss_fn` builds a fresh tape and returns the scalar loss node value for
// the current contents of `store`. Returns the max relative error between
// analytic and central-difference gradients over every parameter element.
inline double max_fd_rel_error(ParamStore<double>& store,
                               const std::function<double(bool)>& loss_fn,
                               double h = 1e-4) {
  // One pass with gradients recorded.
  store.zero_grad();
  loss_fn(true);

  std::vector<std::vector<double>> analytic;
  for (auto& b : store.blocks()) {
    analytic.emplace_back(b.grad.data(), b.grad.data() + b.grad.size());
  }

  double worst = 0.0;
  std::size_t bi = 0;
  for (auto& b : store.blocks()) {
    for (Eigen::Index i = 0; i < b.value.size(); ++i) {
      const double saved = b.value[i];
      b.value[i] = saved + h;
      const double lp = loss_fn(false);
      b.value[i] = saved - h;
      const double lm = loss_fn(false);
      b.value[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = analytic[bi][static_cast<std::size_t>(i)];
      const double denom = std::max({std::abs(fd), std::abs(g), 1e-8});
      worst = std::max(worst, std::abs(fd - g) / denom);
    }
    ++bi;
  }
  store.zero_grad();
  return worst;
}

}  // namespace mmlc::testing
