#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmlc {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training schedule; the defaults are used by every network here.
struct Schedule {
  int batches = 2500;
  int batch_size = 128;
  float lr = 1e-3f;
};

// Per-batch loss trace of one training run.
struct TrainLog {
  std::vector<float> losses;

  double mean_first(int k) const {
    k = std::min<int>(k, static_cast<int>(losses.size()));
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += losses[static_cast<std::size_t>(i)];
    return k > 0 ? s / k : 0.0;
  }

  double mean_last(int k) const {
    const int n = static_cast<int>(losses.size());
    k = std::min(k, n);
    double s = 0.0;
    for (int i = n - k; i < n; ++i) s += losses[static_cast<std::size_t>(i)];
    return k > 0 ? s / k : 0.0;
  }
};

// Non-finite losses abort the run instead of silently corrupting a sweep.
inline void ensure_finite(double loss, const std::string& what) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss in " + what +
                         " (value = " + std::to_string(loss) + ")");
  }
}

}  // namespace mmlc
