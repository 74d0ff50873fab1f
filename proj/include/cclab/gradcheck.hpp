#pragma once

#include <cstdint>
#include <functional>

#include "cclab/model.hpp"

namespace cclab {

struct GradCheckResult {
  double max_relative_deviation = 0;
  std::size_t worst_layer = 0;
  std::size_t worst_index = 0;
  bool worst_is_bias = false;
  std::size_t parameters_checked = 0;
};

// Optional hook applied to the analytic gradients before comparison; the
// tests use it to corrupt a layer and confirm the check notices.
using GradientHook = std::function<void(Gradients&)>;

/// Compares backprop against central finite differences of the batch MSE on
/// a small random batch (inputs and targets uniform in [-1, 1], weights from
/// init_model(spec, seed)). Deviation per parameter is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const ModelSpec& spec, std::uint64_t seed, double eps = 1e-5,
                           std::size_t batch = 3, const GradientHook& hook = {});

}  // namespace cclab
