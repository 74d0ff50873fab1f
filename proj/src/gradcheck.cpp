#include "cclab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cclab/rng.hpp"
#include "cclab/train.hpp"

namespace cclab {

GradCheckResult grad_check(const ModelSpec& spec, std::uint64_t seed, double eps,
                           std::size_t batch, const GradientHook& hook) {
  ModelState state = init_model(spec, seed);
  Rng rng(child_seed(seed, 0x9c4ec7ULL));
  const std::size_t cols = state.spec.input.size();
  std::vector<double> features(cols * batch), targets(batch);
  for (auto& v : features) v = rng.uniform(-1.0, 1.0);
  for (auto& v : targets) v = rng.uniform(-1.0, 1.0);
  // Small random biases so that ReLU inputs are not all exactly symmetric.
  for (auto& p : state.params)
    for (auto& b : p.bias.values) b = rng.uniform(-0.1, 0.1);

  MatrixData data(cols, std::move(features), std::move(targets));
  std::vector<std::size_t> rows(batch);
  for (std::size_t i = 0; i < batch; ++i) rows[i] = i;

  auto analytic = backprop(state, data, rows).grads;
  if (hook) hook(analytic);

  GradCheckResult result;
  auto check = [&](std::vector<double>& params, const std::vector<double>& grads,
                   std::size_t layer, bool is_bias) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double orig = params[i];
      params[i] = orig + eps;
      const double up = mean_squared_error(state, data, rows);
      params[i] = orig - eps;
      const double down = mean_squared_error(state, data, rows);
      params[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double dev = std::abs(a - numeric) / denom;
      ++result.parameters_checked;
      if (dev > result.max_relative_deviation) {
        result.max_relative_deviation = dev;
        result.worst_layer = layer;
        result.worst_index = i;
        result.worst_is_bias = is_bias;
      }
    }
  };
  for (std::size_t li = 0; li < state.params.size(); ++li) {
    check(state.params[li].weight.values, analytic[li].weight.values, li, false);
    check(state.params[li].bias.values, analytic[li].bias.values, li, true);
  }
  return result;
}

}  // namespace cclab
