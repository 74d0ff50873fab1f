#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cclab/tensor.hpp"

namespace cclab {

// Layer descriptions. A Dense with in == 0 takes its fan-in from the
// preceding layer when the ModelSpec is resolved.
struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};
struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};
struct Dense {
  std::uint32_t in = 0;
  std::uint32_t out = 1;
  friend bool operator==(const Dense&, const Dense&) = default;
};
struct Conv2D {
  std::uint32_t in_ch = 1;
  std::uint32_t out_ch = 1;
  std::uint32_t k = 3;
  std::uint32_t stride = 1;
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};
struct MaxPool {
  std::uint32_t k = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

using LayerSpec = std::variant<Flatten, Dense, Relu, Conv2D, MaxPool>;

// Serialized layer type ids.
std::uint8_t layer_type_id(const LayerSpec& layer);
std::string layer_name(const LayerSpec& layer);

// Channels x height x width. Vector inputs use {1, 1, d}.
struct Shape3 {
  std::uint32_t c = 1;
  std::uint32_t h = 1;
  std::uint32_t w = 1;
  std::size_t size() const noexcept { return std::size_t{c} * h * w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct ModelSpec {
  std::string name;
  Shape3 input;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Checks layer compatibility, fills inferred Dense fan-ins and returns the
/// shape entering each layer plus the final output shape (layers.size() + 1
/// entries). Throws ShapeError on incompatible layers.
std::vector<Shape3> resolve(ModelSpec& spec);

namespace presets {

// M0 = [Flatten, Dense(N, 1)]: a perceptron on the flattened image.
ModelSpec m0(std::uint32_t image_size);
// M1 = [Flatten, Dense(N, hidden), ReLU, Dense(hidden, 1)].
ModelSpec m1(std::uint32_t image_size, std::uint32_t hidden = 128);
// MC: the MNIST-style CNN with a single linear regression unit.
ModelSpec mc(std::uint32_t image_size);
// MCS: MC with 8 conv channels, one conv block, 4x4 pooling and a 32-unit
// head; sized for single-core desk runs.
ModelSpec mcs(std::uint32_t image_size);
// Fully connected network on a d-dimensional vector with the given hidden
// widths, ReLU between layers, one linear output.
ModelSpec mlp(std::uint32_t inputs, std::vector<std::uint32_t> hidden);

ModelSpec by_name(const std::string& name, std::uint32_t image_size);

}  // namespace presets

enum class InitScheme : std::uint8_t { glorot_uniform = 1 };

struct LayerParams {
  Tensor weight;  // empty for parameter-free layers
  Tensor bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelState {
  ModelSpec spec;  // resolved
  InitScheme init = InitScheme::glorot_uniform;
  std::uint64_t seed = 0;
  std::vector<LayerParams> params;  // one entry per layer

  std::size_t parameter_count() const;
  friend bool operator==(const ModelState&, const ModelState&) = default;
};

// Same layout as ModelState::params.
using Gradients = std::vector<LayerParams>;

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
ModelState init_model(ModelSpec spec, std::uint64_t seed);

Gradients zero_gradients(const ModelState& state);

/// Per-sample forward/backward evaluator. Holds the activations of the last
/// forward pass; one instance per thread.
class Engine {
 public:
  explicit Engine(const ModelSpec& spec);

  // Returns the output vector; throws NumericError on non-finite output.
  std::span<const double> forward(const ModelState& state, std::span<const double> input);

  // Scalar output of a regression model.
  double predict(const ModelState& state, std::span<const double> input) {
    return forward(state, input)[0];
  }

  // Accumulates d(output[0]) * d/dparams into grads, using the activations of
  // the last forward call. Gradients w.r.t. the network input are skipped.
  void backward(const ModelState& state, double d_output, Gradients& grads);

  // Activations entering layer i (i == layers.size() is the output).
  std::span<const double> activation(std::size_t i) const { return acts_[i]; }

 private:
  std::vector<Shape3> shapes_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
  std::vector<std::vector<std::uint32_t>> argmax_;
};

struct LayerStats {
  std::string layer;
  std::string tensor;  // "weight" or "bias"
  std::size_t count = 0;
  double mean = 0;
  double std = 0;  // population standard deviation
  double min = 0;
  double max = 0;
};

std::vector<LayerStats> weight_stats(const ModelState& state);

}  // namespace cclab
