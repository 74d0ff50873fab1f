#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cclab/bitgrid.hpp"
#include "cclab/model.hpp"

namespace cclab {

/// Read-only view of a supervised regression set.
class DataView {
 public:
  virtual ~DataView() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual void input(std::size_t i, std::span<double> out) const = 0;
  virtual double target(std::size_t i) const = 0;
};

// Row-major feature matrix with one target per row.
class MatrixData final : public DataView {
 public:
  MatrixData(std::size_t cols, std::vector<double> features, std::vector<double> targets);

  std::size_t size() const override { return targets_.size(); }
  std::size_t input_size() const override { return cols_; }
  void input(std::size_t i, std::span<double> out) const override;
  double target(std::size_t i) const override { return targets_[i]; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols_, cols_};
  }

 private:
  std::size_t cols_;
  std::vector<double> features_;
  std::vector<double> targets_;
};

// Binary images expanded to 0/1 values on demand. Holds references; the
// images must outlive the view.
class ImageData final : public DataView {
 public:
  ImageData(std::span<const BitGrid> images, std::vector<double> targets);

  std::size_t size() const override { return targets_.size(); }
  std::size_t input_size() const override;
  void input(std::size_t i, std::span<double> out) const override;
  double target(std::size_t i) const override { return targets_[i]; }

 private:
  std::span<const BitGrid> images_;
  std::vector<double> targets_;
};

struct BackpropResult {
  Gradients grads;
  double loss = 0;  // mean squared error over the batch
};

/// Gradients of the batch MSE (1/B) sum (pred - target)^2 w.r.t. every
/// parameter. Throws NumericError on a non-finite loss or gradient.
BackpropResult backprop(const ModelState& state, const DataView& data,
                        std::span<const std::size_t> batch);

struct OptimizerConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double lr = 0.01;
  double momentum = 0.0;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double epsilon = 1e-7;

  static OptimizerConfig sgd(double lr, double momentum = 0.0) {
    return {Kind::sgd, lr, momentum};
  }
  static OptimizerConfig adam(double lr) { return {Kind::adam, lr}; }
};

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  // Held-out share of the data; 0 trains on everything (no validation loss).
  double validation_fraction = 0.2;
  // Train-loss level for the epochs-to-threshold measurement.
  std::optional<double> loss_threshold;
  bool stop_at_threshold = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainTrace {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_loss;    // empty when validation_fraction == 0
  std::optional<int> epochs_to_threshold;  // 1-based
  std::optional<double> loss_threshold;

  int epochs_run() const { return static_cast<int>(train_loss.size()); }
};

// Called after every epoch with (epoch, state); returning false stops
// training early.
using EpochCallback = std::function<bool(int, const ModelState&)>;

struct TrainSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Deterministic shuffle-then-cut split from the training seed.
TrainSplit split_indices(std::size_t n, double validation_fraction, std::uint64_t seed);

/// Minibatch training with a fixed per-epoch shuffle derived from the seed.
/// Deterministic for identical (state, data, config). Throws DivergenceError
/// carrying the epoch index when the loss becomes non-finite.
TrainTrace train(ModelState& state, const DataView& data, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

// Mean squared error of the model over the given rows (all rows if empty).
double mean_squared_error(const ModelState& state, const DataView& data,
                          std::span<const std::size_t> rows = {});

std::vector<double> predict_all(const ModelState& state, const DataView& data);

}  // namespace cclab
