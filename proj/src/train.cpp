#include "cclab/train.hpp"

#include <cmath>
#include <numeric>

#include "cclab/error.hpp"
#include "cclab/rng.hpp"

namespace cclab {

MatrixData::MatrixData(std::size_t cols, std::vector<double> features,
                       std::vector<double> targets)
    : cols_(cols), features_(std::move(features)), targets_(std::move(targets)) {
  if (cols_ == 0 || features_.size() != cols_ * targets_.size())
    throw ShapeError("MatrixData: features do not match rows x cols");
}

void MatrixData::input(std::size_t i, std::span<double> out) const {
  const auto r = row(i);
  std::copy(r.begin(), r.end(), out.begin());
}

ImageData::ImageData(std::span<const BitGrid> images, std::vector<double> targets)
    : images_(images), targets_(std::move(targets)) {
  if (images_.size() != targets_.size()) throw ShapeError("ImageData: images/targets mismatch");
  for (const auto& g : images_)
    if (g.width() != images_.front().width() || g.height() != images_.front().height())
      throw ShapeError("ImageData: images have different sizes");
}

std::size_t ImageData::input_size() const { return images_.empty() ? 0 : images_[0].size(); }

void ImageData::input(std::size_t i, std::span<double> out) const { images_[i].to_values(out); }

namespace {

void check_finite(const Gradients& g) {
  for (const auto& p : g) {
    for (double v : p.weight.values)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient");
    for (double v : p.bias.values)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient");
  }
}

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, const ModelState& state)
      : cfg_(cfg), m_(zero_gradients(state)), v_(zero_gradients(state)) {}

  void step(ModelState& state, const Gradients& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t li = 0; li < g.size(); ++li) {
      update(state.params[li].weight.values, g[li].weight.values, m_[li].weight.values,
             v_[li].weight.values, bc1, bc2);
      update(state.params[li].bias.values, g[li].bias.values, m_[li].bias.values,
             v_[li].bias.values, bc1, bc2);
    }
  }

 private:
  void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
              std::vector<double>& v, double bc1, double bc2) const {
    if (cfg_.kind == OptimizerConfig::Kind::sgd) {
      if (cfg_.momentum == 0.0) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg_.lr * g[i];
      } else {
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = cfg_.momentum * m[i] - cfg_.lr * g[i];
          p[i] += m[i];
        }
      }
      return;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }

  OptimizerConfig cfg_;
  Gradients m_;
  Gradients v_;
  long long t_ = 0;
};

// Accumulates batch gradients into `grads` (which must be zeroed) and returns
// the batch MSE.
double accumulate_batch(const ModelState& state, const DataView& data,
                        std::span<const std::size_t> batch, Engine& engine,
                        std::vector<double>& buf, Gradients& grads) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (auto idx : batch) {
    data.input(idx, buf);
    const double err = engine.predict(state, buf) - data.target(idx);
    loss += err * err;
    engine.backward(state, 2.0 * err * inv_b, grads);
  }
  return loss * inv_b;
}

void zero(Gradients& g) {
  for (auto& p : g) {
    std::fill(p.weight.values.begin(), p.weight.values.end(), 0.0);
    std::fill(p.bias.values.begin(), p.bias.values.end(), 0.0);
  }
}

}  // namespace

BackpropResult backprop(const ModelState& state, const DataView& data,
                        std::span<const std::size_t> batch) {
  if (batch.empty()) throw ConfigError("backprop: empty batch");
  Engine engine(state.spec);
  std::vector<double> buf(data.input_size());
  BackpropResult r{zero_gradients(state), 0.0};
  r.loss = accumulate_batch(state, data, batch, engine, buf, r.grads);
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
  check_finite(r.grads);
  return r;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in [0, 1)");
  if (optimizer.lr < 0.0) throw ConfigError("learning rate must be >= 0");
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  if (c.kind == OptimizerConfig::Kind::sgd)
    j = {{"kind", "sgd"}, {"lr", c.lr}, {"momentum", c.momentum}};
  else
    j = {{"kind", "adam"},
         {"lr", c.lr},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "sgd") {
    c = OptimizerConfig::sgd(j.at("lr").get<double>(), j.value("momentum", 0.0));
  } else if (kind == "adam") {
    c = OptimizerConfig::adam(j.at("lr").get<double>());
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
  } else {
    throw ConfigError("unknown optimizer '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"optimizer", c.optimizer},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"validation_fraction", c.validation_fraction},
       {"loss", "mse"},
       {"stop_at_threshold", c.stop_at_threshold}};
  j["loss_threshold"] = c.loss_threshold ? nlohmann::json(*c.loss_threshold) : nlohmann::json();
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.stop_at_threshold = j.value("stop_at_threshold", false);
  if (j.contains("loss_threshold") && !j.at("loss_threshold").is_null())
    c.loss_threshold = j.at("loss_threshold").get<double>();
  else
    c.loss_threshold.reset();
}

TrainSplit split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * double(n)));
  if (n_val == 0) return {idx, {}};
  Rng rng(child_seed(seed, 0x5e1ec7ULL));
  rng.shuffle(std::span(idx));
  TrainSplit s;
  s.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

TrainTrace train(ModelState& state, const DataView& data, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (data.size() == 0) throw ConfigError("train: empty dataset");
  if (data.input_size() != state.spec.input.size())
    throw ShapeError("train: data input size does not match the model");

  auto split = split_indices(data.size(), config.validation_fraction, config.seed);
  if (split.train.empty()) throw ConfigError("train: no training rows after the split");

  TrainTrace trace;
  trace.loss_threshold = config.loss_threshold;
  Engine engine(state.spec);
  Optimizer opt(config.optimizer, state);
  Gradients grads = zero_gradients(state);
  std::vector<double> buf(data.input_size());
  std::vector<std::size_t> order = split.train;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order = split.train;
    Rng rng(child_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span(order));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto len = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      zero(grads);
      double loss;
      try {
        loss = accumulate_batch(state, data, batch, engine, buf, grads);
      } catch (const NumericError&) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch), epoch);
      }
      if (!std::isfinite(loss))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch), epoch);
      opt.step(state, grads);
      loss_sum += loss;
      ++batches;
    }
    const double train_loss = loss_sum / static_cast<double>(batches);
    trace.train_loss.push_back(train_loss);
    if (!split.validation.empty()) {
      double val;
      try {
        val = mean_squared_error(state, data, split.validation);
      } catch (const NumericError&) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch), epoch);
      }
      trace.val_loss.push_back(val);
    }

    bool reached = false;
    if (config.loss_threshold && !trace.epochs_to_threshold &&
        train_loss <= *config.loss_threshold) {
      trace.epochs_to_threshold = epoch;
      reached = true;
    }
    if (on_epoch && !on_epoch(epoch, state)) break;
    if (reached && config.stop_at_threshold) break;
  }
  return trace;
}

double mean_squared_error(const ModelState& state, const DataView& data,
                          std::span<const std::size_t> rows) {
  Engine engine(state.spec);
  std::vector<double> buf(data.input_size());
  double sum = 0.0;
  const std::size_t n = rows.empty() ? data.size() : rows.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = rows.empty() ? k : rows[k];
    data.input(i, buf);
    const double err = engine.predict(state, buf) - data.target(i);
    sum += err * err;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<double> predict_all(const ModelState& state, const DataView& data) {
  Engine engine(state.spec);
  std::vector<double> buf(data.input_size());
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.input(i, buf);
    out[i] = engine.predict(state, buf);
  }
  return out;
}

}  // namespace cclab
