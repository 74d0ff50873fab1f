#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cclab/error.hpp"
#include "cclab/gradcheck.hpp"
#include "cclab/model.hpp"
#include "cclab/model_io.hpp"
#include "cclab/synth.hpp"
#include "cclab/train.hpp"

using namespace cclab;

namespace {

void fill_weights(ModelState& s, double w) {
  for (auto& p : s.params) {
    for (auto& v : p.weight.values) v = w;
    for (auto& v : p.bias.values) v = 0.0;
  }
}

std::vector<double> pixels(const BitGrid& g) {
  std::vector<double> v(g.size());
  g.to_values(v);
  return v;
}

// A small network touching every layer type, with odd sizes so that indexing
// mistakes show up.
ModelSpec toy_cnn(std::uint32_t stride) {
  return {"toy",
          {1, 9, 9},
          {Conv2D{1, 3, 3, stride}, Relu{}, MaxPool{2}, Flatten{}, Dense{0, 5}, Relu{},
           Dense{0, 1}}};
}

ModelSpec toy_two_conv() {
  return {"toy2",
          {1, 8, 8},
          {Conv2D{1, 2, 3, 1}, Relu{}, Conv2D{2, 3, 2, 1}, Relu{}, MaxPool{2}, Flatten{},
           Dense{0, 1}}};
}

}  // namespace

TEST(ModelSpec, PresetsResolve) {
  auto m0 = presets::m0(64);
  const auto shapes = resolve(m0);
  EXPECT_EQ(shapes.back().size(), 1u);
  for (const char* name : {"m0", "m1", "mc", "mcs"}) {
    auto spec = presets::by_name(name, 32);
    EXPECT_NO_THROW(resolve(spec)) << name;
  }
  EXPECT_THROW(presets::by_name("vgg", 32), ConfigError);
}

TEST(ModelSpec, IncompatibleLayersRaiseShapeError) {
  ModelSpec bad{"bad", {1, 4, 4}, {Flatten{}, Dense{10, 1}}};
  EXPECT_THROW(resolve(bad), ShapeError);
  ModelSpec wide{"wide", {1, 4, 4}, {Flatten{}, Dense{0, 3}}};
  EXPECT_THROW(resolve(wide), ShapeError);
  ModelSpec big_kernel{"k", {1, 4, 4}, {Conv2D{1, 1, 5, 1}, Flatten{}, Dense{0, 1}}};
  EXPECT_THROW(resolve(big_kernel), ShapeError);
}

TEST(Init, M0ShapesAndNearZeroWeights) {
  const auto s = init_model(presets::m0(64), 1);
  ASSERT_EQ(s.params.size(), 2u);
  EXPECT_EQ(s.params[1].weight.shape, (std::vector<std::size_t>{4096, 1}));
  EXPECT_EQ(s.params[1].bias.shape, (std::vector<std::size_t>{1}));
  EXPECT_EQ(s.params[1].bias.values[0], 0.0);
  double mean_abs = 0;
  for (double w : s.params[1].weight.values) mean_abs += std::abs(w);
  mean_abs /= 4096.0;
  EXPECT_LT(mean_abs, 0.05);
  EXPECT_GT(mean_abs, 0.0);
}

TEST(Init, GlorotLimitAndDeterminism) {
  const auto a = init_model(presets::m1(16, 32), 5);
  EXPECT_EQ(a, init_model(presets::m1(16, 32), 5));
  EXPECT_NE(a, init_model(presets::m1(16, 32), 6));
  const double limit = std::sqrt(6.0 / (256 + 32));
  for (double w : a.params[1].weight.values) EXPECT_LE(std::abs(w), limit);
  EXPECT_EQ(a.parameter_count(), 256u * 32 + 32 + 32 + 1);
}

TEST(Forward, UnitWeightPerceptronCountsPixels) {
  auto s = init_model(presets::m0(32), 0);
  fill_weights(s, 1.0);
  Engine e(s.spec);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto k = static_cast<std::uint64_t>(rng.uniform_int(0, 1024));
    const auto g = gen_random_pixels(32, k, rng);
    EXPECT_EQ(e.predict(s, pixels(g)), static_cast<double>(k));
  }
}

TEST(Forward, UniformHiddenWeightsCountPixels) {
  // Hidden width equal to N makes the output N * (1/sqrt N)^2 * k = k.
  const std::uint32_t n = 16 * 16;
  auto s = init_model(presets::m1(16, n), 0);
  fill_weights(s, 1.0 / std::sqrt(static_cast<double>(n)));
  Engine e(s.spec);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto k = static_cast<std::uint64_t>(rng.uniform_int(0, n));
    const auto g = gen_random_pixels(16, k, rng);
    EXPECT_NEAR(e.predict(s, pixels(g)), static_cast<double>(k), 1e-9);
  }
}

TEST(Forward, ZeroImageYieldsBiasChain) {
  auto s = init_model(presets::m1(8, 4), 0);
  for (auto& v : s.params[1].bias.values) v = 0.5;   // hidden biases
  s.params[3].bias.values[0] = -0.25;
  Engine e(s.spec);
  std::vector<double> zero(64, 0.0);
  double expect = -0.25;
  for (std::size_t h = 0; h < 4; ++h) expect += 0.5 * s.params[3].weight.values[h];
  EXPECT_NEAR(e.predict(s, zero), expect, 1e-15);
}

TEST(Forward, ReluOutputsAreNonNegative) {
  const auto s = init_model(toy_cnn(1), 4);
  Engine e(s.spec);
  Rng rng(4);
  std::vector<double> x(81);
  for (int t = 0; t < 20; ++t) {
    for (auto& v : x) v = rng.uniform(-1, 1);
    e.forward(s, x);
    for (std::size_t li = 0; li < s.spec.layers.size(); ++li)
      if (std::holds_alternative<Relu>(s.spec.layers[li])) {
        for (double a : e.activation(li + 1)) ASSERT_GE(a, 0.0);
      }
  }
}

TEST(Backprop, PerfectPredictionHasZeroGradient) {
  auto s = init_model(presets::m0(8), 0);
  fill_weights(s, 1.0);
  Rng rng(6);
  std::vector<double> feats, targets;
  for (int i = 0; i < 4; ++i) {
    const auto k = static_cast<std::uint64_t>(rng.uniform_int(0, 64));
    auto v = pixels(gen_random_pixels(8, k, rng));
    feats.insert(feats.end(), v.begin(), v.end());
    targets.push_back(static_cast<double>(k));
  }
  MatrixData d(64, feats, targets);
  std::vector<std::size_t> rows{0, 1, 2, 3};
  const auto r = backprop(s, d, rows);
  EXPECT_EQ(r.loss, 0.0);
  for (const auto& p : r.grads) {
    for (double g : p.weight.values) EXPECT_EQ(g, 0.0);
    for (double g : p.bias.values) EXPECT_EQ(g, 0.0);
  }
}

TEST(Backprop, LinearModelClosedForm) {
  auto s = init_model(presets::m0(4), 11);
  Rng rng(11);
  std::vector<double> x(16);
  for (auto& v : x) v = rng.uniform(-1, 1);
  const double target = 3.0;
  MatrixData d(16, x, {target});
  std::vector<std::size_t> rows{0};
  double pred = s.params[1].bias.values[0];
  for (std::size_t i = 0; i < 16; ++i) pred += s.params[1].weight.values[i] * x[i];
  const auto r = backprop(s, d, rows);
  EXPECT_NEAR(r.loss, (pred - target) * (pred - target), 1e-12);
  for (std::size_t i = 0; i < 16; ++i)
    EXPECT_NEAR(r.grads[1].weight.values[i], 2 * (pred - target) * x[i], 1e-12);
  EXPECT_NEAR(r.grads[1].bias.values[0], 2 * (pred - target), 1e-12);
}

TEST(GradCheck, LinearModelIsExact) {
  EXPECT_LE(grad_check(presets::m0(4), 1).max_relative_deviation, 1e-7);
}

TEST(GradCheck, EveryLayerTypeAcrossSeeds) {
  const std::vector<ModelSpec> specs{toy_cnn(1), toy_cnn(2), toy_two_conv(),
                                     presets::mlp(3, {7, 5}), presets::m1(5, 6)};
  for (const auto& spec : specs)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = grad_check(spec, seed);
      EXPECT_LE(r.max_relative_deviation, 1e-4) << spec.name << " seed " << seed;
      EXPECT_GT(r.parameters_checked, 0u);
    }
}

TEST(GradCheck, DoubledLayerGradientIsCaught) {
  // |2g - g| / max(|2g|, |g|) = 0.5 whenever g is not negligible.
  const auto r = grad_check(toy_cnn(1), 3, 1e-5, 3, [](Gradients& g) {
    for (auto& v : g[4].weight.values) v *= 2.0;
  });
  EXPECT_NEAR(r.max_relative_deviation, 0.5, 1e-3);
  EXPECT_EQ(r.worst_layer, 4u);
  EXPECT_FALSE(r.worst_is_bias);
}

TEST(Train, ZeroLearningRateLeavesStateUnchanged) {
  auto s = init_model(presets::m1(8, 8), 2);
  const auto before = s;
  Rng rng(1);
  std::vector<BitGrid> imgs;
  std::vector<double> t;
  for (int i = 0; i < 40; ++i) {
    imgs.push_back(gen_random_pixels(8, static_cast<std::uint64_t>(i), rng));
    t.push_back(i);
  }
  ImageData d(imgs, t);
  for (auto opt : {OptimizerConfig::sgd(0.0, 0.9), OptimizerConfig::adam(0.0)}) {
    TrainConfig cfg;
    cfg.optimizer = opt;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    const auto trace = train(s, d, cfg);
    EXPECT_EQ(s, before);
    ASSERT_EQ(trace.train_loss.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e) {
      EXPECT_DOUBLE_EQ(trace.val_loss[e], trace.val_loss[0]);
    }
  }
}

TEST(Train, DeterministicAndLearnsToCount) {
  Rng rng(9);
  std::vector<BitGrid> imgs;
  std::vector<double> t;
  for (int i = 0; i < 400; ++i) {
    const auto k = static_cast<std::uint64_t>(rng.uniform_int(20, 60));
    imgs.push_back(gen_random_pixels(10, k, rng));
    t.push_back(static_cast<double>(k));
  }
  ImageData d(imgs, t);
  TrainConfig cfg;
  cfg.optimizer = OptimizerConfig::adam(1e-2);
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.seed = 4;
  cfg.loss_threshold = 1.0;
  auto a = init_model(presets::m0(10), 1);
  auto b = a;
  const auto ta = train(a, d, cfg);
  const auto tb = train(b, d, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ta.train_loss, tb.train_loss);
  EXPECT_EQ(ta.val_loss, tb.val_loss);
  EXPECT_LT(ta.train_loss.back(), ta.train_loss.front());
  ASSERT_TRUE(ta.epochs_to_threshold.has_value());
  EXPECT_LT(ta.train_loss[*ta.epochs_to_threshold - 1], 1.0 + 1e-12);
}

TEST(Train, StopAtThresholdAndValidation) {
  std::vector<double> feats{0, 1, 2, 3, 4, 5, 6, 7}, targets{0, 2, 4, 6, 8, 10, 12, 14};
  MatrixData d(1, feats, targets);
  TrainConfig cfg;
  cfg.optimizer = OptimizerConfig::adam(5e-2);
  cfg.epochs = 500;
  cfg.batch_size = 2;
  cfg.validation_fraction = 0.0;
  cfg.loss_threshold = 0.5;
  cfg.stop_at_threshold = true;
  auto s = init_model(presets::mlp(1, {}), 3);
  const auto tr = train(s, d, cfg);
  ASSERT_TRUE(tr.epochs_to_threshold.has_value());
  EXPECT_EQ(tr.epochs_run(), *tr.epochs_to_threshold);
  EXPECT_TRUE(tr.val_loss.empty());
  cfg.validation_fraction = 1.0;
  EXPECT_THROW(train(s, d, cfg), ConfigError);
}

TEST(Train, DivergenceReportsEpoch) {
  std::vector<double> feats{1e3, -1e3, 2e3, 5e2}, targets{1, 2, 3, 4};
  MatrixData d(1, feats, targets);
  TrainConfig cfg;
  cfg.optimizer = OptimizerConfig::sgd(10.0);
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.validation_fraction = 0.0;
  auto s = init_model(presets::mlp(1, {}), 3);
  try {
    train(s, d, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1);
  } catch (const NumericError&) {
    SUCCEED();
  }
}

TEST(Train, SplitIsDeterministicPartition) {
  const auto a = split_indices(100, 0.2, 7);
  EXPECT_EQ(a.validation.size(), 20u);
  EXPECT_EQ(a.train.size(), 80u);
  std::vector<int> seen(100);
  for (auto i : a.train) ++seen[i];
  for (auto i : a.validation) ++seen[i];
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(split_indices(100, 0.2, 7).validation, a.validation);
}

TEST(WeightStats, ExactOnConstantWeights) {
  auto s = init_model(presets::m1(8, 4), 0);
  fill_weights(s, 1.0);
  const auto st = weight_stats(s);
  ASSERT_FALSE(st.empty());
  for (const auto& l : st) {
    if (l.tensor != "weight") continue;
    EXPECT_EQ(l.mean, 1.0);
    EXPECT_EQ(l.std, 0.0);
    EXPECT_EQ(l.min, 1.0);
    EXPECT_EQ(l.max, 1.0);
  }
}

TEST(WeightStats, MatchesDirectComputation) {
  const auto s = init_model(presets::m1(8, 4), 12);
  const auto& w = s.params[1].weight.values;
  double mean = 0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  bool found = false;
  for (const auto& l : weight_stats(s))
    if (l.tensor == "weight" && l.count == w.size()) {
      EXPECT_NEAR(l.mean, mean, 1e-15);
      EXPECT_NEAR(l.std, std::sqrt(var), 1e-15);
      EXPECT_EQ(l.min, *std::min_element(w.begin(), w.end()));
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(WeightStats, TheoreticalDestinations) {
  EXPECT_EQ(1.0 / std::sqrt(65536.0), 0.00390625);
  EXPECT_EQ(1.0 / std::sqrt(4096.0), 0.015625);
}

TEST(ModelIo, RoundTripIsExact) {
  for (const auto& spec : {presets::mcs(32), presets::m1(16, 8), toy_two_conv()}) {
    const auto s = init_model(spec, 21);
    const auto bytes = serialize_model(s);
    EXPECT_EQ(deserialize_model(bytes), s);
    EXPECT_EQ(serialize_model(deserialize_model(bytes)), bytes);
  }
}

TEST(ModelIo, HeaderAndFileRoundTrip) {
  const auto s = init_model(presets::m0(8), 3);
  const auto bytes = serialize_model(s);
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "CCMDL1");
  EXPECT_EQ(bytes[6] | (bytes[7] << 8), kModelFormatVersion);
  const auto path = (std::filesystem::temp_directory_path() / "cclab_model_io.ccm").string();
  save_model(s, path);
  EXPECT_EQ(load_model(path), s);
  std::filesystem::remove(path);
}

TEST(ModelIo, RejectsDamagedInput) {
  auto bytes = serialize_model(init_model(presets::m0(8), 3));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[6] = 99;
  EXPECT_THROW(deserialize_model(bad_version), FormatError);
  bytes.resize(bytes.size() - 5);
  EXPECT_THROW(deserialize_model(bytes), FormatError);
  EXPECT_THROW(load_model("/nonexistent/cclab.ccm"), Error);
}
