// Small fully connected problems: extrapolating a parabola (E5), parity
// under full vs partial batches (E6), decision-boundary instability on
// random labels (E7) and accuracy vs sample size (E8).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cclab/error.hpp"
#include "cclab/rng.hpp"
#include "exp_common.hpp"

namespace cclab::expt {
namespace {

std::string interval_name(double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%g,%g]", a, b);
  return buf;
}

int classify(double pred) { return pred >= 0.5 ? 1 : 0; }

double accuracy(const ModelState& state, const DataView& data) {
  const auto pred = predict_all(state, data);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    ok += classify(pred[i]) == classify(data.target(i)) ? 1 : 0;
  return pred.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(pred.size());
}

// Median with censored runs (infinity) sorted last; an even count averages
// the two middle values, so a censored middle makes the median censored.
double censored_median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

}  // namespace

json run_e5(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const auto hidden = hidden_of(p.at("hidden"));
  const auto n_train = p.at("n_train").get<std::size_t>();
  const double lo = p.at("test").at("lo").get<double>();
  const double hi = p.at("test").at("hi").get<double>();
  const double step = p.at("test").at("step").get<double>();
  if (!(step > 0) || !(lo < hi)) throw ConfigError("e5 test lattice needs lo < hi and step > 0");
  const double min_ratio = threshold(p, "min_outside_ratio");
  const auto points = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;

  json sets = json::array(), traces = json::array(), runs = json::array(), checks = json::array();
  std::size_t idx = 0;
  for (const auto& iv : p.at("intervals")) {
    const double a = iv.at(0).get<double>(), b = iv.at(1).get<double>();
    const std::string name = interval_name(a, b);

    Rng rng(child_seed(cfg.seed, 10 + idx));
    std::vector<double> xs(n_train), ys(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
      xs[i] = rng.uniform(a, b);
      ys[i] = xs[i] * xs[i];
    }
    MatrixData data(1, xs, ys);
    auto state = init_model(presets::mlp(1, hidden), child_seed(cfg.seed, 3));
    const auto trace = train(state, data, train_config(p.at("training"), child_seed(cfg.seed, 4)));

    Engine engine(state.spec);
    double in_sum = 0, out_sum = 0, at_zero = 0;
    std::size_t in_n = 0, out_n = 0;
    json samples = json::array();
    std::string csv = "sample_id,x,true,pred\n";
    for (std::size_t k = 0; k < points; ++k) {
      const double x = lo + step * static_cast<double>(k);
      const double in[1] = {x};
      const double pred = engine.predict(state, in);
      const double err = (pred - x * x) * (pred - x * x);
      if (x >= a && x <= b) {
        in_sum += err;
        ++in_n;
      } else {
        out_sum += err;
        ++out_n;
      }
      if (std::abs(x) < 0.5 * step) at_zero = pred;
      samples.push_back({x * x, pred});
      csv += std::to_string(k) + "," + fmt17(x) + "," + fmt17(x * x) + "," + fmt17(pred) + "\n";
    }
    const double in_mse = in_n ? in_sum / static_cast<double>(in_n) : 0.0;
    const double out_mse = out_n ? out_sum / static_cast<double>(out_n) : 0.0;
    const double ratio = in_mse > 0 ? out_mse / in_mse : std::numeric_limits<double>::infinity();

    out.text("fit_" + std::to_string(idx) + ".csv", csv);
    out.text("trace_" + std::to_string(idx) + ".csv", trace_csv(trace));
    sets.push_back({{"name", "train " + name}, {"samples", samples}});
    traces.push_back(trace_json("train " + name, trace));
    runs.push_back({{"interval", {a, b}},
                    {"inside_mse", in_mse},
                    {"outside_mse", out_mse},
                    {"outside_inside_ratio", finite_or_null(ratio)},
                    {"prediction_at_zero", at_zero},
                    {"final_train_loss", trace.train_loss.back()}});
    checks.push_back(make_check("outside_ratio." + std::to_string(idx),
                                "outside / inside MSE for training interval " + name, ratio, ">=",
                                min_ratio));
    ++idx;
  }
  return {{"runs", runs},
          {"sets", sets},
          {"traces", traces},
          {"checks", checks},
          {"plots", {"scatter_true_vs_pred", "loss_curves"}}};
}

json run_e6(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const int n = p.at("n").get<int>();
  if (n < 1 || n > 12) throw ConfigError("e6: n must be in [1, 12]");
  const auto hidden = hidden_of(p.at("hidden"));
  const auto batch_sizes = p.at("batch_sizes").get<std::vector<std::size_t>>();
  if (batch_sizes.size() != 2) throw ConfigError("e6 compares exactly two batch sizes");
  const int seeds = p.at("seeds").get<int>();
  const int max_epochs = p.at("max_epochs").get<int>();
  const int window = p.at("oscillation_window").get<int>();

  const std::size_t rows = std::size_t{1} << n;
  std::vector<double> x(rows * static_cast<std::size_t>(n)), y(rows);
  for (std::size_t v = 0; v < rows; ++v) {
    int parity = 0;
    for (int b = 0; b < n; ++b) {
      const int bit = static_cast<int>((v >> b) & 1U);
      x[v * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)] = bit;
      parity ^= bit;
    }
    y[v] = parity;
  }
  const MatrixData data(static_cast<std::size_t>(n), x, y);

  json per_batch = json::array(), traces = json::array();
  std::vector<double> medians;
  std::vector<int> successes;
  for (const auto bs : batch_sizes) {
    json epochs_json = json::array();
    std::vector<double> epochs;
    std::vector<std::vector<double>> acc(static_cast<std::size_t>(seeds));
    double osc_sum = 0;
    int ok = 0;
    for (int s = 0; s < seeds; ++s) {
      auto state = init_model(presets::mlp(static_cast<std::uint32_t>(n), hidden),
                              child_seed(cfg.seed, static_cast<std::uint64_t>(s)));
      auto tc = train_config(p.at("training"), child_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(s)));
      tc.batch_size = bs;
      tc.epochs = max_epochs;
      tc.validation_fraction = 0.0;

      auto& curve = acc[static_cast<std::size_t>(s)];
      int hit = 0;
      const auto trace = train(state, data, tc, [&](int epoch, const ModelState& m) {
        curve.push_back(accuracy(m, data));
        if (!hit && curve.back() == 1.0) hit = epoch;
        return true;
      });
      if (s == 0) traces.push_back(trace_json("batch " + std::to_string(bs) + " seed 0", trace));

      epochs.push_back(hit ? hit : std::numeric_limits<double>::infinity());
      epochs_json.push_back(hit ? json(hit) : json());
      ok += hit ? 1 : 0;

      const auto w = std::min<std::size_t>(static_cast<std::size_t>(window), curve.size());
      double m = 0, v = 0;
      for (auto it = curve.end() - static_cast<std::ptrdiff_t>(w); it != curve.end(); ++it) m += *it;
      m /= static_cast<double>(w);
      for (auto it = curve.end() - static_cast<std::ptrdiff_t>(w); it != curve.end(); ++it)
        v += (*it - m) * (*it - m);
      osc_sum += std::sqrt(v / static_cast<double>(w));
    }

    std::string csv = "epoch";
    for (int s = 0; s < seeds; ++s) csv += ",seed_" + std::to_string(s);
    csv += "\n";
    for (int e = 0; e < max_epochs; ++e) {
      csv += std::to_string(e + 1);
      for (const auto& c : acc) csv += "," + fmt17(c[static_cast<std::size_t>(e)]);
      csv += "\n";
    }
    out.text("accuracy_b" + std::to_string(bs) + ".csv", csv);

    const double med = censored_median(epochs);
    medians.push_back(med);
    successes.push_back(ok);
    per_batch.push_back({{"batch_size", bs},
                         {"success_epochs", epochs_json},
                         {"successes", ok},
                         {"median_success_epoch", finite_or_null(med)},
                         {"mean_final_window_accuracy_std", osc_sum / seeds}});
  }

  json checks = json::array();
  checks.push_back(make_check("seeds", "number of seeds per batch size", seeds, ">=",
                              threshold(p, "min_seeds")));
  checks.push_back(make_check("successes", "full-batch successes vs partial-batch successes",
                              successes[0], ">", successes[1]));
  checks.push_back(make_check("median_epoch",
                              "full-batch median success epoch vs partial-batch median "
                              "(censored runs rank last)",
                              medians[0], "<", medians[1]));
  return {{"batches", per_batch}, {"traces", traces}, {"checks", checks}, {"plots", {"loss_curves"}}};
}

json run_e7(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const auto hidden = hidden_of(p.at("hidden"));
  const auto n = p.at("n_per_subset").get<std::size_t>();
  const int pairs = p.at("pairs").get<int>();
  const auto lattice = p.at("lattice").get<std::size_t>();
  const auto& g = p.at("gaussian");
  const double sigma = g.at("sigma").get<double>();
  const double cx[2] = {g.at("centers").at(0).at(0).get<double>(), g.at("centers").at(1).at(0).get<double>()};
  const double cy[2] = {g.at("centers").at(0).at(1).get<double>(), g.at("centers").at(1).at(1).get<double>()};

  std::vector<double> grid(lattice * lattice * 2);
  for (std::size_t i = 0; i < lattice; ++i)
    for (std::size_t j = 0; j < lattice; ++j) {
      grid[2 * (i * lattice + j)] = (static_cast<double>(j) + 0.5) / static_cast<double>(lattice);
      grid[2 * (i * lattice + j) + 1] = (static_cast<double>(i) + 0.5) / static_cast<double>(lattice);
    }
  const MatrixData grid_data(2, grid, std::vector<double>(lattice * lattice, 0.0));

  // Trains one classifier per subset from a shared init and returns the
  // share of lattice points where the two disagree.
  auto run_pair = [&](bool gaussian, int k, json& info) {
    const auto init = child_seed(cfg.seed, 7000 + static_cast<std::uint64_t>(k));
    std::vector<int> labels[2];
    json acc = json::array();
    for (int sub = 0; sub < 2; ++sub) {
      Rng rng(child_seed(cfg.seed, (gaussian ? 20000 : 10000) + 2 * static_cast<std::uint64_t>(k) +
                                       static_cast<std::uint64_t>(sub)));
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < n; ++i) {
        if (gaussian) {
          const int c = static_cast<int>(i % 2);
          xs.push_back(cx[c] + sigma * rng.normal());
          xs.push_back(cy[c] + sigma * rng.normal());
          ys.push_back(c);
        } else {
          xs.push_back(rng.uniform01());
          xs.push_back(rng.uniform01());
          ys.push_back(rng.uniform01() < 0.5 ? 0.0 : 1.0);
        }
      }
      const MatrixData data(2, xs, ys);
      auto state = init_model(presets::mlp(2, hidden), init);
      auto tc = train_config(p.at("training"), child_seed(init, 1 + static_cast<std::uint64_t>(sub)));
      tc.validation_fraction = 0.0;
      train(state, data, tc);
      acc.push_back(accuracy(state, data));
      for (double v : predict_all(state, grid_data)) labels[sub].push_back(classify(v));
    }
    std::size_t diff = 0;
    for (std::size_t i = 0; i < labels[0].size(); ++i) diff += labels[0][i] != labels[1][i] ? 1 : 0;
    const double d = static_cast<double>(diff) / static_cast<double>(labels[0].size());
    info.push_back({{"pair", k}, {"disagreement", d}, {"train_accuracy", acc}});
    return d;
  };

  json random_runs = json::array(), gaussian_runs = json::array();
  double random_mean = 0, gaussian_mean = 0;
  for (int k = 0; k < pairs; ++k) {
    random_mean += run_pair(false, k, random_runs);
    gaussian_mean += run_pair(true, k, gaussian_runs);
  }
  random_mean /= pairs;
  gaussian_mean /= pairs;

  std::string csv = "pair,random_disagreement,gaussian_disagreement\n";
  for (int k = 0; k < pairs; ++k)
    csv += std::to_string(k) + "," + fmt17(random_runs[k]["disagreement"].get<double>()) + "," +
           fmt17(gaussian_runs[k]["disagreement"].get<double>()) + "\n";
  out.text("disagreement.csv", csv);

  json checks = json::array();
  checks.push_back(make_check("random_labels", "mean disagreement, random-label subsets",
                              random_mean, ">=", threshold(p, "min_random_disagreement")));
  checks.push_back(make_check("gaussian_control", "mean disagreement, separable Gaussian subsets",
                              gaussian_mean, "<=", threshold(p, "max_gaussian_disagreement")));
  return {{"random", {{"pairs", random_runs}, {"mean_disagreement", random_mean}}},
          {"gaussian", {{"pairs", gaussian_runs}, {"mean_disagreement", gaussian_mean}}},
          {"checks", checks}};
}

json run_e8(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const auto hidden = hidden_of(p.at("hidden"));
  const auto sizes = p.at("sizes").get<std::vector<std::size_t>>();
  if (sizes.empty()) throw ConfigError("e8 needs at least one sample size");
  const auto steps = p.at("step_budget").get<std::size_t>();
  const auto& ring = p.at("annulus");
  const double ox = ring.at("center").at(0).get<double>(), oy = ring.at("center").at(1).get<double>();
  const double r_in = ring.at("r_inner").get<double>(), r_out = ring.at("r_outer").get<double>();
  const auto n_test = p.at("test_points").get<std::size_t>();

  auto label = [&](double x, double y) {
    const double r = std::hypot(x - ox, y - oy);
    return r >= r_in && r <= r_out ? 1.0 : 0.0;
  };
  auto sample = [&](std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < count; ++i) {
      const double x = rng.uniform01(), y = rng.uniform01();
      xs.push_back(x);
      xs.push_back(y);
      ys.push_back(label(x, y));
    }
    return MatrixData(2, xs, ys);
  };
  const auto test = sample(n_test, child_seed(cfg.seed, 1));

  json runs = json::array();
  std::vector<double> acc;
  std::string csv = "sample_size,epochs,test_accuracy\n";
  for (const auto size : sizes) {
    const auto data = sample(size, child_seed(cfg.seed, 1000 + size));
    auto tc = train_config(p.at("training"), child_seed(cfg.seed, 4));
    tc.validation_fraction = 0.0;
    // Same number of optimizer steps for every sample size.
    const auto per_epoch = (size + tc.batch_size - 1) / tc.batch_size;
    tc.epochs = static_cast<int>(std::max<std::size_t>(1, steps / per_epoch));
    auto state = init_model(presets::mlp(2, hidden), child_seed(cfg.seed, 3));
    const auto trace = train(state, data, tc);
    acc.push_back(accuracy(state, test));
    runs.push_back({{"sample_size", size},
                    {"epochs", tc.epochs},
                    {"final_train_loss", trace.train_loss.back()},
                    {"train_accuracy", accuracy(state, data)},
                    {"test_accuracy", acc.back()}});
    csv += std::to_string(size) + "," + std::to_string(tc.epochs) + "," + fmt17(acc.back()) + "\n";
  }
  out.text("accuracy.csv", csv);

  double worst_drop = 0;
  for (std::size_t i = 1; i < acc.size(); ++i) worst_drop = std::max(worst_drop, acc[i - 1] - acc[i]);
  json checks = json::array();
  checks.push_back(make_check("gain", "accuracy(largest) - accuracy(smallest)",
                              acc.back() - acc.front(), ">=", threshold(p, "min_accuracy_gain")));
  checks.push_back(make_check("monotone", "largest accuracy drop between consecutive sizes",
                              worst_drop, "<=", threshold(p, "monotone_tolerance")));
  return {{"runs", runs}, {"checks", checks}};
}

}  // namespace cclab::expt
