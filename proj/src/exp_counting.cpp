// Counting protocols on binary images: pixel counting (E1), convergence of
// the perceptron vs the one-hidden-layer net (E2), and component counting
// with free-size (E3) and fixed-budget (E4) shape sets.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "cclab/error.hpp"
#include "cclab/rng.hpp"
#include "exp_common.hpp"

namespace cclab::expt {
namespace {

struct Fit {
  ModelState state;
  TrainTrace trace;
};

Fit fit_images(const std::string& preset, const std::vector<BitGrid>& images,
               std::vector<double> targets, std::uint32_t image_size, const TrainConfig& tc,
               std::uint64_t init_seed) {
  ImageData data(images, std::move(targets));
  Fit f{init_model(presets::by_name(preset, image_size), init_seed), {}};
  f.trace = train(f.state, data, tc);
  return f;
}

std::vector<double> predict_images(const ModelState& state, const std::vector<BitGrid>& images) {
  ImageData data(images, std::vector<double>(images.size(), 0.0));
  return predict_all(state, data);
}

GenConfig pixel_config(std::uint32_t size, Range counts, std::uint64_t n, std::uint64_t seed) {
  GenConfig g;
  g.image_size = size;
  g.shape.kind = ShapeKind::random_pixels;
  g.shape.size_range = {0, 0};
  g.shape.count_range = counts;
  g.n_images = n;
  g.seed = seed;
  return g;
}

// Mean error over the samples whose `key` lies inside / outside [lo, hi].
std::pair<double, double> split_error(const EvalReport& r, const std::vector<double>& key,
                                      Range in) {
  double si = 0, so = 0;
  std::size_t ni = 0, no = 0;
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const double e = error_rate(r.samples[i].truth, r.samples[i].pred);
    if (key[i] >= static_cast<double>(in.lo) && key[i] <= static_cast<double>(in.hi)) {
      si += e;
      ++ni;
    } else {
      so += e;
      ++no;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {ni ? si / static_cast<double>(ni) : nan, no ? so / static_cast<double>(no) : nan};
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(); }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  // A constant column carries no linear information about the other.
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

json stats_json(const ModelState& state) {
  json out = json::array();
  for (const auto& s : weight_stats(state))
    out.push_back({{"layer", s.layer},
                   {"tensor", s.tensor},
                   {"count", s.count},
                   {"mean", s.mean},
                   {"std", s.std},
                   {"min", s.min},
                   {"max", s.max}});
  return out;
}

}  // namespace

json run_e1(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const auto size = p.at("image_size").get<std::uint32_t>();
  const auto preset = p.at("model").get<std::string>();
  const Range train_counts = range_of(p.at("train").at("count_range"));
  const Range test_counts = range_of(p.at("test").at("count_range"));
  const auto repeats = p.at("repeats").get<int>();
  const auto bins = p.value("bins", std::size_t{10});
  const double max_error = threshold(p, "max_mean_error");
  const bool has_min = p.at("thresholds").contains("min_mean_error");

  json sets = json::array(), traces = json::array(), checks = json::array();
  std::vector<double> means;
  for (int r = 0; r < repeats; ++r) {
    const auto seed = child_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const std::string tag = "r" + std::to_string(r);

    const auto train_ds = gen_dataset(pixel_config(
        size, train_counts, p.at("train").at("n_images").get<std::uint64_t>(), child_seed(seed, 1)));
    const auto test_ds = gen_dataset(pixel_config(
        size, test_counts, p.at("test").at("n_images").get<std::uint64_t>(), child_seed(seed, 2)));

    // The regression target is the foreground pixel count, not the stored
    // component label.
    const auto tc = train_config(p.at("training"), child_seed(seed, 4));
    auto fit = fit_images(preset, train_ds.images, pixel_counts(train_ds.images), size, tc,
                          child_seed(seed, 3));

    const auto truth = pixel_counts(test_ds.images);
    const auto rep = evaluate("repeat " + std::to_string(r), truth,
                              predict_images(fit.state, test_ds.images), true);
    const auto [in_err, out_err] = split_error(rep, truth, train_counts);
    means.push_back(rep.mean_error);

    json sj = eval_json(rep, static_cast<double>(test_counts.lo),
                        static_cast<double>(test_counts.hi), bins);
    sj["in_range_mean_error"] = nullable(in_err);
    sj["out_of_range_mean_error"] = nullable(out_err);
    sets.push_back(sj);
    traces.push_back(trace_json("repeat " + std::to_string(r), fit.trace));

    checks.push_back(make_check("mean_error." + tag, "mean error rate on the test set",
                                rep.mean_error, "<=", max_error));
    checks.push_back(make_check("out_of_range_error." + tag,
                                "mean error rate on counts outside the training range", out_err,
                                "<=", max_error));
    if (has_min)
      checks.push_back(make_check("mean_error_floor." + tag, "mean error rate lower bound",
                                  rep.mean_error, ">=", threshold(p, "min_mean_error")));

    out.text("samples_" + tag + ".csv", samples_csv(rep));
    out.text("trace_" + tag + ".csv", trace_csv(fit.trace));
    out.model("model_" + tag + ".ccm", fit.state);
    if (p.value("save_datasets", true)) {
      out.dataset("train_" + tag + ".bgs", train_ds);
      out.dataset("test_" + tag + ".bgs", test_ds);
    }
  }

  double mean = 0, var = 0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  for (double m : means) var += (m - mean) * (m - mean);

  json report = {
      {"sets", sets},
      {"traces", traces},
      {"checks", checks},
      {"aggregate",
       {{"mean_error", mean},
        {"std_error_across_repeats", std::sqrt(var / static_cast<double>(means.size()))}}},
      {"training_range", {train_counts.lo, train_counts.hi}},
      {"plots", {"scatter_true_vs_pred", "error_vs_count", "loss_curves"}}};
  if (p.contains("reference_error")) report["reference_error"] = p["reference_error"];
  return report;
}

json run_e2(const ExperimentConfig& cfg, Sink& out) {
  const json& p = cfg.params;
  const auto size = p.at("image_size").get<std::uint32_t>();
  const auto models = p.at("models").get<std::vector<std::string>>();
  if (models.size() != 2) throw ConfigError("e2 compares exactly two models");
  const Range counts = range_of(p.at("train").at("count_range"));
  const double min_ratio = threshold(p, "min_epoch_ratio");

  const auto ds = gen_dataset(pixel_config(
      size, counts, p.at("train").at("n_images").get<std::uint64_t>(), child_seed(cfg.seed, 1)));
  const auto targets = pixel_counts(ds.images);

  json traces = json::array(), per_model = json::object();
  std::vector<std::optional<int>> ett;
  std::vector<int> ran;
  for (const auto& name : models) {
    auto tc = train_config(p.at("training"), child_seed(cfg.seed, 4));
    tc.epochs = p.at("epochs").at(name).get<int>();
    auto fit = fit_images(name, ds.images, targets, size, tc, child_seed(cfg.seed, 3));
    traces.push_back(trace_json(name, fit.trace));
    out.text("trace_" + name + ".csv", trace_csv(fit.trace));
    out.model("model_" + name + ".ccm", fit.state);

    const auto& e = fit.trace.epochs_to_threshold;
    per_model[name] = {{"epochs_run", fit.trace.epochs_run()},
                       {"censored", !e.has_value()},
                       {"final_train_loss", fit.trace.train_loss.back()},
                       {"weight_stats", stats_json(fit.state)}};
    per_model[name]["epochs_to_threshold"] = e ? json(*e) : json();
    ett.push_back(e);
    ran.push_back(fit.trace.epochs_run());
  }
  if (p.value("save_datasets", true)) out.dataset("train.bgs", ds);

  // A censored first model still bounds the ratio from below: its true
  // epoch count exceeds the budget it ran.
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool lower_bound = false;
  if (ett[1]) {
    ratio = (ett[0] ? *ett[0] : ran[0] + 1.0) / *ett[1];
    lower_bound = !ett[0];
  }

  const double n = static_cast<double>(size) * size;
  const double z0 = 1.0, z1 = 1.0 / std::sqrt(n);
  json checks = json::array();
  checks.push_back(make_check("epoch_ratio",
                              "epochs_to_threshold(" + models[0] + ") / epochs_to_threshold(" +
                                  models[1] + ")",
                              ratio, ">=", min_ratio));
  checks.push_back(make_check("destination_z0", "uniform-weight solution of the perceptron", z0,
                              "==", 1.0));
  checks.push_back(make_check("destination_z1_squared_times_n",
                              "z1^2 * N for the hidden-layer uniform solution", z1 * z1 * n, "==",
                              1.0));

  json report = {{"traces", traces},
                 {"models", per_model},
                 {"ratio_is_lower_bound", lower_bound},
                 {"destinations", {{"N", n}, {"z0", z0}, {"z1", z1}}},
                 {"checks", checks},
                 {"plots", {"loss_curves"}}};
  report["epoch_ratio"] = nullable(ratio);
  return report;
}

namespace {

struct TestSpec {
  std::string name;
  GenConfig gen;
  bool matched = false;
};

GenConfig shape_config(const json& j, std::uint32_t size, std::uint64_t seed,
                       const GenConfig* base = nullptr) {
  GenConfig g;
  if (base) g = *base;
  g.image_size = size;
  g.seed = seed;
  if (j.contains("kind")) g.shape.kind = parse_shape_kind(j["kind"].get<std::string>());
  if (j.contains("size_range")) g.shape.size_range = range_of(j["size_range"]);
  if (j.contains("count_range")) g.shape.count_range = range_of(j["count_range"]);
  if (j.contains("n_images")) g.n_images = j["n_images"].get<std::uint64_t>();
  if (j.contains("pixel_budget")) {
    const auto& b = j["pixel_budget"];
    g.pixel_budget = PixelBudget{b.at("target").get<std::uint64_t>(), b.at("tolerance").get<double>()};
  }
  g.validate();
  return g;
}

// Foreground-pixel checks on one fixed-budget set.
void budget_checks(const std::string& set, const Dataset& ds, const PixelBudget& budget,
                   double max_corr, json& checks, json& summary) {
  const auto pixels = pixel_counts(ds.images);
  const auto labels = as_targets(ds.labels);
  const double lo = static_cast<double>(budget.target) * (1.0 - budget.tolerance);
  const double hi = static_cast<double>(budget.target) * (1.0 + budget.tolerance);
  std::size_t outside = 0;
  for (double v : pixels) outside += (v < lo || v > hi) ? 1 : 0;
  const double rho = pearson(labels, pixels);
  const double var = variance(pixels);
  const double slack = budget.tolerance * static_cast<double>(budget.target);

  summary[set] = {{"images", ds.images.size()},
                  {"outside_budget", outside},
                  {"pixel_min", *std::min_element(pixels.begin(), pixels.end())},
                  {"pixel_max", *std::max_element(pixels.begin(), pixels.end())},
                  {"pixel_variance", var},
                  {"label_pixel_correlation", rho}};
  checks.push_back(make_check("budget." + set, "images outside the pixel budget",
                              static_cast<double>(outside), "==", 0.0));
  checks.push_back(make_check("correlation." + set, "|corr(label, count_ones)|", std::abs(rho),
                              "<=", max_corr));
  checks.push_back(make_check("pixel_variance." + set, "variance of count_ones", var, "<=",
                              slack * slack));
}

void random_pixel_block(const ExperimentConfig& cfg, const json& rp, Sink& out, json& checks,
                        json& report) {
  const auto size = cfg.params.at("image_size").get<std::uint32_t>();
  const auto preset = rp.at("model").get<std::string>();
  const Range train_counts = range_of(rp.at("train_count_range"));
  const Range test_counts = range_of(rp.at("test_count_range"));
  const auto seed = child_seed(cfg.seed, 0x5e7);

  const auto train_ds = gen_dataset(
      pixel_config(size, train_counts, rp.at("n_train").get<std::uint64_t>(), child_seed(seed, 1)));
  const auto test_ds = gen_dataset(
      pixel_config(size, test_counts, rp.at("n_test").get<std::uint64_t>(), child_seed(seed, 2)));
  const auto tc = train_config(rp.at("training"), child_seed(seed, 4));
  auto fit = fit_images(preset, train_ds.images, as_targets(train_ds.labels), size, tc,
                        child_seed(seed, 3));

  const auto truth = as_targets(test_ds.labels);
  const auto rep = evaluate("random pixels", truth, predict_images(fit.state, test_ds.images));
  const auto [in_err, out_err] = split_error(rep, pixel_counts(test_ds.images), train_counts);

  double lo = truth.front(), hi = truth.front();
  for (double t : truth) lo = std::min(lo, t), hi = std::max(hi, t);
  json sj = eval_json(rep, lo, std::max(hi, lo + 1), cfg.params.value("bins", std::size_t{10}));
  report["random_pixels"] = {{"model", preset},
                             {"train_pixel_range", {train_counts.lo, train_counts.hi}},
                             {"test_pixel_range", {test_counts.lo, test_counts.hi}},
                             {"in_range_mean_error", nullable(in_err)},
                             {"out_of_range_mean_error", nullable(out_err)},
                             {"set", sj},
                             {"trace", trace_json("random pixels", fit.trace)}};
  checks.push_back(make_check("random_pixels.in_range_better",
                              "in-range error below out-of-range error (pixel-count ranges)",
                              in_err, "<", out_err));
  out.text("samples_random_pixels.csv", samples_csv(rep));
  out.text("trace_random_pixels.csv", trace_csv(fit.trace));
  out.model("model_random_pixels.ccm", fit.state);
  if (cfg.params.value("save_datasets", true)) {
    out.dataset("train_random_pixels.bgs", train_ds);
    out.dataset("test_random_pixels.bgs", test_ds);
  }
}

json run_matrix(const ExperimentConfig& cfg, Sink& out, bool budgeted) {
  const json& p = cfg.params;
  const auto size = p.at("image_size").get<std::uint32_t>();
  const auto models = p.at("models").get<std::vector<std::string>>();
  if (models.empty()) throw ConfigError("no models listed");
  const double min_ratio = threshold(p, "min_mismatch_ratio");
  const auto bins = p.value("bins", std::size_t{10});
  const bool save = p.value("save_datasets", true);

  const GenConfig train_gen = shape_config(p.at("train"), size, child_seed(cfg.seed, 1));
  if (budgeted && !train_gen.pixel_budget) throw ConfigError("fixed-budget run needs pixel_budget");
  const auto train_ds = gen_dataset(train_gen);

  const json& tj = p.at("test");
  GenConfig test_base = train_gen;
  if (tj.contains("count_range")) test_base.shape.count_range = range_of(tj["count_range"]);
  test_base.n_images = tj.at("n_images").get<std::uint64_t>();
  std::vector<TestSpec> tests;
  std::vector<Dataset> test_sets;
  std::size_t matched = 0, n_matched = 0;
  for (const auto& s : tj.at("sets")) {
    const auto i = tests.size();
    TestSpec t{s.at("name").get<std::string>(),
               shape_config(s, size, child_seed(cfg.seed, 100 + i), &test_base),
               s.value("matched", false)};
    if (t.matched) matched = i, ++n_matched;
    tests.push_back(t);
    test_sets.push_back(gen_dataset(t.gen));
  }
  if (n_matched != 1) throw ConfigError("exactly one test set must be marked matched");

  json checks = json::array();
  json report = json::object();
  if (budgeted) {
    json summary = json::object();
    const double max_corr = threshold(p, "max_abs_correlation");
    budget_checks("train", train_ds, *train_gen.pixel_budget, max_corr, checks, summary);
    for (std::size_t i = 0; i < tests.size(); ++i)
      budget_checks(tests[i].name, test_sets[i], *tests[i].gen.pixel_budget, max_corr, checks,
                    summary);
    report["pixel_budget"] = summary;
  }

  if (save) {
    out.dataset("train.bgs", train_ds);
    for (std::size_t i = 0; i < tests.size(); ++i)
      out.dataset("test_" + tests[i].name + ".bgs", test_sets[i]);
  }

  const auto train_labels = as_targets(train_ds.labels);
  const double label_lo = *std::min_element(train_labels.begin(), train_labels.end());
  const double label_hi = *std::max_element(train_labels.begin(), train_labels.end());
  double bin_lo = label_lo, bin_hi = label_hi;
  for (const auto& ds : test_sets)
    for (auto l : ds.labels)
      bin_lo = std::min(bin_lo, double(l)), bin_hi = std::max(bin_hi, double(l));
  if (bin_hi <= bin_lo) bin_hi = bin_lo + 1;

  json per_model = json::array(), traces = json::array();
  for (const auto& name : models) {
    const auto tc = train_config(p.at("training"), child_seed(cfg.seed, 4));
    auto fit = fit_images(name, train_ds.images, train_labels, size, tc, child_seed(cfg.seed, 3));
    out.model("model_" + name + ".ccm", fit.state);
    out.text("trace_" + name + ".csv", trace_csv(fit.trace));
    traces.push_back(trace_json(name, fit.trace));

    std::vector<EvalReport> reps;
    json sets = json::array();
    for (std::size_t i = 0; i < tests.size(); ++i) {
      reps.push_back(evaluate(tests[i].name, as_targets(test_sets[i].labels),
                              predict_images(fit.state, test_sets[i].images), tests[i].matched));
      out.text("samples_" + name + "_" + tests[i].name + ".csv", samples_csv(reps.back()));
      json sj = eval_json(reps.back(), bin_lo, bin_hi, bins);
      sj["config"] = tests[i].gen;
      sets.push_back(sj);
    }

    const double m = reps[matched].mean_error;
    double others = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reps.size(); ++i)
      if (i != matched) others = std::min(others, reps[i].mean_error);
    checks.push_back(make_check(name + ".matched_minimum",
                                "matched set error vs the smallest mismatched error", m, "<=",
                                others));
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (i == matched) continue;
      checks.push_back(make_check(name + ".ratio." + tests[i].name,
                                  tests[i].name + " error / matched error",
                                  m > 0 ? reps[i].mean_error / m
                                        : std::numeric_limits<double>::infinity(),
                                  ">=", min_ratio));
    }
    per_model.push_back({{"model", name}, {"sets", sets}});
  }

  if (p.contains("random_pixels")) random_pixel_block(cfg, p["random_pixels"], out, checks, report);

  report["models"] = per_model;
  report["sets"] = per_model[0]["sets"];  // the primary model drives the plots
  report["traces"] = traces;
  report["matched_set"] = tests[matched].name;
  report["training_range"] = {label_lo, label_hi};
  report["checks"] = checks;
  report["plots"] = {"scatter_true_vs_pred", "error_vs_count", "loss_curves"};
  return report;
}

}  // namespace

json run_e3(const ExperimentConfig& cfg, Sink& out) { return run_matrix(cfg, out, false); }
json run_e4(const ExperimentConfig& cfg, Sink& out) { return run_matrix(cfg, out, true); }

}  // namespace cclab::expt
