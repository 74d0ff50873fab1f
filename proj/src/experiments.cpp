#include "cclab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "binio.hpp"
#include "cclab/datasetio.hpp"
#include "cclab/error.hpp"
#include "cclab/model_io.hpp"
#include "cclab/plot.hpp"
#include "exp_common.hpp"

#ifndef CCLAB_CONFIG_DIR
#define CCLAB_CONFIG_DIR "configs"
#endif

namespace cclab {

std::string_view to_string(Profile p) { return p == Profile::desk ? "desk" : "full"; }

Profile parse_profile(std::string_view text) {
  if (text == "desk") return Profile::desk;
  if (text == "full") return Profile::full;
  throw ConfigError("unknown profile '" + std::string(text) + "' (expected desk or full)");
}

double error_rate(double truth, double pred) {
  if (!(truth >= 1.0)) throw ConfigError("error_rate: true count must be >= 1");
  if (!std::isfinite(pred)) throw ConfigError("error_rate: prediction is not finite");
  return std::abs(pred - truth) / truth;
}

EvalReport evaluate(std::string name, const std::vector<double>& truth,
                    const std::vector<double>& pred, bool matched) {
  if (truth.size() != pred.size()) throw ShapeError("evaluate: truth/prediction size mismatch");
  EvalReport r;
  r.name = std::move(name);
  r.matched = matched;
  r.samples.reserve(truth.size());
  double sum = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.samples.push_back({truth[i], pred[i]});
    sum += error_rate(truth[i], pred[i]);
  }
  if (truth.empty()) return r;
  r.mean_error = sum / static_cast<double>(truth.size());
  double var = 0;
  for (const auto& s : r.samples) {
    const double d = error_rate(s.truth, s.pred) - r.mean_error;
    var += d * d;
  }
  r.std_error = std::sqrt(var / static_cast<double>(truth.size()));
  return r;
}

std::vector<CountBin> bin_by_count(const EvalReport& r, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(lo < hi)) throw ConfigError("bin_by_count: need bins >= 1 and lo < hi");
  std::vector<CountBin> out(bins);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + w * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? hi : lo + w * static_cast<double>(b + 1);
  }
  for (const auto& s : r.samples) {
    if (s.truth < lo || s.truth > hi) continue;
    auto b = static_cast<std::size_t>((s.truth - lo) / w);
    b = std::min(b, bins - 1);
    out[b].mean_error += error_rate(s.truth, s.pred);
    ++out[b].n;
  }
  for (auto& b : out)
    if (b.n) b.mean_error /= static_cast<double>(b.n);
  return out;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"id", c.id}, {"profile", std::string(to_string(c.profile))}, {"seed", c.seed},
       {"params", c.params}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.id = j.at("id").get<std::string>();
  c.profile = parse_profile(j.at("profile").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.params = j.at("params");
}

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"e1", "e2", "e3", "e4", "e5", "e6", "e7", "e8"};
  return ids;
}

std::filesystem::path default_config_dir() {
  if (const char* env = std::getenv("CCLAB_CONFIGS"); env && *env) return env;
  return CCLAB_CONFIG_DIR;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end()).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig load_experiment_config(std::string_view id, Profile profile) {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end())
    throw ConfigError("unknown experiment '" + std::string(id) + "'");
  return load_experiment_config(default_config_dir() /
                                (std::string(id) + "." + std::string(to_string(profile)) + ".json"));
}

bool report_passed(const nlohmann::json& report) {
  if (!report.contains("checks")) return false;
  return std::all_of(report["checks"].begin(), report["checks"].end(),
                     [](const auto& c) { return c.at("passed").template get<bool>(); });
}

nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out) {
  using expt::json;
  expt::Sink sink(out);
  sink.text("resolved-config.json", json(config).dump(2) + "\n");

  json body;
  try {
    if (config.id == "e1") body = expt::run_e1(config, sink);
    else if (config.id == "e2") body = expt::run_e2(config, sink);
    else if (config.id == "e3") body = expt::run_e3(config, sink);
    else if (config.id == "e4") body = expt::run_e4(config, sink);
    else if (config.id == "e5") body = expt::run_e5(config, sink);
    else if (config.id == "e6") body = expt::run_e6(config, sink);
    else if (config.id == "e7") body = expt::run_e7(config, sink);
    else if (config.id == "e8") body = expt::run_e8(config, sink);
    else throw ConfigError("unknown experiment '" + config.id + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("experiment " + config.id + " config: " + e.what());
  }

  json report = {{"experiment", config.id},
                 {"profile", std::string(to_string(config.profile))},
                 {"seed", config.seed},
                 {"config", config.params}};
  for (auto& [k, v] : body.items()) report[k] = v;

  for (const auto& kind : report.value("plots", json::array())) {
    const auto k = parse_plot_kind(kind.get<std::string>());
    sink.text(std::string(to_string(k)) + ".svg", render_plot(report, k));
  }
  report["passed"] = report_passed(report);
  auto files = sink.listing();
  files.push_back("report.json");
  std::sort(files.begin(), files.end());
  report["artifacts"] = files;
  sink.text("report.json", report.dump(2) + "\n");
  return report;
}

namespace expt {

Sink::Sink(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void Sink::text(const std::string& name, std::string_view content) {
  detail::write_text((dir_ / name).string(), content);
  files_.push_back(name);
}

void Sink::dataset(const std::string& name, const Dataset& ds) {
  write_dataset(ds, (dir_ / name).string());
  files_.push_back(name);
  files_.push_back(name + ".json");
}

void Sink::model(const std::string& name, const ModelState& state) {
  save_model(state, (dir_ / name).string());
  files_.push_back(name);
}

json Sink::listing() const {
  auto f = files_;
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string samples_csv(const EvalReport& r) {
  std::string s = "sample_id,true,pred,abs_rel_err\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& x = r.samples[i];
    s += std::to_string(i) + "," + fmt17(x.truth) + "," + fmt17(x.pred) + "," +
         fmt17(error_rate(x.truth, x.pred)) + "\n";
  }
  return s;
}

std::string trace_csv(const TrainTrace& t) {
  std::string s = "epoch,train_loss,val_loss\n";
  for (int e = 0; e < t.epochs_run(); ++e) {
    const auto i = static_cast<std::size_t>(e);
    s += std::to_string(e + 1) + "," + fmt17(t.train_loss[i]) + "," +
         (i < t.val_loss.size() ? fmt17(t.val_loss[i]) : std::string()) + "\n";
  }
  return s;
}

json eval_json(const EvalReport& r, double bin_lo, double bin_hi, std::size_t bins) {
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back({s.truth, s.pred});
  json bj = json::array();
  for (const auto& b : bin_by_count(r, bin_lo, bin_hi, bins))
    bj.push_back({{"lo", b.lo}, {"hi", b.hi}, {"n", b.n}, {"mean_error", b.mean_error}});
  return {{"name", r.name},
          {"matched", r.matched},
          {"n", r.samples.size()},
          {"mean_error", r.mean_error},
          {"std_error", r.std_error},
          {"bins", bj},
          {"samples", samples}};
}

json trace_json(const std::string& name, const TrainTrace& t) {
  json j = {{"name", name},
            {"epochs_run", t.epochs_run()},
            {"train_loss", t.train_loss},
            {"val_loss", t.val_loss}};
  j["loss_threshold"] = t.loss_threshold ? json(*t.loss_threshold) : json();
  j["epochs_to_threshold"] = t.epochs_to_threshold ? json(*t.epochs_to_threshold) : json();
  return j;
}

json make_check(const std::string& id, const std::string& description, double value,
                const std::string& op, double threshold) {
  bool ok = false;
  if (op == "<=") ok = value <= threshold;
  else if (op == ">=") ok = value >= threshold;
  else if (op == "<") ok = value < threshold;
  else if (op == ">") ok = value > threshold;
  else if (op == "==") ok = value == threshold;
  else throw ConfigError("unknown comparison '" + op + "'");
  json j = {{"id", id}, {"description", description}, {"op", op}, {"passed", ok}};
  // Non-finite values (e.g. a censored epoch count) are stored as null.
  j["value"] = std::isfinite(value) ? json(value) : json();
  j["threshold"] = std::isfinite(threshold) ? json(threshold) : json();
  return j;
}

double threshold(const json& params, const char* key) {
  const auto& t = params.at("thresholds").at(key);
  return t.is_object() ? t.at("value").get<double>() : t.get<double>();
}

Range range_of(const json& j) {
  if (j.is_string()) return parse_range(j.get<std::string>());
  return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>()};
}

TrainConfig train_config(const json& j, std::uint64_t seed) {
  TrainConfig c;
  c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  if (j.contains("loss_threshold") && !j["loss_threshold"].is_null())
    c.loss_threshold = j["loss_threshold"].get<double>();
  c.stop_at_threshold = j.value("stop_at_threshold", false);
  c.seed = seed;
  c.validate();
  return c;
}

std::vector<std::uint32_t> hidden_of(const json& j) { return j.get<std::vector<std::uint32_t>>(); }

std::vector<double> as_targets(const std::vector<std::uint32_t>& labels) {
  return {labels.begin(), labels.end()};
}

std::vector<double> pixel_counts(const std::vector<BitGrid>& images) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& g : images) out.push_back(static_cast<double>(count_ones(g)));
  return out;
}

}  // namespace expt
}  // namespace cclab
