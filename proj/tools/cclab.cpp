// Command-line front end: dataset generation, training, evaluation,
// experiment runs, plotting, component counting and gradient checks.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cclab/bitgrid.hpp"
#include "cclab/datasetio.hpp"
#include "cclab/error.hpp"
#include "cclab/experiments.hpp"
#include "cclab/gradcheck.hpp"
#include "cclab/model_io.hpp"
#include "cclab/plot.hpp"
#include "cclab/synth.hpp"
#include "cclab/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cclab;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string profile = "desk";
  std::string out;
};

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << j.dump(2) << "\n";
  if (!f) throw Error("cannot write " + path.string());
}

std::vector<double> targets_for(const Dataset& ds, const std::string& target) {
  std::vector<double> t;
  t.reserve(ds.images.size());
  if (target == "label") {
    for (auto l : ds.labels) t.push_back(l);
  } else if (target == "pixels") {
    for (const auto& g : ds.images) t.push_back(static_cast<double>(count_ones(g)));
  } else {
    throw ConfigError("unknown target '" + target + "' (expected label or pixels)");
  }
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Component-counting lab: synthetic binary images, small networks, experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Globals g;
  if (const char* env = std::getenv("CCLAB_OUT"); env && *env) g.out = env;
  else g.out = "runs";
  app.add_option("--seed", g.seed, "Seed (overrides the config seed)");
  app.add_option("--profile", g.profile, "Scale profile")
      ->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--out", g.out, "Output directory (default $CCLAB_OUT or ./runs)");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  std::string kind = "triangle", size_r = "2:30", count_r = "2:40", gen_name = "dataset.bgs";
  std::uint64_t n_images = 100;
  std::uint32_t image_size = 256;
  std::optional<std::uint64_t> budget;
  double tolerance = 0.02;
  bool overlap = false;
  gen->add_option("--kind", kind, "triangle | circle | random_pixels");
  gen->add_option("--size", size_r, "Shape size range lo:hi");
  gen->add_option("--count", count_r, "Objects (or foreground pixels) per image lo:hi");
  gen->add_option("--n", n_images, "Number of images");
  gen->add_option("--image-size", image_size, "Image side length");
  gen->add_option("--budget", budget, "Fixed foreground pixel budget per image");
  gen->add_option("--tolerance", tolerance, "Relative budget tolerance");
  gen->add_flag("--allow-overlap", overlap, "Let shapes touch and overlap");
  gen->add_option("--name", gen_name, "Dataset file name under --out");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  std::string data_path, preset = "m0", target = "label", opt = "adam", model_name = "model.ccm";
  double lr = 1e-3, momentum = 0.0, val = 0.2;
  std::size_t batch = 32;
  int epochs = 10;
  std::optional<double> loss_threshold;
  tr->add_option("--data", data_path, "Dataset (.bgs)")->required();
  tr->add_option("--model", preset, "Preset: m0 | m1 | mc | mcs");
  tr->add_option("--target", target, "label (component count) | pixels (count_ones)");
  tr->add_option("--optimizer", opt, "sgd | adam");
  tr->add_option("--lr", lr, "Learning rate");
  tr->add_option("--momentum", momentum, "SGD momentum");
  tr->add_option("--batch", batch, "Batch size");
  tr->add_option("--epochs", epochs, "Epochs");
  tr->add_option("--val", val, "Validation fraction");
  tr->add_option("--threshold", loss_threshold, "Loss threshold for epochs-to-threshold");
  tr->add_option("--name", model_name, "Model file name under --out");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
  std::string model_path, eval_data, eval_target = "label";
  ev->add_option("--model", model_path, "Model file (.ccm)")->required();
  ev->add_option("--data", eval_data, "Dataset (.bgs)")->required();
  ev->add_option("--target", eval_target, "label | pixels");

  // exp
  auto* ex = app.add_subcommand("exp", "Run experiments");
  ex->require_subcommand(1);
  auto* ex_run = ex->add_subcommand("run", "Run one experiment");
  std::string exp_id, exp_config;
  ex_run->add_option("id", exp_id, "e1 .. e8")->required();
  ex_run->add_option("--config", exp_config, "Config file (default: shipped <id>.<profile>.json)");
  auto* ex_all = ex->add_subcommand("run-all", "Run every experiment in sequence");
  auto* ex_list = ex->add_subcommand("list", "List experiment ids");

  // plot
  auto* pl = app.add_subcommand("plot", "Render an SVG from a report");
  std::string report_path, plot_kind = "scatter_true_vs_pred", plot_out;
  pl->add_option("--report", report_path, "report.json")->required();
  pl->add_option("--kind", plot_kind, "scatter_true_vs_pred | loss_curves | error_vs_count");
  pl->add_option("--output", plot_out, "SVG path (default: <out>/<kind>.svg)");

  // cc
  auto* cc = app.add_subcommand("cc", "Connected-component tools");
  cc->require_subcommand(1);
  auto* cc_count = cc->add_subcommand("count", "Count 4-connected components of one image");
  std::string cc_in, algorithm = "union_find";
  std::size_t cc_index = 0;
  cc_count->add_option("--in", cc_in, "Dataset (.bgs)")->required();
  cc_count->add_option("--index", cc_index, "Image index");
  cc_count->add_option("--algorithm", algorithm, "union_find | bfs")
      ->check(CLI::IsMember({"union_find", "bfs"}));

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of backprop");
  std::string gc_model = "mcs";
  std::uint32_t gc_size = 10;
  double gc_tol = 1e-4;
  gc->add_option("--model", gc_model, "Preset: m0 | m1 | mc | mcs");
  gc->add_option("--image-size", gc_size, "Input side length");
  gc->add_option("--tolerance", gc_tol, "Maximum relative deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const fs::path out = g.out;
    const Profile profile = parse_profile(g.profile);

    if (*gen) {
      GenConfig c;
      c.image_size = image_size;
      c.shape.kind = parse_shape_kind(kind);
      c.shape.size_range = parse_range(size_r);
      c.shape.count_range = parse_range(count_r);
      c.n_images = n_images;
      c.seed = g.seed.value_or(0);
      if (budget) c.pixel_budget = PixelBudget{*budget, tolerance};
      c.allow_overlap = overlap;
      const auto ds = gen_dataset(c);
      const auto bytes = write_dataset(ds, (out / gen_name).string());
      write_json(out / "resolved-config.json", {{"command", "gen"}, {"config", c}});
      std::printf("wrote %s (%llu bytes, %zu images)\n", (out / gen_name).c_str(),
                  static_cast<unsigned long long>(bytes), ds.images.size());
    } else if (*tr) {
      const auto ds = read_dataset(data_path);
      const auto size = ds.images.empty() ? 0U : ds.images.front().width();
      TrainConfig tc;
      tc.optimizer = opt == "sgd" ? OptimizerConfig::sgd(lr, momentum)
                     : opt == "adam" ? OptimizerConfig::adam(lr)
                                     : throw ConfigError("unknown optimizer '" + opt + "'");
      tc.batch_size = batch;
      tc.epochs = epochs;
      tc.seed = g.seed.value_or(0);
      tc.validation_fraction = val;
      tc.loss_threshold = loss_threshold;
      auto state = init_model(presets::by_name(preset, size), child_seed(tc.seed, 3));
      ImageData data(ds.images, targets_for(ds, target));
      const auto trace = train(state, data, tc, [](int e, const ModelState&) {
        std::fprintf(stderr, "epoch %d\n", e);
        return true;
      });
      save_model(state, (out / model_name).string());
      std::ofstream csv(out / "trace.csv", std::ios::binary);
      csv << "epoch,train_loss,val_loss\n";
      char buf[96];
      for (int e = 0; e < trace.epochs_run(); ++e) {
        const auto i = static_cast<std::size_t>(e);
        std::snprintf(buf, sizeof buf, "%d,%.17g,", e + 1, trace.train_loss[i]);
        csv << buf;
        if (i < trace.val_loss.size()) {
          std::snprintf(buf, sizeof buf, "%.17g", trace.val_loss[i]);
          csv << buf;
        }
        csv << "\n";
      }
      write_json(out / "resolved-config.json",
                 {{"command", "train"}, {"data", data_path}, {"model", preset},
                  {"target", target}, {"training", tc}});
      std::printf("final train loss %.6g", trace.train_loss.back());
      if (trace.epochs_to_threshold) std::printf(", threshold reached at epoch %d", *trace.epochs_to_threshold);
      std::printf("\n");
    } else if (*ev) {
      const auto state = load_model(model_path);
      const auto ds = read_dataset(eval_data);
      const auto truth = targets_for(ds, eval_target);
      ImageData data(ds.images, truth);
      const auto rep = evaluate("eval", truth, predict_all(state, data));
      fs::create_directories(out);
      std::ofstream csv(out / "samples.csv", std::ios::binary);
      csv << "sample_id,true,pred,abs_rel_err\n";
      char buf[128];
      for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const auto& s = rep.samples[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, s.truth, s.pred,
                      error_rate(s.truth, s.pred));
        csv << buf;
      }
      write_json(out / "resolved-config.json", {{"command", "eval"}, {"model", model_path},
                                                 {"data", eval_data}, {"target", eval_target}});
      // Same per-set layout as experiment reports, so `plot` accepts it.
      nlohmann::json set = {{"name", "eval"},
                            {"matched", false},
                            {"n", rep.samples.size()},
                            {"mean_error", rep.mean_error},
                            {"std_error", rep.std_error},
                            {"samples", nlohmann::json::array()},
                            {"bins", nlohmann::json::array()}};
      double lo = 0, hi = 0;
      for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const auto& s = rep.samples[i];
        set["samples"].push_back({s.truth, s.pred});
        lo = i == 0 ? s.truth : std::min(lo, s.truth);
        hi = i == 0 ? s.truth : std::max(hi, s.truth);
      }
      if (lo < hi)
        for (const auto& b : bin_by_count(rep, lo, hi, 10))
          set["bins"].push_back({{"lo", b.lo}, {"hi", b.hi}, {"n", b.n}, {"mean_error", b.mean_error}});
      write_json(out / "report.json", {{"experiment", "eval"},
                                       {"mean_error", rep.mean_error},
                                       {"std_error", rep.std_error},
                                       {"sets", nlohmann::json::array({set})}});
      std::printf("mean error rate %.6g over %zu images\n", rep.mean_error, rep.samples.size());
    } else if (*ex) {
      if (*ex_list) {
        for (const auto& id : experiment_ids()) std::printf("%s\n", id.c_str());
        return 0;
      }
      std::vector<std::string> ids;
      if (*ex_run) ids.push_back(exp_id);
      if (*ex_all) ids = experiment_ids();
      for (const auto& id : ids) {
        auto cfg = !exp_config.empty() && *ex_run ? load_experiment_config(exp_config)
                                                   : load_experiment_config(id, profile);
        if (g.seed) cfg.seed = *g.seed;
        const fs::path dir = *ex_all ? out / id : out;
        const auto report = run_experiment(cfg, dir);
        for (const auto& c : report["checks"])
          std::printf("  %-4s %s\n", c["passed"].get<bool>() ? "ok" : "FAIL",
                      c["id"].get<std::string>().c_str());
        std::printf("%s: %s -> %s\n", id.c_str(), report["passed"].get<bool>() ? "PASS" : "FAIL",
                    dir.c_str());
      }
      // A failed check is a result, not an error: exit 0 unless something threw.
    } else if (*pl) {
      std::ifstream f(report_path, std::ios::binary);
      if (!f) throw Error("cannot open " + report_path);
      const auto report = json::parse(f);
      const auto k = parse_plot_kind(plot_kind);
      const fs::path path = plot_out.empty() ? out / (std::string(to_string(k)) + ".svg") : fs::path(plot_out);
      emit_plot(report, k, path);
      std::printf("wrote %s\n", path.c_str());
    } else if (*cc) {
      const auto ds = read_dataset(cc_in);
      if (cc_index >= ds.images.size())
        throw ConfigError("--index " + std::to_string(cc_index) + " out of range (dataset has " +
                          std::to_string(ds.images.size()) + " images)");
      const auto alg = algorithm == "bfs" ? LabelAlgorithm::bfs : LabelAlgorithm::union_find;
      std::printf("%u\n", label_components(ds.images[cc_index], alg).num_components);
    } else if (*gc) {
      const auto spec = presets::by_name(gc_model, gc_size);
      const auto r = grad_check(spec, g.seed.value_or(0));
      std::printf("max relative deviation %.3g over %zu parameters (layer %zu)\n",
                  r.max_relative_deviation, r.parameters_checked, r.worst_layer);
      if (r.max_relative_deviation > gc_tol) {
        std::fprintf(stderr, "error: gradient check exceeded tolerance %g\n", gc_tol);
        return 2;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
