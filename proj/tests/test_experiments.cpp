#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "cclab/error.hpp"
#include "cclab/experiments.hpp"
#include "cclab/plot.hpp"

using namespace cclab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "cclab_experiments_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).generic_string()] =
        std::string((std::istreambuf_iterator<char>(in)), {});
  }
  return files;
}

ExperimentConfig quick_e5() {
  auto c = load_experiment_config("e5", Profile::desk);
  c.params["n_train"] = 200;
  c.params["training"]["epochs"] = 5;
  c.params["test"]["step"] = 1.0;
  return c;
}

}  // namespace

TEST(ErrorRate, Arithmetic) {
  EXPECT_EQ(error_rate(100, 100.0), 0.0);
  EXPECT_NEAR(error_rate(100, 101.0), 0.01, 1e-15);
  EXPECT_NEAR(error_rate(4, 3.0), 0.25, 1e-15);
}

TEST(ErrorRate, RejectsInvalidInputs) {
  EXPECT_THROW(error_rate(0, 1.0), ConfigError);
  EXPECT_THROW(error_rate(5, std::nan("")), ConfigError);
  EXPECT_THROW(error_rate(5, INFINITY), ConfigError);
}

TEST(Evaluate, MeanAndPopulationStd) {
  const auto r = evaluate("set", {10, 20, 40}, {11, 20, 30}, true);
  EXPECT_TRUE(r.matched);
  EXPECT_EQ(r.samples.size(), 3u);
  const double e[3] = {0.1, 0.0, 0.25};
  const double mean = (e[0] + e[1] + e[2]) / 3;
  double var = 0;
  for (double x : e) var += (x - mean) * (x - mean);
  EXPECT_NEAR(r.mean_error, mean, 1e-15);
  EXPECT_NEAR(r.std_error, std::sqrt(var / 3), 1e-15);
  EXPECT_THROW(evaluate("bad", {1, 2}, {1}), ShapeError);
}

TEST(Evaluate, BinsCoverRangeAndAverage) {
  const auto r = evaluate("set", {1, 2, 9, 10, 50}, {1.5, 2, 9, 5, 50});
  const auto bins = bin_by_count(r, 1, 10, 3);
  ASSERT_EQ(bins.size(), 3u);
  EXPECT_EQ(bins[0].lo, 1.0);
  EXPECT_EQ(bins[2].hi, 10.0);
  EXPECT_EQ(bins[0].n, 2u);
  EXPECT_NEAR(bins[0].mean_error, 0.25, 1e-15);
  EXPECT_EQ(bins[1].n, 0u);
  EXPECT_EQ(bins[2].n, 2u);  // 9 and 10; 50 lies outside
  EXPECT_NEAR(bins[2].mean_error, 0.25, 1e-15);
  EXPECT_THROW(bin_by_count(r, 5, 5, 3), ConfigError);
}

TEST(Configs, EveryShippedConfigLoads) {
  for (const auto& id : experiment_ids())
    for (auto profile : {Profile::desk, Profile::full}) {
      const auto c = load_experiment_config(id, profile);
      EXPECT_EQ(c.id, id);
      EXPECT_EQ(c.profile, profile);
      ASSERT_TRUE(c.params.contains("thresholds")) << id;
      for (const auto& [name, t] : c.params["thresholds"].items()) {
        EXPECT_TRUE(t.at("value").is_number()) << id << " " << name;
        EXPECT_FALSE(t.at("source").get<std::string>().empty()) << id << " " << name;
      }
      if (c.params.contains("training")) {
        const auto& tr = c.params["training"];
        EXPECT_TRUE(tr.contains("optimizer")) << id;
      }
    }
}

TEST(Configs, JsonRoundTripAndErrors) {
  const auto c = load_experiment_config("e2", Profile::desk);
  const json j = c;
  const auto back = j.get<ExperimentConfig>();
  EXPECT_EQ(back.id, c.id);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.params, c.params);
  EXPECT_THROW(load_experiment_config("e9", Profile::desk), ConfigError);
  EXPECT_THROW(parse_profile("huge"), ConfigError);
  EXPECT_EQ(parse_profile("full"), Profile::full);
}

TEST(Reports, PassedRequiresEveryCheck) {
  json r = {{"checks", {{{"passed", true}}, {{"passed", true}}}}};
  EXPECT_TRUE(report_passed(r));
  r["checks"][1]["passed"] = false;
  EXPECT_FALSE(report_passed(r));
  EXPECT_FALSE(report_passed(json::object()));
}

TEST(RunExperiment, UnknownIdOrBadParamsFail) {
  ExperimentConfig c;
  c.id = "e42";
  EXPECT_THROW(run_experiment(c, scratch("unknown")), ConfigError);
  auto e5 = quick_e5();
  e5.params.erase("intervals");
  EXPECT_THROW(run_experiment(e5, scratch("missing")), ConfigError);
}

TEST(RunExperiment, ParabolaRunIsByteReproducible) {
  const auto a = scratch("e5a"), b = scratch("e5b");
  const auto ra = run_experiment(quick_e5(), a);
  const auto rb = run_experiment(quick_e5(), b);
  EXPECT_EQ(ra, rb);
  const auto fa = snapshot(a), fb = snapshot(b);
  EXPECT_EQ(fa, fb);
  EXPECT_TRUE(fa.count("report.json"));
  EXPECT_TRUE(fa.count("resolved-config.json"));
  EXPECT_EQ(ra.at("experiment"), "e5");
  EXPECT_EQ(ra.at("passed").get<bool>(), report_passed(ra));
  // Every artifact listed in the report exists on disk.
  for (const auto& name : ra.at("artifacts")) EXPECT_TRUE(fa.count(name.get<std::string>())) << name;
  // Plots named by the report can be regenerated from report.json alone.
  for (const auto& kind : ra.at("plots")) {
    const auto k = parse_plot_kind(kind.get<std::string>());
    EXPECT_EQ(render_plot(ra, k), fa.at(std::string(to_string(k)) + ".svg"));
  }
}

TEST(RunExperiment, ChecksHaveUniformShape) {
  const auto r = run_experiment(quick_e5(), scratch("e5shape"));
  ASSERT_FALSE(r.at("checks").empty());
  for (const auto& c : r.at("checks")) {
    for (const char* key : {"id", "description", "value", "op", "threshold", "passed"})
      EXPECT_TRUE(c.contains(key)) << key;
  }
}

TEST(RunExperiment, SeedOverrideChangesOutput) {
  auto c = quick_e5();
  const auto r1 = run_experiment(c, scratch("s1"));
  c.seed += 1;
  const auto r2 = run_experiment(c, scratch("s2"));
  EXPECT_NE(r1.at("checks"), r2.at("checks"));
}
