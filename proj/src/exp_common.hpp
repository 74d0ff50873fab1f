#pragma once

// Shared plumbing for the experiment runners: artifact sink, CSV/JSON
// encoders and config accessors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cclab/experiments.hpp"
#include "cclab/model.hpp"
#include "cclab/synth.hpp"
#include "cclab/train.hpp"

namespace cclab::expt {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Collects the files a run writes so the report can list them.
class Sink {
 public:
  explicit Sink(fs::path dir);

  void text(const std::string& name, std::string_view content);
  void dataset(const std::string& name, const Dataset& ds);
  void model(const std::string& name, const ModelState& state);

  const fs::path& dir() const { return dir_; }
  json listing() const;

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

// "%.17g": round-trip exact for doubles.
std::string fmt17(double v);

std::string samples_csv(const EvalReport& r);
std::string trace_csv(const TrainTrace& t);

json eval_json(const EvalReport& r, double bin_lo, double bin_hi, std::size_t bins);
json trace_json(const std::string& name, const TrainTrace& t);

// One pass/fail row. op is one of "<=", ">=", "<", ">", "==".
json make_check(const std::string& id, const std::string& description, double value,
                const std::string& op, double threshold);

double threshold(const json& params, const char* key);
Range range_of(const json& j);
TrainConfig train_config(const json& j, std::uint64_t seed);
std::vector<std::uint32_t> hidden_of(const json& j);

std::vector<double> as_targets(const std::vector<std::uint32_t>& labels);
std::vector<double> pixel_counts(const std::vector<BitGrid>& images);

json run_e1(const ExperimentConfig& cfg, Sink& out);
json run_e2(const ExperimentConfig& cfg, Sink& out);
json run_e3(const ExperimentConfig& cfg, Sink& out);
json run_e4(const ExperimentConfig& cfg, Sink& out);
json run_e5(const ExperimentConfig& cfg, Sink& out);
json run_e6(const ExperimentConfig& cfg, Sink& out);
json run_e7(const ExperimentConfig& cfg, Sink& out);
json run_e8(const ExperimentConfig& cfg, Sink& out);

}  // namespace cclab::expt
