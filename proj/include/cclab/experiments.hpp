#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cclab {

enum class Profile { desk, full };

std::string_view to_string(Profile p);
Profile parse_profile(std::string_view text);

/// |pred - truth| / truth. The prediction is used raw (not rounded).
/// Throws ConfigError when truth < 1 or pred is not finite.
double error_rate(double truth, double pred);

struct Sample {
  double truth = 0;
  double pred = 0;
};

// Predictions of one model on one test set.
struct EvalReport {
  std::string name;
  bool matched = false;  // drawn from the training distribution
  std::vector<Sample> samples;
  double mean_error = 0;  // arithmetic mean of error_rate over samples
  double std_error = 0;   // population standard deviation of the same
};

EvalReport evaluate(std::string name, const std::vector<double>& truth,
                    const std::vector<double>& pred, bool matched = false);

struct CountBin {
  double lo = 0;  // [lo, hi) on the true count; the last bin is closed
  double hi = 0;
  std::size_t n = 0;
  double mean_error = 0;
};

// Equal-width bins of the mean error over [lo, hi] of the true count.
std::vector<CountBin> bin_by_count(const EvalReport& r, double lo, double hi, std::size_t bins);

/// Declarative description of one experiment run. `params` holds the
/// experiment-specific body of the config file (datasets, model preset,
/// training setup and pass/fail thresholds).
struct ExperimentConfig {
  std::string id;  // "e1" .. "e8"
  Profile profile = Profile::desk;
  std::uint64_t seed = 0;
  nlohmann::json params;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

const std::vector<std::string>& experiment_ids();

// Directory holding the shipped <id>.<profile>.json files. CCLAB_CONFIGS
// overrides the location baked in at build time.
std::filesystem::path default_config_dir();
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig load_experiment_config(std::string_view id, Profile profile);

/// Runs one experiment, writing every artifact under `out`:
///   resolved-config.json, report.json, CSV sidecars, SVG plots and, where
///   the experiment trains on images, the datasets and model files.
/// Returns the report. Deterministic for a given config.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out);

// True when every check in the report passed.
bool report_passed(const nlohmann::json& report);

}  // namespace cclab
