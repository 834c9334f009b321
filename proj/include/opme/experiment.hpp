#pragma once

// Batch runner behind the command line tool: seeds, artifacts on disk, and
// the cross-seed summary.
//
// Layout of an experiment directory:
//   manifest.json          experiment-level manifest
//   summary.csv            checkpoint,num_seeds,mean_cum_regret,std_cum_regret,coverage
//   seed_<s>/manifest.json
//   seed_<s>/episodes.csv
//   seed_<s>/diagnostics.json

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opme/config.hpp"
#include "opme/diagnostics.hpp"
#include "opme/driver.hpp"

namespace opme {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitRuntime = 3 };

const char* version_string();

/// Output directory for a config: output.directory (or the config name),
/// resolved against $OPME_OUTPUT_ROOT when set and "results" otherwise.
/// Absolute directories are used as given.
std::filesystem::path resolve_output_dir(const ScenarioConfig& cfg);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  int exit_code = kExitOk;
  std::string error;
  RunResult run;
  RegretSeries regret;
  double mixture_value = 0.0;
  std::optional<NaiveBaseline> naive;
};

struct ExperimentOutcome {
  int exit_code = kExitOk;
  std::filesystem::path directory;
  std::vector<SeedOutcome> seeds;
  std::vector<std::string> errors;
};

/// Runs one seed end to end without touching the disk.
SeedOutcome run_seed(const ScenarioConfig& cfg, const Scenario& scenario, std::uint64_t seed);

/// Every seed of the config (concurrently up to run.workers), artifacts
/// written under `directory` (default: resolve_output_dir). Never throws for
/// module errors; they land in the manifests and the exit code.
ExperimentOutcome run_experiment(const ScenarioConfig& cfg,
                                 const std::optional<std::filesystem::path>& directory = std::nullopt);

/// Runs the ground-truth oracles (tau_h, C^f_h for every step, the optimal
/// value, the realizability report) and writes them under
/// <directory>/diagnose.
ExperimentOutcome diagnose(const ScenarioConfig& cfg,
                           const std::optional<std::filesystem::path>& directory = std::nullopt);

struct ValidationOutcome {
  int exit_code = kExitOk;
  std::vector<std::string> messages;
};

/// Parses, builds, and checks realizability without running anything.
ValidationOutcome validate_config(const std::filesystem::path& path);

/// One experiment per value of `key`, each in <root>/sweep/<key>=<value>.
ExperimentOutcome sweep(const std::filesystem::path& config_path, const std::string& key,
                        const std::vector<std::string>& values,
                        const std::optional<std::filesystem::path>& directory = std::nullopt);

/// CSV renderers; exposed for tests.
std::string episodes_csv(const SeedOutcome& outcome);
std::string summary_csv(const ScenarioConfig& cfg, const std::vector<SeedOutcome>& seeds);

std::string ratio_to_json(const RatioResult& r, int indent = -1);

}  // namespace opme
