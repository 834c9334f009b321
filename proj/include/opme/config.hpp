#pragma once

// Scenario configuration files (YAML). The grammar is documented in
// README.md; every section and key is optional except environment.generator.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opme/classes.hpp"
#include "opme/driver.hpp"
#include "opme/env.hpp"
#include "opme/scenarios.hpp"

namespace opme {

struct EnvironmentSection {
  std::string generator;  // a built-in scenario name, or "inline"
  std::uint64_t seed = 0;
  std::optional<TransitionMode> mode;  // cross-checked against the built model
  // Optional size assertions, cross-checked against the built model.
  std::optional<int> horizon, num_states, num_actions, num_feedbacks, num_types;
  std::optional<double> reward_noise_std;
  std::optional<double> trans_noise_std;
  std::optional<int> grid_cells;  // Dynamical generators: planner cells per axis
  std::optional<Tensor> source_type_dist;  // (H, T), or (T) broadcast over steps
  std::optional<Tensor> target_type_dist;
  std::optional<StrategicModel> tables;  // generator == "inline"
};

struct ClassesSection {
  ClosureOptions closures;
  std::optional<HypothesisClasses> tables;  // replaces the generator's classes
};

struct RunSection {
  int episodes = 100;
  double delta = 0.1;
  double beta_scale = 1.0;
  OptimismMode optimism = OptimismMode::ExactEnumeration;
  std::vector<std::uint64_t> seeds{0};
  int evaluation_cadence = 1;  // summary.csv checkpoint spacing; 0 keeps only K
  int recompute_every = 1;
  bool strict_realizability = true;
  int workers = 1;
};

struct DiagnosticsSection {
  bool ill_posedness = false;
  bool transfer = false;
  bool naive_baseline = false;
  long long policy_budget = 4096;
};

struct OutputSection {
  std::string directory;  // empty: the config name
  bool csv = true;
  bool json = true;
};

struct ScenarioConfig {
  std::string name = "experiment";
  EnvironmentSection environment;
  ClassesSection classes;
  RunSection run;
  DiagnosticsSection diagnostics;
  OutputSection output;

  std::string source_text;  // the YAML as read, before overrides
  std::vector<std::pair<std::string, std::string>> overrides;
  std::filesystem::path base_dir;  // directory of the config file

  /// Checkpoint episodes for summary.csv, ascending, always ending at K.
  std::vector<int> checkpoints() const;
};

/// key=value overrides use dotted paths, e.g. "run.beta_scale=0.5". Values
/// are parsed as YAML scalars or flow sequences ("[1, 2]").
using Override = std::pair<std::string, std::string>;

/// Throws ParseError on malformed YAML and ValidationError listing every
/// violation otherwise.
ScenarioConfig parse_config(const std::string& text, const std::vector<Override>& overrides = {},
                            const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

/// Splits "key=v1,v2,v3" into the key and its values. Throws ValidationError.
std::pair<std::string, std::vector<std::string>> parse_sweep_param(const std::string& spec);

/// Resolved configuration (defaults filled) as JSON, for manifests.
std::string config_to_json(const ScenarioConfig& cfg, int indent = -1);

/// Environment and classes for the config, with closures applied and the
/// cross-field checks run. Throws ValidationError or ConfigError.
Scenario build_scenario(const ScenarioConfig& cfg);

RunConfig make_run_config(const ScenarioConfig& cfg, const Scenario& scenario, std::uint64_t seed);

}  // namespace opme
