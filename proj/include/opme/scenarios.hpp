#pragma once

// Built-in scenario generators. Every generator is a pure function of its
// seed: the same (name, seed) pair always yields identical tables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opme/classes.hpp"
#include "opme/env.hpp"

namespace opme {

struct ClosureOptions {
  bool closure_f = true;
  bool closure_g = true;
  Caps caps;
};

/// Generator knobs; unset fields keep each generator's own default.
struct GeneratorOptions {
  std::optional<int> grid_cells;  // Dynamical generators: cells per axis
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  StrategicModel env;
  HypothesisClasses classes;
};

/// Names accepted by make_scenario.
std::vector<std::string> scenario_names();

/// Raw generator output: no closures, no validation.
Scenario generate_scenario(const std::string& name, std::uint64_t seed, const GeneratorOptions& options = {});

/// Builds a named scenario. Throws ConfigError for an unknown name.
Scenario make_scenario(const std::string& name, std::uint64_t seed, const ClosureOptions& closures = {},
                       const GeneratorOptions& options = {});

/// Applies the value closure (General mode) and then the discriminator
/// closure, as requested.
HypothesisClasses close_classes(const StrategicModel& env, HypothesisClasses classes, const ClosureOptions& closures);

/// Zero-filled model with every table allocated for General mode.
StrategicModel blank_model(int horizon, int num_states, int num_actions, int num_feedbacks, int num_types,
                           int num_agent_actions);

}  // namespace opme
