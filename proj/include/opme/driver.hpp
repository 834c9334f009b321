#pragma once

// The OPME episode loop (general and dynamical variants): roll out, log the
// samples per step, rebuild confidence sets, plan optimistically.

#include <functional>
#include <string>
#include <vector>

#include "opme/classes.hpp"
#include "opme/env.hpp"
#include "opme/npiv.hpp"
#include "opme/planner.hpp"

namespace opme {

struct RunConfig {
  int episodes = 100;  // K
  double delta = 0.1;
  TransitionMode mode = TransitionMode::General;
  OptimismMode optimism = OptimismMode::ExactEnumeration;
  double beta_scale = 1.0;
  std::uint64_t seed = 0;
  Caps caps;
  int evaluation_cadence = 1;
  /// Rebuild confidence sets every m episodes; m > 1 is a recorded deviation.
  int recompute_every = 1;
  bool strict_realizability = true;

  void validate() const;
};

struct EpisodeLog {
  int episode = 0;  // 1-based
  Policy policy;    // pi^k, the policy rolled out in this episode
  std::vector<int> reward_set_sizes;
  std::vector<std::vector<int>> transition_set_sizes;  // [h][axis]
  ModelChoice chosen;                                   // model behind pi^{k+1}; empty when relaxed
  double optimistic_value = 0.0;
  std::vector<double> chosen_reward_loss;               // per h
  std::vector<std::vector<double>> chosen_transition_loss;  // per h, per axis
  bool truth_in_sets = false;                           // harness bookkeeping only
  std::vector<std::string> flags;
  double instant_regret = 0.0;
  double cumulative_regret = 0.0;
  bool regret_filled = false;
  double wallclock_ms = 0.0;
};

struct RunResult {
  RunConfig config;
  ConfidenceLevels levels;
  ClassSizes sizes;
  std::vector<EpisodeLog> episodes;
  MixturePolicy mixture;
  std::vector<std::string> flags;
  std::vector<std::size_t> dataset_sizes;  // |D_h| at the end
  bool truth_always_in_sets = true;
  int first_miss_episode = 0;  // 0 when never missed
};

/// Learner-facing sampling oracle: returns one episode under the policy.
/// Only Trajectory::steps may be read by the learner.
using RolloutFn = std::function<Trajectory(const Policy&, Rng&)>;

RunResult run_opme(const StrategicModel& env, const LearnerKnowledge& knowledge, const HypothesisClasses& classes,
                   const RunConfig& cfg);

/// Same loop against an arbitrary sampling oracle. `env` is only used for the
/// startup realizability gate.
RunResult run_opme(const StrategicModel& env, const RolloutFn& sampler, const LearnerKnowledge& knowledge,
                   const HypothesisClasses& classes, const RunConfig& cfg);

/// (1/K) sum_k V^{pi^k}_1(s1) by exact policy evaluation.
double mixture_value(const MixturePolicy& policy, const AggregatedMDP& oracle);

}  // namespace opme
