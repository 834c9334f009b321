#pragma once

// Aggregated target-population MDPs, exact finite-horizon planning, and
// optimistic selection over confidence sets.

#include <vector>

#include "opme/classes.hpp"
#include "opme/env.hpp"
#include "opme/npiv.hpp"

namespace opme {

struct PlanResult {
  Tensor value;  // (H + 1, S); row H is zero
  Tensor q;      // (H, S, A)
  Policy policy;  // greedy, lowest action on ties
  double initial_value = 0.0;
};

/// One candidate per step. General mode: transition[h] = {j}. Dynamical
/// mode: transition[h][i] indexes the class of axis i.
struct ModelChoice {
  std::vector<int> reward;
  std::vector<std::vector<int>> transition;

  friend bool operator==(const ModelChoice&, const ModelChoice&) = default;
  friend auto operator<=>(const ModelChoice&, const ModelChoice&) = default;
};

/// Aggregates explicit per-step tables: rewards (S, A, E), kernels (S, A, E, S).
AggregatedMDP aggregate(std::span<const Tensor> rewards, std::span<const Tensor> kernels,
                        const LearnerKnowledge& knowledge);

/// Aggregates a joint candidate drawn from the classes.
AggregatedMDP aggregate(const HypothesisClasses& classes, const ModelChoice& choice,
                        const LearnerKnowledge& knowledge);

/// Aggregated transition of one step's candidate (a single kernel index in
/// General mode, one map index per axis in Dynamical mode).
Tensor aggregate_transition_choice(const HypothesisClasses& classes, int h, std::span<const int> choice,
                                   const LearnerKnowledge& knowledge);

/// Q_h(s, a) = R̄_h(s, a) + sum_s' P̄_h(s' | s, a) V_{h+1}(s'); V_h = max_a Q_h.
/// Writes V_h into `value_out` and, when given, Q_h into `q_out`.
void bellman_backup(const Tensor& rbar, const Tensor& pbar, std::span<const double> value_next,
                    std::span<double> value_out, std::span<double> q_out = {});

PlanResult value_iteration(const AggregatedMDP& mdp);

/// Exact V^pi_h tables, (H + 1, S).
Tensor evaluate_policy_values(const AggregatedMDP& mdp, const Policy& policy);
double evaluate_policy(const AggregatedMDP& mdp, const Policy& policy);

enum class OptimismMode { ExactEnumeration, PointwiseOptimistic };

const char* to_string(OptimismMode mode);
OptimismMode optimism_mode_from_string(const std::string& name);

struct Selection {
  ModelChoice model;  // pointwise mode: empty, see pointwise_* instead
  Policy policy;
  double value = 0.0;
  bool relaxed = false;
  bool capacity_fallback = false;
  // PointwiseOptimistic argmaxes per (h, s, a): reward index and flattened
  // transition combination index.
  Tensor pointwise_reward;
  Tensor pointwise_transition;
};

/// ExactEnumeration throws CapacityError when the product set exceeds
/// caps.max_joint_models.
Selection optimistic_select(const ConfidenceSets& sets, const HypothesisClasses& classes,
                            const LearnerKnowledge& knowledge, OptimismMode mode, const Caps& caps = {});

}  // namespace opme
