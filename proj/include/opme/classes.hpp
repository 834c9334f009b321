#pragma once

// Finite candidate classes for rewards and transitions, plus the
// discriminator families the minimax losses scan over.

#include <optional>
#include <string>
#include <vector>

#include "opme/env.hpp"

namespace opme {

struct Caps {
  int max_class_size = 8;                   // per-step |R_h|, |P_h| (and |P_{h,i}|)
  long long max_joint_models = 1'000'000;   // prod_h |R_h| |P_h|
  long long max_discriminators = 200'000;   // per-step |F_h| after closure
};

struct HypothesisClasses {
  int horizon = 1;
  double bound = 1.0;  // B

  std::vector<std::vector<Tensor>> reward;      // [h][j], (S, A, E)
  std::vector<std::vector<Tensor>> transition;  // [h][j], (S, A, E, S); General mode
  std::vector<std::vector<std::vector<CoordinateMap>>> dynamics;  // [h][i][j]; Dynamical mode
  std::vector<std::vector<Tensor>> disc_f;      // [h][j], (S, A)
  std::vector<std::vector<Tensor>> disc_g;      // [h][j], (S); h in [0, H], disc_g[H] = {0}

  // Harness metadata: where the ground truth sits, -1 when absent. Never read
  // by the learner when choosing policies.
  std::vector<int> truth_reward;
  std::vector<int> truth_transition;
  std::vector<std::vector<int>> truth_dynamics;  // [h][i]

  // Set by closures.
  bool bound_violation = false;
  bool approximate_realizability = false;
  std::vector<std::string> notes;

  TransitionMode mode() const { return dynamics.empty() ? TransitionMode::General : TransitionMode::Dynamical; }
  int state_dim() const { return dynamics.empty() ? 0 : static_cast<int>(dynamics.front().size()); }

  /// Cardinalities summed over steps (and coordinates).
  long long total_reward() const;
  long long total_transition() const;
  long long total_f() const;
  long long total_g() const;

  /// Throws ValidationError on shape, range, or missing-zero violations.
  /// Closure-added members beyond B are tolerated and recorded in
  /// bound_violation instead.
  void validate(const StrategicModel& model) const;
};

/// Appends `table` unless an exactly equal table is already present.
/// Returns the index of the (possibly pre-existing) member.
int insert_unique(std::vector<Tensor>& family, Tensor table);

/// Source projection f[nu](s, a) = E_{t ~ source, e ~ F}[nu(s, a, e)].
Tensor source_projection(const StrategicModel& model, int h, const Tensor& nu);

/// nu(s, a, e) = (P g)(s, a, e) - (P* g)(s, a, e).
Tensor transition_residual(const Tensor& candidate, const Tensor& truth, const Tensor& g);

/// Ground-truth tables per step.
Tensor true_reward_step(const StrategicModel& model, int h);
Tensor true_transition_step(const StrategicModel& model, int h);

/// Dynamical residual G_{h,i} - G*_{h,i} evaluated at cell centers, (S, A, E).
Tensor dynamics_residual(const StrategicModel& model, int h, int axis, const CoordinateMap& candidate);

/// Adds the zero function and the source projection of every residual
/// nu in (R_h - R*_h) and (P_h - P*_h) G_{h+1} to F_h.
HypothesisClasses realizability_closure_f(const StrategicModel& model, HypothesisClasses classes,
                                          const Caps& caps = {});

/// Adds the optimal value tables of every joint candidate model, aggregated
/// under the target population, to G_h. No-op in Dynamical mode.
HypothesisClasses value_closure_g(HypothesisClasses classes, const LearnerKnowledge& knowledge,
                                  const Caps& caps = {});

/// One V_h table per reachable suffix model, deduplicated; index H holds the
/// zero table. Throws CapacityError past caps.max_joint_models.
std::vector<std::vector<Tensor>> all_model_values(const HypothesisClasses& classes,
                                                  const LearnerKnowledge& knowledge, const Caps& caps);

struct ClauseResult {
  bool pass = true;
  std::string counterexample;  // first failure, human readable
  int step = -1;
  int index = -1;
  Tensor witness;  // projection or value table that was missing
};

struct RealizabilityReport {
  ClauseResult truth_membership;
  ClauseResult projection_membership;
  ClauseResult value_membership;
  bool value_clause_checked = true;  // false when the cap prevented enumeration

  bool all_pass() const {
    return truth_membership.pass && projection_membership.pass && value_membership.pass;
  }
};

RealizabilityReport check_realizability(const StrategicModel& model, const HypothesisClasses& classes,
                                        const Caps& caps = {});

/// Convenience: classes holding only the ground truth (plus zero
/// discriminators), for tests and degenerate scenarios.
HypothesisClasses singleton_truth_classes(const StrategicModel& model);

}  // namespace opme
