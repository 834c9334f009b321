#pragma once

// Online strategic interaction environment: a principal acts, a privately
// typed agent best-responds and emits feedback, the principal observes a
// confounded reward and the next state.
//
// Steps are 0-based throughout (h = 0 is the first agent).

#include <optional>
#include <vector>

#include "opme/common.hpp"

namespace opme {

enum class TransitionMode { General, Dynamical };

const char* to_string(TransitionMode mode);
TransitionMode transition_mode_from_string(const std::string& name);

/// Uniform axis-aligned grid over a bounding box; the planner's state space in
/// Dynamical mode. Points outside the box map to the nearest boundary cell.
struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> cells;

  int dim() const { return static_cast<int>(cells.size()); }
  int num_cells() const;
  double width(int axis) const;
  int cell_of(std::span<const double> x) const;
  std::vector<int> unravel(int cell) const;
  int ravel(std::span<const int> coords) const;
  std::vector<double> center(int cell) const;
  /// Probability mass a N(mean, std^2) coordinate puts on each cell along
  /// `axis`, with the tails folded into the two boundary cells. std == 0 is
  /// a point mass.
  std::vector<double> axis_mass(int axis, double mean, double std) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// One coordinate of a mean map:
///   G_i(x, a, e) = offset(a, e) + sum_j gain(a, e, j) * tanh(x_j).
struct CoordinateMap {
  Tensor offset;  // (A, E)
  Tensor gain;    // (A, E, d)

  double operator()(std::span<const double> x, int a, int e) const;

  friend bool operator==(const CoordinateMap&, const CoordinateMap&) = default;
};

/// Full ground truth. Immutable after construction by convention; hidden from
/// learners except through env_step samples.
struct StrategicModel {
  int horizon = 1;
  int num_states = 1;  // Dynamical mode: number of grid cells
  int num_actions = 1;
  int num_feedbacks = 1;
  int num_types = 1;
  int num_agent_actions = 1;
  int initial_state = 0;

  Tensor source_type_dist;  // (H, T)
  Tensor target_type_dist;  // (H, T)
  Tensor agent_reward;      // (H, S, A, T, Ba)
  Tensor feedback_kernel;   // (H, S, A, T, Ba, E)
  Tensor principal_reward;  // (H, S, A, E), values in [0, reward_bound]
  double reward_bound = 1.0;
  Tensor reward_confound;  // (H, T)
  double reward_noise_std = 0.0;

  TransitionMode mode = TransitionMode::General;
  Tensor transition_kernel;  // (H, S, A, E, S)

  // Dynamical mode only.
  GridSpec grid;
  std::vector<double> initial_point;
  std::vector<std::vector<CoordinateMap>> mean_map;  // [h][i]
  Tensor trans_confound;                             // (H, T, d)
  double trans_noise_std = 1.0;

  int state_dim() const { return mode == TransitionMode::Dynamical ? grid.dim() : 0; }

  /// Subtracts the source-weighted mean from the reward (and, in Dynamical
  /// mode, transition) confound tables so the endogenous noise is zero-mean
  /// under the source population.
  void demean_confounds();

  /// Throws ValidationError listing every broken invariant.
  void validate() const;
};

/// F_h(e | s, a, t): feedback kernel with the agent's best response substituted.
Tensor feedback_by_type(const StrategicModel& model);

/// What the principal legitimately knows.
struct LearnerKnowledge {
  int horizon = 1;
  int num_states = 1;
  int num_actions = 1;
  int num_feedbacks = 1;
  int num_types = 1;
  int initial_state = 0;
  TransitionMode mode = TransitionMode::General;

  Tensor target_type_dist;  // (H, T)
  Tensor feedback_by_type;  // (H, S, A, T, E)
  /// sum_t target(t) F(e | s, a, t); cached because every aggregation uses it.
  Tensor target_feedback_mix;  // (H, S, A, E)

  GridSpec grid;
  std::vector<double> initial_point;
  double planning_noise_std = 1.0;
};

LearnerKnowledge make_knowledge(const StrategicModel& model);

/// Mixes feedback_by_type under an arbitrary per-step type distribution.
Tensor feedback_mix(const Tensor& feedback_by_type, const Tensor& type_dist);

/// Observable part of one interaction step.
struct Sample {
  int s = 0;  // state index (grid cell in Dynamical mode)
  int a = 0;
  int e = 0;
  double r = 0.0;
  int next_s = 0;
  std::vector<double> x;       // Dynamical mode: continuous state
  std::vector<double> next_x;  // Dynamical mode: continuous next state

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Unobserved part of one step; diagnostics only.
struct HiddenStep {
  int type = 0;
  int agent_action = 0;
  double xi = 0.0;
  std::vector<double> eta;

  friend bool operator==(const HiddenStep&, const HiddenStep&) = default;
};

struct Trajectory {
  std::vector<Sample> steps;
  std::vector<HiddenStep> hidden;
};

/// Time-inhomogeneous Markov policy, probs(h, s, a).
class Policy {
 public:
  Policy() = default;
  explicit Policy(Tensor probs);

  static Policy uniform(int horizon, int num_states, int num_actions);
  /// actions(h, s) as a flat row-major list.
  static Policy deterministic(int horizon, int num_states, int num_actions, std::span<const int> actions);

  int horizon() const { return probs_.dim(0); }
  int num_states() const { return probs_.dim(1); }
  int num_actions() const { return probs_.dim(2); }
  double prob(int h, int s, int a) const { return probs_(h, s, a); }
  std::span<const double> row(int h, int s) const { return probs_.slice({h, s}); }
  const Tensor& probs() const { return probs_; }

  int sample(int h, int s, Rng& rng) const;
  /// Action chosen at (h, s) when the row is one-hot, -1 otherwise.
  int deterministic_action(int h, int s) const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  Tensor probs_;
};

struct MixturePolicy {
  std::vector<Policy> components;

  const Policy& sample(Rng& rng) const;
};

/// Finite-horizon MDP under the target population.
struct AggregatedMDP {
  int horizon = 1;
  int num_states = 1;
  int num_actions = 1;
  int initial_state = 0;
  Tensor reward;      // (H, S, A)
  Tensor transition;  // (H, S, A, S)
};

struct State {
  int index = 0;
  std::vector<double> point;  // Dynamical mode
};

struct StepOutcome {
  Sample observed;
  HiddenStep hidden;
  State next;
};

/// argmax_b agentReward(h, s, a, t, b); ties go to the lowest index.
int best_response(const StrategicModel& model, int h, int s, int a, int t);

/// One interaction step from `state`. Consumes a fixed number of draws so
/// replaying a copied Rng reproduces the step.
StepOutcome env_step(const StrategicModel& model, int h, const State& state, int a, Rng& rng);

State initial_state(const StrategicModel& model);

Trajectory rollout(const StrategicModel& model, const Policy& policy, Rng& rng);

/// Diagnostics oracle: aggregates the true reward and transition under
/// `type_dist` (H, T). Dynamical mode discretizes onto `model.grid`.
AggregatedMDP true_aggregated_model(const StrategicModel& model, const Tensor& type_dist);

}  // namespace opme
