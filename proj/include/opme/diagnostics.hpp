#pragma once

// Ground-truth oracles. Everything here reads StrategicModel internals and is
// therefore off limits to the learner path in driver.cpp.

#include <cstdint>
#include <string>
#include <vector>

#include "opme/classes.hpp"
#include "opme/driver.hpp"
#include "opme/env.hpp"
#include "opme/npiv.hpp"

namespace opme {

/// Exact state-action-feedback occupancy of a policy under a type
/// distribution.
struct OccupancyTable {
  Tensor state;  // (H, S): distribution of s_h
  Tensor sae;    // (H, S, A, E)
  Tensor sa;     // (H, S, A)
  /// Dynamical mode: the table lives on the planner grid (cell centers).
  bool grid_resolution = false;
};

OccupancyTable occupancy(const StrategicModel& env, const Policy& policy, const Tensor& type_dist);

/// Occupancy of the uniform mixture over `policies` (the average of their
/// occupancy tables).
OccupancyTable mixture_occupancy(const StrategicModel& env, std::span<const Policy> policies,
                                 const Tensor& type_dist);

/// E_{d_h}[nu^2] for a residual nu (S, A, E).
double occupancy_mse(const OccupancyTable& occ, int h, const Tensor& nu);

/// E_{d_h(s,a)}[ (E_{e ~ mix}[nu | s, a])^2 ], with `mix` an (H, S, A, E)
/// feedback mixture.
double occupancy_pmse(const OccupancyTable& occ, int h, const Tensor& nu, const Tensor& mix);

/// Names one residual nu_h: a reward candidate, a transition candidate paired
/// with a value discriminator, or one axis of a dynamics candidate.
struct ResidualId {
  std::string kind;  // "reward" | "transition" | "dynamics"
  int index = -1;
  int g_index = -1;  // transition only
  int axis = -1;     // dynamics only
};

struct LabeledResidual {
  ResidualId id;
  Tensor nu;  // (S, A, E)
};

/// The residual family of step h: (R_h - R*_h), (P_h - P*_h) G_{h+1}, and in
/// Dynamical mode (P_{h,i} - G*_{h,i}) at cell centers.
std::vector<LabeledResidual> residual_family(const StrategicModel& env, const HypothesisClasses& classes, int h);

/// Outcome of a worst-case ratio search over (nu, pi) pairs.
struct RatioResult {
  double value = 1.0;           // meaningful when !infinite
  bool infinite = false;        // numerator > 0 with zero denominator
  bool degenerate = false;      // no pair had a nonzero numerator
  bool lower_bound = false;     // policies were sampled, not enumerated
  long long policies_evaluated = 0;
  long long pairs_evaluated = 0;
  long long jensen_violations = 0;  // ill_posedness only: pMSE > MSE
  ResidualId witness_nu;
  std::vector<int> witness_policy;  // deterministic actions (h', s) for h' <= h, row-major
};

/// tau_h = max MSE / pMSE over the residual family and deterministic Markov
/// policies, both under the source population.
RatioResult ill_posedness(const StrategicModel& env, const HypothesisClasses& classes, int h,
                          long long policy_budget = 4096, std::uint64_t sample_seed = 0);

/// C^f_h = max target-occupancy MSE / source-occupancy MSE.
RatioResult transfer_term(const StrategicModel& env, const HypothesisClasses& classes, int h,
                          long long policy_budget = 4096, std::uint64_t sample_seed = 0);

struct RegretSeries {
  double optimal_value = 0.0;  // V̄*_1(s1) of the true target model
  std::vector<double> instant;
  std::vector<double> cumulative;
  bool grid_resolution = false;
};

/// Fills the regret fields of `run` against the true aggregated target MDP.
RegretSeries regret_curve(RunResult& run, const StrategicModel& env);

/// Confounded per-(h, s, a, e) mean reward versus R*.
struct NaiveBaseline {
  Tensor counts;           // (H, S, A, E)
  Tensor empirical_mean;   // NaN where counts == 0
  Tensor empirical_bias;   // empirical_mean - R*; NaN where counts == 0
  Tensor population_bias;  // E[xi | s, a, e] under the source population; NaN where e is impossible
};

NaiveBaseline naive_baseline(const StepDataset& data, const StrategicModel& env);

struct StepDiagnostics {
  RatioResult tau;
  RatioResult transfer;
};

struct DiagnosticsReport {
  std::vector<StepDiagnostics> steps;
  bool has_naive = false;
  NaiveBaseline naive;
  RegretSeries regret;
  std::vector<std::string> flags;
};

}  // namespace opme
