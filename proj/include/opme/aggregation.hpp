#pragma once

// Per-step averaging of candidate reward/transition functions over the
// target feedback mixture. Shared by the learner's planner and the ground
// truth oracle so both produce bit-identical tables for the same inputs.

#include "opme/env.hpp"

namespace opme {

/// R̄(s, a) = sum_e mix(h, s, a, e) R(s, a, e). `reward` is (S, A, E).
Tensor aggregate_reward_step(const Tensor& reward, const Tensor& mix, int h);

/// P̄(s' | s, a) = sum_e mix(h, s, a, e) P(s' | s, a, e). `kernel` is (S, A, E, S).
Tensor aggregate_transition_step(const Tensor& kernel, const Tensor& mix, int h);

/// Grid kernel for a mean map (one CoordinateMap per axis): the per-feedback
/// Gaussian N(G(center(c), a, e), std^2 I) discretized by per-axis CDF
/// differences, then mixed over feedbacks.
Tensor aggregate_dynamics_step(std::span<const CoordinateMap* const> maps, const Tensor& mix, int h,
                               const GridSpec& grid, double noise_std);

/// Row-stochastic grid mass for one mean point.
std::vector<double> grid_kernel(const GridSpec& grid, std::span<const double> mean, double noise_std);

}  // namespace opme
