#pragma once

// Minimax (NPIV) risk estimates and the confidence sets built from them.
//
// Every loss has the form
//     max_{f in F_h}  sum_tau f(s_tau, a_tau) d_tau  -  1/2 sum_tau f(s_tau, a_tau)^2
// where d_tau is the residual of a candidate on sample tau. The maximum is
// an exact scan over the finite discriminator list.

#include <vector>

#include "opme/classes.hpp"
#include "opme/env.hpp"

namespace opme {

/// Per-step append-only sample log (D_h). Position j in every step holds
/// episode j + 1.
class StepDataset {
 public:
  explicit StepDataset(int horizon = 1) : steps_(static_cast<std::size_t>(horizon)) {}

  void append(int h, Sample sample) { steps_.at(static_cast<std::size_t>(h)).push_back(std::move(sample)); }
  void append(const Trajectory& traj);

  int horizon() const { return static_cast<int>(steps_.size()); }
  std::span<const Sample> step(int h) const { return steps_.at(static_cast<std::size_t>(h)); }
  std::size_t size(int h) const { return steps_.at(static_cast<std::size_t>(h)).size(); }

 private:
  std::vector<std::vector<Sample>> steps_;
};

double empirical_loss_reward(std::span<const Sample> data, const Tensor& reward, std::span<const Tensor> disc_f);

double empirical_loss_transition_general(std::span<const Sample> data, const Tensor& kernel,
                                         std::span<const Tensor> disc_g_next, std::span<const Tensor> disc_f);

double empirical_loss_transition_dynamical(std::span<const Sample> data, const CoordinateMap& map, int axis,
                                           std::span<const Tensor> disc_f);

/// Exact scan: max_f sum_{s,a} f(s,a) D(s,a) - 1/2 f(s,a)^2 n(s,a).
double discriminator_max(std::span<const double> residual_sums, std::span<const double> counts,
                         std::span<const Tensor> disc_f);

struct ClassSizes {
  long long f = 1;
  long long g = 1;
  long long reward = 1;
  long long transition = 1;
};

ClassSizes class_sizes(const HypothesisClasses& classes);

struct ConfidenceLevels {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double scale = 1.0;
};

/// beta = scale * 28 B^2 ln(K H |F| |class| / delta), natural log.
ConfidenceLevels confidence_levels(double bound, int episodes, int horizon, const ClassSizes& sizes, double delta,
                                   double beta_scale);

struct ConfidenceSets {
  int episode = 0;
  ConfidenceLevels levels;
  std::vector<std::vector<int>> reward;                        // [h] surviving indices
  std::vector<std::vector<std::vector<int>>> transition;       // [h][axis]; General mode has one axis
  std::vector<std::vector<double>> reward_loss;                // [h][j]
  std::vector<std::vector<std::vector<double>>> transition_loss;  // [h][axis][j]
  bool empty_set_fallback = false;

  /// prod_h |R^k_h| prod_i |P^k_{h,i}|, saturating at LLONG_MAX.
  long long joint_count() const;
};

/// Transition threshold for the mode: beta2 (General) or beta3 (Dynamical).
double transition_threshold(const ConfidenceLevels& levels, TransitionMode mode);

/// Thresholds precomputed loss tables into confidence sets. Empty sets fall
/// back to the argmin singleton and raise empty_set_fallback.
ConfidenceSets threshold_losses(std::vector<std::vector<double>> reward_loss,
                                std::vector<std::vector<std::vector<double>>> transition_loss,
                                const ConfidenceLevels& levels, TransitionMode mode);

/// Reference path: recomputes every loss from the raw samples.
ConfidenceSets build_confidence_sets(const StepDataset& data, const HypothesisClasses& classes,
                                     const ConfidenceLevels& levels, TransitionMode mode);

/// Sufficient statistics of D_h. The losses depend on the data only through
/// these sums, so they are maintained incrementally and every loss is
/// evaluated in O(|F_h| S A) per candidate.
class StepStatistics {
 public:
  StepStatistics() = default;
  StepStatistics(int num_states, int num_actions, int num_feedbacks, int state_dim);

  void add(const Sample& sample);

  std::size_t size() const { return size_; }
  const Tensor& counts() const { return counts_; }          // n(s, a)
  const Tensor& feedback_counts() const { return n_sae_; }  // n(s, a, e)
  const Tensor& reward_sums() const { return r_sum_; }      // sum r over (s, a)
  const Tensor& next_counts() const { return n_sas_; }      // n(s, a, s')
  const Tensor& tanh_sums() const { return tanh_sum_; }     // sum tanh(x_j) over (s, a, e)
  const Tensor& next_point_sums() const { return next_sum_; }  // sum x'_i over (s, a)

  double reward_loss(const Tensor& reward, std::span<const Tensor> disc_f) const;
  double transition_loss_general(const Tensor& kernel, std::span<const Tensor> disc_g_next,
                                 std::span<const Tensor> disc_f) const;
  double transition_loss_dynamical(const CoordinateMap& map, int axis, std::span<const Tensor> disc_f) const;

 private:
  int S_ = 0, A_ = 0, E_ = 0, d_ = 0;
  std::size_t size_ = 0;
  Tensor counts_;
  Tensor n_sae_;
  Tensor r_sum_;
  Tensor n_sas_;
  Tensor tanh_sum_;
  Tensor next_sum_;
};

/// Incremental path used by the driver; matches build_confidence_sets to 1e-9.
ConfidenceSets build_confidence_sets(std::span<const StepStatistics> stats, const HypothesisClasses& classes,
                                     const ConfidenceLevels& levels, TransitionMode mode);

}  // namespace opme
