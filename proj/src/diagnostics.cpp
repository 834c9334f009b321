#include "opme/diagnostics.hpp"

#include <algorithm>
#include <limits>

#include "opme/aggregation.hpp"
#include "opme/planner.hpp"

namespace opme {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_type_dist(const StrategicModel& env, const Tensor& type_dist) {
  if (type_dist.shape() != std::vector<int>{env.horizon, env.num_types}) {
    throw ConfigError("type distribution shape mismatch");
  }
  for (int h = 0; h < env.horizon; ++h) {
    if (!is_distribution(type_dist.slice({h}))) throw ConfigError("type distribution row is not a distribution");
  }
}

// Next-state distribution of the true transition at (h, s, a, e).
void add_next_mass(const StrategicModel& env, int h, int s, int a, int e, double w, std::span<double> next) {
  if (w == 0.0) return;
  if (env.mode == TransitionMode::General) {
    const auto row = env.transition_kernel.slice({h, s, a, e});
    for (std::size_t n = 0; n < next.size(); ++n) next[n] += w * row[n];
    return;
  }
  const auto center = env.grid.center(s);
  std::vector<double> mean;
  for (const auto& m : env.mean_map[static_cast<std::size_t>(h)]) mean.push_back(m(center, a, e));
  const auto k = grid_kernel(env.grid, mean, env.trans_noise_std);
  for (std::size_t n = 0; n < next.size(); ++n) next[n] += w * k[n];
}

Tensor residual_minus(const Tensor& candidate, const Tensor& truth) {
  Tensor nu = candidate;
  auto v = nu.values();
  const auto t = truth.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] -= t[k];
  return nu;
}

// Deterministic Markov policies that differ on steps 0..h; later steps play
// action 0 since they cannot affect d_h.
class PolicySource {
 public:
  PolicySource(const StrategicModel& env, int h, long long budget, std::uint64_t seed)
      : H_(env.horizon), S_(env.num_states), A_(env.num_actions), free_(env.num_states * (h + 1)), rng_(seed) {
    long long total = 1;
    exhaustive_ = true;
    for (int i = 0; i < free_; ++i) {
      if (total > budget / std::max(A_, 1)) {
        exhaustive_ = false;
        break;
      }
      total *= A_;
    }
    if (exhaustive_ && total > budget) exhaustive_ = false;
    count_ = exhaustive_ ? total : budget;
  }

  bool exhaustive() const { return exhaustive_; }
  long long count() const { return count_; }

  std::vector<int> actions(long long index) {
    std::vector<int> acts(static_cast<std::size_t>(H_ * S_), 0);
    for (int i = 0; i < free_; ++i) {
      if (exhaustive_) {
        acts[static_cast<std::size_t>(i)] = static_cast<int>(index % A_);
        index /= A_;
      } else {
        acts[static_cast<std::size_t>(i)] = std::min(A_ - 1, static_cast<int>(rng_.uniform() * A_));
      }
    }
    return acts;
  }

  Policy policy(std::span<const int> acts) const { return Policy::deterministic(H_, S_, A_, acts); }
  int free_cells() const { return free_; }

 private:
  int H_, S_, A_, free_;
  Rng rng_;
  bool exhaustive_ = true;
  long long count_ = 1;
};

enum class RatioKind { IllPosedness, Transfer };

RatioResult ratio_search(const StrategicModel& env, const HypothesisClasses& classes, int h, long long budget,
                         std::uint64_t seed, RatioKind kind) {
  check_index(h, env.horizon, "step");
  if (budget < 1) throw ConfigError("policy budget must be positive");
  const auto family = residual_family(env, classes, h);
  const Tensor source_mix = feedback_mix(feedback_by_type(env), env.source_type_dist);

  RatioResult out;
  out.value = 0.0;
  PolicySource policies(env, h, budget, seed);
  out.lower_bound = !policies.exhaustive();
  bool any_signal = false;

  for (long long p = 0; p < policies.count(); ++p) {
    const auto acts = policies.actions(p);
    const Policy pi = policies.policy(acts);
    const OccupancyTable src = occupancy(env, pi, env.source_type_dist);
    OccupancyTable tgt;
    if (kind == RatioKind::Transfer) tgt = occupancy(env, pi, env.target_type_dist);
    ++out.policies_evaluated;

    for (const auto& res : family) {
      double num = 0.0, den = 0.0;
      if (kind == RatioKind::IllPosedness) {
        num = occupancy_mse(src, h, res.nu);
        den = occupancy_pmse(src, h, res.nu, source_mix);
        if (den > num * (1.0 + 1e-12) + 1e-300) ++out.jensen_violations;
      } else {
        num = occupancy_mse(tgt, h, res.nu);
        den = occupancy_mse(src, h, res.nu);
      }
      ++out.pairs_evaluated;
      if (num <= 0.0) continue;
      any_signal = true;
      if (out.infinite) continue;
      const auto witness = [&] {
        out.witness_nu = res.id;
        out.witness_policy.assign(acts.begin(), acts.begin() + policies.free_cells());
      };
      if (den <= 0.0) {
        out.infinite = true;
        witness();
        continue;
      }
      const double ratio = num / den;
      if (ratio > out.value) {
        out.value = ratio;
        witness();
      }
    }
  }
  if (!any_signal) {
    out.degenerate = true;
    out.value = 1.0;
  }
  return out;
}

}  // namespace

OccupancyTable occupancy(const StrategicModel& env, const Policy& policy, const Tensor& type_dist) {
  const int H = env.horizon, S = env.num_states, A = env.num_actions, E = env.num_feedbacks;
  if (policy.horizon() != H || policy.num_states() != S || policy.num_actions() != A) {
    throw ConfigError("policy shape does not match the environment");
  }
  check_type_dist(env, type_dist);
  const Tensor mix = feedback_mix(feedback_by_type(env), type_dist);

  OccupancyTable occ;
  occ.grid_resolution = env.mode == TransitionMode::Dynamical;
  occ.state = Tensor({H, S});
  occ.sae = Tensor({H, S, A, E});
  occ.sa = Tensor({H, S, A});
  occ.state(0, initial_state(env).index) = 1.0;

  for (int h = 0; h < H; ++h) {
    std::vector<double> next(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
      const double ds = occ.state(h, s);
      if (ds == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double dsa = ds * policy.prob(h, s, a);
        occ.sa(h, s, a) = dsa;
        if (dsa == 0.0) continue;
        for (int e = 0; e < E; ++e) {
          const double w = dsa * mix(h, s, a, e);
          occ.sae(h, s, a, e) = w;
          if (h + 1 < H) add_next_mass(env, h, s, a, e, w, next);
        }
      }
    }
    if (h + 1 < H) std::copy(next.begin(), next.end(), occ.state.slice({h + 1}).begin());
  }
  return occ;
}

OccupancyTable mixture_occupancy(const StrategicModel& env, std::span<const Policy> policies,
                                 const Tensor& type_dist) {
  if (policies.empty()) throw ConfigError("empty policy list");
  OccupancyTable acc = occupancy(env, policies.front(), type_dist);
  for (std::size_t i = 1; i < policies.size(); ++i) {
    const OccupancyTable occ = occupancy(env, policies[i], type_dist);
    for (auto [dst, src] : {std::pair{acc.state.values(), occ.state.values()},
                            std::pair{acc.sae.values(), occ.sae.values()},
                            std::pair{acc.sa.values(), occ.sa.values()}}) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  const double n = static_cast<double>(policies.size());
  for (auto* t : {&acc.state, &acc.sae, &acc.sa}) {
    for (double& v : t->values()) v /= n;
  }
  return acc;
}

double occupancy_mse(const OccupancyTable& occ, int h, const Tensor& nu) {
  const int S = nu.dim(0), A = nu.dim(1), E = nu.dim(2);
  double total = 0.0;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int e = 0; e < E; ++e) {
        const double v = nu(s, a, e);
        total += occ.sae(h, s, a, e) * (v * v);
      }
  return total;
}

double occupancy_pmse(const OccupancyTable& occ, int h, const Tensor& nu, const Tensor& mix) {
  const int S = nu.dim(0), A = nu.dim(1), E = nu.dim(2);
  double total = 0.0;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double proj = 0.0;
      for (int e = 0; e < E; ++e) proj += mix(h, s, a, e) * nu(s, a, e);
      total += occ.sa(h, s, a) * (proj * proj);
    }
  return total;
}

std::vector<LabeledResidual> residual_family(const StrategicModel& env, const HypothesisClasses& classes, int h) {
  const auto uh = static_cast<std::size_t>(h);
  std::vector<LabeledResidual> out;
  const Tensor r_star = true_reward_step(env, h);
  for (std::size_t j = 0; j < classes.reward[uh].size(); ++j) {
    out.push_back({{"reward", static_cast<int>(j), -1, -1}, residual_minus(classes.reward[uh][j], r_star)});
  }
  if (env.mode == TransitionMode::General) {
    const Tensor p_star = true_transition_step(env, h);
    for (std::size_t j = 0; j < classes.transition[uh].size(); ++j) {
      for (std::size_t g = 0; g < classes.disc_g[uh + 1].size(); ++g) {
        out.push_back({{"transition", static_cast<int>(j), static_cast<int>(g), -1},
                       transition_residual(classes.transition[uh][j], p_star, classes.disc_g[uh + 1][g])});
      }
    }
  } else {
    for (std::size_t i = 0; i < classes.dynamics[uh].size(); ++i) {
      for (std::size_t j = 0; j < classes.dynamics[uh][i].size(); ++j) {
        out.push_back({{"dynamics", static_cast<int>(j), -1, static_cast<int>(i)},
                       dynamics_residual(env, h, static_cast<int>(i), classes.dynamics[uh][i][j])});
      }
    }
  }
  return out;
}

RatioResult ill_posedness(const StrategicModel& env, const HypothesisClasses& classes, int h, long long policy_budget,
                          std::uint64_t sample_seed) {
  return ratio_search(env, classes, h, policy_budget, sample_seed, RatioKind::IllPosedness);
}

RatioResult transfer_term(const StrategicModel& env, const HypothesisClasses& classes, int h, long long policy_budget,
                          std::uint64_t sample_seed) {
  return ratio_search(env, classes, h, policy_budget, sample_seed, RatioKind::Transfer);
}

RegretSeries regret_curve(RunResult& run, const StrategicModel& env) {
  const AggregatedMDP mdp = true_aggregated_model(env, env.target_type_dist);
  RegretSeries series;
  series.grid_resolution = env.mode == TransitionMode::Dynamical;
  series.optimal_value = value_iteration(mdp).initial_value;
  double cum = 0.0;
  for (auto& log : run.episodes) {
    const double regret = series.optimal_value - evaluate_policy(mdp, log.policy);
    cum += regret;
    log.instant_regret = regret;
    log.cumulative_regret = cum;
    log.regret_filled = true;
    series.instant.push_back(regret);
    series.cumulative.push_back(cum);
  }
  return series;
}

NaiveBaseline naive_baseline(const StepDataset& data, const StrategicModel& env) {
  const int H = env.horizon, S = env.num_states, A = env.num_actions, E = env.num_feedbacks, T = env.num_types;
  if (data.horizon() != H) throw ConfigError("dataset horizon does not match the environment");
  NaiveBaseline out;
  out.counts = Tensor({H, S, A, E});
  out.empirical_mean = Tensor({H, S, A, E});
  out.empirical_bias = Tensor({H, S, A, E});
  out.population_bias = Tensor({H, S, A, E});

  for (int h = 0; h < H; ++h) {
    for (const Sample& smp : data.step(h)) {
      out.counts(h, smp.s, smp.a, smp.e) += 1.0;
      out.empirical_mean(h, smp.s, smp.a, smp.e) += smp.r;
    }
  }
  const Tensor by_type = feedback_by_type(env);
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int e = 0; e < E; ++e) {
          const double n = out.counts(h, s, a, e);
          if (n > 0.0) {
            out.empirical_mean(h, s, a, e) /= n;
            out.empirical_bias(h, s, a, e) = out.empirical_mean(h, s, a, e) - env.principal_reward(h, s, a, e);
          } else {
            out.empirical_mean(h, s, a, e) = kNaN;
            out.empirical_bias(h, s, a, e) = kNaN;
          }
          double mass = 0.0, weighted = 0.0;
          for (int t = 0; t < T; ++t) {
            const double w = env.source_type_dist(h, t) * by_type(h, s, a, t, e);
            mass += w;
            weighted += w * env.reward_confound(h, t);
          }
          out.population_bias(h, s, a, e) = mass > 0.0 ? weighted / mass : kNaN;
        }
  return out;
}

}  // namespace opme
