#pragma once

// Builders and independent oracles shared by the unit and acceptance tests.
// The oracles here are written from the definitions and deliberately avoid
// the library's own planner and occupancy code.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "opme/classes.hpp"
#include "opme/env.hpp"
#include "opme/planner.hpp"
#include "opme/scenarios.hpp"

namespace opme::testing {

inline void random_distribution(Rng& rng, std::span<double> out) {
  double total = 0.0;
  for (double& v : out) {
    v = 0.05 + rng.uniform();
    total += v;
  }
  for (double& v : out) v /= total;
}

/// Random General-mode model with every kernel drawn at random. Rewards lie in
/// [0, 1]; confounds are source-demeaned.
inline StrategicModel random_model(int H, int S, int A, int E, int T, int Ba, std::uint64_t seed,
                                   double confound_scale = 0.2, double noise_std = 0.1) {
  Rng rng(seed);
  StrategicModel m = blank_model(H, S, A, E, T, Ba);
  for (int h = 0; h < H; ++h) {
    random_distribution(rng, m.source_type_dist.slice({h}));
    random_distribution(rng, m.target_type_dist.slice({h}));
    for (int t = 0; t < T; ++t) m.reward_confound(h, t) = confound_scale * (2.0 * rng.uniform() - 1.0);
  }
  for (double& v : m.agent_reward.values()) v = rng.uniform();
  for (std::size_t off = 0; off < m.feedback_kernel.size(); off += static_cast<std::size_t>(E)) {
    random_distribution(rng, m.feedback_kernel.values().subspan(off, static_cast<std::size_t>(E)));
  }
  for (double& v : m.principal_reward.values()) v = rng.uniform();
  for (std::size_t off = 0; off < m.transition_kernel.size(); off += static_cast<std::size_t>(S)) {
    random_distribution(rng, m.transition_kernel.values().subspan(off, static_cast<std::size_t>(S)));
  }
  m.reward_noise_std = noise_std;
  m.demean_confounds();
  return m;
}

/// Random aggregated MDP, optionally with deterministic transitions.
inline AggregatedMDP random_mdp(int H, int S, int A, std::uint64_t seed, bool deterministic = false) {
  Rng rng(seed);
  AggregatedMDP mdp;
  mdp.horizon = H;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.initial_state = 0;
  mdp.reward = Tensor({H, S, A});
  mdp.transition = Tensor({H, S, A, S});
  for (double& v : mdp.reward.values()) v = rng.uniform();
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        auto row = mdp.transition.slice({h, s, a});
        if (deterministic) {
          row[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(S))] = 1.0;
        } else {
          random_distribution(rng, row);
        }
      }
  return mdp;
}

/// Value of a deterministic policy by forward propagation of the state
/// distribution: sum_h sum_s d_h(s) R(h, s, pi(h, s)).
inline double forward_value(const AggregatedMDP& mdp, const std::vector<int>& actions) {
  const int H = mdp.horizon, S = mdp.num_states;
  std::vector<double> d(static_cast<std::size_t>(S), 0.0), next(static_cast<std::size_t>(S));
  d[static_cast<std::size_t>(mdp.initial_state)] = 1.0;
  double total = 0.0;
  for (int h = 0; h < H; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      const double w = d[static_cast<std::size_t>(s)];
      if (w == 0.0) continue;
      const int a = actions[static_cast<std::size_t>(h * S + s)];
      total += w * mdp.reward(h, s, a);
      for (int s2 = 0; s2 < S; ++s2) next[static_cast<std::size_t>(s2)] += w * mdp.transition(h, s, a, s2);
    }
    d.swap(next);
  }
  return total;
}

/// Calls `visit` for every deterministic Markov policy (actions(h, s) as a
/// flat row-major list).
inline void for_each_policy(int H, int S, int A, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> actions(static_cast<std::size_t>(H * S), 0);
  while (true) {
    visit(actions);
    std::size_t i = 0;
    while (i < actions.size() && ++actions[i] == A) actions[i++] = 0;
    if (i == actions.size()) return;
  }
}

inline double brute_force_optimum(const AggregatedMDP& mdp) {
  double best = -1e300;
  for_each_policy(mdp.horizon, mdp.num_states, mdp.num_actions,
                  [&](const std::vector<int>& pi) { best = std::max(best, forward_value(mdp, pi)); });
  return best;
}

/// Aggregated reward by the defining double sum, straight from the model.
inline double oracle_rbar(const StrategicModel& m, const Tensor& R, const Tensor& type_dist, int h, int s, int a) {
  double total = 0.0;
  for (int t = 0; t < m.num_types; ++t) {
    int b = 0;
    for (int bb = 1; bb < m.num_agent_actions; ++bb) {
      if (m.agent_reward(h, s, a, t, bb) > m.agent_reward(h, s, a, t, b)) b = bb;
    }
    for (int e = 0; e < m.num_feedbacks; ++e) {
      total += type_dist(h, t) * m.feedback_kernel(h, s, a, t, b, e) * R(s, a, e);
    }
  }
  return total;
}

/// Aggregated transition row entry, same double sum as oracle_rbar.
inline double oracle_pbar(const StrategicModel& m, const Tensor& P, const Tensor& type_dist, int h, int s, int a,
                          int s2) {
  double total = 0.0;
  for (int t = 0; t < m.num_types; ++t) {
    int b = 0;
    for (int bb = 1; bb < m.num_agent_actions; ++bb) {
      if (m.agent_reward(h, s, a, t, bb) > m.agent_reward(h, s, a, t, b)) b = bb;
    }
    for (int e = 0; e < m.num_feedbacks; ++e) {
      total += type_dist(h, t) * m.feedback_kernel(h, s, a, t, b, e) * P(s, a, e, s2);
    }
  }
  return total;
}

/// Target-population MDP built entry by entry from per-step tables
/// rewards[h] (S, A, E) and kernels[h] (S, A, E, S).
inline AggregatedMDP oracle_aggregate(const StrategicModel& m, const std::vector<const Tensor*>& rewards,
                                      const std::vector<const Tensor*>& kernels) {
  const int H = m.horizon, S = m.num_states, A = m.num_actions;
  AggregatedMDP mdp;
  mdp.horizon = H;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.initial_state = m.initial_state;
  mdp.reward = Tensor({H, S, A});
  mdp.transition = Tensor({H, S, A, S});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        mdp.reward(h, s, a) = oracle_rbar(m, *rewards[static_cast<std::size_t>(h)], m.target_type_dist, h, s, a);
        for (int s2 = 0; s2 < S; ++s2)
          mdp.transition(h, s, a, s2) =
              oracle_pbar(m, *kernels[static_cast<std::size_t>(h)], m.target_type_dist, h, s, a, s2);
      }
  return mdp;
}

/// The true target MDP through the oracle above.
inline AggregatedMDP oracle_truth(const StrategicModel& m) {
  std::vector<Tensor> r, p;
  for (int h = 0; h < m.horizon; ++h) {
    r.push_back(true_reward_step(m, h));
    p.push_back(true_transition_step(m, h));
  }
  std::vector<const Tensor*> rp, pp;
  for (int h = 0; h < m.horizon; ++h) {
    rp.push_back(&r[static_cast<std::size_t>(h)]);
    pp.push_back(&p[static_cast<std::size_t>(h)]);
  }
  return oracle_aggregate(m, rp, pp);
}

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
  long long n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = static_cast<long long>(xs.size());
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) out.sd += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(out.sd / static_cast<double>(xs.size() - 1));
  }
  return out;
}

/// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace opme::testing
