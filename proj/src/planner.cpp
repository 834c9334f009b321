#include "opme/planner.hpp"

#include <algorithm>
#include <climits>
#include <limits>

#include "opme/aggregation.hpp"

namespace opme {

const char* to_string(OptimismMode mode) {
  return mode == OptimismMode::ExactEnumeration ? "exact" : "pointwise";
}

OptimismMode optimism_mode_from_string(const std::string& name) {
  if (name == "exact" || name == "ExactEnumeration") return OptimismMode::ExactEnumeration;
  if (name == "pointwise" || name == "PointwiseOptimistic") return OptimismMode::PointwiseOptimistic;
  throw ConfigError("unknown optimism mode '" + name + "'");
}

namespace {

AggregatedMDP empty_mdp(const LearnerKnowledge& k) {
  AggregatedMDP mdp;
  mdp.horizon = k.horizon;
  mdp.num_states = k.num_states;
  mdp.num_actions = k.num_actions;
  mdp.initial_state = k.initial_state;
  mdp.reward = Tensor({k.horizon, k.num_states, k.num_actions});
  mdp.transition = Tensor({k.horizon, k.num_states, k.num_actions, k.num_states});
  return mdp;
}

void put_step(AggregatedMDP& mdp, int h, const Tensor& rbar, const Tensor& pbar) {
  std::copy(rbar.values().begin(), rbar.values().end(), mdp.reward.slice({h}).begin());
  std::copy(pbar.values().begin(), pbar.values().end(), mdp.transition.slice({h}).begin());
}

Tensor step_reward(const AggregatedMDP& mdp, int h) {
  Tensor r({mdp.num_states, mdp.num_actions});
  const auto src = mdp.reward.slice({h});
  std::copy(src.begin(), src.end(), r.values().begin());
  return r;
}

Tensor step_transition(const AggregatedMDP& mdp, int h) {
  Tensor p({mdp.num_states, mdp.num_actions, mdp.num_states});
  const auto src = mdp.transition.slice({h});
  std::copy(src.begin(), src.end(), p.values().begin());
  return p;
}

// Transition combinations of one step in lexicographic order over axes.
std::vector<std::vector<int>> transition_combinations(const std::vector<std::vector<int>>& axes) {
  std::vector<std::vector<int>> combos{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<int>> next;
    for (const auto& prefix : combos)
      for (int j : axis) {
        auto c = prefix;
        c.push_back(j);
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }
  return combos;
}

}  // namespace

AggregatedMDP aggregate(std::span<const Tensor> rewards, std::span<const Tensor> kernels,
                        const LearnerKnowledge& knowledge) {
  if (static_cast<int>(rewards.size()) != knowledge.horizon || static_cast<int>(kernels.size()) != knowledge.horizon) {
    throw ConfigError("aggregate needs one reward and one kernel per step");
  }
  AggregatedMDP mdp = empty_mdp(knowledge);
  for (int h = 0; h < knowledge.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    if (rewards[uh].shape() != std::vector<int>{knowledge.num_states, knowledge.num_actions, knowledge.num_feedbacks} ||
        kernels[uh].shape() !=
            std::vector<int>{knowledge.num_states, knowledge.num_actions, knowledge.num_feedbacks, knowledge.num_states}) {
      throw ConfigError("candidate table shape mismatch at step " + std::to_string(h));
    }
    put_step(mdp, h, aggregate_reward_step(rewards[uh], knowledge.target_feedback_mix, h),
             aggregate_transition_step(kernels[uh], knowledge.target_feedback_mix, h));
  }
  return mdp;
}

Tensor aggregate_transition_choice(const HypothesisClasses& classes, int h, std::span<const int> choice,
                                   const LearnerKnowledge& knowledge) {
  const auto uh = static_cast<std::size_t>(h);
  if (classes.mode() == TransitionMode::General) {
    return aggregate_transition_step(classes.transition[uh].at(static_cast<std::size_t>(choice[0])),
                                     knowledge.target_feedback_mix, h);
  }
  std::vector<const CoordinateMap*> maps;
  for (std::size_t i = 0; i < choice.size(); ++i) {
    maps.push_back(&classes.dynamics[uh][i].at(static_cast<std::size_t>(choice[i])));
  }
  return aggregate_dynamics_step(maps, knowledge.target_feedback_mix, h, knowledge.grid, knowledge.planning_noise_std);
}

AggregatedMDP aggregate(const HypothesisClasses& classes, const ModelChoice& choice, const LearnerKnowledge& knowledge) {
  if (static_cast<int>(choice.reward.size()) != knowledge.horizon ||
      static_cast<int>(choice.transition.size()) != knowledge.horizon) {
    throw ConfigError("model choice needs one entry per step");
  }
  AggregatedMDP mdp = empty_mdp(knowledge);
  if (knowledge.mode == TransitionMode::Dynamical) mdp.initial_state = knowledge.grid.cell_of(knowledge.initial_point);
  for (int h = 0; h < knowledge.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const Tensor rbar = aggregate_reward_step(classes.reward[uh].at(static_cast<std::size_t>(choice.reward[uh])),
                                              knowledge.target_feedback_mix, h);
    put_step(mdp, h, rbar, aggregate_transition_choice(classes, h, choice.transition[uh], knowledge));
  }
  return mdp;
}

void bellman_backup(const Tensor& rbar, const Tensor& pbar, std::span<const double> value_next,
                    std::span<double> value_out, std::span<double> q_out) {
  const int S = rbar.dim(0), A = rbar.dim(1);
  for (int s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      const auto row = pbar.slice({s, a});
      double q = rbar(s, a);
      for (int n = 0; n < S; ++n) q += row[static_cast<std::size_t>(n)] * value_next[static_cast<std::size_t>(n)];
      if (!q_out.empty()) q_out[static_cast<std::size_t>(s * A + a)] = q;
      best = std::max(best, q);
    }
    value_out[static_cast<std::size_t>(s)] = best;
  }
}

PlanResult value_iteration(const AggregatedMDP& mdp) {
  const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
  PlanResult plan;
  plan.value = Tensor({H + 1, S});
  plan.q = Tensor({H, S, A});
  std::vector<int> actions(static_cast<std::size_t>(H * S));
  for (int h = H - 1; h >= 0; --h) {
    const Tensor rbar = step_reward(mdp, h);
    const Tensor pbar = step_transition(mdp, h);
    bellman_backup(rbar, pbar, plan.value.slice({h + 1}), plan.value.slice({h}), plan.q.slice({h}));
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a) {
        if (plan.q(h, s, a) > plan.q(h, s, best)) best = a;
      }
      actions[static_cast<std::size_t>(h * S + s)] = best;
    }
  }
  plan.policy = Policy::deterministic(H, S, A, actions);
  plan.initial_value = plan.value(0, mdp.initial_state);
  return plan;
}

Tensor evaluate_policy_values(const AggregatedMDP& mdp, const Policy& policy) {
  const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
  if (policy.horizon() != H || policy.num_states() != S || policy.num_actions() != A) {
    throw ConfigError("policy shape does not match the MDP");
  }
  Tensor v({H + 1, S});
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double total = 0.0;
      for (int a = 0; a < A; ++a) {
        const double p = policy.prob(h, s, a);
        if (p == 0.0) continue;
        const auto row = mdp.transition.slice({h, s, a});
        double q = mdp.reward(h, s, a);
        for (int n = 0; n < S; ++n) q += row[static_cast<std::size_t>(n)] * v(h + 1, n);
        total += p * q;
      }
      v(h, s) = total;
    }
  }
  return v;
}

double evaluate_policy(const AggregatedMDP& mdp, const Policy& policy) {
  return evaluate_policy_values(mdp, policy)(0, mdp.initial_state);
}

namespace {

struct StepCandidates {
  std::vector<int> reward_idx;
  std::vector<Tensor> rbar;
  std::vector<std::vector<int>> combos;
  std::vector<Tensor> pbar;
};

std::vector<StepCandidates> precompute(const ConfidenceSets& sets, const HypothesisClasses& classes,
                                       const LearnerKnowledge& knowledge) {
  std::vector<StepCandidates> steps(static_cast<std::size_t>(knowledge.horizon));
  for (int h = 0; h < knowledge.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    auto& st = steps[uh];
    st.reward_idx = sets.reward[uh];
    for (int j : st.reward_idx) {
      st.rbar.push_back(aggregate_reward_step(classes.reward[uh].at(static_cast<std::size_t>(j)),
                                              knowledge.target_feedback_mix, h));
    }
    st.combos = transition_combinations(sets.transition[uh]);
    for (const auto& c : st.combos) st.pbar.push_back(aggregate_transition_choice(classes, h, c, knowledge));
  }
  return steps;
}

// Depth-first enumeration of suffix models, from the last step backwards.
// `picks` holds (reward position, combo position) per step.
class Enumerator {
 public:
  Enumerator(const std::vector<StepCandidates>& steps, int num_states, int initial_state)
      : steps_(steps), S_(num_states), s1_(initial_state), picks_(steps.size()) {
    values_.assign(steps.size() + 1, std::vector<double>(static_cast<std::size_t>(S_), 0.0));
  }

  void run() { descend(static_cast<int>(steps_.size()) - 1); }

  bool found() const { return found_; }
  double best_value() const { return best_value_; }
  const std::vector<std::pair<int, int>>& best_picks() const { return best_; }

 private:
  void descend(int h) {
    if (h < 0) {
      const double v = values_[0][static_cast<std::size_t>(s1_)];
      if (!found_ || v > best_value_ || (v == best_value_ && picks_ < best_)) {
        found_ = true;
        best_value_ = v;
        best_ = picks_;
      }
      return;
    }
    const auto uh = static_cast<std::size_t>(h);
    const auto& st = steps_[uh];
    for (std::size_t r = 0; r < st.rbar.size(); ++r) {
      for (std::size_t p = 0; p < st.pbar.size(); ++p) {
        bellman_backup(st.rbar[r], st.pbar[p], values_[uh + 1], values_[uh]);
        picks_[uh] = {static_cast<int>(r), static_cast<int>(p)};
        descend(h - 1);
      }
    }
  }

  const std::vector<StepCandidates>& steps_;
  int S_;
  int s1_;
  std::vector<std::pair<int, int>> picks_;
  std::vector<std::vector<double>> values_;
  bool found_ = false;
  double best_value_ = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> best_;
};

}  // namespace

Selection optimistic_select(const ConfidenceSets& sets, const HypothesisClasses& classes,
                            const LearnerKnowledge& knowledge, OptimismMode mode, const Caps& caps) {
  const int H = knowledge.horizon, S = knowledge.num_states, A = knowledge.num_actions;
  const int s1 = knowledge.mode == TransitionMode::Dynamical ? knowledge.grid.cell_of(knowledge.initial_point)
                                                              : knowledge.initial_state;
  Selection sel;
  if (mode == OptimismMode::ExactEnumeration) {
    if (sets.joint_count() > caps.max_joint_models) {
      throw CapacityError("confidence-set product exceeds the enumeration cap");
    }
    const auto steps = precompute(sets, classes, knowledge);
    Enumerator en(steps, S, s1);
    en.run();
    sel.model.reward.resize(static_cast<std::size_t>(H));
    sel.model.transition.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const auto uh = static_cast<std::size_t>(h);
      const auto [r, p] = en.best_picks()[uh];
      sel.model.reward[uh] = steps[uh].reward_idx[static_cast<std::size_t>(r)];
      sel.model.transition[uh] = steps[uh].combos[static_cast<std::size_t>(p)];
    }
    const auto plan = value_iteration(aggregate(classes, sel.model, knowledge));
    sel.policy = plan.policy;
    sel.value = plan.initial_value;
    return sel;
  }

  const auto steps = precompute(sets, classes, knowledge);
  sel.relaxed = true;
  sel.pointwise_reward = Tensor({H, S, A});
  sel.pointwise_transition = Tensor({H, S, A});
  Tensor value({H + 1, S});
  std::vector<int> actions(static_cast<std::size_t>(H * S));
  for (int h = H - 1; h >= 0; --h) {
    const auto& st = steps[static_cast<std::size_t>(h)];
    for (int s = 0; s < S; ++s) {
      int best_a = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        int ri = 0;
        for (std::size_t r = 1; r < st.rbar.size(); ++r) {
          if (st.rbar[r](s, a) > st.rbar[static_cast<std::size_t>(ri)](s, a)) ri = static_cast<int>(r);
        }
        int pi = 0;
        double best_next = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < st.pbar.size(); ++p) {
          const auto row = st.pbar[p].slice({s, a});
          double nv = 0.0;
          for (int n = 0; n < S; ++n) nv += row[static_cast<std::size_t>(n)] * value(h + 1, n);
          if (nv > best_next) {
            best_next = nv;
            pi = static_cast<int>(p);
          }
        }
        const double q = st.rbar[static_cast<std::size_t>(ri)](s, a) + best_next;
        sel.pointwise_reward(h, s, a) = st.reward_idx[static_cast<std::size_t>(ri)];
        sel.pointwise_transition(h, s, a) = pi;
        if (q > best_q) {
          best_q = q;
          best_a = a;
        }
      }
      value(h, s) = best_q;
      actions[static_cast<std::size_t>(h * S + s)] = best_a;
    }
  }
  sel.policy = Policy::deterministic(H, S, A, actions);
  sel.value = value(0, s1);
  return sel;
}

}  // namespace opme
