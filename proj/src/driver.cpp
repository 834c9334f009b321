#include "opme/driver.hpp"

#include <algorithm>
#include <chrono>

namespace opme {

void RunConfig::validate() const {
  std::vector<std::string> v;
  if (episodes < 1) v.push_back("run.episodes must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) v.push_back("run.delta must lie in (0, 1)");
  if (!(beta_scale > 0.0)) v.push_back("run.beta_scale must be positive");
  if (evaluation_cadence < 1) v.push_back("run.evaluation_cadence must be >= 1");
  if (recompute_every < 1) v.push_back("run.recompute_every must be >= 1");
  if (caps.max_class_size < 1 || caps.max_joint_models < 1 || caps.max_discriminators < 1) {
    v.push_back("caps must be positive");
  }
  if (!v.empty()) throw ValidationError(v);
}

namespace {

bool contains(const std::vector<int>& set, int j) { return std::find(set.begin(), set.end(), j) != set.end(); }

bool truth_in(const ConfidenceSets& sets, const HypothesisClasses& classes) {
  const auto H = sets.reward.size();
  if (classes.truth_reward.size() != H) return false;
  for (std::size_t h = 0; h < H; ++h) {
    if (!contains(sets.reward[h], classes.truth_reward[h])) return false;
    if (classes.mode() == TransitionMode::General) {
      if (classes.truth_transition.size() != H || !contains(sets.transition[h][0], classes.truth_transition[h])) {
        return false;
      }
    } else {
      if (classes.truth_dynamics.size() != H) return false;
      for (std::size_t i = 0; i < sets.transition[h].size(); ++i) {
        if (!contains(sets.transition[h][i], classes.truth_dynamics[h][i])) return false;
      }
    }
  }
  return true;
}

}  // namespace

RunResult run_opme(const StrategicModel& env, const LearnerKnowledge& knowledge, const HypothesisClasses& classes,
                   const RunConfig& cfg) {
  const RolloutFn sampler = [&env](const Policy& policy, Rng& rng) { return rollout(env, policy, rng); };
  return run_opme(env, sampler, knowledge, classes, cfg);
}

RunResult run_opme(const StrategicModel& env, const RolloutFn& sampler, const LearnerKnowledge& knowledge,
                   const HypothesisClasses& classes, const RunConfig& cfg) {
  cfg.validate();
  if (cfg.mode != env.mode || classes.mode() != cfg.mode || knowledge.mode != cfg.mode) {
    throw ConfigError("run mode does not match the environment transition mode");
  }
  classes.validate(env);

  RunResult result;
  result.config = cfg;
  const auto report = check_realizability(env, classes, cfg.caps);
  if (!report.all_pass()) {
    const auto& first = !report.truth_membership.pass       ? report.truth_membership
                        : !report.projection_membership.pass ? report.projection_membership
                                                             : report.value_membership;
    if (cfg.strict_realizability) throw RealizabilityError("realizability check failed: " + first.counterexample);
    result.flags.push_back("lenient-realizability: " + first.counterexample);
  }
  if (classes.bound_violation) result.flags.push_back("class-bound-violation");
  if (classes.approximate_realizability) result.flags.push_back("approximate-realizability");
  if (cfg.recompute_every > 1) result.flags.push_back("recompute-every=" + std::to_string(cfg.recompute_every));

  const int H = knowledge.horizon, S = knowledge.num_states, A = knowledge.num_actions;
  result.sizes = class_sizes(classes);
  result.levels = confidence_levels(classes.bound, cfg.episodes, H, result.sizes, cfg.delta, cfg.beta_scale);

  std::vector<StepStatistics> stats;
  for (int h = 0; h < H; ++h) stats.emplace_back(S, A, knowledge.num_feedbacks, classes.state_dim());

  Rng rng = Rng(cfg.seed).fork(1);
  Policy policy = Policy::uniform(H, S, A);
  ConfidenceSets sets;
  Selection selection;
  result.episodes.reserve(static_cast<std::size_t>(cfg.episodes));

  for (int k = 1; k <= cfg.episodes; ++k) {
    const auto start = std::chrono::steady_clock::now();
    EpisodeLog log;
    log.episode = k;
    log.policy = policy;

    const Trajectory traj = sampler(policy, rng);
    if (static_cast<int>(traj.steps.size()) != H) throw ConfigError("sampler returned a trajectory of the wrong length");
    for (int h = 0; h < H; ++h) stats[static_cast<std::size_t>(h)].add(traj.steps[static_cast<std::size_t>(h)]);

    const bool recompute = (k - 1) % cfg.recompute_every == 0;
    if (recompute) {
      sets = build_confidence_sets(stats, classes, result.levels, cfg.mode);
      sets.episode = k;
      if (cfg.optimism == OptimismMode::ExactEnumeration) {
        try {
          selection = optimistic_select(sets, classes, knowledge, OptimismMode::ExactEnumeration, cfg.caps);
        } catch (const CapacityError&) {
          selection = optimistic_select(sets, classes, knowledge, OptimismMode::PointwiseOptimistic, cfg.caps);
          selection.capacity_fallback = true;
        }
      } else {
        selection = optimistic_select(sets, classes, knowledge, OptimismMode::PointwiseOptimistic, cfg.caps);
      }
    } else {
      log.flags.push_back("stale-sets");
    }
    if (sets.empty_set_fallback) log.flags.push_back("empty-set-fallback");
    if (selection.relaxed) log.flags.push_back("relaxed");
    if (selection.capacity_fallback) log.flags.push_back("capacity-fallback");

    for (int h = 0; h < H; ++h) {
      const auto uh = static_cast<std::size_t>(h);
      log.reward_set_sizes.push_back(static_cast<int>(sets.reward[uh].size()));
      std::vector<int> axes;
      for (const auto& axis : sets.transition[uh]) axes.push_back(static_cast<int>(axis.size()));
      log.transition_set_sizes.push_back(std::move(axes));
    }
    log.optimistic_value = selection.value;
    if (!selection.relaxed) {
      log.chosen = selection.model;
      for (int h = 0; h < H; ++h) {
        const auto uh = static_cast<std::size_t>(h);
        log.chosen_reward_loss.push_back(sets.reward_loss[uh][static_cast<std::size_t>(selection.model.reward[uh])]);
        std::vector<double> tl;
        for (std::size_t i = 0; i < selection.model.transition[uh].size(); ++i) {
          tl.push_back(sets.transition_loss[uh][i][static_cast<std::size_t>(selection.model.transition[uh][i])]);
        }
        log.chosen_transition_loss.push_back(std::move(tl));
      }
    }
    log.truth_in_sets = truth_in(sets, classes);
    if (!log.truth_in_sets && result.truth_always_in_sets) {
      result.truth_always_in_sets = false;
      result.first_miss_episode = k;
    }

    result.mixture.components.push_back(policy);
    policy = selection.policy;
    log.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.episodes.push_back(std::move(log));
  }
  for (const auto& st : stats) result.dataset_sizes.push_back(st.size());
  return result;
}

double mixture_value(const MixturePolicy& policy, const AggregatedMDP& oracle) {
  if (policy.components.empty()) throw ConfigError("empty mixture policy");
  double total = 0.0;
  for (const auto& p : policy.components) {
    if (p.horizon() != oracle.horizon) throw ConfigError("mixture component horizon does not match the oracle");
    total += evaluate_policy(oracle, p);
  }
  return total / static_cast<double>(policy.components.size());
}

}  // namespace opme
