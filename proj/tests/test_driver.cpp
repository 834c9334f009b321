#include "doctest.h"
#include "opme/diagnostics.hpp"
#include "opme/driver.hpp"
#include "support.hpp"

using namespace opme;
using testing::random_model;

namespace {

RunConfig config_for(const StrategicModel& m, int K, std::uint64_t seed = 0) {
  RunConfig cfg;
  cfg.episodes = K;
  cfg.mode = m.mode;
  cfg.seed = seed;
  return cfg;
}

// Truth classes plus one mirrored reward candidate per step, closed so that
// the startup check passes.
HypothesisClasses with_decoy(const StrategicModel& m) {
  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < m.horizon; ++h) {
    Tensor decoy = c.reward[static_cast<std::size_t>(h)][0];
    for (double& v : decoy.values()) v = 1.0 - v;
    c.reward[static_cast<std::size_t>(h)].push_back(decoy);
  }
  return close_classes(m, c, {});
}

}  // namespace

TEST_CASE("a single episode returns the uniform policy as the mixture") {
  const StrategicModel m = random_model(2, 3, 2, 2, 2, 2, 1);
  const RunResult run = run_opme(m, make_knowledge(m), with_decoy(m), config_for(m, 1));
  REQUIRE(run.mixture.components.size() == 1);
  CHECK(run.mixture.components[0] == Policy::uniform(2, 3, 2));
  CHECK(run.episodes.size() == 1);
  CHECK(run.dataset_sizes == std::vector<std::size_t>{1, 1});
}

TEST_CASE("singleton truth classes make every policy after the first optimal") {
  StrategicModel m = random_model(3, 3, 2, 2, 2, 2, 2, 0.0, 0.0);
  const HypothesisClasses c = close_classes(m, singleton_truth_classes(m), {});
  RunResult run = run_opme(m, make_knowledge(m), c, config_for(m, 12));
  const AggregatedMDP target = true_aggregated_model(m, m.target_type_dist);
  const double optimum = testing::brute_force_optimum(target);
  for (std::size_t k = 1; k < run.mixture.components.size(); ++k) {
    CHECK(evaluate_policy(target, run.mixture.components[k]) == doctest::Approx(optimum).epsilon(1e-12));
  }
  const RegretSeries reg = regret_curve(run, m);
  for (std::size_t k = 1; k < reg.instant.size(); ++k) CHECK(std::abs(reg.instant[k]) <= 1e-12);
  CHECK(run.truth_always_in_sets);
}

TEST_CASE("runs are deterministic in the seed") {
  const StrategicModel m = random_model(2, 3, 2, 3, 2, 2, 3);
  const HypothesisClasses c = with_decoy(m);
  const RunResult a = run_opme(m, make_knowledge(m), c, config_for(m, 40, 9));
  const RunResult b = run_opme(m, make_knowledge(m), c, config_for(m, 40, 9));
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t k = 0; k < a.episodes.size(); ++k) {
    CHECK(a.episodes[k].policy == b.episodes[k].policy);
    CHECK(a.episodes[k].reward_set_sizes == b.episodes[k].reward_set_sizes);
    CHECK(a.episodes[k].optimistic_value == b.episodes[k].optimistic_value);
  }
  const RunResult other = run_opme(m, make_knowledge(m), c, config_for(m, 40, 10));
  bool differs = false;
  for (std::size_t k = 0; k < a.episodes.size() && !differs; ++k)
    differs = a.episodes[k].chosen_reward_loss != other.episodes[k].chosen_reward_loss;
  CHECK(differs);
}

TEST_CASE("dataset sizes grow by one sample per step and episode") {
  const StrategicModel m = random_model(3, 2, 2, 2, 2, 2, 4);
  const HypothesisClasses c = with_decoy(m);
  for (int K : {1, 5, 17}) {
    const RunResult run = run_opme(m, make_knowledge(m), c, config_for(m, K));
    CHECK(run.dataset_sizes == std::vector<std::size_t>(3, static_cast<std::size_t>(K)));
    CHECK(run.mixture.components.size() == static_cast<std::size_t>(K));
  }
}

TEST_CASE("the learner only sees the observable part of each trajectory") {
  const StrategicModel m = random_model(2, 3, 2, 2, 3, 2, 5);
  const HypothesisClasses c = with_decoy(m);
  const RunConfig cfg = config_for(m, 30, 4);
  const RunResult plain = run_opme(m, make_knowledge(m), c, cfg);

  // Same samples, hidden fields replaced with garbage.
  Rng garbage(77);
  const RolloutFn scrambled = [&](const Policy& pi, Rng& rng) {
    Trajectory t = rollout(m, pi, rng);
    for (auto& hs : t.hidden) {
      hs.type = static_cast<int>(garbage.next_u64() % 1000);
      hs.agent_action = -5;
      hs.xi = garbage.uniform() * 100.0;
    }
    return t;
  };
  const RunResult hidden_scrambled = run_opme(m, scrambled, make_knowledge(m), c, cfg);

  // Same samples with the hidden record dropped entirely.
  const RolloutFn recorded = [&](const Policy& pi, Rng& rng) {
    Trajectory t = rollout(m, pi, rng);
    t.hidden.clear();
    return t;
  };
  const RunResult no_hidden = run_opme(m, recorded, make_knowledge(m), c, cfg);

  for (const RunResult* r : {&hidden_scrambled, &no_hidden}) {
    REQUIRE(r->episodes.size() == plain.episodes.size());
    for (std::size_t k = 0; k < plain.episodes.size(); ++k) {
      CHECK(r->episodes[k].policy == plain.episodes[k].policy);
      CHECK(r->episodes[k].chosen_reward_loss == plain.episodes[k].chosen_reward_loss);
      CHECK(r->episodes[k].chosen_transition_loss == plain.episodes[k].chosen_transition_loss);
    }
  }
}

TEST_CASE("mixture suboptimality equals average regret") {
  const StrategicModel m = random_model(3, 3, 2, 2, 2, 2, 6);
  RunResult run = run_opme(m, make_knowledge(m), with_decoy(m), config_for(m, 25, 1));
  const RegretSeries reg = regret_curve(run, m);
  const AggregatedMDP target = true_aggregated_model(m, m.target_type_dist);
  const double optimum = testing::brute_force_optimum(target);
  const double gap = optimum - mixture_value(run.mixture, target);
  CHECK(gap == doctest::Approx(reg.cumulative.back() / 25.0).epsilon(1e-10));
  CHECK(gap >= -1e-12);
}

TEST_CASE("mixture value examples") {
  AggregatedMDP oracle;
  oracle.horizon = 1;
  oracle.num_states = 1;
  oracle.num_actions = 2;
  oracle.reward = Tensor({1, 1, 2}, std::vector<double>{0.4, 0.8});
  oracle.transition = Tensor({1, 1, 2, 1}, std::vector<double>{1.0, 1.0});
  const std::vector<int> first{0}, second{1};
  const Policy p0 = Policy::deterministic(1, 1, 2, first), p1 = Policy::deterministic(1, 1, 2, second);

  CHECK(mixture_value(MixturePolicy{{p0}}, oracle) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(mixture_value(MixturePolicy{{p1, p1, p1}}, oracle) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(mixture_value(MixturePolicy{{p0, p1}}, oracle) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(mixture_value(MixturePolicy{}, oracle), ConfigError);
  CHECK_THROWS_AS(mixture_value(MixturePolicy{{Policy::uniform(2, 1, 2)}}, oracle), ConfigError);
}

TEST_CASE("realizability gate") {
  const StrategicModel m = random_model(2, 2, 2, 2, 2, 2, 7);
  HypothesisClasses c = with_decoy(m);
  c.disc_f[0].resize(1);  // keep only the zero discriminator
  RunConfig cfg = config_for(m, 3);
  CHECK_THROWS_AS(run_opme(m, make_knowledge(m), c, cfg), RealizabilityError);
  cfg.strict_realizability = false;
  const RunResult run = run_opme(m, make_knowledge(m), c, cfg);
  REQUIRE_FALSE(run.flags.empty());
  CHECK(run.flags[0].rfind("lenient-realizability", 0) == 0);
}

TEST_CASE("run configuration is validated") {
  const StrategicModel m = random_model(2, 2, 2, 2, 2, 2, 8);
  const HypothesisClasses c = with_decoy(m);
  RunConfig cfg = config_for(m, 0);
  CHECK_THROWS_AS(run_opme(m, make_knowledge(m), c, cfg), ValidationError);
  cfg = config_for(m, 2);
  cfg.delta = 1.5;
  CHECK_THROWS_AS(run_opme(m, make_knowledge(m), c, cfg), ValidationError);
  cfg = config_for(m, 2);
  cfg.mode = TransitionMode::Dynamical;
  CHECK_THROWS_AS(run_opme(m, make_knowledge(m), c, cfg), ConfigError);
}

TEST_CASE("stale confidence sets are flagged between recomputations") {
  const StrategicModel m = random_model(2, 2, 2, 2, 2, 2, 9);
  RunConfig cfg = config_for(m, 7);
  cfg.recompute_every = 3;
  const RunResult run = run_opme(m, make_knowledge(m), with_decoy(m), cfg);
  for (const auto& log : run.episodes) {
    const bool stale = std::find(log.flags.begin(), log.flags.end(), "stale-sets") != log.flags.end();
    CHECK(stale == ((log.episode - 1) % 3 != 0));
  }
}
