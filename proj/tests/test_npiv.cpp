#include <algorithm>
#include <limits>

#include "doctest.h"
#include "opme/npiv.hpp"
#include "support.hpp"

using namespace opme;
using testing::random_model;

namespace {

Tensor constant_f(int S, int A, double c) { return Tensor({S, A}, c); }

Sample sample(int s, int a, int e, double r, int next_s = 0) {
  Sample x;
  x.s = s;
  x.a = a;
  x.e = e;
  x.r = r;
  x.next_s = next_s;
  return x;
}

// Loss by its definition: max over f of sum f d - 1/2 sum f^2.
double loss_oracle(const std::vector<double>& d, const std::vector<std::pair<int, int>>& sa,
                   const std::vector<Tensor>& fs) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& f : fs) {
    double v = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double fv = f(sa[i].first, sa[i].second);
      v += fv * d[i] - 0.5 * fv * fv;
    }
    best = std::max(best, v);
  }
  return best;
}

std::vector<Sample> random_samples(const StrategicModel& m, int h, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(m.num_states));
    const int a = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(m.num_actions));
    out.push_back(env_step(m, h, State{s, {}}, a, rng).observed);
  }
  return out;
}

std::vector<Tensor> random_family(int S, int A, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> fs{Tensor({S, A})};
  for (int i = 1; i < n; ++i) {
    Tensor f({S, A});
    for (double& v : f.values()) v = 2.0 * rng.uniform() - 1.0;
    fs.push_back(f);
  }
  return fs;
}

}  // namespace

TEST_CASE("reward loss hand examples") {
  Tensor R({1, 1, 1});
  const std::vector<Tensor> zero_one{constant_f(1, 1, 0.0), constant_f(1, 1, 1.0)};
  CHECK(empirical_loss_reward({}, R, zero_one) == 0.0);

  R(0, 0, 0) = 0.2;
  std::vector<Sample> one{sample(0, 0, 0, 0.0)};
  CHECK(empirical_loss_reward(one, R, zero_one) == 0.0);

  R(0, 0, 0) = 0.4;
  const std::vector<Tensor> with_opt{constant_f(1, 1, 0.0), constant_f(1, 1, 0.4)};
  CHECK(empirical_loss_reward(one, R, with_opt) == doctest::Approx(0.08).epsilon(1e-12));

  CHECK_THROWS_AS(empirical_loss_reward(one, R, std::vector<Tensor>{}), ConfigError);
}

TEST_CASE("general transition loss hand examples") {
  // S = 2; g = (0, c). With next state 0, the residual is c * P(1 | s, a, e).
  Tensor P({1, 1, 1, 2});
  const std::vector<Tensor> F{constant_f(1, 1, 0.0), constant_f(1, 1, 1.0)};
  CHECK(empirical_loss_transition_general({}, P, std::vector<Tensor>{Tensor({2})}, F) == 0.0);

  P(0, 0, 0, 0) = 0.7;
  P(0, 0, 0, 1) = 0.3;
  const std::vector<Tensor> G{Tensor({2}, std::vector<double>{0.0, 1.0})};
  const std::vector<Sample> one{sample(0, 0, 0, 0.0, 0)};
  CHECK(empirical_loss_transition_general(one, P, G, F) == 0.0);

  P(0, 0, 0, 0) = 0.5;
  P(0, 0, 0, 1) = 0.5;
  const std::vector<Tensor> G3{Tensor({2}, std::vector<double>{0.0, 3.0})};
  CHECK(empirical_loss_transition_general(one, P, G3, F) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(empirical_loss_transition_general(one, P, std::vector<Tensor>{}, F), ConfigError);
  CHECK_THROWS_AS(empirical_loss_transition_general(one, P, G3, std::vector<Tensor>{}), ConfigError);
}

TEST_CASE("dynamical transition loss hand examples") {
  CoordinateMap G{Tensor({1, 1}), Tensor({1, 1, 1})};
  const std::vector<Tensor> F{constant_f(1, 1, 0.0), constant_f(1, 1, 0.6)};
  CHECK(empirical_loss_transition_dynamical({}, G, 0, F) == 0.0);
  Sample x = sample(0, 0, 0, 0.0);
  x.x = {0.0};
  x.next_x = {-0.6};
  const std::vector<Sample> one{x};
  CHECK(empirical_loss_transition_dynamical(one, G, 0, F) == doctest::Approx(0.18).epsilon(1e-12));
  x.next_x = {0.0};
  const std::vector<Sample> exact{x};
  CHECK(empirical_loss_transition_dynamical(exact, G, 0, F) == 0.0);
}

TEST_CASE("losses match the definition, are nonnegative and order invariant") {
  const StrategicModel m = random_model(2, 3, 2, 3, 2, 2, 41);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto data = random_samples(m, 0, 60, seed);
    const auto F = random_family(3, 2, 7, seed + 100);
    Tensor R = true_reward_step(m, 0);
    for (double& v : R.values()) v = std::min(1.0, v + 0.1 * static_cast<double>(seed));
    std::vector<double> d;
    std::vector<std::pair<int, int>> sa;
    for (const auto& x : data) {
      d.push_back(R(x.s, x.a, x.e) - x.r);
      sa.emplace_back(x.s, x.a);
    }
    const double loss = empirical_loss_reward(data, R, F);
    CHECK(loss == doctest::Approx(loss_oracle(d, sa, F)).epsilon(1e-12));
    CHECK(loss >= 0.0);
    std::reverse(data.begin(), data.end());
    std::rotate(data.begin(), data.begin() + 17, data.end());
    CHECK(empirical_loss_reward(data, R, F) == doctest::Approx(loss).epsilon(1e-12));

    // Monotone in F.
    auto bigger = F;
    for (const auto& f : random_family(3, 2, 5, seed + 200)) bigger.push_back(f);
    CHECK(empirical_loss_reward(data, R, bigger) >= loss - 1e-12);

    // General transition loss: definition, and monotone in G.
    const Tensor P = true_transition_step(m, 0);
    std::vector<Tensor> G{Tensor({3}), Tensor({3}, std::vector<double>{0.2, 0.9, 0.4})};
    double expected = 0.0;
    for (const auto& g : G) {
      std::vector<double> dg;
      for (const auto& x : data) {
        double pg = 0.0;
        for (int s2 = 0; s2 < 3; ++s2) pg += P(x.s, x.a, x.e, s2) * g(s2);
        dg.push_back(pg - g(x.next_s));
      }
      std::vector<std::pair<int, int>> sa2;
      for (const auto& x : data) sa2.emplace_back(x.s, x.a);
      expected = std::max(expected, loss_oracle(dg, sa2, F));
    }
    const double tl = empirical_loss_transition_general(data, P, G, F);
    CHECK(tl == doctest::Approx(expected).epsilon(1e-12));
    G.push_back(Tensor({3}, std::vector<double>{1.0, -1.0, 0.5}));
    CHECK(empirical_loss_transition_general(data, P, G, F) >= tl - 1e-12);
  }
}

TEST_CASE("confidence levels") {
  const ClassSizes sizes{16, 4, 8, 2};
  const auto lv = confidence_levels(1.0, 100, 5, sizes, 0.05, 1.0);
  CHECK(lv.beta1 == doctest::Approx(393.75).epsilon(1e-4));
  CHECK(lv.beta1 == doctest::Approx(28.0 * std::log(1280000.0)).epsilon(1e-12));
  CHECK(lv.beta2 == doctest::Approx(28.0 * std::log(100.0 * 5 * 16 * 4 * 2 / 0.05)).epsilon(1e-12));
  CHECK(lv.beta3 == doctest::Approx(28.0 * std::log(100.0 * 5 * 16 * 2 / 0.05)).epsilon(1e-12));

  ClassSizes doubled = sizes;
  doubled.reward *= 2;
  const auto lv2 = confidence_levels(1.0, 100, 5, doubled, 0.05, 0.3);
  const auto lv3 = confidence_levels(1.0, 100, 5, sizes, 0.05, 0.3);
  CHECK(lv2.beta1 - lv3.beta1 == doctest::Approx(28.0 * std::log(2.0) * 0.3).epsilon(1e-12));

  const auto scaled = confidence_levels(2.0, 100, 5, sizes, 0.05, 0.5);
  CHECK(scaled.beta1 == doctest::Approx(lv.beta1 * 0.5 * 4.0).epsilon(1e-12));

  CHECK_THROWS_AS(confidence_levels(1.0, 100, 5, sizes, 0.05, 0.0), ConfigError);
  CHECK_THROWS_AS(confidence_levels(1.0, 100, 5, sizes, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(confidence_levels(1.0, 0, 5, sizes, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(confidence_levels(1.0, 10, 5, ClassSizes{0, 1, 1, 1}, 0.1, 1.0), ConfigError);
}

TEST_CASE("confidence set construction") {
  const StrategicModel noisy = random_model(2, 3, 2, 2, 2, 2, 51);
  HypothesisClasses c = singleton_truth_classes(noisy);
  for (int h = 0; h < 2; ++h) {
    Tensor alt = c.reward[static_cast<std::size_t>(h)][0];
    for (double& v : alt.values()) v = 1.0 - v;
    c.reward[static_cast<std::size_t>(h)].push_back(alt);
  }
  c = realizability_closure_f(noisy, c);
  StepDataset data(2);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) data.append(rollout(noisy, Policy::uniform(2, 3, 2), rng));

  SUBCASE("infinite levels keep everything") {
    const double inf = std::numeric_limits<double>::infinity();
    const ConfidenceLevels lv{inf, inf, inf, 1.0};
    const auto sets = build_confidence_sets(data, c, lv, TransitionMode::General);
    for (int h = 0; h < 2; ++h) {
      CHECK(sets.reward[static_cast<std::size_t>(h)].size() == 2);
      CHECK(sets.transition[static_cast<std::size_t>(h)][0].size() == 1);
    }
    CHECK_FALSE(sets.empty_set_fallback);
  }
  SUBCASE("levels below every loss fall back to the argmin") {
    const ConfidenceLevels lv{-1.0, -1.0, -1.0, 1.0};
    const auto sets = build_confidence_sets(data, c, lv, TransitionMode::General);
    CHECK(sets.empty_set_fallback);
    for (int h = 0; h < 2; ++h) {
      const auto uh = static_cast<std::size_t>(h);
      REQUIRE(sets.reward[uh].size() == 1);
      const auto& losses = sets.reward_loss[uh];
      CHECK(sets.reward[uh][0] == std::min_element(losses.begin(), losses.end()) - losses.begin());
    }
  }
  SUBCASE("incremental statistics match the from-scratch path") {
    std::vector<StepStatistics> stats;
    for (int h = 0; h < 2; ++h) {
      stats.emplace_back(3, 2, 2, 0);
      for (const auto& x : data.step(h)) stats.back().add(x);
    }
    const auto lv = confidence_levels(1.0, 200, 2, class_sizes(c), 0.1, 0.1);
    const auto a = build_confidence_sets(data, c, lv, TransitionMode::General);
    const auto b = build_confidence_sets(stats, c, lv, TransitionMode::General);
    CHECK(a.reward == b.reward);
    CHECK(a.transition == b.transition);
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t j = 0; j < a.reward_loss[h].size(); ++j)
        CHECK(std::abs(a.reward_loss[h][j] - b.reward_loss[h][j]) <= 1e-9);
      for (std::size_t j = 0; j < a.transition_loss[h][0].size(); ++j)
        CHECK(std::abs(a.transition_loss[h][0][j] - b.transition_loss[h][0][j]) <= 1e-9);
    }
  }
}

TEST_CASE("noiseless singleton truth survives with zero loss") {
  StrategicModel m = random_model(3, 2, 2, 2, 1, 1, 61, 0.0, 0.0);
  const HypothesisClasses c = close_classes(m, singleton_truth_classes(m), {});
  StepDataset data(3);
  Rng rng(9);
  for (int k = 0; k < 50; ++k) data.append(rollout(m, Policy::uniform(3, 2, 2), rng));
  const auto lv = confidence_levels(1.0, 50, 3, class_sizes(c), 0.1, 1e-6);
  const auto sets = build_confidence_sets(data, c, lv, TransitionMode::General);
  for (std::size_t h = 0; h < 3; ++h) {
    CHECK(sets.reward[h] == std::vector<int>{0});
    CHECK(sets.transition[h][0] == std::vector<int>{0});
    CHECK(sets.reward_loss[h][0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK_FALSE(sets.empty_set_fallback);
}

TEST_CASE("a wrong reward's loss grows at half its projected squared residual") {
  // Uniform data collection on a fixed model; F holds the exact projection,
  // so loss(k) / k tends to E_d[f_nu^2] / 2 with d the source occupancy.
  const StrategicModel m = random_model(1, 3, 2, 3, 2, 2, 71, 0.3, 0.1);
  HypothesisClasses c = singleton_truth_classes(m);
  Tensor wrong = c.reward[0][0];
  for (double& v : wrong.values()) v = std::min(1.0, v + 0.3);
  c.reward[0].push_back(wrong);
  c = realizability_closure_f(m, c);

  Tensor nu = wrong;
  const Tensor truth = true_reward_step(m, 0);
  for (std::size_t i = 0; i < nu.size(); ++i) nu.values()[i] -= truth.values()[i];
  // H = 1: d(s, a) = 1[s = s1] / A under the uniform policy.
  double p = 0.0;
  for (int a = 0; a < 2; ++a) {
    const double f = testing::oracle_rbar(m, nu, m.source_type_dist, 0, m.initial_state, a);
    p += 0.5 * f * f;
  }
  StepStatistics stats(3, 2, 3, 0);
  Rng rng(5);
  std::vector<double> ks, losses;
  for (int k = 1; k <= 4000; ++k) {
    stats.add(rollout(m, Policy::uniform(1, 3, 2), rng).steps[0]);
    if (k % 200 == 0) {
      ks.push_back(k);
      losses.push_back(stats.reward_loss(wrong, c.disc_f[0]));
    }
  }
  const double slope = testing::ols_slope(ks, losses);
  CHECK(slope == doctest::Approx(p / 2).epsilon(0.2));
}

TEST_CASE("dataset bookkeeping") {
  const StrategicModel m = random_model(3, 2, 2, 2, 2, 1, 3);
  StepDataset data(3);
  Rng rng(1);
  for (int k = 1; k <= 7; ++k) {
    data.append(rollout(m, Policy::uniform(3, 2, 2), rng));
    for (int h = 0; h < 3; ++h) CHECK(data.size(h) == static_cast<std::size_t>(k));
  }
}
