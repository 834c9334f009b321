#include "opme/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "opme/planner.hpp"

namespace opme {

namespace {

double jitter(Rng& rng, double amp) { return amp * (2.0 * rng.uniform() - 1.0); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void respond(StrategicModel& m, int h, int s, int a, int t, int b) {
  auto row = m.agent_reward.slice({h, s, a, t});
  std::fill(row.begin(), row.end(), 0.0);
  row[static_cast<std::size_t>(b)] = 1.0;
}

// e = b for every (h, s, a, t).
void feedback_equals_response(StrategicModel& m) {
  for (int h = 0; h < m.horizon; ++h)
    for (int s = 0; s < m.num_states; ++s)
      for (int a = 0; a < m.num_actions; ++a)
        for (int t = 0; t < m.num_types; ++t)
          for (int b = 0; b < m.num_agent_actions; ++b) {
            auto row = m.feedback_kernel.slice({h, s, a, t, b});
            std::fill(row.begin(), row.end(), 0.0);
            row[static_cast<std::size_t>(b % m.num_feedbacks)] = 1.0;
          }
}

void set_types(StrategicModel& m, std::vector<double> source, std::vector<double> target) {
  for (int h = 0; h < m.horizon; ++h)
    for (int t = 0; t < m.num_types; ++t) {
      m.source_type_dist(h, t) = source[static_cast<std::size_t>(t)];
      m.target_type_dist(h, t) = target[static_cast<std::size_t>(t)];
    }
}

void set_confound(StrategicModel& m, std::vector<double> by_type) {
  for (int h = 0; h < m.horizon; ++h)
    for (int t = 0; t < m.num_types; ++t) m.reward_confound(h, t) = by_type[static_cast<std::size_t>(t)];
  m.demean_confounds();
}

void normalize(std::span<double> row) {
  double total = 0.0;
  for (double v : row) total += v;
  for (double& v : row) v /= total;
}

// Random row on the simplex with every entry at least `floor` before
// normalization.
void random_row(Rng& rng, std::span<double> row, double floor = 0.05) {
  for (double& v : row) v = floor + rng.uniform();
  normalize(row);
}

Tensor tweak_reward(const Tensor& base, const std::function<double(int, int, int, double)>& fn) {
  Tensor out = base;
  for (int s = 0; s < base.dim(0); ++s)
    for (int a = 0; a < base.dim(1); ++a)
      for (int e = 0; e < base.dim(2); ++e) out(s, a, e) = clamp01(fn(s, a, e, base(s, a, e)));
  return out;
}

// Mixes a kernel (S, A, E, S) with a point mass on `target`.
Tensor pull_towards(const Tensor& kernel, int target, double weight) {
  Tensor out = kernel;
  auto v = out.values();
  const int S = kernel.dim(3);
  for (std::size_t off = 0; off < v.size(); off += static_cast<std::size_t>(S)) {
    for (int n = 0; n < S; ++n) v[off + static_cast<std::size_t>(n)] *= 1.0 - weight;
    v[off + static_cast<std::size_t>(target)] += weight;
  }
  return out;
}

PlanResult truth_plan(const StrategicModel& m) { return value_iteration(true_aggregated_model(m, m.target_type_dist)); }

// ------------------------------------------------------------ recsys-small

// Recommendation system with non-compliant clients. State: inventory
// condition. Action: recommended item (0 or 1). Type 0 orders what is
// recommended; type 1 always orders its own favourite, item 2. The ordered
// item is the feedback.
StrategicModel recsys_env(std::vector<double> source, std::vector<double> target, std::vector<double> confound,
                          const std::function<double(int, int, int, int)>& reward,
                          const std::function<double(int, int, int)>& next) {
  constexpr int H = 3, S = 3, A = 2, E = 3, T = 2;
  StrategicModel m = blank_model(H, S, A, E, T, E);
  set_types(m, std::move(source), std::move(target));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        respond(m, h, s, a, 0, a);
        respond(m, h, s, a, 1, 2);
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = clamp01(reward(h, s, a, e));
          auto row = m.transition_kernel.slice({h, s, a, e});
          for (int n = 0; n < S; ++n) row[static_cast<std::size_t>(n)] = next(s, e, n);
          normalize(row);
        }
      }
  feedback_equals_response(m);
  set_confound(m, std::move(confound));
  m.reward_noise_std = 0.1;
  return m;
}

// Next inventory level: mostly a fixed mix, tilted slightly by the item sold.
double recsys_next(int, int e, int n) {
  constexpr double base[3] = {0.5, 0.3, 0.2};
  constexpr double tilt[3][3] = {{0.04, -0.02, -0.02}, {-0.02, 0.04, -0.02}, {-0.02, -0.02, 0.04}};
  return base[n] + tilt[e][n];
}

struct Inflation {
  int h;
  int s;
  double delta;
};

Scenario recsys_small(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  // Per (h, s): the better recommendation and its margin over the other one.
  constexpr double margin[3][3] = {{0.10, 0.08, 0.08}, {0.03, 0.15, 0.08}, {0.08, 0.05, 0.15}};
  constexpr double item_bonus[3] = {0.0, 0.02, 0.04};
  Tensor low({3, 3});
  for (double& v : low.values()) v = 0.1 + 0.1 * rng.uniform();
  StrategicModel m = recsys_env(
      {0.6, 0.4}, {0.35, 0.65}, {-0.25, 0.25},
      [&](int h, int s, int a, int e) {
        const int good = (h + s) % 2;
        return low(h, s) + (a == good ? margin[h][s] : 0.0) + item_bonus[e];
      },
      recsys_next);
  HypothesisClasses c = singleton_truth_classes(m);
  const PlanResult plan = truth_plan(m);

  // Each wrong candidate overstates the truth-suboptimal action at one cell.
  const Inflation inflations[] = {{0, 0, 0.6}, {1, 0, 0.45}, {1, 1, 0.85}, {2, 2, 0.8}, {2, 1, 0.4}};
  for (const auto& inf : inflations) {
    const int bad = 1 - plan.policy.deterministic_action(inf.h, inf.s);
    const auto uh = static_cast<std::size_t>(inf.h);
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [&](int s, int a, int, double v) {
      return (s == inf.s && a == bad) ? v + inf.delta : v;
    }));
  }
  // Step 0 also gets a pessimistic candidate that understates the optimal action.
  const int good0 = plan.policy.deterministic_action(0, m.initial_state);
  c.reward[0].push_back(tweak_reward(c.reward[0][0], [&](int s, int a, int, double v) {
    return (s == m.initial_state && a == good0) ? v - 0.1 : v;
  }));
  for (int h = 0; h < m.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    c.transition[uh].push_back(pull_towards(c.transition[uh][0], 0, 0.3));
  }
  return {"recsys-small", seed, std::move(m), std::move(c)};
}

// Same shop, but type 1's favourite item is strongly tied to the hidden
// confound, so E[r | s, a, e] differs from R* by a large margin at e = 2.
Scenario recsys_confounded(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr double profit[3][3] = {{0.40, 0.35, 0.15}, {0.45, 0.50, 0.25}, {0.35, 0.55, 0.30}};
  StrategicModel m = recsys_env(
      {0.5, 0.5}, {0.35, 0.65}, {-0.6, 0.6},
      [&](int, int s, int a, int e) { return profit[s][e] + (a == e ? 0.05 : 0.0) + jitter(rng, 0.02); },
      recsys_next);
  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < m.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const Tensor truth = c.reward[uh][0];
    c.reward[uh].push_back(tweak_reward(truth, [](int, int, int e, double v) { return e == 2 ? v + 0.6 : v; }));
    c.reward[uh].push_back(tweak_reward(truth, [](int, int, int, double v) { return v + 0.1; }));
    c.reward[uh].push_back(tweak_reward(truth, [](int, int, int, double v) { return v + 0.4; }));
    c.transition[uh].push_back(pull_towards(c.transition[uh][0], 0, 0.5));
  }
  return {"recsys-confounded", seed, std::move(m), std::move(c)};
}

// ---------------------------------------------------------- contract-small

// Shareholders (principal) and a CEO (agent). State: stock price low/high.
// Action: keep the base contract or offer a bonus. Type: diligent or lazy.
// Agent action: effort level. Feedback: operational status bad/good.
Scenario contract_small(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr int H = 3, S = 2, A = 2, E = 2, T = 2, Ba = 2;
  StrategicModel m = blank_model(H, S, A, E, T, Ba);
  set_types(m, {0.5, 0.5}, {0.3, 0.7});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        respond(m, h, s, a, 0, 1);
        respond(m, h, s, a, 1, a == 1 ? 1 : 0);
        for (int t = 0; t < T; ++t)
          for (int b = 0; b < Ba; ++b) {
            const double good = b == 1 ? 0.8 : 0.3;
            m.feedback_kernel(h, s, a, t, b, 1) = good;
            m.feedback_kernel(h, s, a, t, b, 0) = 1.0 - good;
          }
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = clamp01(0.2 + 0.3 * s + 0.3 * e - 0.15 * a + jitter(rng, 0.03));
          const double up = std::clamp(0.2 + 0.3 * s + 0.4 * e + jitter(rng, 0.05), 0.05, 0.95);
          m.transition_kernel(h, s, a, e, 1) = up;
          m.transition_kernel(h, s, a, e, 0) = 1.0 - up;
        }
      }
  set_confound(m, {0.1, -0.1});
  m.reward_noise_std = 0.1;

  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const Tensor truth = c.reward[uh][0];
    c.reward[uh].push_back(tweak_reward(truth, [](int, int a, int, double v) { return a == 1 ? v + 0.25 : v; }));
    c.reward[uh].push_back(tweak_reward(truth, [](int, int, int e, double v) { return e == 1 ? v - 0.2 : v + 0.1; }));
    c.transition[uh].push_back(pull_towards(c.transition[uh][0], 1, 0.4));
  }
  return {"contract-small", seed, std::move(m), std::move(c)};
}

// ---------------------------------------------------------- shifted-target

// Fully type-separating feedback (e = t) with a source population that
// rarely produces type 1 and a target made almost entirely of it.
Scenario shifted_target(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr int H = 2, S = 2, A = 2, E = 2, T = 2;
  StrategicModel m = blank_model(H, S, A, E, T, T);
  set_types(m, {0.9, 0.1}, {0.1, 0.9});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        for (int t = 0; t < T; ++t) respond(m, h, s, a, t, t);
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = 0.2 + 0.6 * rng.uniform();
          random_row(rng, m.transition_kernel.slice({h, s, a, e}), 0.2);
        }
      }
  feedback_equals_response(m);
  set_confound(m, {-0.05, 0.3});
  m.reward_noise_std = 0.1;

  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const Tensor truth = c.reward[uh][0];
    c.reward[uh].push_back(tweak_reward(truth, [](int, int, int e, double v) { return e == 1 ? v + 0.2 : v; }));
    c.reward[uh].push_back(tweak_reward(truth, [](int, int a, int e, double v) { return e == 1 && a == 0 ? v - 0.2 : v; }));
    Tensor wrong = c.transition[uh][0];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        auto row = wrong.slice({s, a, 1});
        std::reverse(row.begin(), row.end());
      }
    c.transition[uh].push_back(std::move(wrong));
  }
  return {"shifted-target", seed, std::move(m), std::move(c)};
}

// ---------------------------------------------------------------- linear-d

// Rewards linear in fixed features phi(s, a, e) in [0, 1]^3 with simplex
// weights; transitions are simplex mixtures of three base kernels.
Scenario linear_d(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr int H = 2, S = 3, A = 2, E = 2, T = 2, d = 3;
  StrategicModel m = blank_model(H, S, A, E, T, T);
  set_types(m, {0.6, 0.4}, {0.4, 0.6});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        respond(m, h, s, a, 0, a % 2);
        respond(m, h, s, a, 1, 1);
        for (int t = 0; t < T; ++t) {
          for (int b = 0; b < T; ++b) {
            m.feedback_kernel(h, s, a, t, b, b) = 0.85;
            m.feedback_kernel(h, s, a, t, b, 1 - b) = 0.15;
          }
        }
      }

  Tensor phi({H, S, A, E, d});
  for (double& v : phi.values()) v = rng.uniform();
  Tensor base({d, S, A, E, S});
  for (int k = 0; k < d; ++k)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int e = 0; e < E; ++e) random_row(rng, base.slice({k, s, a, e}), 0.1);

  auto simplex = [&rng] {
    std::vector<double> w(d);
    random_row(rng, w, 0.0);
    return w;
  };
  auto linear_reward = [&](int h, const std::vector<double>& theta) {
    Tensor r({S, A, E});
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int e = 0; e < E; ++e) {
          double v = 0.0;
          for (int k = 0; k < d; ++k) v += phi(h, s, a, e, k) * theta[static_cast<std::size_t>(k)];
          r(s, a, e) = v;
        }
    return r;
  };
  auto linear_kernel = [&](const std::vector<double>& theta) {
    Tensor p({S, A, E, S});
    for (int k = 0; k < d; ++k) {
      const auto src = base.slice({k});
      auto dst = p.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += theta[static_cast<std::size_t>(k)] * src[i];
    }
    return p;
  };

  HypothesisClasses c;
  c.horizon = H;
  c.bound = 1.0;
  c.reward.resize(H);
  c.transition.resize(H);
  c.disc_f.resize(H);
  c.disc_g.resize(H + 1);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    for (int j = 0; j < 4; ++j) c.reward[uh].push_back(linear_reward(h, simplex()));
    for (int j = 0; j < 2; ++j) c.transition[uh].push_back(linear_kernel(simplex()));
    const Tensor& r = c.reward[uh][0];
    std::copy(r.values().begin(), r.values().end(), m.principal_reward.slice({h}).begin());
    const Tensor& p = c.transition[uh][0];
    std::copy(p.values().begin(), p.values().end(), m.transition_kernel.slice({h}).begin());
    c.truth_reward.push_back(0);
    c.truth_transition.push_back(0);
    c.disc_f[uh].push_back(Tensor({S, A}));
    c.disc_g[uh].push_back(Tensor({S}));
  }
  c.disc_g[H].push_back(Tensor({S}));
  set_confound(m, {0.15, -0.1});
  m.reward_noise_std = 0.1;
  return {"linear-d", seed, std::move(m), std::move(c)};
}

// ------------------------------------------------------------------ dyn-1d

// One-dimensional dynamical system on [-2, 2]. Type 0 complies with the
// action, type 1 always answers 1; the answer is the feedback.
Scenario dyn_1d(std::uint64_t seed, const GeneratorOptions& opts) {
  Rng rng(seed);
  constexpr int H = 3, A = 2, E = 2, T = 2;
  GridSpec grid{{-2.0}, {2.0}, {opts.grid_cells.value_or(8)}};
  const int S = grid.num_cells();
  StrategicModel m = blank_model(H, S, A, E, T, E);
  m.mode = TransitionMode::Dynamical;
  m.transition_kernel = Tensor();
  m.grid = grid;
  m.initial_point = {0.1};
  m.initial_state = grid.cell_of(m.initial_point);
  set_types(m, {0.6, 0.4}, {0.3, 0.7});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        respond(m, h, s, a, 0, a);
        respond(m, h, s, a, 1, 1);
        const double x = grid.center(s)[0];
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = clamp01(0.4 + 0.25 * std::tanh(x) * (2 * a - 1) + 0.1 * e);
        }
      }
  feedback_equals_response(m);

  m.mean_map.resize(H);
  for (int h = 0; h < H; ++h) {
    CoordinateMap g{Tensor({A, E}), Tensor({A, E, 1})};
    for (int a = 0; a < A; ++a)
      for (int e = 0; e < E; ++e) {
        g.offset(a, e) = 0.4 * (2 * e - 1) + 0.2 * (2 * a - 1) + jitter(rng, 0.05);
        g.gain(a, e, 0) = 0.5;
      }
    m.mean_map[static_cast<std::size_t>(h)] = {g};
  }
  m.trans_confound = Tensor({H, T, 1});
  for (int h = 0; h < H; ++h) {
    m.trans_confound(h, 0, 0) = -0.3;
    m.trans_confound(h, 1, 0) = 0.3;
  }
  set_confound(m, {-0.1, 0.1});
  m.reward_noise_std = 0.1;
  m.trans_noise_std = 1.0;

  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    auto& axis = c.dynamics[uh][0];
    const CoordinateMap truth = axis[0];
    CoordinateMap shifted = truth, patched = truth, steep = truth;
    for (double& v : shifted.offset.values()) v += 0.5;
    patched.offset(1, 0) -= 0.8;
    for (double& v : steep.gain.values()) v = 0.9;
    axis.push_back(shifted);
    axis.push_back(patched);
    axis.push_back(steep);
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [](int, int a, int, double v) { return a == 1 ? v + 0.2 : v; }));
  }
  return {"dyn-1d", seed, std::move(m), std::move(c)};
}

// ----------------------------------------------------- diagnostic instances

// One type, one agent action, and e fixed by (s, a): every conditional
// expectation given (s, a) is the function itself.
Scenario degenerate_feedback(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr int H = 2, S = 2, A = 2, E = 2;
  StrategicModel m = blank_model(H, S, A, E, 1, 1);
  set_types(m, {1.0}, {1.0});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        auto row = m.feedback_kernel.slice({h, s, a, 0, 0});
        std::fill(row.begin(), row.end(), 0.0);
        row[static_cast<std::size_t>((s + a) % E)] = 1.0;
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = 0.1 + 0.8 * rng.uniform();
          random_row(rng, m.transition_kernel.slice({h, s, a, e}), 0.2);
        }
      }
  m.reward_noise_std = 0.1;
  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [&](int, int, int, double v) { return v + jitter(rng, 0.1); }));
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [](int s, int, int, double v) { return s == 0 ? v + 0.1 : v; }));
    c.transition[uh].push_back(pull_towards(c.transition[uh][0], 0, 0.3));
  }
  return {"degenerate-feedback", seed, std::move(m), std::move(c)};
}

// Source (0.8, 0.2), target all type 1, e = t, transitions ignore e, and
// every wrong reward differs from R* only at e = 1: the target puts mass 1
// where the source puts 0.2, so the transfer ratio is 5 for every policy.
Scenario transfer_five(std::uint64_t seed, const GeneratorOptions&) {
  Rng rng(seed);
  constexpr int H = 2, S = 2, A = 2, E = 2, T = 2;
  StrategicModel m = blank_model(H, S, A, E, T, T);
  set_types(m, {0.8, 0.2}, {0.0, 1.0});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        for (int t = 0; t < T; ++t) respond(m, h, s, a, t, t);
        std::vector<double> next(S);
        random_row(rng, next, 0.2);
        for (int e = 0; e < E; ++e) {
          m.principal_reward(h, s, a, e) = 0.2 + 0.5 * rng.uniform();
          std::copy(next.begin(), next.end(), m.transition_kernel.slice({h, s, a, e}).begin());
        }
      }
  feedback_equals_response(m);
  set_confound(m, {0.05, -0.2});
  m.reward_noise_std = 0.1;
  HypothesisClasses c = singleton_truth_classes(m);
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [](int, int, int e, double v) { return e == 1 ? v + 0.25 : v; }));
    c.reward[uh].push_back(tweak_reward(c.reward[uh][0], [](int s, int, int e, double v) { return e == 1 && s == 1 ? v - 0.15 : v; }));
  }
  return {"transfer-five", seed, std::move(m), std::move(c)};
}

using Generator = Scenario (*)(std::uint64_t, const GeneratorOptions&);

const std::map<std::string, Generator>& registry() {
  static const std::map<std::string, Generator> table = {
      {"recsys-small", recsys_small},
      {"recsys-confounded", recsys_confounded},
      {"contract-small", contract_small},
      {"shifted-target", shifted_target},
      {"linear-d", linear_d},
      {"dyn-1d", dyn_1d},
      {"degenerate-feedback", degenerate_feedback},
      {"transfer-five", transfer_five},
  };
  return table;
}

}  // namespace

StrategicModel blank_model(int horizon, int num_states, int num_actions, int num_feedbacks, int num_types,
                           int num_agent_actions) {
  const int H = horizon, S = num_states, A = num_actions, E = num_feedbacks, T = num_types, Ba = num_agent_actions;
  StrategicModel m;
  m.horizon = H;
  m.num_states = S;
  m.num_actions = A;
  m.num_feedbacks = E;
  m.num_types = T;
  m.num_agent_actions = Ba;
  m.source_type_dist = Tensor({H, T}, 1.0 / T);
  m.target_type_dist = Tensor({H, T}, 1.0 / T);
  m.agent_reward = Tensor({H, S, A, T, Ba});
  m.feedback_kernel = Tensor({H, S, A, T, Ba, E});
  for (std::size_t off = 0; off < m.feedback_kernel.size(); off += static_cast<std::size_t>(E)) {
    m.feedback_kernel.values()[off] = 1.0;
  }
  m.principal_reward = Tensor({H, S, A, E});
  m.reward_confound = Tensor({H, T});
  m.transition_kernel = Tensor({H, S, A, E, S});
  for (std::size_t off = 0; off < m.transition_kernel.size(); off += static_cast<std::size_t>(S)) {
    m.transition_kernel.values()[off] = 1.0;
  }
  return m;
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, gen] : registry()) names.push_back(name);
  return names;
}

HypothesisClasses close_classes(const StrategicModel& env, HypothesisClasses classes, const ClosureOptions& closures) {
  if (closures.closure_g && env.mode == TransitionMode::General) {
    classes = value_closure_g(std::move(classes), make_knowledge(env), closures.caps);
  }
  if (closures.closure_f) classes = realizability_closure_f(env, std::move(classes), closures.caps);
  return classes;
}

Scenario generate_scenario(const std::string& name, std::uint64_t seed, const GeneratorOptions& options) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown scenario generator '" + name + "'");
  if (options.grid_cells && *options.grid_cells < 1) throw ConfigError("grid_cells must be >= 1");
  return it->second(seed, options);
}

Scenario make_scenario(const std::string& name, std::uint64_t seed, const ClosureOptions& closures,
                       const GeneratorOptions& options) {
  Scenario sc = generate_scenario(name, seed, options);
  sc.env.validate();
  sc.classes = close_classes(sc.env, std::move(sc.classes), closures);
  sc.classes.validate(sc.env);
  return sc;
}

}  // namespace opme
