#include "opme/env.hpp"

#include <algorithm>
#include <sstream>

#include "opme/aggregation.hpp"

namespace opme {

const char* to_string(TransitionMode mode) {
  return mode == TransitionMode::General ? "general" : "dynamical";
}

TransitionMode transition_mode_from_string(const std::string& name) {
  if (name == "general" || name == "G") return TransitionMode::General;
  if (name == "dynamical" || name == "D") return TransitionMode::Dynamical;
  throw ConfigError("unknown transition mode '" + name + "'");
}

// ---------------------------------------------------------------- GridSpec

int GridSpec::num_cells() const {
  int n = 1;
  for (int c : cells) n *= c;
  return cells.empty() ? 0 : n;
}

double GridSpec::width(int axis) const {
  const auto i = static_cast<std::size_t>(axis);
  return (upper[i] - lower[i]) / cells[i];
}

int GridSpec::cell_of(std::span<const double> x) const {
  std::vector<int> coords(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double pos = (x[i] - lower[i]) / width(static_cast<int>(i));
    int k = pos <= 0.0 ? 0 : static_cast<int>(pos);
    coords[i] = std::clamp(k, 0, cells[i] - 1);
  }
  return ravel(coords);
}

std::vector<int> GridSpec::unravel(int cell) const {
  std::vector<int> coords(cells.size());
  for (std::size_t i = cells.size(); i-- > 0;) {
    coords[i] = cell % cells[i];
    cell /= cells[i];
  }
  return coords;
}

int GridSpec::ravel(std::span<const int> coords) const {
  int cell = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) cell = cell * cells[i] + coords[i];
  return cell;
}

std::vector<double> GridSpec::center(int cell) const {
  const auto coords = unravel(cell);
  std::vector<double> c(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    c[i] = lower[i] + (coords[i] + 0.5) * width(static_cast<int>(i));
  }
  return c;
}

std::vector<double> GridSpec::axis_mass(int axis, double mean, double std) const {
  const auto i = static_cast<std::size_t>(axis);
  const int n = cells[i];
  std::vector<double> mass(static_cast<std::size_t>(n), 0.0);
  const double w = width(axis);
  if (std <= 0.0) {
    std::vector<double> point{mean};
    GridSpec line{{lower[i]}, {upper[i]}, {n}};
    mass[static_cast<std::size_t>(line.cell_of(point))] = 1.0;
    return mass;
  }
  auto cdf = [&](double edge) { return 0.5 * std::erfc(-(edge - mean) / (std * std::sqrt(2.0))); };
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    const double next = k + 1 == n ? 1.0 : cdf(lower[i] + (k + 1) * w);
    mass[static_cast<std::size_t>(k)] = std::max(0.0, next - prev);
    prev = next;
  }
  return mass;
}

double CoordinateMap::operator()(std::span<const double> x, int a, int e) const {
  double v = offset(a, e);
  const int d = gain.dim(2);
  for (int j = 0; j < d; ++j) v += gain(a, e, j) * std::tanh(x[static_cast<std::size_t>(j)]);
  return v;
}

// ---------------------------------------------------------- StrategicModel

void StrategicModel::demean_confounds() {
  for (int h = 0; h < horizon; ++h) {
    double mean = 0.0;
    for (int t = 0; t < num_types; ++t) mean += source_type_dist(h, t) * reward_confound(h, t);
    for (int t = 0; t < num_types; ++t) reward_confound(h, t) -= mean;
    if (mode == TransitionMode::Dynamical && !trans_confound.empty()) {
      for (int i = 0; i < state_dim(); ++i) {
        double m = 0.0;
        for (int t = 0; t < num_types; ++t) m += source_type_dist(h, t) * trans_confound(h, t, i);
        for (int t = 0; t < num_types; ++t) trans_confound(h, t, i) -= m;
      }
    }
  }
}

namespace {

void expect_shape(std::vector<std::string>& out, const char* name, const Tensor& t, std::vector<int> shape) {
  if (t.shape() != shape) {
    std::ostringstream msg;
    msg << name << " has shape [";
    for (std::size_t i = 0; i < t.shape().size(); ++i) msg << (i ? "," : "") << t.shape()[i];
    msg << "], expected [";
    for (std::size_t i = 0; i < shape.size(); ++i) msg << (i ? "," : "") << shape[i];
    msg << "]";
    out.push_back(msg.str());
  }
}

void expect_rows(std::vector<std::string>& out, const char* name, const Tensor& t) {
  if (t.empty()) return;
  const int n = t.shape().back();
  const auto values = t.values();
  for (std::size_t off = 0; off < values.size(); off += static_cast<std::size_t>(n)) {
    if (!is_distribution(values.subspan(off, static_cast<std::size_t>(n)))) {
      out.push_back(std::string(name) + " has a row that is not a probability vector");
      return;
    }
  }
}

}  // namespace

void StrategicModel::validate() const {
  std::vector<std::string> v;
  const int H = horizon, S = num_states, A = num_actions, E = num_feedbacks, T = num_types,
            Ba = num_agent_actions;
  if (H < 1 || S < 1 || A < 1 || E < 1 || T < 1 || Ba < 1) {
    throw ValidationError({"all sizes must be positive"});
  }
  expect_shape(v, "source_type_dist", source_type_dist, {H, T});
  expect_shape(v, "target_type_dist", target_type_dist, {H, T});
  expect_shape(v, "agent_reward", agent_reward, {H, S, A, T, Ba});
  expect_shape(v, "feedback_kernel", feedback_kernel, {H, S, A, T, Ba, E});
  expect_shape(v, "principal_reward", principal_reward, {H, S, A, E});
  expect_shape(v, "reward_confound", reward_confound, {H, T});
  if (mode == TransitionMode::General) {
    expect_shape(v, "transition_kernel", transition_kernel, {H, S, A, E, S});
  } else {
    if (grid.dim() < 1 || grid.dim() > 2) v.push_back("dynamical mode supports state dimension 1 or 2");
    if (grid.num_cells() != S) v.push_back("num_states must equal the grid cell count in dynamical mode");
    if (static_cast<int>(initial_point.size()) != grid.dim()) v.push_back("initial_point dimension mismatch");
    if (static_cast<int>(mean_map.size()) != H) v.push_back("mean_map must have one entry per step");
    for (const auto& step : mean_map) {
      if (static_cast<int>(step.size()) != grid.dim()) v.push_back("mean_map needs one coordinate map per axis");
      for (const auto& m : step) {
        if (m.offset.shape() != std::vector<int>{A, E} || m.gain.shape() != std::vector<int>{A, E, grid.dim()}) {
          v.push_back("coordinate map shape mismatch");
        }
      }
    }
    expect_shape(v, "trans_confound", trans_confound, {H, T, grid.dim()});
    if (trans_noise_std < 0.0) v.push_back("trans_noise_std must be nonnegative");
  }
  if (!v.empty()) throw ValidationError(v);

  if (initial_state < 0 || initial_state >= S) v.push_back("initial_state out of range");
  expect_rows(v, "source_type_dist", source_type_dist);
  expect_rows(v, "target_type_dist", target_type_dist);
  expect_rows(v, "feedback_kernel", feedback_kernel);
  if (mode == TransitionMode::General) expect_rows(v, "transition_kernel", transition_kernel);
  if (reward_noise_std < 0.0) v.push_back("reward_noise_std must be nonnegative");
  if (principal_reward.min() < 0.0 || principal_reward.max() > reward_bound) {
    v.push_back("principal_reward outside [0, reward_bound]");
  }
  for (int h = 0; h < H; ++h) {
    double m = 0.0;
    for (int t = 0; t < T; ++t) m += source_type_dist(h, t) * reward_confound(h, t);
    if (std::abs(m) > 1e-9) v.push_back("reward_confound is not zero-mean under the source at step " + std::to_string(h));
    if (mode == TransitionMode::Dynamical) {
      for (int i = 0; i < grid.dim(); ++i) {
        double mi = 0.0;
        for (int t = 0; t < T; ++t) mi += source_type_dist(h, t) * trans_confound(h, t, i);
        if (std::abs(mi) > 1e-9) v.push_back("trans_confound is not zero-mean under the source at step " + std::to_string(h));
      }
    }
  }
  if (!v.empty()) throw ValidationError(v);
}

// ------------------------------------------------------------- knowledge

Tensor feedback_by_type(const StrategicModel& model) {
  const int H = model.horizon, S = model.num_states, A = model.num_actions, T = model.num_types,
            E = model.num_feedbacks;
  Tensor out({H, S, A, T, E});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int t = 0; t < T; ++t) {
          const int b = best_response(model, h, s, a, t);
          for (int e = 0; e < E; ++e) out(h, s, a, t, e) = model.feedback_kernel(h, s, a, t, b, e);
        }
  return out;
}

Tensor feedback_mix(const Tensor& by_type, const Tensor& type_dist) {
  const int H = by_type.dim(0), S = by_type.dim(1), A = by_type.dim(2), T = by_type.dim(3),
            E = by_type.dim(4);
  Tensor mix({H, S, A, E});
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int e = 0; e < E; ++e) {
          double p = 0.0;
          for (int t = 0; t < T; ++t) p += type_dist(h, t) * by_type(h, s, a, t, e);
          mix(h, s, a, e) = p;
        }
  return mix;
}

LearnerKnowledge make_knowledge(const StrategicModel& model) {
  LearnerKnowledge k;
  k.horizon = model.horizon;
  k.num_states = model.num_states;
  k.num_actions = model.num_actions;
  k.num_feedbacks = model.num_feedbacks;
  k.num_types = model.num_types;
  k.initial_state = model.initial_state;
  k.mode = model.mode;
  k.target_type_dist = model.target_type_dist;
  k.feedback_by_type = feedback_by_type(model);
  k.target_feedback_mix = feedback_mix(k.feedback_by_type, k.target_type_dist);
  if (model.mode == TransitionMode::Dynamical) {
    k.grid = model.grid;
    k.initial_point = model.initial_point;
    k.initial_state = model.grid.cell_of(model.initial_point);
    k.planning_noise_std = model.trans_noise_std;
  }
  return k;
}

// ---------------------------------------------------------------- Policy

Policy::Policy(Tensor probs) : probs_(std::move(probs)) {
  if (probs_.rank() != 3) throw ConfigError("policy tensor must be (H, S, A)");
  const auto values = probs_.values();
  const auto A = static_cast<std::size_t>(probs_.dim(2));
  for (std::size_t off = 0; off < values.size(); off += A) {
    if (!is_distribution(values.subspan(off, A))) throw ConfigError("policy row is not a probability vector");
  }
}

Policy Policy::uniform(int horizon, int num_states, int num_actions) {
  return Policy(Tensor({horizon, num_states, num_actions}, 1.0 / num_actions));
}

Policy Policy::deterministic(int horizon, int num_states, int num_actions, std::span<const int> actions) {
  if (actions.size() != static_cast<std::size_t>(horizon * num_states)) {
    throw ConfigError("deterministic policy needs one action per (h, s)");
  }
  Tensor probs({horizon, num_states, num_actions});
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < num_states; ++s) {
      const int a = actions[static_cast<std::size_t>(h * num_states + s)];
      check_index(a, num_actions, "action");
      probs(h, s, a) = 1.0;
    }
  return Policy(std::move(probs));
}

int Policy::sample(int h, int s, Rng& rng) const { return rng.categorical(row(h, s)); }

int Policy::deterministic_action(int h, int s) const {
  const auto r = row(h, s);
  for (std::size_t a = 0; a < r.size(); ++a) {
    if (r[a] == 1.0) return static_cast<int>(a);
  }
  return -1;
}

const Policy& MixturePolicy::sample(Rng& rng) const {
  if (components.empty()) throw ConfigError("empty mixture policy");
  const auto i = static_cast<std::size_t>(rng.next_u64() % components.size());
  return components[i];
}

// ------------------------------------------------------------ simulation

int best_response(const StrategicModel& model, int h, int s, int a, int t) {
  check_index(h, model.horizon, "step");
  check_index(s, model.num_states, "state");
  check_index(a, model.num_actions, "action");
  check_index(t, model.num_types, "type");
  const auto payoffs = model.agent_reward.slice({h, s, a, t});
  int best = 0;
  for (int b = 1; b < model.num_agent_actions; ++b) {
    if (payoffs[static_cast<std::size_t>(b)] > payoffs[static_cast<std::size_t>(best)]) best = b;
  }
  return best;
}

State initial_state(const StrategicModel& model) {
  State st;
  if (model.mode == TransitionMode::Dynamical) {
    st.point = model.initial_point;
    st.index = model.grid.cell_of(st.point);
  } else {
    st.index = model.initial_state;
  }
  return st;
}

StepOutcome env_step(const StrategicModel& model, int h, const State& state, int a, Rng& rng) {
  check_index(h, model.horizon, "step");
  check_index(state.index, model.num_states, "state");
  check_index(a, model.num_actions, "action");
  const int s = state.index;

  StepOutcome out;
  const int t = rng.categorical(model.source_type_dist.slice({h}));
  const int b = best_response(model, h, s, a, t);
  const int e = rng.categorical(model.feedback_kernel.slice({h, s, a, t, b}));
  const double xi = model.reward_confound(h, t) + model.reward_noise_std * rng.normal();

  out.observed.s = s;
  out.observed.a = a;
  out.observed.e = e;
  out.observed.r = model.principal_reward(h, s, a, e) + xi;
  out.hidden.type = t;
  out.hidden.agent_action = b;
  out.hidden.xi = xi;

  if (model.mode == TransitionMode::General) {
    out.next.index = rng.categorical(model.transition_kernel.slice({h, s, a, e}));
  } else {
    const int d = model.grid.dim();
    out.next.point.resize(static_cast<std::size_t>(d));
    out.hidden.eta.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double eta = model.trans_confound(h, t, i) + model.trans_noise_std * rng.normal();
      out.hidden.eta[ui] = eta;
      out.next.point[ui] = model.mean_map[static_cast<std::size_t>(h)][ui](state.point, a, e) + eta;
    }
    out.next.index = model.grid.cell_of(out.next.point);
    out.observed.x = state.point;
    out.observed.next_x = out.next.point;
  }
  out.observed.next_s = out.next.index;
  return out;
}

Trajectory rollout(const StrategicModel& model, const Policy& policy, Rng& rng) {
  if (policy.horizon() != model.horizon || policy.num_states() != model.num_states ||
      policy.num_actions() != model.num_actions) {
    throw ConfigError("policy shape does not match the environment");
  }
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(model.horizon));
  traj.hidden.reserve(static_cast<std::size_t>(model.horizon));
  State state = initial_state(model);
  for (int h = 0; h < model.horizon; ++h) {
    const int a = policy.sample(h, state.index, rng);
    auto step = env_step(model, h, state, a, rng);
    traj.steps.push_back(std::move(step.observed));
    traj.hidden.push_back(std::move(step.hidden));
    state = std::move(step.next);
  }
  return traj;
}

AggregatedMDP true_aggregated_model(const StrategicModel& model, const Tensor& type_dist) {
  const int H = model.horizon, S = model.num_states, A = model.num_actions;
  if (type_dist.shape() != std::vector<int>{H, model.num_types}) throw ConfigError("type distribution shape mismatch");
  for (int h = 0; h < H; ++h) {
    if (!is_distribution(type_dist.slice({h}))) throw ConfigError("type distribution row is not a distribution");
  }
  const Tensor mix = feedback_mix(feedback_by_type(model), type_dist);

  AggregatedMDP mdp;
  mdp.horizon = H;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.reward = Tensor({H, S, A});
  mdp.transition = Tensor({H, S, A, S});
  if (model.mode == TransitionMode::Dynamical) {
    if (model.grid.num_cells() == 0) throw ConfigError("dynamical aggregation needs a grid specification");
    mdp.initial_state = model.grid.cell_of(model.initial_point);
  } else {
    mdp.initial_state = model.initial_state;
  }
  for (int h = 0; h < H; ++h) {
    Tensor r_h({S, A, model.num_feedbacks});
    std::copy_n(model.principal_reward.slice({h}).begin(), r_h.size(), r_h.values().begin());
    const Tensor rbar = aggregate_reward_step(r_h, mix, h);
    std::copy(rbar.values().begin(), rbar.values().end(), mdp.reward.slice({h}).begin());

    Tensor pbar;
    if (model.mode == TransitionMode::General) {
      Tensor p_h({S, A, model.num_feedbacks, S});
      std::copy_n(model.transition_kernel.slice({h}).begin(), p_h.size(), p_h.values().begin());
      pbar = aggregate_transition_step(p_h, mix, h);
    } else {
      std::vector<const CoordinateMap*> maps;
      for (const auto& m : model.mean_map[static_cast<std::size_t>(h)]) maps.push_back(&m);
      pbar = aggregate_dynamics_step(maps, mix, h, model.grid, model.trans_noise_std);
    }
    std::copy(pbar.values().begin(), pbar.values().end(), mdp.transition.slice({h}).begin());
  }
  return mdp;
}

}  // namespace opme
