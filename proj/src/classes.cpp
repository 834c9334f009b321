#include "opme/classes.hpp"

#include <algorithm>
#include <climits>
#include <sstream>

#include "opme/aggregation.hpp"
#include "opme/planner.hpp"

namespace opme {

namespace {

long long sum_sizes(const std::vector<std::vector<Tensor>>& family) {
  long long n = 0;
  for (const auto& step : family) n += static_cast<long long>(step.size());
  return n;
}

Tensor project_with(const Tensor& mix, int h, const Tensor& nu) {
  const int S = nu.dim(0), A = nu.dim(1), E = nu.dim(2);
  Tensor f({S, A});
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double v = 0.0;
      for (int e = 0; e < E; ++e) v += mix(h, s, a, e) * nu(s, a, e);
      f(s, a) = v;
    }
  return f;
}

Tensor source_mix(const StrategicModel& model) { return feedback_mix(feedback_by_type(model), model.source_type_dist); }

// Residual tables nu_h whose projections Assumption-style realizability asks
// F_h to contain. Order: rewards, then transitions (by candidate, then g),
// then dynamics axes.
struct Residual {
  std::string label;
  int index;
  Tensor nu;
};

std::vector<Residual> residuals(const StrategicModel& model, const HypothesisClasses& classes, int h) {
  std::vector<Residual> out;
  const auto uh = static_cast<std::size_t>(h);
  const Tensor r_star = true_reward_step(model, h);
  for (std::size_t j = 0; j < classes.reward[uh].size(); ++j) {
    Tensor nu = classes.reward[uh][j];
    auto vals = nu.values();
    const auto truth = r_star.values();
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] -= truth[k];
    out.push_back({"reward", static_cast<int>(j), std::move(nu)});
  }
  if (model.mode == TransitionMode::General) {
    const Tensor p_star = true_transition_step(model, h);
    for (std::size_t j = 0; j < classes.transition[uh].size(); ++j) {
      for (const auto& g : classes.disc_g[uh + 1]) {
        out.push_back({"transition", static_cast<int>(j), transition_residual(classes.transition[uh][j], p_star, g)});
      }
    }
  } else {
    for (std::size_t i = 0; i < classes.dynamics[uh].size(); ++i) {
      for (std::size_t j = 0; j < classes.dynamics[uh][i].size(); ++j) {
        out.push_back({"dynamics", static_cast<int>(j),
                       dynamics_residual(model, h, static_cast<int>(i), classes.dynamics[uh][i][j])});
      }
    }
  }
  return out;
}

bool contains(const std::vector<Tensor>& family, const Tensor& table) {
  return std::find(family.begin(), family.end(), table) != family.end();
}

bool has_zero(const std::vector<Tensor>& family) {
  return std::any_of(family.begin(), family.end(), [](const Tensor& f) { return f.max_abs() == 0.0; });
}

void check_caps(const HypothesisClasses& classes, const Caps& caps) {
  for (int h = 0; h < classes.horizon; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    if (static_cast<int>(classes.reward[uh].size()) > caps.max_class_size) {
      throw CapacityError("reward class at step " + std::to_string(h) + " exceeds the class-size cap");
    }
    if (!classes.transition.empty() && static_cast<int>(classes.transition[uh].size()) > caps.max_class_size) {
      throw CapacityError("transition class at step " + std::to_string(h) + " exceeds the class-size cap");
    }
    if (!classes.dynamics.empty()) {
      for (const auto& axis : classes.dynamics[uh]) {
        if (static_cast<int>(axis.size()) > caps.max_class_size) {
          throw CapacityError("dynamics class at step " + std::to_string(h) + " exceeds the class-size cap");
        }
      }
    }
  }
}

}  // namespace

long long HypothesisClasses::total_reward() const { return sum_sizes(reward); }

long long HypothesisClasses::total_transition() const {
  if (mode() == TransitionMode::General) return sum_sizes(transition);
  long long n = 0;
  for (const auto& step : dynamics)
    for (const auto& axis : step) n += static_cast<long long>(axis.size());
  return n;
}

long long HypothesisClasses::total_f() const { return sum_sizes(disc_f); }
long long HypothesisClasses::total_g() const { return sum_sizes(disc_g); }

void HypothesisClasses::validate(const StrategicModel& model) const {
  std::vector<std::string> v;
  const int H = model.horizon, S = model.num_states, A = model.num_actions, E = model.num_feedbacks;
  const auto uH = static_cast<std::size_t>(H);
  if (horizon != H) v.push_back("class horizon does not match the environment");
  if (bound <= 0.0) v.push_back("bound B must be positive");
  if (reward.size() != uH || disc_f.size() != uH) v.push_back("reward and F classes need one entry per step");
  if (disc_g.size() != uH + 1) v.push_back("G needs H + 1 entries (the last is the terminal zero)");
  if (model.mode == TransitionMode::General) {
    if (transition.size() != uH) v.push_back("transition class needs one entry per step");
    if (!dynamics.empty()) v.push_back("dynamics class given in general mode");
  } else {
    if (dynamics.size() != uH) v.push_back("dynamics class needs one entry per step");
  }
  if (!v.empty()) throw ValidationError(v);

  constexpr double tol = 1e-12;
  for (std::size_t h = 0; h < uH; ++h) {
    const std::string at = " at step " + std::to_string(h);
    if (reward[h].empty()) v.push_back("empty reward class" + at);
    for (const auto& r : reward[h]) {
      if (r.shape() != std::vector<int>{S, A, E}) v.push_back("reward table shape mismatch" + at);
      else if (r.min() < -tol || r.max() > bound + tol) v.push_back("reward table outside [0, B]" + at);
    }
    if (model.mode == TransitionMode::General) {
      if (transition[h].empty()) v.push_back("empty transition class" + at);
      for (const auto& p : transition[h]) {
        if (p.shape() != std::vector<int>{S, A, E, S}) {
          v.push_back("transition table shape mismatch" + at);
          continue;
        }
        const auto vals = p.values();
        for (std::size_t off = 0; off < vals.size(); off += static_cast<std::size_t>(S)) {
          if (!is_distribution(vals.subspan(off, static_cast<std::size_t>(S)))) {
            v.push_back("transition candidate row is not a distribution" + at);
            break;
          }
        }
      }
    } else {
      if (static_cast<int>(dynamics[h].size()) != model.grid.dim()) v.push_back("dynamics class needs one list per axis" + at);
      for (const auto& axis : dynamics[h]) {
        if (axis.empty()) v.push_back("empty dynamics class" + at);
        for (const auto& m : axis) {
          if (m.offset.shape() != std::vector<int>{A, E} || m.gain.shape() != std::vector<int>{A, E, model.grid.dim()}) {
            v.push_back("coordinate map shape mismatch" + at);
          }
        }
      }
    }
    if (disc_f[h].empty()) v.push_back("empty discriminator class F" + at);
    if (!has_zero(disc_f[h])) v.push_back("F lacks the zero function" + at);
    for (const auto& f : disc_f[h]) {
      if (f.shape() != std::vector<int>{S, A}) v.push_back("F table shape mismatch" + at);
      else if (!bound_violation && f.max_abs() > bound + tol) v.push_back("F table outside [-B, B]" + at);
    }
  }
  for (std::size_t h = 0; h <= uH; ++h) {
    if (disc_g[h].empty()) v.push_back("empty discriminator class G at step " + std::to_string(h));
    for (const auto& g : disc_g[h]) {
      if (g.shape() != std::vector<int>{S}) v.push_back("G table shape mismatch at step " + std::to_string(h));
      else if (!bound_violation && g.max_abs() > bound + tol) v.push_back("G table outside [-B, B] at step " + std::to_string(h));
    }
  }
  if (!disc_g[uH].empty() && !(disc_g[uH].size() == 1 && disc_g[uH].front().max_abs() == 0.0)) {
    v.push_back("terminal G must be exactly the zero function");
  }
  auto check_truth = [&](const std::vector<int>& idx, std::size_t size_h, std::size_t h, const char* what) {
    if (idx.empty()) return;
    if (idx.size() != uH) {
      v.push_back(std::string(what) + " truth index list needs one entry per step");
      return;
    }
    if (idx[h] < -1 || idx[h] >= static_cast<int>(size_h)) v.push_back(std::string(what) + " truth index out of range");
  };
  for (std::size_t h = 0; h < uH; ++h) {
    check_truth(truth_reward, reward[h].size(), h, "reward");
    if (model.mode == TransitionMode::General) check_truth(truth_transition, transition[h].size(), h, "transition");
  }
  if (!v.empty()) throw ValidationError(v);
}

int insert_unique(std::vector<Tensor>& family, Tensor table) {
  const auto it = std::find(family.begin(), family.end(), table);
  if (it != family.end()) return static_cast<int>(it - family.begin());
  family.push_back(std::move(table));
  return static_cast<int>(family.size()) - 1;
}

Tensor source_projection(const StrategicModel& model, int h, const Tensor& nu) {
  return project_with(source_mix(model), h, nu);
}

Tensor transition_residual(const Tensor& candidate, const Tensor& truth, const Tensor& g) {
  const int S = candidate.dim(0), A = candidate.dim(1), E = candidate.dim(2);
  Tensor nu({S, A, E});
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int e = 0; e < E; ++e) {
        double pg = 0.0, tg = 0.0;
        for (int n = 0; n < S; ++n) {
          pg += candidate(s, a, e, n) * g(n);
          tg += truth(s, a, e, n) * g(n);
        }
        nu(s, a, e) = pg - tg;
      }
  return nu;
}

Tensor true_reward_step(const StrategicModel& model, int h) {
  Tensor r({model.num_states, model.num_actions, model.num_feedbacks});
  const auto src = model.principal_reward.slice({h});
  std::copy(src.begin(), src.end(), r.values().begin());
  return r;
}

Tensor true_transition_step(const StrategicModel& model, int h) {
  Tensor p({model.num_states, model.num_actions, model.num_feedbacks, model.num_states});
  const auto src = model.transition_kernel.slice({h});
  std::copy(src.begin(), src.end(), p.values().begin());
  return p;
}

Tensor dynamics_residual(const StrategicModel& model, int h, int axis, const CoordinateMap& candidate) {
  const int S = model.num_states, A = model.num_actions, E = model.num_feedbacks;
  const auto& truth = model.mean_map[static_cast<std::size_t>(h)][static_cast<std::size_t>(axis)];
  Tensor nu({S, A, E});
  for (int s = 0; s < S; ++s) {
    const auto c = model.grid.center(s);
    for (int a = 0; a < A; ++a)
      for (int e = 0; e < E; ++e) nu(s, a, e) = candidate(c, a, e) - truth(c, a, e);
  }
  return nu;
}

HypothesisClasses realizability_closure_f(const StrategicModel& model, HypothesisClasses classes, const Caps& caps) {
  check_caps(classes, caps);
  const Tensor mix = source_mix(model);
  bool inexact_dynamics = false;
  for (int h = 0; h < classes.horizon; ++h) {
    auto& family = classes.disc_f[static_cast<std::size_t>(h)];
    insert_unique(family, Tensor({model.num_states, model.num_actions}));
    for (auto& res : residuals(model, classes, h)) {
      Tensor f = project_with(mix, h, res.nu);
      if (f.max_abs() > classes.bound) classes.bound_violation = true;
      insert_unique(family, std::move(f));
      if (static_cast<long long>(family.size()) > caps.max_discriminators) {
        throw CapacityError("F at step " + std::to_string(h) + " exceeds the discriminator cap");
      }
    }
    if (model.mode == TransitionMode::Dynamical) {
      const auto& step = classes.dynamics[static_cast<std::size_t>(h)];
      const auto& truth = model.mean_map[static_cast<std::size_t>(h)];
      for (std::size_t i = 0; i < step.size(); ++i) {
        // A gain that differs from the truth makes the residual vary inside a cell.
        for (const auto& m : step[i]) inexact_dynamics = inexact_dynamics || !(m.gain == truth[i].gain);
      }
    }
  }
  if (inexact_dynamics) {
    classes.notes.push_back("dynamics projections evaluated at cell centers; residuals vary within cells");
  }
  if (classes.bound_violation) classes.notes.push_back("closure added discriminators beyond the bound B");
  return classes;
}

std::vector<std::vector<Tensor>> all_model_values(const HypothesisClasses& classes, const LearnerKnowledge& knowledge,
                                                  const Caps& caps) {
  const int H = classes.horizon, S = knowledge.num_states;
  long long joint = 1;
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const long long n = static_cast<long long>(classes.reward[uh].size()) *
                        static_cast<long long>(classes.transition[uh].size());
    if (n > 0 && joint > caps.max_joint_models / n) {
      throw CapacityError("joint model count exceeds the enumeration cap");
    }
    joint *= n;
  }
  if (joint > caps.max_joint_models) throw CapacityError("joint model count exceeds the enumeration cap");

  std::vector<std::vector<Tensor>> values(static_cast<std::size_t>(H + 1));
  values[static_cast<std::size_t>(H)].push_back(Tensor({S}));
  for (int h = H - 1; h >= 0; --h) {
    const auto uh = static_cast<std::size_t>(h);
    std::vector<Tensor> rbars, pbars;
    for (const auto& r : classes.reward[uh]) rbars.push_back(aggregate_reward_step(r, knowledge.target_feedback_mix, h));
    for (const auto& p : classes.transition[uh]) {
      pbars.push_back(aggregate_transition_step(p, knowledge.target_feedback_mix, h));
    }
    for (const auto& rbar : rbars)
      for (const auto& pbar : pbars)
        for (const auto& v_next : values[uh + 1]) {
          Tensor v({S});
          bellman_backup(rbar, pbar, v_next.values(), v.values());
          insert_unique(values[uh], std::move(v));
        }
  }
  return values;
}

HypothesisClasses value_closure_g(HypothesisClasses classes, const LearnerKnowledge& knowledge, const Caps& caps) {
  if (classes.mode() == TransitionMode::Dynamical) {
    classes.notes.push_back("value closure skipped: the dynamical transition loss does not use G");
    return classes;
  }
  check_caps(classes, caps);
  auto values = all_model_values(classes, knowledge, caps);
  for (std::size_t h = 0; h < values.size(); ++h) {
    for (auto& v : values[h]) {
      if (v.max_abs() > classes.bound) classes.bound_violation = true;
      insert_unique(classes.disc_g[h], std::move(v));
    }
  }
  if (classes.bound_violation) {
    classes.notes.push_back("value tables exceed the bound B (values range up to H * B)");
  }
  return classes;
}

RealizabilityReport check_realizability(const StrategicModel& model, const HypothesisClasses& classes,
                                        const Caps& caps) {
  RealizabilityReport report;
  const int H = classes.horizon;

  auto fail = [](ClauseResult& c, std::string msg, int h, int idx, Tensor witness = {}) {
    if (!c.pass) return;
    c.pass = false;
    c.counterexample = std::move(msg);
    c.step = h;
    c.index = idx;
    c.witness = std::move(witness);
  };

  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const int ri = classes.truth_reward.empty() ? -1 : classes.truth_reward[uh];
    if (ri < 0 || ri >= static_cast<int>(classes.reward[uh].size()) ||
        classes.reward[uh][static_cast<std::size_t>(ri)] != true_reward_step(model, h)) {
      fail(report.truth_membership, "step " + std::to_string(h) + ": reward truth index " + std::to_string(ri) +
                                        " does not hold R*", h, ri);
    }
    if (model.mode == TransitionMode::General) {
      const int pi = classes.truth_transition.empty() ? -1 : classes.truth_transition[uh];
      if (pi < 0 || pi >= static_cast<int>(classes.transition[uh].size()) ||
          classes.transition[uh][static_cast<std::size_t>(pi)] != true_transition_step(model, h)) {
        fail(report.truth_membership, "step " + std::to_string(h) + ": transition truth index " + std::to_string(pi) +
                                          " does not hold P*", h, pi);
      }
    } else {
      for (std::size_t i = 0; i < classes.dynamics[uh].size(); ++i) {
        const auto& axis = classes.dynamics[uh][i];
        const int gi = classes.truth_dynamics.empty() ? -1 : classes.truth_dynamics[uh][i];
        if (gi < 0 || gi >= static_cast<int>(axis.size()) ||
            !(axis[static_cast<std::size_t>(gi)] == model.mean_map[uh][i])) {
          fail(report.truth_membership, "step " + std::to_string(h) + " axis " + std::to_string(i) +
                                            ": dynamics truth index " + std::to_string(gi) + " does not hold G*",
               h, gi);
        }
      }
    }
  }

  const Tensor mix = source_mix(model);
  for (int h = 0; h < H && report.projection_membership.pass; ++h) {
    const auto& family = classes.disc_f[static_cast<std::size_t>(h)];
    for (auto& res : residuals(model, classes, h)) {
      Tensor f = project_with(mix, h, res.nu);
      if (!contains(family, f)) {
        fail(report.projection_membership,
             "step " + std::to_string(h) + ": projection of " + res.label + " residual " + std::to_string(res.index) +
                 " missing from F",
             h, res.index, std::move(f));
        break;
      }
    }
  }

  if (model.mode == TransitionMode::General) {
    try {
      const auto values = all_model_values(classes, make_knowledge(model), caps);
      for (std::size_t h = 0; h < values.size() && report.value_membership.pass; ++h) {
        for (std::size_t k = 0; k < values[h].size(); ++k) {
          if (!contains(classes.disc_g[h], values[h][k])) {
            fail(report.value_membership, "step " + std::to_string(h) + ": optimal value table " + std::to_string(k) +
                                              " missing from G",
                 static_cast<int>(h), static_cast<int>(k), values[h][k]);
            break;
          }
        }
      }
    } catch (const CapacityError& err) {
      report.value_clause_checked = false;
      fail(report.value_membership, std::string("not checked: ") + err.what(), -1, -1);
    }
  }
  return report;
}

HypothesisClasses singleton_truth_classes(const StrategicModel& model) {
  HypothesisClasses c;
  const int H = model.horizon;
  c.horizon = H;
  c.bound = model.reward_bound;
  c.reward.resize(static_cast<std::size_t>(H));
  c.disc_f.resize(static_cast<std::size_t>(H));
  c.disc_g.resize(static_cast<std::size_t>(H + 1));
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    c.reward[uh].push_back(true_reward_step(model, h));
    c.disc_f[uh].push_back(Tensor({model.num_states, model.num_actions}));
    c.disc_g[uh].push_back(Tensor({model.num_states}));
    c.truth_reward.push_back(0);
  }
  c.disc_g[static_cast<std::size_t>(H)].push_back(Tensor({model.num_states}));
  if (model.mode == TransitionMode::General) {
    c.transition.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      c.transition[static_cast<std::size_t>(h)].push_back(true_transition_step(model, h));
      c.truth_transition.push_back(0);
    }
  } else {
    c.dynamics.resize(static_cast<std::size_t>(H));
    c.truth_dynamics.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      for (const auto& m : model.mean_map[static_cast<std::size_t>(h)]) {
        c.dynamics[static_cast<std::size_t>(h)].push_back({m});
        c.truth_dynamics[static_cast<std::size_t>(h)].push_back(0);
      }
    }
  }
  return c;
}

}  // namespace opme
