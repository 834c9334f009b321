#include "opme/npiv.hpp"

#include <algorithm>
#include <climits>
#include <limits>

namespace opme {

namespace {

void require_discriminators(std::span<const Tensor> disc_f) {
  if (disc_f.empty()) throw ConfigError("empty discriminator class F");
}

// max_f sum_tau f(s_tau, a_tau) d_tau - 1/2 sum_tau f(s_tau, a_tau)^2 by direct
// summation over samples.
double scan_samples(std::span<const Sample> data, std::span<const double> residual, std::span<const Tensor> disc_f) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& f : disc_f) {
    double cross = 0.0, square = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double fv = f(data[k].s, data[k].a);
      cross += fv * residual[k];
      square += fv * fv;
    }
    best = std::max(best, cross - 0.5 * square);
  }
  return best;
}

std::vector<int> survivors(const std::vector<double>& losses, double beta, bool& fallback) {
  std::vector<int> keep;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (losses[j] <= beta) keep.push_back(static_cast<int>(j));
  }
  if (keep.empty() && !losses.empty()) {
    fallback = true;
    keep.push_back(static_cast<int>(std::min_element(losses.begin(), losses.end()) - losses.begin()));
  }
  return keep;
}

}  // namespace

void StepDataset::append(const Trajectory& traj) {
  if (static_cast<int>(traj.steps.size()) != horizon()) throw ConfigError("trajectory length does not match the horizon");
  for (int h = 0; h < horizon(); ++h) append(h, traj.steps[static_cast<std::size_t>(h)]);
}

double empirical_loss_reward(std::span<const Sample> data, const Tensor& reward, std::span<const Tensor> disc_f) {
  require_discriminators(disc_f);
  std::vector<double> residual(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) residual[k] = reward(data[k].s, data[k].a, data[k].e) - data[k].r;
  return scan_samples(data, residual, disc_f);
}

double empirical_loss_transition_general(std::span<const Sample> data, const Tensor& kernel,
                                         std::span<const Tensor> disc_g_next, std::span<const Tensor> disc_f) {
  require_discriminators(disc_f);
  if (disc_g_next.empty()) throw ConfigError("empty discriminator class G");
  const int S = kernel.dim(3);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> residual(data.size());
  for (const auto& g : disc_g_next) {
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto row = kernel.slice({data[k].s, data[k].a, data[k].e});
      double pg = 0.0;
      for (int n = 0; n < S; ++n) pg += row[static_cast<std::size_t>(n)] * g(n);
      residual[k] = pg - g(data[k].next_s);
    }
    best = std::max(best, scan_samples(data, residual, disc_f));
  }
  return best;
}

double empirical_loss_transition_dynamical(std::span<const Sample> data, const CoordinateMap& map, int axis,
                                           std::span<const Tensor> disc_f) {
  require_discriminators(disc_f);
  std::vector<double> residual(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    residual[k] = map(data[k].x, data[k].a, data[k].e) - data[k].next_x.at(static_cast<std::size_t>(axis));
  }
  return scan_samples(data, residual, disc_f);
}

double discriminator_max(std::span<const double> residual_sums, std::span<const double> counts,
                         std::span<const Tensor> disc_f) {
  require_discriminators(disc_f);
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t n = residual_sums.size();
  for (const auto& f : disc_f) {
    const auto fv = f.values();
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (counts[k] == 0.0) continue;
      v += fv[k] * residual_sums[k] - 0.5 * fv[k] * fv[k] * counts[k];
    }
    best = std::max(best, v);
  }
  return best;
}

ClassSizes class_sizes(const HypothesisClasses& classes) {
  return {classes.total_f(), classes.total_g(), classes.total_reward(), classes.total_transition()};
}

ConfidenceLevels confidence_levels(double bound, int episodes, int horizon, const ClassSizes& sizes, double delta,
                                   double beta_scale) {
  if (!(bound > 0.0)) throw ConfigError("bound B must be positive");
  if (episodes < 1 || horizon < 1) throw ConfigError("K and H must be positive");
  if (sizes.f < 1 || sizes.g < 1 || sizes.reward < 1 || sizes.transition < 1) {
    throw ConfigError("class sizes must be at least 1");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(beta_scale > 0.0)) throw ConfigError("beta_scale must be positive");

  const double base = std::log(static_cast<double>(episodes)) + std::log(static_cast<double>(horizon)) +
                      std::log(static_cast<double>(sizes.f)) - std::log(delta);
  const double c = beta_scale * 28.0 * bound * bound;
  ConfidenceLevels lv;
  lv.scale = beta_scale;
  lv.beta1 = c * (base + std::log(static_cast<double>(sizes.reward)));
  lv.beta2 = c * (base + std::log(static_cast<double>(sizes.g)) + std::log(static_cast<double>(sizes.transition)));
  lv.beta3 = c * (base + std::log(static_cast<double>(sizes.transition)));
  return lv;
}

long long ConfidenceSets::joint_count() const {
  long long n = 1;
  auto mul = [&n](std::size_t k) {
    const auto m = static_cast<long long>(k);
    if (m != 0 && n > LLONG_MAX / m) n = LLONG_MAX;
    else n *= m;
  };
  for (std::size_t h = 0; h < reward.size(); ++h) {
    mul(reward[h].size());
    for (const auto& axis : transition[h]) mul(axis.size());
  }
  return n;
}

double transition_threshold(const ConfidenceLevels& levels, TransitionMode mode) {
  return mode == TransitionMode::General ? levels.beta2 : levels.beta3;
}

ConfidenceSets threshold_losses(std::vector<std::vector<double>> reward_loss,
                                std::vector<std::vector<std::vector<double>>> transition_loss,
                                const ConfidenceLevels& levels, TransitionMode mode) {
  ConfidenceSets sets;
  sets.levels = levels;
  const double beta_p = transition_threshold(levels, mode);
  for (const auto& losses : reward_loss) sets.reward.push_back(survivors(losses, levels.beta1, sets.empty_set_fallback));
  for (const auto& step : transition_loss) {
    std::vector<std::vector<int>> axes;
    for (const auto& losses : step) axes.push_back(survivors(losses, beta_p, sets.empty_set_fallback));
    sets.transition.push_back(std::move(axes));
  }
  sets.reward_loss = std::move(reward_loss);
  sets.transition_loss = std::move(transition_loss);
  return sets;
}

ConfidenceSets build_confidence_sets(const StepDataset& data, const HypothesisClasses& classes,
                                     const ConfidenceLevels& levels, TransitionMode mode) {
  const int H = classes.horizon;
  std::vector<std::vector<double>> rl(static_cast<std::size_t>(H));
  std::vector<std::vector<std::vector<double>>> tl(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const auto samples = data.step(h);
    for (const auto& r : classes.reward[uh]) rl[uh].push_back(empirical_loss_reward(samples, r, classes.disc_f[uh]));
    if (mode == TransitionMode::General) {
      std::vector<double> losses;
      for (const auto& p : classes.transition[uh]) {
        losses.push_back(empirical_loss_transition_general(samples, p, classes.disc_g[uh + 1], classes.disc_f[uh]));
      }
      tl[uh].push_back(std::move(losses));
    } else {
      for (std::size_t i = 0; i < classes.dynamics[uh].size(); ++i) {
        std::vector<double> losses;
        for (const auto& m : classes.dynamics[uh][i]) {
          losses.push_back(empirical_loss_transition_dynamical(samples, m, static_cast<int>(i), classes.disc_f[uh]));
        }
        tl[uh].push_back(std::move(losses));
      }
    }
  }
  auto sets = threshold_losses(std::move(rl), std::move(tl), levels, mode);
  sets.episode = H > 0 ? static_cast<int>(data.size(0)) : 0;
  return sets;
}

// ------------------------------------------------------------ statistics

StepStatistics::StepStatistics(int num_states, int num_actions, int num_feedbacks, int state_dim)
    : S_(num_states),
      A_(num_actions),
      E_(num_feedbacks),
      d_(state_dim),
      counts_({num_states, num_actions}),
      n_sae_({num_states, num_actions, num_feedbacks}),
      r_sum_({num_states, num_actions}),
      n_sas_({num_states, num_actions, num_states}),
      tanh_sum_({num_states, num_actions, num_feedbacks, state_dim}),
      next_sum_({num_states, num_actions, state_dim}) {}

void StepStatistics::add(const Sample& x) {
  ++size_;
  counts_(x.s, x.a) += 1.0;
  n_sae_(x.s, x.a, x.e) += 1.0;
  r_sum_(x.s, x.a) += x.r;
  n_sas_(x.s, x.a, x.next_s) += 1.0;
  for (int j = 0; j < d_; ++j) {
    tanh_sum_(x.s, x.a, x.e, j) += std::tanh(x.x.at(static_cast<std::size_t>(j)));
    next_sum_(x.s, x.a, j) += x.next_x.at(static_cast<std::size_t>(j));
  }
}

double StepStatistics::reward_loss(const Tensor& reward, std::span<const Tensor> disc_f) const {
  std::vector<double> d(static_cast<std::size_t>(S_ * A_));
  for (int s = 0; s < S_; ++s)
    for (int a = 0; a < A_; ++a) {
      double v = -r_sum_(s, a);
      for (int e = 0; e < E_; ++e) v += n_sae_(s, a, e) * reward(s, a, e);
      d[static_cast<std::size_t>(s * A_ + a)] = v;
    }
  return discriminator_max(d, counts_.values(), disc_f);
}

double StepStatistics::transition_loss_general(const Tensor& kernel, std::span<const Tensor> disc_g_next,
                                               std::span<const Tensor> disc_f) const {
  require_discriminators(disc_f);
  if (disc_g_next.empty()) throw ConfigError("empty discriminator class G");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> d(static_cast<std::size_t>(S_ * A_));
  for (const auto& g : disc_g_next) {
    for (int s = 0; s < S_; ++s)
      for (int a = 0; a < A_; ++a) {
        double v = 0.0;
        if (counts_(s, a) != 0.0) {
          for (int e = 0; e < E_; ++e) {
            const double n = n_sae_(s, a, e);
            if (n == 0.0) continue;
            const auto row = kernel.slice({s, a, e});
            double pg = 0.0;
            for (int m = 0; m < S_; ++m) pg += row[static_cast<std::size_t>(m)] * g(m);
            v += n * pg;
          }
          for (int m = 0; m < S_; ++m) v -= n_sas_(s, a, m) * g(m);
        }
        d[static_cast<std::size_t>(s * A_ + a)] = v;
      }
    best = std::max(best, discriminator_max(d, counts_.values(), disc_f));
  }
  return best;
}

double StepStatistics::transition_loss_dynamical(const CoordinateMap& map, int axis,
                                                 std::span<const Tensor> disc_f) const {
  std::vector<double> d(static_cast<std::size_t>(S_ * A_));
  for (int s = 0; s < S_; ++s)
    for (int a = 0; a < A_; ++a) {
      double v = -next_sum_(s, a, axis);
      for (int e = 0; e < E_; ++e) {
        v += n_sae_(s, a, e) * map.offset(a, e);
        for (int j = 0; j < d_; ++j) v += map.gain(a, e, j) * tanh_sum_(s, a, e, j);
      }
      d[static_cast<std::size_t>(s * A_ + a)] = v;
    }
  return discriminator_max(d, counts_.values(), disc_f);
}

ConfidenceSets build_confidence_sets(std::span<const StepStatistics> stats, const HypothesisClasses& classes,
                                     const ConfidenceLevels& levels, TransitionMode mode) {
  const int H = classes.horizon;
  std::vector<std::vector<double>> rl(static_cast<std::size_t>(H));
  std::vector<std::vector<std::vector<double>>> tl(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    const auto& st = stats[uh];
    for (const auto& r : classes.reward[uh]) rl[uh].push_back(st.reward_loss(r, classes.disc_f[uh]));
    if (mode == TransitionMode::General) {
      std::vector<double> losses;
      for (const auto& p : classes.transition[uh]) {
        losses.push_back(st.transition_loss_general(p, classes.disc_g[uh + 1], classes.disc_f[uh]));
      }
      tl[uh].push_back(std::move(losses));
    } else {
      for (std::size_t i = 0; i < classes.dynamics[uh].size(); ++i) {
        std::vector<double> losses;
        for (const auto& m : classes.dynamics[uh][i]) {
          losses.push_back(st.transition_loss_dynamical(m, static_cast<int>(i), classes.disc_f[uh]));
        }
        tl[uh].push_back(std::move(losses));
      }
    }
  }
  auto sets = threshold_losses(std::move(rl), std::move(tl), levels, mode);
  sets.episode = H > 0 ? static_cast<int>(stats[0].size()) : 0;
  return sets;
}

}  // namespace opme
