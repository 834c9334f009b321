#include "opme/aggregation.hpp"

namespace opme {

Tensor aggregate_reward_step(const Tensor& reward, const Tensor& mix, int h) {
  const int S = reward.dim(0), A = reward.dim(1), E = reward.dim(2);
  if (mix.dim(1) != S || mix.dim(2) != A || mix.dim(3) != E) throw ConfigError("reward table shape mismatch");
  Tensor out({S, A});
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double v = 0.0;
      for (int e = 0; e < E; ++e) v += mix(h, s, a, e) * reward(s, a, e);
      out(s, a) = v;
    }
  return out;
}

Tensor aggregate_transition_step(const Tensor& kernel, const Tensor& mix, int h) {
  const int S = kernel.dim(0), A = kernel.dim(1), E = kernel.dim(2);
  if (kernel.dim(3) != S || mix.dim(1) != S || mix.dim(2) != A || mix.dim(3) != E) {
    throw ConfigError("transition table shape mismatch");
  }
  Tensor out({S, A, S});
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      auto row = out.slice({s, a});
      for (int e = 0; e < E; ++e) {
        const double w = mix(h, s, a, e);
        if (w == 0.0) continue;
        const auto p = kernel.slice({s, a, e});
        for (int n = 0; n < S; ++n) row[static_cast<std::size_t>(n)] += w * p[static_cast<std::size_t>(n)];
      }
    }
  return out;
}

std::vector<double> grid_kernel(const GridSpec& grid, std::span<const double> mean, double noise_std) {
  const int d = grid.dim();
  std::vector<std::vector<double>> axes;
  for (int i = 0; i < d; ++i) axes.push_back(grid.axis_mass(i, mean[static_cast<std::size_t>(i)], noise_std));
  std::vector<double> out(static_cast<std::size_t>(grid.num_cells()));
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto coords = grid.unravel(c);
    double p = 1.0;
    for (int i = 0; i < d; ++i) p *= axes[static_cast<std::size_t>(i)][static_cast<std::size_t>(coords[static_cast<std::size_t>(i)])];
    out[static_cast<std::size_t>(c)] = p;
  }
  return out;
}

Tensor aggregate_dynamics_step(std::span<const CoordinateMap* const> maps, const Tensor& mix, int h,
                               const GridSpec& grid, double noise_std) {
  const int S = grid.num_cells(), A = mix.dim(2), E = mix.dim(3);
  const int d = grid.dim();
  if (static_cast<int>(maps.size()) != d) throw ConfigError("need one coordinate map per axis");
  if (mix.dim(1) != S) throw ConfigError("feedback mixture does not match the grid");
  Tensor out({S, A, S});
  std::vector<double> mean(static_cast<std::size_t>(d));
  for (int s = 0; s < S; ++s) {
    const auto center = grid.center(s);
    for (int a = 0; a < A; ++a) {
      auto row = out.slice({s, a});
      for (int e = 0; e < E; ++e) {
        const double w = mix(h, s, a, e);
        if (w == 0.0) continue;
        for (int i = 0; i < d; ++i) mean[static_cast<std::size_t>(i)] = (*maps[static_cast<std::size_t>(i)])(center, a, e);
        const auto k = grid_kernel(grid, mean, noise_std);
        for (int n = 0; n < S; ++n) row[static_cast<std::size_t>(n)] += w * k[static_cast<std::size_t>(n)];
      }
    }
  }
  return out;
}

}  // namespace opme
