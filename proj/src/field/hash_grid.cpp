#include "radmesh/field/hash_grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "radmesh/field/contract.hpp"

namespace radmesh::field {

namespace {
constexpr double kGridSpan = 4.0;  // contracted space is (-2, 2)^3
constexpr std::uint64_t kPrimes[3] = {1ull, 2654435761ull, 805459861ull};
}  // namespace

HashGrid::HashGrid(const HashGridConfig& config, std::uint64_t seed) : config_(config) {
  if (config.levels < 1 || config.features < 1 || config.n_min < 1 ||
      config.n_max < config.n_min || config.log2_table_size < 4 || config.log2_table_size > 26) {
    throw std::invalid_argument("invalid hash grid configuration");
  }
  const std::size_t table = std::size_t{1} << config.log2_table_size;
  growth_ = config.levels > 1 ? std::exp((std::log(static_cast<double>(config.n_max)) -
                                          std::log(static_cast<double>(config.n_min))) /
                                         (config.levels - 1))
                              : 1.0;
  std::size_t offset = 0;
  int previous = 0;
  for (int l = 0; l < config.levels; ++l) {
    int n = static_cast<int>(std::floor(config.n_min * std::pow(growth_, l) + 1e-9));
    n = std::max(n, previous + 1);  // strictly increasing
    previous = n;
    resolutions_.push_back(n);
    const std::size_t dense = static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1);
    const bool is_dense = dense <= table;
    dense_.push_back(is_dense);
    entries_.push_back(is_dense ? dense : table);
    offsets_.push_back(offset);
    offset += entries_.back() * config.features;
  }
  params_.resize(offset);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
  for (auto& p : params_) p = dist(rng);
}

std::size_t HashGrid::entry_index(int level, const std::array<std::int64_t, 3>& ijk) const {
  const auto n1 = static_cast<std::uint64_t>(resolutions_[level] + 1);
  if (dense_[level]) {
    return static_cast<std::size_t>(ijk[0] + n1 * (ijk[1] + n1 * ijk[2]));
  }
  std::uint64_t h = 0;
  for (int k = 0; k < 3; ++k) h ^= static_cast<std::uint64_t>(ijk[k]) * kPrimes[k];
  return static_cast<std::size_t>(h & (entries_[level] - 1));
}

double grid_radius(const Point3& center, double world_radius) {
  return world_radius * contract_scale(norm(center)) / kGridSpan;
}

void query_into(const HashGrid& grid, const Point3& center, double world_radius,
                std::span<double> out, QueryCache* cache) {
  const int F = grid.features();
  const Point3 xc = contract(center);
  const double gr = grid_radius(center, world_radius);
  if (cache) {
    cache->center = center;
    cache->world_radius = world_radius;
    cache->grid_radius = gr;
    cache->levels.resize(grid.levels());
  }
  const auto params = grid.params();
  for (int l = 0; l < grid.levels(); ++l) {
    const int n = grid.resolution(l);
    std::array<std::int64_t, 3> base{};
    std::array<double, 3> frac{};
    for (int k = 0; k < 3; ++k) {
      const double u = std::clamp(xc[k] / kGridSpan + 0.5, 0.0, 1.0);
      const double p = u * n;
      auto i = static_cast<std::int64_t>(std::floor(p));
      i = std::clamp<std::int64_t>(i, 0, n - 1);
      base[k] = i;
      frac[k] = p - static_cast<double>(i);
    }
    const double phi = downweight(gr, n);
    LevelSample sample;
    sample.frac = frac;
    sample.phi = phi;
    for (int f = 0; f < F; ++f) out[l * F + f] = 0.0;
    for (int c = 0; c < 8; ++c) {
      const std::array<std::int64_t, 3> ijk{base[0] + (c & 1), base[1] + ((c >> 1) & 1),
                                            base[2] + ((c >> 2) & 1)};
      double w = 1.0;
      for (int k = 0; k < 3; ++k) w *= ((c >> k) & 1) ? frac[k] : 1.0 - frac[k];
      const std::size_t idx = grid.level_offset(l) + grid.entry_index(l, ijk) * F;
      sample.param_index[c] = static_cast<std::uint32_t>(idx);
      for (int f = 0; f < F; ++f) out[l * F + f] += w * params[idx + f];
    }
    for (int f = 0; f < F; ++f) out[l * F + f] *= phi;
    if (cache) cache->levels[l] = sample;
  }
}

std::vector<double> query(const HashGrid& grid, const Point3& center, double world_radius,
                          QueryCache* cache) {
  std::vector<double> b(grid.feature_dim());
  query_into(grid, center, world_radius, b, cache);
  return b;
}

void query_backward(const HashGrid& grid, const QueryCache& cache, std::span<const double> grad_b,
                    std::span<double> grad_params, Vec3& grad_center, double& grad_radius) {
  const int F = grid.features();
  const auto params = grid.params();
  Vec3 grad_contracted{};
  double grad_gr = 0.0;
  for (int l = 0; l < grid.levels(); ++l) {
    const auto& s = cache.levels[l];
    const int n = grid.resolution(l);
    // raw (un-downweighted) interpolated features and their spatial derivative
    double dot_raw = 0.0;
    Vec3 dpos{};
    for (int c = 0; c < 8; ++c) {
      double w = 1.0;
      std::array<double, 3> dw{1.0, 1.0, 1.0};
      for (int k = 0; k < 3; ++k) {
        const bool hi = (c >> k) & 1;
        const double wk = hi ? s.frac[k] : 1.0 - s.frac[k];
        const double dk = hi ? 1.0 : -1.0;
        w *= wk;
        for (int m = 0; m < 3; ++m) dw[m] *= (m == k) ? dk : wk;
      }
      const std::size_t idx = s.param_index[c];
      for (int f = 0; f < F; ++f) {
        const double g = grad_b[l * F + f];
        grad_params[idx + f] += g * s.phi * w;
        const double v = params[idx + f];
        dot_raw += g * w * v;
        for (int m = 0; m < 3; ++m) dpos[m] += g * s.phi * dw[m] * v;
      }
    }
    // p = (xc / span + 0.5) * n
    grad_contracted += dpos * (static_cast<double>(n) / kGridSpan);
    grad_gr += dot_raw * downweight_derivative(cache.grid_radius, n);
  }
  // Positions clamped to the cube boundary are not differentiable; contract()
  // keeps every finite point strictly inside so this does not arise in practice.
  grad_center += contract_backward(cache.center, grad_contracted);
  // gr = R * s(|x|) / span
  const double r = norm(cache.center);
  grad_radius += grad_gr * contract_scale(r) / kGridSpan;
  if (r > 1.0) {
    grad_center += cache.center *
                   (grad_gr * cache.world_radius * contract_scale_derivative(r) / (kGridSpan * r));
  }
}

}  // namespace radmesh::field
