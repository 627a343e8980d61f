#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "radmesh/vec.hpp"

namespace radmesh::field {

struct HashGridConfig {
  int levels = 8;
  int n_min = 16;
  int n_max = 512;
  int log2_table_size = 15;
  int features = 2;
  double init_scale = 1e-4;  // features start U(-init_scale, init_scale)
};

/// Multiresolution hash grid over the contracted cube [-2, 2]^3. Levels whose
/// (n+1)^3 lattice fits in the table are indexed densely, the rest by the
/// usual xor-of-primes spatial hash. All features live in one flat array so
/// the optimizer can treat them as a single parameter block.
class HashGrid {
 public:
  explicit HashGrid(const HashGridConfig& config = {}, std::uint64_t seed = 0);

  const HashGridConfig& config() const { return config_; }
  int levels() const { return config_.levels; }
  int features() const { return config_.features; }
  int feature_dim() const { return config_.levels * config_.features; }
  int resolution(int level) const { return resolutions_[level]; }
  double growth_factor() const { return growth_; }
  std::size_t level_entries(int level) const { return entries_[level]; }
  std::size_t level_offset(int level) const { return offsets_[level]; }
  bool level_is_dense(int level) const { return dense_[level]; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Entry index (within the level) of lattice node ijk, 0 <= ijk <= n.
  std::size_t entry_index(int level, const std::array<std::int64_t, 3>& ijk) const;
  std::span<const double> entry(int level, const std::array<std::int64_t, 3>& ijk) const {
    return {params_.data() + offsets_[level] + entry_index(level, ijk) * config_.features,
            static_cast<std::size_t>(config_.features)};
  }
  std::span<double> entry(int level, const std::array<std::int64_t, 3>& ijk) {
    return {params_.data() + offsets_[level] + entry_index(level, ijk) * config_.features,
            static_cast<std::size_t>(config_.features)};
  }

 private:
  HashGridConfig config_;
  double growth_ = 1.0;
  std::vector<int> resolutions_;
  std::vector<std::size_t> entries_;
  std::vector<std::size_t> offsets_;
  std::vector<char> dense_;
  std::vector<double> params_;
};

/// Per-level interpolation record kept for the backward pass.
struct LevelSample {
  std::array<std::uint32_t, 8> param_index{};  // offset of each corner's features
  std::array<double, 3> frac{};
  double phi = 1.0;
};

struct QueryCache {
  Point3 center;            // world-space query center
  double world_radius = 0.0;
  double grid_radius = 0.0;  // radius in normalized grid units
  std::vector<LevelSample> levels;
};

/// Feature vector b = phi(radius) o G(contract(center)): trilinear lookup per
/// level, each level scaled by the downweighting factor of the query radius
/// mapped into contracted, normalized grid units.
std::vector<double> query(const HashGrid& grid, const Point3& center, double world_radius,
                          QueryCache* cache = nullptr);

/// Writes feature-vector size into `out` instead of allocating.
void query_into(const HashGrid& grid, const Point3& center, double world_radius,
                std::span<double> out, QueryCache* cache);

/// Adjoint of query(). Accumulates into grad_params (same layout as
/// grid.params()), grad_center and grad_radius.
void query_backward(const HashGrid& grid, const QueryCache& cache, std::span<const double> grad_b,
                    std::span<double> grad_params, Vec3& grad_center, double& grad_radius);

/// Radius passed to the downweighting: world radius scaled by the contraction
/// Jacobian norm at the center, divided by the grid span (4).
double grid_radius(const Point3& center, double world_radius);

}  // namespace radmesh::field
