#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radmesh/render/camera.hpp"

namespace radmesh::check {

/// Outcome of one oracle comparison. `value` is the measured quantity
/// (violations, worst error, seconds) and `limit` the bound it must stay under.
struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
  double seconds = 0.0;
};

/// Random point sets of the given sizes (cycled); every mesh must pass the
/// brute-force empty-sphere, adjacency and hull-coverage audit.
CheckResult delaunay_audit(const std::vector<std::size_t>& sizes, std::size_t sets,
                           std::uint64_t seed, double time_limit_seconds);

/// Power order restricted to the tets a ray crosses must ascend in entry
/// distance (ties within 1e-9) for random origins and directions.
CheckResult visibility_order(std::size_t meshes, std::size_t points, std::size_t rays,
                             std::uint64_t seed);

/// Closed-form segment integral against midpoint quadrature with `steps`
/// steps; half the segments have optical depth in [1e-12, 1e-2].
CheckResult segment_quadrature(std::size_t segments, std::size_t steps, std::uint64_t seed,
                               double tolerance = 1e-5);

/// Tiled image renderer against the exhaustive per-ray renderer on a random
/// mesh with at least `min_tets` tets.
CheckResult image_oracle(render::CameraModel model, std::size_t min_tets, int size,
                         std::uint64_t seed, double tolerance = 1e-5);

/// T_final + sum_k T_k alpha_k = 1 per ray with early-out disabled.
CheckResult energy_conservation(std::size_t rays, std::uint64_t seed, double tolerance = 1e-6);

/// Finite-difference checks of the training loss: per-tet density and color
/// attributes, grid and head parameters (rel. error < attr_tolerance) and
/// vertex positions on a flip-safe mesh (< vertex_tolerance).
std::vector<CheckResult> gradient_checks(std::uint64_t seed, double attr_tolerance = 1e-4,
                                         double vertex_tolerance = 1e-2);

/// Circumcenter spread across a 2-3 flip at cosphericity perturbation eps
/// must stay under 10 eps.
CheckResult flip_continuity(double eps);

/// Camera on a circle around the origin looking at it; fisheye uses a
/// 180 degree field of view.
render::Camera orbit_camera(render::CameraModel model, int size, double angle, double distance = 3.0);

/// The reduced oracle suite run by `radmesh selftest`.
std::vector<CheckResult> selftest(std::uint64_t seed = 1);

}  // namespace radmesh::check
