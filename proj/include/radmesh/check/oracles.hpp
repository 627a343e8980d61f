#pragma once

// Random scenes and brute-force reference renderers. Nothing here calls into
// the renderer under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/render/camera.hpp"

namespace radmesh::check {

inline geometry::TetMesh random_mesh(std::size_t n, std::uint64_t seed, double half_extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return geometry::delaunay(pts);
}

/// Random per-tet attributes with the centroid as color anchor.
inline std::vector<field::TetAttributes> random_attributes(const geometry::TetMesh& mesh,
                                                           std::uint64_t seed,
                                                           double sigma_max = 3.0,
                                                           double grad_scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<field::TetAttributes> attrs(mesh.num_tets());
  for (std::size_t t = 0; t < attrs.size(); ++t) {
    auto& a = attrs[t];
    a.sigma = sigma_max * u(rng);
    a.base_color = {u(rng), u(rng), u(rng)};
    a.grad = Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5} * (2.0 * grad_scale);
    a.center = mesh.tets()[t].centroid;
  }
  return attrs;
}

/// Slab clipping of a ray against the four face half-spaces. Face planes are
/// built from each vertex triple with the fourth vertex as the inside
/// reference, so no winding convention is assumed.
inline bool clip_ray(const std::array<Point3, 4>& v, const Point3& o, const Vec3& d, double& t_in,
                     double& t_out) {
  t_in = 0.0;
  t_out = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 4; ++f) {
    const Point3& a = v[(f + 1) % 4];
    const Point3& b = v[(f + 2) % 4];
    const Point3& c = v[(f + 3) % 4];
    Vec3 n = cross(b - a, c - a);
    if (dot(n, v[f] - a) < 0) n = -n;
    const double num = dot(n, o - a);
    const double den = dot(n, d);
    if (den == 0.0) {
      if (num < 0) return false;
      continue;
    }
    const double t = -num / den;
    if (den > 0)
      t_in = std::max(t_in, t);
    else
      t_out = std::min(t_out, t);
  }
  return t_out > t_in;
}

struct BruteSegment {
  std::size_t tet;
  double t_in, t_out;
};

/// Every tet the ray crosses, sorted by entry distance.
inline std::vector<BruteSegment> brute_segments(const geometry::TetMesh& mesh, const Point3& o,
                                                const Vec3& d) {
  std::vector<BruteSegment> segs;
  for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
    double a, b;
    if (clip_ray(mesh.tet_points(t), o, d, a, b)) segs.push_back({t, a, b});
  }
  std::sort(segs.begin(), segs.end(), [](const BruteSegment& x, const BruteSegment& y) {
    return x.t_in != y.t_in ? x.t_in < y.t_in : x.t_out < y.t_out;
  });
  return segs;
}

/// Closed-form emission integral written out directly, without the series
/// branch: exact enough for d above ~1e-4.
inline void direct_segment(double d, const Vec3& c_in, const Vec3& c_out, Vec3& delta,
                           double& alpha) {
  if (d == 0.0) {
    delta = {};
    alpha = 0.0;
    return;
  }
  if (std::isinf(d)) {
    delta = c_in;
    alpha = 1.0;
    return;
  }
  alpha = 1.0 - std::exp(-d);
  delta = c_in * (1.0 - alpha / d) + c_out * (alpha / d - std::exp(-d));
}

/// Midpoint-rule quadrature of the emission integral across one segment with
/// constant density and linear color: int_0^L sigma e^{-sigma s} c(s) ds.
/// Compensated summation keeps rounding well below the discretization error.
inline Vec3 quadrature_segment(double sigma, double length, const Vec3& c_in, const Vec3& c_out,
                               std::size_t steps) {
  const double h = length / steps;
  Vec3 sum, comp;
  for (std::size_t i = 0; i < steps; ++i) {
    const double s = (i + 0.5) * h;
    const double u = s / length;
    const Vec3 term = (c_in * (1.0 - u) + c_out * u) * (sigma * std::exp(-sigma * s) * h);
    const Vec3 y = term - comp;
    const Vec3 t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

/// Per-ray reference: exhaustive intersection, sort by t_in, composite.
inline Vec3 brute_force_pixel(const geometry::TetMesh& mesh,
                              std::span<const field::TetAttributes> attrs, const Point3& o,
                              const Vec3& d, const Vec3& background, double early_out,
                              double* transmittance = nullptr) {
  const double len = norm(d);
  Vec3 color;
  double T = 1.0;
  for (const auto& s : brute_segments(mesh, o, d)) {
    const auto& a = attrs[s.tet];
    const Point3 p_in = o + d * s.t_in;
    const Point3 p_out = o + d * s.t_out;
    const double off_in = dot(a.grad, p_in - a.center);
    const double off_out = dot(a.grad, p_out - a.center);
    const Vec3 c_in = a.base_color + Vec3{off_in, off_in, off_in};
    const Vec3 c_out = a.base_color + Vec3{off_out, off_out, off_out};
    Vec3 delta;
    double alpha;
    direct_segment(a.sigma * len * (s.t_out - s.t_in), c_in, c_out, delta, alpha);
    color += delta * T;
    T *= 1.0 - alpha;
    if (early_out > 0.0 && T < early_out) break;
  }
  if (transmittance) *transmittance = T;
  return color + background * T;
}

}  // namespace radmesh::check
