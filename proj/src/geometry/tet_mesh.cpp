#include "radmesh/geometry/tet_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radmesh/error.hpp"
#include "radmesh/geometry/predicates.hpp"

namespace radmesh::geometry {

Circumsphere circumsphere_unchecked(const Point3& a, const Point3& b, const Point3& c,
                                    const Point3& d) {
  const Vec3 ba = b - a, ca = c - a, da = d - a;
  const double denom = 2.0 * dot(ba, cross(ca, da));
  if (denom == 0.0 || !std::isfinite(denom)) {
    return {centroid(a, b, c, d), std::numeric_limits<double>::infinity()};
  }
  const Vec3 offset =
      (norm2(ba) * cross(ca, da) + norm2(ca) * cross(da, ba) + norm2(da) * cross(ba, ca)) / denom;
  return {a + offset, norm2(offset)};
}

Circumsphere circumsphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  if (orient3d(a, b, c, d) == Sign::Zero) {
    throw Error(ErrorCode::DegenerateTet, "circumsphere of coplanar points");
  }
  return circumsphere_unchecked(a, b, c, d);
}

void circumsphere_backward(const std::array<Point3, 4>& v, const Point3& center,
                           const Vec3& grad_center, double grad_radius,
                           std::array<Vec3, 4>& grad_v) {
  // radius = |center - v0|
  Vec3 gc = grad_center;
  const Vec3 rvec = center - v[0];
  const double r = norm(rvec);
  if (r > 0.0 && grad_radius != 0.0) {
    const Vec3 u = rvec * (grad_radius / r);
    gc += u;
    grad_v[0] -= u;
  }
  // center solves A c = b with rows A_i = v_i - v_0, b_i = (|v_i|^2 - |v_0|^2) / 2.
  // Perturbing gives A dc = r with r_i = (v_i - c).dv_i for i >= 1 and
  // r_i = (c - v_0).dv_0 for the v_0 contribution. Adjoint: lambda = A^-T gc.
  const Vec3 e1 = v[1] - v[0], e2 = v[2] - v[0], e3 = v[3] - v[0];
  const double det = dot(e1, cross(e2, e3));
  if (det == 0.0 || !std::isfinite(det)) return;
  // A^-1 has columns (e2 x e3, e3 x e1, e1 x e2) / det, so A^-T gc has
  // components (e2 x e3).gc / det, ...
  const double l1 = dot(cross(e2, e3), gc) / det;
  const double l2 = dot(cross(e3, e1), gc) / det;
  const double l3 = dot(cross(e1, e2), gc) / det;
  grad_v[1] += (v[1] - center) * l1;
  grad_v[2] += (v[2] - center) * l2;
  grad_v[3] += (v[3] - center) * l3;
  grad_v[0] += (center - v[0]) * (l1 + l2 + l3);
}

TetMesh::TetMesh(std::vector<Point3> points, std::vector<Tetra> tets)
    : points_(std::move(points)), tets_(std::move(tets)) {
  incidence_offsets_.assign(points_.size() + 1, 0);
  for (const auto& t : tets_) {
    for (auto v : t.verts) ++incidence_offsets_[v + 1];
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    incidence_offsets_[i + 1] += incidence_offsets_[i];
  }
  incidence_.resize(incidence_offsets_.back());
  std::vector<std::uint32_t> cursor(incidence_offsets_.begin(), incidence_offsets_.end() - 1);
  for (std::uint32_t t = 0; t < tets_.size(); ++t) {
    for (auto v : tets_[t].verts) incidence_[cursor[v]++] = t;
  }
  refresh_caches();
}

void TetMesh::update_positions(std::span<const Point3> points) {
  if (points.size() != points_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "update_positions: vertex count changed");
  }
  std::copy(points.begin(), points.end(), points_.begin());
  refresh_caches();
}

void TetMesh::refresh_caches() {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -lo;
  for (const auto& p : points_) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  diameter_ = points_.empty() ? 0.0 : norm(hi - lo);
  for (auto& t : tets_) {
    const auto& a = points_[t.verts[0]];
    const auto& b = points_[t.verts[1]];
    const auto& c = points_[t.verts[2]];
    const auto& d = points_[t.verts[3]];
    const auto s = circumsphere_unchecked(a, b, c, d);
    t.circumcenter = s.center;
    t.circumradius_sq = s.radius_sq;
    t.centroid = centroid(a, b, c, d);
  }
}

}  // namespace radmesh::geometry
