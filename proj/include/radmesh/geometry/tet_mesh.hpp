#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "radmesh/vec.hpp"

namespace radmesh::geometry {

inline constexpr std::uint32_t kBoundary = 0xFFFFFFFFu;

/// Vertex slots of the face opposite vertex i. The triple is fixed so that
/// derivative code can rely on the same winding as the forward pass.
inline constexpr std::array<std::array<int, 3>, 4> kFaceVerts{{
    {1, 2, 3},
    {0, 3, 2},
    {0, 1, 3},
    {0, 2, 1},
}};

struct Circumsphere {
  Point3 center;
  double radius_sq = 0.0;
};

/// Circumsphere of a tetrahedron. Throws Error(DegenerateTet) when the four
/// points are exactly coplanar.
Circumsphere circumsphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Same as circumsphere() but never throws: a flat tetrahedron gets its
/// centroid as center and an infinite radius.
Circumsphere circumsphere_unchecked(const Point3& a, const Point3& b, const Point3& c,
                                    const Point3& d);

inline Point3 centroid(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  return (a + b + c + d) * 0.25;
}

/// Reverse-mode derivative of (center, radius) = circumsphere(v) where
/// radius = |center - v0|. Adds into grad_v.
void circumsphere_backward(const std::array<Point3, 4>& v, const Point3& center,
                           const Vec3& grad_center, double grad_radius,
                           std::array<Vec3, 4>& grad_v);

struct Tetra {
  std::array<std::uint32_t, 4> verts{};
  /// neighbors[i] is the tet across the face opposite verts[i], or kBoundary.
  std::array<std::uint32_t, 4> neighbors{kBoundary, kBoundary, kBoundary, kBoundary};
  Point3 circumcenter;
  double circumradius_sq = 0.0;
  Point3 centroid;
};

/// Delaunay tetrahedralization with cached per-tet circumspheres and centroids.
/// The topology is immutable once built; update_positions() moves vertices and
/// refreshes the caches without changing connectivity.
class TetMesh {
 public:
  TetMesh() = default;
  TetMesh(std::vector<Point3> points, std::vector<Tetra> tets);

  const std::vector<Point3>& points() const { return points_; }
  const std::vector<Tetra>& tets() const { return tets_; }
  std::size_t num_tets() const { return tets_.size(); }
  std::size_t num_points() const { return points_.size(); }

  std::array<Point3, 4> tet_points(std::size_t t) const {
    const auto& v = tets_[t].verts;
    return {points_[v[0]], points_[v[1]], points_[v[2]], points_[v[3]]};
  }

  /// Tets incident to vertex v.
  std::span<const std::uint32_t> incident_tets(std::uint32_t v) const {
    return {incidence_.data() + incidence_offsets_[v],
            incidence_.data() + incidence_offsets_[v + 1]};
  }

  /// Diagonal of the axis-aligned bounding box of the points.
  double bounding_diameter() const { return diameter_; }

  void update_positions(std::span<const Point3> points);

 private:
  void refresh_caches();

  std::vector<Point3> points_;
  std::vector<Tetra> tets_;
  std::vector<std::uint32_t> incidence_offsets_;
  std::vector<std::uint32_t> incidence_;
  double diameter_ = 0.0;
};

}  // namespace radmesh::geometry
