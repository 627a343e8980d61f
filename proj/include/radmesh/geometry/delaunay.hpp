#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radmesh/geometry/predicates.hpp"
#include "radmesh/geometry/tet_mesh.hpp"

namespace radmesh::geometry {

struct DelaunayOptions {
  /// Seed for the randomized face order of the location walk. The output does
  /// not depend on it; only the walk length does.
  std::uint64_t walk_seed = 0x9e3779b97f4a7c15ull;
  /// Insert in Morton order instead of input order (faster, same result).
  bool spatial_sort = true;
};

/// Incremental Bowyer-Watson tetrahedralization of the convex hull of `points`.
/// Cospherical and coplanar-on-hull ties are broken by a symbolic perturbation
/// keyed to the lexicographic order of the coordinates, which makes the result
/// unique and independent of the input order. Exactly duplicated points are
/// left unreferenced. Throws InsufficientPoints / AllCoplanar.
TetMesh delaunay(std::span<const Point3> points, const DelaunayOptions& options = {});

/// Perturbed insphere: never Zero for distinct points. Positive means e is in
/// conflict with the positively oriented tet (a,b,c,d).
Sign insphere_perturbed(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
                        const Point3& e);

/// Result of auditing a mesh against the Delaunay invariants.
struct MeshAudit {
  std::size_t non_positive_tets = 0;
  std::size_t empty_sphere_violations = 0;  // vertex strictly inside a circumsphere
  std::size_t adjacency_errors = 0;         // asymmetric or mismatched faces
  std::size_t hull_errors = 0;              // boundary face with a point outside it
  std::size_t unreferenced_points = 0;      // points not used by any tet
  std::size_t coverage_misses = 0;          // hull samples not located in any tet

  bool ok() const {
    return non_positive_tets == 0 && empty_sphere_violations == 0 && adjacency_errors == 0 &&
           hull_errors == 0 && coverage_misses == 0;
  }
  std::string summary() const;
};

/// Brute-force audit: O(points * tets) empty-sphere check, exact orientation
/// of every tet, adjacency symmetry, hull convexity, and `coverage_samples`
/// random convex combinations of the points that must land in some tet.
MeshAudit audit_mesh(const TetMesh& mesh, std::size_t coverage_samples = 200,
                     std::uint64_t seed = 1);

}  // namespace radmesh::geometry
