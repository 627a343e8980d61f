#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/render/camera.hpp"
#include "radmesh/render/renderer.hpp"

namespace radmesh::extract {

/// Rec. 709 luminance.
inline double luminance(const field::Rgb& c) {
  return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z;
}

/// Running per-tet maximum of luminance(w * delta) over pixels, where w is the
/// transmittance in front of the tet. Compositing runs without early-out.
class ContributionMap {
 public:
  explicit ContributionMap(std::size_t num_tets = 0) : peak_(num_tets, 0.0) {}
  /// Precomputed per-tet values; throws Format on negative or non-finite entries.
  explicit ContributionMap(std::vector<double> values);

  std::size_t size() const { return peak_.size(); }
  double operator[](std::size_t k) const { return peak_[k]; }
  const std::vector<double>& values() const { return peak_; }

  /// One render pass of camera over the mesh with the given attributes.
  void add_camera(const geometry::TetMesh& mesh, std::span<const field::TetAttributes> attrs,
                  const render::Camera& camera, const render::Rgb& background = {},
                  std::size_t threads = 0);
  void merge(const ContributionMap& other);

 private:
  std::vector<double> peak_;
};

/// Peak contributions over cameras with attributes evaluated from the field
/// per camera. Parallel over cameras, merged by maximum.
ContributionMap peak_contribution(const field::Field& field, const geometry::TetMesh& mesh,
                                  std::span<const render::Camera> cameras,
                                  std::size_t threads = 0);

struct SurfaceMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;  // outward wound
  std::vector<std::uint32_t> triangle_component;
  std::size_t num_components = 0;
  std::size_t kept_tets = 0;
};

/// Keeps tets with contribution >= threshold, groups them into face-connected
/// components and emits the boundary faces of each component (faces whose
/// other side is not kept or is the hull). Throws EmptySelection when no tet
/// is kept.
SurfaceMesh extract_surface(const ContributionMap& map, const geometry::TetMesh& mesh,
                            double threshold = 0.1);

/// Number of edges of component c not shared by exactly two of its triangles
/// (0 for a closed 2-manifold boundary).
std::size_t open_edges(const SurfaceMesh& surface, std::uint32_t component);
/// Edges of component c used by an odd number of its triangles, i.e. holes.
/// Edges shared by 4, 6, ... triangles are non-manifold but not open.
std::size_t boundary_edges(const SurfaceMesh& surface, std::uint32_t component);

void write_obj(const std::string& path, const SurfaceMesh& surface);
/// Binary little-endian PLY with a per-face component property.
void write_ply(const std::string& path, const SurfaceMesh& surface);

}  // namespace radmesh::extract
