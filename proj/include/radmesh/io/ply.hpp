#pragma once

#include <span>
#include <string>
#include <vector>

#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/vec.hpp"

namespace radmesh::io {

/// Vertex positions of an ASCII or binary little-endian PLY file. Any scalar
/// type is accepted for x, y, z; other properties and elements are skipped.
std::vector<Point3> read_points_ply(const std::string& path);

/// Binary little-endian PLY with double x, y, z.
void write_points_ply(const std::string& path, std::span<const Point3> points);

/// Binary little-endian PLY with the vertices and a "tetra" element holding
/// four vertex indices per tet.
void write_mesh_ply(const std::string& path, const geometry::TetMesh& mesh);

}  // namespace radmesh::io
