#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "radmesh/geometry/tet_mesh.hpp"

namespace radmesh::sorting {

struct PowerKey {
  std::uint32_t tet_index = 0;
  double power = 0.0;
};

/// Power of `origin` with respect to the tet's circumsphere:
/// |center - origin|^2 - radius^2. Negative inside the sphere.
inline double power_key(const geometry::Tetra& t, const Point3& origin) {
  return norm2(t.circumcenter - origin) - t.circumradius_sq;
}

/// Order-preserving map from a double to an unsigned integer. -0.0 and +0.0
/// map to the same value so ties follow index order like a stable comparison sort.
inline std::uint64_t orderable_bits(double v) {
  v += 0.0;  // canonicalize -0.0
  const auto bits = std::bit_cast<std::uint64_t>(v);
  return (bits & 0x8000000000000000ull) ? ~bits : (bits | 0x8000000000000000ull);
}

/// Stable ascending permutation of `keys` by power: LSD radix sort over the
/// full 64-bit orderable key, 8 passes of 8 bits (passes where every key has
/// the same byte are skipped).
std::vector<std::uint32_t> sort_keys(std::span<const PowerKey> keys);

/// Power keys for every tet of `mesh` relative to `origin`.
std::vector<PowerKey> power_keys(const geometry::TetMesh& mesh, const Point3& origin,
                                 std::size_t threads = 1);

/// Front-to-back visibility order of all tets for rays leaving `origin`.
std::vector<std::uint32_t> visibility_order(const geometry::TetMesh& mesh, const Point3& origin,
                                            std::size_t threads = 1);

}  // namespace radmesh::sorting
