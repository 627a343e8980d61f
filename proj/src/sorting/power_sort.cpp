#include "radmesh/sorting/power_sort.hpp"

#include <array>

#include "radmesh/parallel.hpp"

namespace radmesh::sorting {

std::vector<std::uint32_t> sort_keys(std::span<const PowerKey> keys) {
  const std::size_t n = keys.size();
  std::vector<std::uint64_t> k0(n), k1(n);
  std::vector<std::uint32_t> i0(n), i1(n);
  for (std::size_t i = 0; i < n; ++i) {
    k0[i] = orderable_bits(keys[i].power);
    i0[i] = keys[i].tet_index;
  }
  if (n <= 1) return i0;

  // All eight histograms in one read pass.
  std::array<std::array<std::size_t, 256>, 8> hist{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = k0[i];
    for (int p = 0; p < 8; ++p) ++hist[p][(k >> (8 * p)) & 0xff];
  }
  for (int p = 0; p < 8; ++p) {
    auto& h = hist[p];
    bool trivial = false;
    for (std::size_t b = 0; b < 256; ++b) {
      if (h[b] == n) trivial = true;
    }
    if (trivial) continue;
    std::size_t sum = 0;
    for (auto& c : h) {
      const auto count = c;
      c = sum;
      sum += count;
    }
    const int shift = 8 * p;
    for (std::size_t i = 0; i < n; ++i) {
      const auto dst = h[(k0[i] >> shift) & 0xff]++;
      k1[dst] = k0[i];
      i1[dst] = i0[i];
    }
    k0.swap(k1);
    i0.swap(i1);
  }
  return i0;
}

std::vector<PowerKey> power_keys(const geometry::TetMesh& mesh, const Point3& origin,
                                 std::size_t threads) {
  const auto& tets = mesh.tets();
  std::vector<PowerKey> keys(tets.size());
  parallel_chunks(tets.size(), resolve_threads(threads), threads,
                  [&](std::size_t b, std::size_t e, std::size_t) {
                    for (std::size_t t = b; t < e; ++t) {
                      keys[t] = {static_cast<std::uint32_t>(t), power_key(tets[t], origin)};
                    }
                  });
  return keys;
}

std::vector<std::uint32_t> visibility_order(const geometry::TetMesh& mesh, const Point3& origin,
                                            std::size_t threads) {
  const auto keys = power_keys(mesh, origin, threads);
  return sort_keys(keys);
}

}  // namespace radmesh::sorting
