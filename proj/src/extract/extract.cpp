#include "radmesh/extract/extract.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "radmesh/parallel.hpp"

namespace radmesh::extract {

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

ContributionMap::ContributionMap(std::vector<double> values) : peak_(std::move(values)) {
  for (const double v : peak_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::Format, "contributions must be finite and non-negative");
    }
  }
}

void ContributionMap::add_camera(const geometry::TetMesh& mesh,
                                 std::span<const field::TetAttributes> attrs,
                                 const render::Camera& camera, const render::Rgb& background,
                                 std::size_t threads) {
  if (peak_.size() != mesh.num_tets()) {
    throw Error(ErrorCode::DimensionMismatch, "contribution map does not match the tet count");
  }
  render::RenderOptions opts;
  opts.early_out = 0.0;
  opts.background = background;
  opts.threads = threads;
  const render::FrameRenderer renderer(mesh, attrs, camera, opts);
  const std::size_t rows = static_cast<std::size_t>(camera.height);
  const std::size_t chunks = std::min(resolve_threads(threads), std::max<std::size_t>(rows, 1));
  std::vector<std::vector<double>> shards(chunks);
  parallel_chunks(rows, chunks, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
    auto& peak = shards[c];
    peak.assign(peak_.size(), 0.0);
    render::RayRecord record;
    for (std::size_t y = b; y < e; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        renderer.trace_pixel(x, static_cast<int>(y), record);
        for (const auto& s : record.segments) {
          peak[s.tet] = std::max(peak[s.tet], luminance(s.delta * s.transmittance));
        }
      }
    }
  });
  for (const auto& shard : shards) {
    for (std::size_t k = 0; k < shard.size(); ++k) peak_[k] = std::max(peak_[k], shard[k]);
  }
}

void ContributionMap::merge(const ContributionMap& other) {
  if (other.peak_.size() != peak_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "contribution maps differ in size");
  }
  for (std::size_t k = 0; k < peak_.size(); ++k) peak_[k] = std::max(peak_[k], other.peak_[k]);
}

ContributionMap peak_contribution(const field::Field& field, const geometry::TetMesh& mesh,
                                  std::span<const render::Camera> cameras, std::size_t threads) {
  ContributionMap total(mesh.num_tets());
  const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(cameras.size(), 1));
  std::vector<ContributionMap> shards(workers, ContributionMap(mesh.num_tets()));
  parallel_chunks(cameras.size(), workers, workers, [&](std::size_t b, std::size_t e, std::size_t c) {
    for (std::size_t i = b; i < e; ++i) {
      const auto attrs = field::evaluate_field(field, mesh, cameras[i].origin(), 1);
      shards[c].add_camera(mesh, attrs, cameras[i], {}, 1);
    }
  });
  for (const auto& s : shards) total.merge(s);
  return total;
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

SurfaceMesh extract_surface(const ContributionMap& map, const geometry::TetMesh& mesh,
                            double threshold) {
  if (map.size() != mesh.num_tets()) {
    throw Error(ErrorCode::DimensionMismatch, "contribution map does not match the tet count");
  }
  const auto& tets = mesh.tets();
  std::vector<char> kept(tets.size(), 0);
  SurfaceMesh out;
  for (std::size_t k = 0; k < tets.size(); ++k) {
    kept[k] = map[k] >= threshold;
    out.kept_tets += kept[k];
  }
  if (out.kept_tets == 0) {
    throw Error(ErrorCode::EmptySelection, "no tet reaches the contribution threshold");
  }
  UnionFind uf(tets.size());
  for (std::size_t k = 0; k < tets.size(); ++k) {
    if (!kept[k]) continue;
    for (const std::uint32_t n : tets[k].neighbors) {
      if (n != geometry::kBoundary && kept[n]) uf.unite(static_cast<std::uint32_t>(k), n);
    }
  }
  // components numbered by their smallest tet index
  std::vector<std::uint32_t> label(tets.size(), geometry::kBoundary);
  std::map<std::uint32_t, std::uint32_t> root_label;
  for (std::size_t k = 0; k < tets.size(); ++k) {
    if (!kept[k]) continue;
    const auto root = uf.find(static_cast<std::uint32_t>(k));
    auto [it, inserted] = root_label.try_emplace(root, static_cast<std::uint32_t>(root_label.size()));
    label[k] = it->second;
  }
  out.num_components = root_label.size();

  std::vector<std::uint32_t> remap(mesh.num_points(), geometry::kBoundary);
  auto vertex = [&](std::uint32_t v) {
    if (remap[v] == geometry::kBoundary) {
      remap[v] = static_cast<std::uint32_t>(out.vertices.size());
      out.vertices.push_back(mesh.points()[v]);
    }
    return remap[v];
  };
  std::vector<std::vector<std::uint32_t>> members(out.num_components);
  for (std::size_t k = 0; k < tets.size(); ++k) {
    if (kept[k]) members[label[k]].push_back(static_cast<std::uint32_t>(k));
  }
  for (std::uint32_t c = 0; c < out.num_components; ++c) {
    for (const std::uint32_t k : members[c]) {
      for (int f = 0; f < 4; ++f) {
        const std::uint32_t n = tets[k].neighbors[f];
        if (n != geometry::kBoundary && kept[n]) continue;
        const auto& fv = geometry::kFaceVerts[f];
        out.triangles.push_back({vertex(tets[k].verts[fv[0]]), vertex(tets[k].verts[fv[1]]),
                                 vertex(tets[k].verts[fv[2]])});
        out.triangle_component.push_back(c);
      }
    }
  }
  return out;
}

namespace {

std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_counts(const SurfaceMesh& surface,
                                                                  std::uint32_t component) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (std::size_t i = 0; i < surface.triangles.size(); ++i) {
    if (surface.triangle_component[i] != component) continue;
    const auto& t = surface.triangles[i];
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e], b = t[(e + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  return count;
}

}  // namespace

std::size_t open_edges(const SurfaceMesh& surface, std::uint32_t component) {
  std::size_t bad = 0;
  for (const auto& [edge, n] : edge_counts(surface, component)) bad += n != 2;
  return bad;
}

std::size_t boundary_edges(const SurfaceMesh& surface, std::uint32_t component) {
  std::size_t odd = 0;
  for (const auto& [edge, n] : edge_counts(surface, component)) odd += n % 2;
  return odd;
}

void write_obj(const std::string& path, const SurfaceMesh& surface) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out.precision(17);
  for (const auto& v : surface.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  // triangles are stored grouped by component
  for (std::size_t i = 0; i < surface.triangles.size(); ++i) {
    const std::uint32_t c = surface.triangle_component[i];
    if (i == 0 || c != surface.triangle_component[i - 1]) out << "g component_" << c << '\n';
    const auto& t = surface.triangles[i];
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

void write_ply(const std::string& path, const SurfaceMesh& surface) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << surface.vertices.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << surface.triangles.size() << '\n'
      << "property list uchar uint vertex_indices\nproperty uint component\nend_header\n";
  for (const auto& v : surface.vertices) {
    const double xyz[3] = {v.x, v.y, v.z};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (std::size_t i = 0; i < surface.triangles.size(); ++i) {
    const unsigned char n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(surface.triangles[i].data()), 12);
    out.write(reinterpret_cast<const char*>(&surface.triangle_component[i]), 4);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

}  // namespace radmesh::extract
