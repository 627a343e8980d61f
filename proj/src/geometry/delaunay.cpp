#include "radmesh/geometry/delaunay.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "radmesh/error.hpp"

namespace radmesh::geometry {

namespace {

constexpr std::int32_t kInfinite = -1;
constexpr std::int32_t kNone = -1;

bool lex_less(const Point3* a, const Point3* b) {
  if (a->x != b->x) return a->x < b->x;
  if (a->y != b->y) return a->y < b->y;
  return a->z < b->z;
}

/// Off-plane helper point for the plane through three non-collinear points.
Point3 off_plane_point(const Point3& p0, const Point3& p1, const Point3& p2) {
  const Vec3 n = cross(p1 - p0, p2 - p0);
  const double scale = std::max({norm(p1 - p0), norm(p2 - p0), 1e-300});
  Point3 q = p0 + normalized(n) * scale;
  if (orient3d(p0, p1, p2, q) != Sign::Zero) return q;
  for (const Vec3& axis : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}) {
    q = p0 + axis * scale;
    if (orient3d(p0, p1, p2, q) != Sign::Zero) return q;
  }
  return q;
}

/// Positive when p (coplanar with p0,p1,p2) is strictly inside their
/// circumcircle after symbolic perturbation.
Sign coplanar_circle_perturbed(const Point3& p0, const Point3& p1, const Point3& p2,
                               const Point3& p) {
  const Point3 q = off_plane_point(p0, p1, p2);
  const Sign local = orient3d(p0, p1, p2, q);
  // Any sphere through p0,p1,p2 cuts the plane in their circumcircle.
  const Sign s = local == Sign::Positive ? insphere(p0, p1, p2, q, p) : insphere(p1, p0, p2, q, p);
  if (s != Sign::Zero) return s;

  std::array<const Point3*, 4> pts{&p0, &p1, &p2, &p};
  std::sort(pts.begin(), pts.end(), lex_less);
  for (int i = 3; i > 0; --i) {
    if (pts[i] == &p) return Sign::Negative;
    Sign o = Sign::Zero;
    if (pts[i] == &p2 && (o = orient3d(p0, p1, p, q)) != Sign::Zero)
      return o == local ? Sign::Positive : Sign::Negative;
    if (pts[i] == &p1 && (o = orient3d(p0, p, p2, q)) != Sign::Zero)
      return o == local ? Sign::Positive : Sign::Negative;
    if (pts[i] == &p0 && (o = orient3d(p, p1, p2, q)) != Sign::Zero)
      return o == local ? Sign::Positive : Sign::Negative;
  }
  return Sign::Negative;
}

std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffull;
  v = (v | v << 16) & 0x1f0000ff0000ffull;
  v = (v | v << 8) & 0x100f00f00f00f00full;
  v = (v | v << 4) & 0x10c30c30c30c30c3ull;
  v = (v | v << 2) & 0x1249249249249249ull;
  return v;
}

bool collinear_exact(const Point3& a, const Point3& b, const Point3& c) {
  const mpq_class ux = mpq_class(b.x) - a.x, uy = mpq_class(b.y) - a.y, uz = mpq_class(b.z) - a.z;
  const mpq_class vx = mpq_class(c.x) - a.x, vy = mpq_class(c.y) - a.y, vz = mpq_class(c.z) - a.z;
  return uy * vz - uz * vy == 0 && uz * vx - ux * vz == 0 && ux * vy - uy * vx == 0;
}

struct Cell {
  std::array<std::int32_t, 4> v;
  std::array<std::int32_t, 4> n;
};

class Builder {
 public:
  Builder(std::span<const Point3> points, const DelaunayOptions& options)
      : pts_(points), rng_(options.walk_seed) {}

  void build(const DelaunayOptions& options) {
    const std::size_t n = pts_.size();
    if (n < 4) throw Error(ErrorCode::InsufficientPoints, "need at least 4 points");
    for (const auto& p : pts_) {
      if (!is_finite(p)) throw Error(ErrorCode::Format, "non-finite point coordinate");
    }
    const auto seed = initial_simplex();
    create_initial(seed);

    std::vector<std::uint32_t> order;
    order.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (std::find(seed.begin(), seed.end(), static_cast<std::int32_t>(i)) == seed.end()) {
        order.push_back(i);
      }
    }
    if (options.spatial_sort) morton_sort(order);
    for (auto i : order) insert(i);
  }

  TetMesh finish() const {
    std::vector<std::int32_t> remap(cells_.size(), kNone);
    std::vector<Tetra> tets;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (alive_[c] && !is_infinite(c)) {
        remap[c] = static_cast<std::int32_t>(tets.size());
        tets.emplace_back();
      }
    }
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (remap[c] == kNone) continue;
      auto& t = tets[remap[c]];
      for (int i = 0; i < 4; ++i) {
        t.verts[i] = static_cast<std::uint32_t>(cells_[c].v[i]);
        const auto nb = cells_[c].n[i];
        t.neighbors[i] = remap[nb] == kNone ? kBoundary : static_cast<std::uint32_t>(remap[nb]);
      }
    }
    return TetMesh(std::vector<Point3>(pts_.begin(), pts_.end()), std::move(tets));
  }

 private:
  bool is_infinite(std::size_t c) const {
    const auto& v = cells_[c].v;
    return v[0] == kInfinite || v[1] == kInfinite || v[2] == kInfinite || v[3] == kInfinite;
  }

  std::array<std::int32_t, 4> initial_simplex() const {
    const std::size_t n = pts_.size();
    std::size_t i1 = 1;
    while (i1 < n && pts_[i1] == pts_[0]) ++i1;
    if (i1 == n) throw Error(ErrorCode::InsufficientPoints, "all points coincide");
    std::size_t i2 = i1 + 1;
    while (i2 < n && collinear_exact(pts_[0], pts_[i1], pts_[i2])) ++i2;
    if (i2 >= n) throw Error(ErrorCode::AllCoplanar, "all points are collinear");
    std::size_t i3 = i2 + 1;
    while (i3 < n && orient3d(pts_[0], pts_[i1], pts_[i2], pts_[i3]) == Sign::Zero) ++i3;
    if (i3 >= n) throw Error(ErrorCode::AllCoplanar, "all points are coplanar");
    std::array<std::int32_t, 4> s{0, static_cast<std::int32_t>(i1), static_cast<std::int32_t>(i2),
                                  static_cast<std::int32_t>(i3)};
    if (orient3d(pts_[s[0]], pts_[s[1]], pts_[s[2]], pts_[s[3]]) == Sign::Negative) {
      std::swap(s[2], s[3]);
    }
    return s;
  }

  std::int32_t new_cell(const Cell& cell) {
    if (!free_.empty()) {
      const auto c = free_.back();
      free_.pop_back();
      cells_[c] = cell;
      alive_[c] = 1;
      return c;
    }
    cells_.push_back(cell);
    alive_.push_back(1);
    stamp_.push_back(0);
    return static_cast<std::int32_t>(cells_.size() - 1);
  }

  void create_initial(const std::array<std::int32_t, 4>& s) {
    const auto root = new_cell({s, {kNone, kNone, kNone, kNone}});
    for (int i = 0; i < 4; ++i) {
      Cell inf{s, {kNone, kNone, kNone, kNone}};
      inf.v[i] = kInfinite;
      // Swapping two finite slots makes "infinite vertex replaced by an
      // outside point" positively oriented.
      std::swap(inf.v[(i + 1) % 4], inf.v[(i + 2) % 4]);
      const auto c = new_cell(inf);
      cells_[root].n[i] = c;
      cells_[c].n[i] = root;
    }
    // Infinite cells are mutually adjacent across faces containing the
    // infinite vertex; connect them by matching shared vertex triples.
    for (int a = 1; a <= 4; ++a) {
      for (int b = a + 1; b <= 4; ++b) {
        link_if_sharing_face(a, b);
      }
    }
    last_ = root;
  }

  void link_if_sharing_face(std::int32_t a, std::int32_t b) {
    for (int i = 0; i < 4; ++i) {
      // face i of a = all vertices except v[i]
      int matches = 0;
      for (int k = 0; k < 4; ++k) {
        if (k == i) continue;
        for (int m = 0; m < 4; ++m) matches += cells_[a].v[k] == cells_[b].v[m];
      }
      if (matches == 3) {
        for (int j = 0; j < 4; ++j) {
          bool present = false;
          for (int k = 0; k < 4; ++k) present |= (k != i && cells_[a].v[k] == cells_[b].v[j]);
          if (!present) {
            cells_[a].n[i] = b;
            cells_[b].n[j] = a;
          }
        }
      }
    }
  }

  Sign conflict(std::int32_t c, std::uint32_t pi) const {
    const auto& v = cells_[c].v;
    const Point3& p = pts_[pi];
    int k = -1;
    for (int i = 0; i < 4; ++i) {
      if (v[i] == kInfinite) k = i;
    }
    if (k < 0) return insphere_perturbed(pts_[v[0]], pts_[v[1]], pts_[v[2]], pts_[v[3]], p);
    std::array<const Point3*, 4> q{};
    for (int i = 0; i < 4; ++i) q[i] = i == k ? &p : &pts_[v[i]];
    const Sign o = orient3d(*q[0], *q[1], *q[2], *q[3]);
    if (o != Sign::Zero) return o;
    std::array<const Point3*, 3> f{};
    int m = 0;
    for (int i = 0; i < 4; ++i) {
      if (i != k) f[m++] = &pts_[v[i]];
    }
    return coplanar_circle_perturbed(*f[0], *f[1], *f[2], p);
  }

  /// Visibility walk. Returns a cell in conflict with p, or kNone when p
  /// duplicates an existing vertex.
  std::int32_t locate(std::uint32_t pi) {
    const Point3& p = pts_[pi];
    std::int32_t c = last_;
    if (!alive_[c] || is_infinite(c)) c = any_finite();
    std::size_t guard = 0;
    const std::size_t guard_limit = 4 * cells_.size() + 64;
    while (true) {
      if (is_infinite(c)) return c;
      const auto& v = cells_[c].v;
      for (int k = 0; k < 4; ++k) {
        if (pts_[v[k]] == p) return kNone;
      }
      const int start = static_cast<int>(rng_() & 3u);
      bool moved = false;
      for (int s = 0; s < 4; ++s) {
        const int j = (start + s) & 3;
        std::array<const Point3*, 4> q{&pts_[v[0]], &pts_[v[1]], &pts_[v[2]], &pts_[v[3]]};
        q[j] = &p;
        if (orient3d(*q[0], *q[1], *q[2], *q[3]) == Sign::Negative) {
          c = cells_[c].n[j];
          moved = true;
          break;
        }
      }
      if (!moved) return c;
      if (++guard > guard_limit) return brute_force_locate(pi);
    }
  }

  std::int32_t any_finite() const {
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (alive_[c] && !is_infinite(c)) return static_cast<std::int32_t>(c);
    }
    return 0;
  }

  std::int32_t brute_force_locate(std::uint32_t pi) const {
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (alive_[c] && conflict(static_cast<std::int32_t>(c), pi) == Sign::Positive) {
        return static_cast<std::int32_t>(c);
      }
    }
    return kNone;
  }

  void insert(std::uint32_t pi) {
    const auto seed = locate(pi);
    if (seed == kNone) return;  // duplicate point

    ++generation_;
    conflict_cells_.clear();
    stack_.clear();
    stack_.push_back(seed);
    stamp_[seed] = generation_;
    conflict_cells_.push_back(seed);
    boundary_.clear();
    while (!stack_.empty()) {
      const auto c = stack_.back();
      stack_.pop_back();
      for (int i = 0; i < 4; ++i) {
        const auto nb = cells_[c].n[i];
        if (stamp_[nb] == generation_) continue;
        if (rejected_stamp(nb)) {
          boundary_.push_back({c, i});
          continue;
        }
        if (conflict(nb, pi) == Sign::Positive) {
          stamp_[nb] = generation_;
          conflict_cells_.push_back(nb);
          stack_.push_back(nb);
        } else {
          mark_rejected(nb);
          boundary_.push_back({c, i});
        }
      }
    }

    // One new cell per boundary facet: the old cell with the facet's opposite
    // vertex replaced by the new point.
    created_.clear();
    for (const auto& [c, i] : boundary_) {
      Cell cell = cells_[c];
      cell.v[i] = static_cast<std::int32_t>(pi);
      const auto outside = cells_[c].n[i];
      cell.n = {kNone, kNone, kNone, kNone};
      cell.n[i] = outside;
      const auto nc = new_cell(cell);
      for (int j = 0; j < 4; ++j) {
        if (cells_[outside].n[j] == c) cells_[outside].n[j] = nc;
      }
      created_.push_back({nc, i});
    }

    // Link new cells across faces that contain the new point. Such a face is
    // identified by the two other vertices it contains.
    edges_.clear();
    for (const auto& [nc, pslot] : created_) {
      for (int j = 0; j < 4; ++j) {
        if (j == pslot) continue;
        std::int32_t a = kNone, b = kNone;
        for (int k = 0; k < 4; ++k) {
          if (k == j || k == pslot) continue;
          (a == kNone ? a : b) = cells_[nc].v[k];
        }
        if (a > b) std::swap(a, b);
        edges_.push_back({a, b, nc, j});
      }
    }
    std::sort(edges_.begin(), edges_.end(), [](const EdgeKey& l, const EdgeKey& r) {
      return l.a != r.a ? l.a < r.a : l.b < r.b;
    });
    for (std::size_t e = 0; e + 1 < edges_.size(); e += 2) {
      const auto& l = edges_[e];
      const auto& r = edges_[e + 1];
      cells_[l.cell].n[l.face] = r.cell;
      cells_[r.cell].n[r.face] = l.cell;
    }

    for (auto c : conflict_cells_) {
      alive_[c] = 0;
      free_.push_back(c);
    }
    for (const auto& [nc, pslot] : created_) {
      if (!is_infinite(nc)) {
        last_ = nc;
        break;
      }
    }
  }

  bool rejected_stamp(std::int32_t c) const { return rejected_[c % rejected_.size()] == key(c); }
  void mark_rejected(std::int32_t c) { rejected_[c % rejected_.size()] = key(c); }
  std::uint64_t key(std::int32_t c) const {
    return (static_cast<std::uint64_t>(generation_) << 32) | static_cast<std::uint32_t>(c);
  }

  void morton_sort(std::vector<std::uint32_t>& order) const {
    Vec3 lo = pts_[0], hi = pts_[0];
    for (const auto& p : pts_) {
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    const Vec3 ext = hi - lo;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed;
    keyed.reserve(order.size());
    for (auto i : order) {
      std::uint64_t code = 0;
      for (int k = 0; k < 3; ++k) {
        const double t = ext[k] > 0 ? (pts_[i][k] - lo[k]) / ext[k] : 0.0;
        const auto q = static_cast<std::uint64_t>(std::clamp(t, 0.0, 1.0) * 2097151.0);
        code |= spread_bits(q) << k;
      }
      keyed.emplace_back(code, i);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t k = 0; k < keyed.size(); ++k) order[k] = keyed[k].second;
  }

  struct EdgeKey {
    std::int32_t a, b, cell;
    int face;
  };

  std::span<const Point3> pts_;
  std::mt19937_64 rng_;
  std::vector<Cell> cells_;
  std::vector<char> alive_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::int32_t> free_;
  std::int32_t last_ = 0;
  std::uint32_t generation_ = 0;
  std::vector<std::int32_t> conflict_cells_;
  std::vector<std::int32_t> stack_;
  std::vector<std::pair<std::int32_t, int>> boundary_;
  std::vector<std::pair<std::int32_t, int>> created_;
  std::vector<EdgeKey> edges_;
  std::vector<std::uint64_t> rejected_ = std::vector<std::uint64_t>(4096, ~0ull);
};

}  // namespace

Sign insphere_perturbed(const Point3& p0, const Point3& p1, const Point3& p2, const Point3& p3,
                        const Point3& p) {
  const Sign s = insphere(p0, p1, p2, p3, p);
  if (s != Sign::Zero) return s;
  // Leading nonvanishing monomial of the perturbed determinant, points taken
  // from lexicographically largest down.
  std::array<const Point3*, 5> pts{&p0, &p1, &p2, &p3, &p};
  std::sort(pts.begin(), pts.end(), lex_less);
  for (int i = 4; i > 2; --i) {
    if (pts[i] == &p) return Sign::Negative;
    Sign o = Sign::Zero;
    if (pts[i] == &p3 && (o = orient3d(p0, p1, p2, p)) != Sign::Zero) return o;
    if (pts[i] == &p2 && (o = orient3d(p0, p1, p, p3)) != Sign::Zero) return o;
    if (pts[i] == &p1 && (o = orient3d(p0, p, p2, p3)) != Sign::Zero) return o;
    if (pts[i] == &p0 && (o = orient3d(p, p1, p2, p3)) != Sign::Zero) return o;
  }
  return Sign::Negative;
}

TetMesh delaunay(std::span<const Point3> points, const DelaunayOptions& options) {
  Builder builder(points, options);
  builder.build(options);
  return builder.finish();
}

std::string MeshAudit::summary() const {
  std::ostringstream os;
  os << "non_positive=" << non_positive_tets << " empty_sphere=" << empty_sphere_violations
     << " adjacency=" << adjacency_errors << " hull=" << hull_errors
     << " unreferenced=" << unreferenced_points << " coverage=" << coverage_misses;
  return os.str();
}

MeshAudit audit_mesh(const TetMesh& mesh, std::size_t coverage_samples, std::uint64_t seed) {
  MeshAudit audit;
  const auto& pts = mesh.points();
  const auto& tets = mesh.tets();
  std::vector<char> used(pts.size(), 0);
  for (const auto& t : tets) {
    for (auto v : t.verts) used[v] = 1;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!used[i]) ++audit.unreferenced_points;
  }

  for (std::size_t ti = 0; ti < tets.size(); ++ti) {
    const auto& t = tets[ti];
    const auto& a = pts[t.verts[0]];
    const auto& b = pts[t.verts[1]];
    const auto& c = pts[t.verts[2]];
    const auto& d = pts[t.verts[3]];
    if (orient3d(a, b, c, d) != Sign::Positive) ++audit.non_positive_tets;
    for (std::size_t v = 0; v < pts.size(); ++v) {
      if (v == t.verts[0] || v == t.verts[1] || v == t.verts[2] || v == t.verts[3]) continue;
      if (insphere(a, b, c, d, pts[v]) == Sign::Positive) ++audit.empty_sphere_violations;
    }
    for (int f = 0; f < 4; ++f) {
      const auto nb = t.neighbors[f];
      if (nb == kBoundary) {
        const auto& fv = kFaceVerts[f];
        const auto& p0 = pts[t.verts[fv[0]]];
        const auto& p1 = pts[t.verts[fv[1]]];
        const auto& p2 = pts[t.verts[fv[2]]];
        // face winding is outward, so every point must be on the non-positive side
        for (const auto& p : pts) {
          if (orient3d(p0, p1, p2, p) == Sign::Positive) {
            ++audit.hull_errors;
            break;
          }
        }
        continue;
      }
      if (nb >= tets.size()) {
        ++audit.adjacency_errors;
        continue;
      }
      const auto& other = tets[nb];
      int shared = 0, back = -1;
      for (int k = 0; k < 4; ++k) {
        for (int m = 0; m < 4; ++m) {
          if (m != f && t.verts[m] == other.verts[k]) ++shared;
        }
        if (other.neighbors[k] == ti) back = k;
      }
      if (shared != 3 || back < 0) {
        ++audit.adjacency_errors;
        continue;
      }
      // the back face must be the one opposite the vertex not in our face
      const auto opposite = other.verts[back];
      for (int m = 0; m < 4; ++m) {
        if (m != f && t.verts[m] == opposite) ++audit.adjacency_errors;
      }
    }
  }

  if (coverage_samples > 0 && !tets.empty()) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    std::exponential_distribution<double> expo(1.0);
    for (std::size_t s = 0; s < coverage_samples; ++s) {
      // Interior point of a random non-degenerate tet spanned by four distinct
      // vertices; repeated or coplanar picks would land on the hull boundary
      // where rounding can push q outside.
      std::array<std::size_t, 4> idx{};
      for (int attempt = 0;; ++attempt) {
        for (int k = 0; k < 4; ++k) {
          idx[k] = pick(rng);
          while (!used[idx[k]]) idx[k] = pick(rng);
        }
        if (orient3d(pts[idx[0]], pts[idx[1]], pts[idx[2]], pts[idx[3]]) != Sign::Zero) break;
        if (attempt > 1000) break;
      }
      Point3 q{};
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double w = 0.05 + expo(rng);
        q += pts[idx[k]] * w;
        total += w;
      }
      q = q / total;
      bool found = false;
      for (const auto& t : tets) {
        const auto& a = pts[t.verts[0]];
        const auto& b = pts[t.verts[1]];
        const auto& c = pts[t.verts[2]];
        const auto& d = pts[t.verts[3]];
        if (orient3d(q, b, c, d) != Sign::Negative && orient3d(a, q, c, d) != Sign::Negative &&
            orient3d(a, b, q, d) != Sign::Negative && orient3d(a, b, c, q) != Sign::Negative) {
          found = true;
          break;
        }
      }
      if (!found) ++audit.coverage_misses;
    }
  }
  return audit;
}

}  // namespace radmesh::geometry
