#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <set>

#include "radmesh/error.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/geometry/predicates.hpp"

using namespace radmesh;
using namespace radmesh::geometry;

namespace {

using TetKey = std::array<std::uint32_t, 4>;

std::set<TetKey> canonical(const TetMesh& mesh, const std::vector<std::uint32_t>* relabel = nullptr) {
  std::set<TetKey> out;
  for (const auto& t : mesh.tets()) {
    TetKey k = t.verts;
    if (relabel) {
      for (auto& v : k) v = (*relabel)[v];
    }
    std::sort(k.begin(), k.end());
    out.insert(k);
  }
  return out;
}

// Independent empty-sphere oracle in long double with a relative tie band.
std::size_t brute_force_violations(const TetMesh& mesh) {
  std::size_t bad = 0;
  const auto& pts = mesh.points();
  for (const auto& t : mesh.tets()) {
    long double a[3][3], rhs[3];
    const Point3& p0 = pts[t.verts[0]];
    for (int i = 0; i < 3; ++i) {
      const Point3& pi = pts[t.verts[i + 1]];
      a[i][0] = static_cast<long double>(pi.x) - p0.x;
      a[i][1] = static_cast<long double>(pi.y) - p0.y;
      a[i][2] = static_cast<long double>(pi.z) - p0.z;
      rhs[i] = 0.5L * (a[i][0] * a[i][0] + a[i][1] * a[i][1] + a[i][2] * a[i][2]);
    }
    const long double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                            a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                            a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    long double c[3];
    for (int k = 0; k < 3; ++k) {
      long double m[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = j == k ? rhs[i] : a[i][j];
      c[k] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
              m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
              m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
             det;
    }
    const long double r2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
    for (std::uint32_t v = 0; v < pts.size(); ++v) {
      if (std::find(t.verts.begin(), t.verts.end(), v) != t.verts.end()) continue;
      const long double dx = pts[v].x - p0.x - c[0], dy = pts[v].y - p0.y - c[1],
                        dz = pts[v].z - p0.z - c[2];
      if (dx * dx + dy * dy + dz * dz < r2 * (1.0L - 1e-9L)) ++bad;
    }
  }
  return bad;
}

std::vector<Point3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point3> p(n);
  for (auto& q : p) q = {u(rng), u(rng), u(rng)};
  return p;
}

double total_volume(const TetMesh& mesh) {
  double v = 0.0;
  for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
    const auto p = mesh.tet_points(t);
    v += orient3d_approx(p[0], p[1], p[2], p[3]) / 6.0;
  }
  return v;
}

}  // namespace

TEST(Delaunay, SingleTet) {
  const std::vector<Point3> p{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const TetMesh m = delaunay(p);
  ASSERT_EQ(m.num_tets(), 1u);
  for (auto n : m.tets()[0].neighbors) EXPECT_EQ(n, kBoundary);
  EXPECT_EQ(orient3d(p[m.tets()[0].verts[0]], p[m.tets()[0].verts[1]], p[m.tets()[0].verts[2]],
                     p[m.tets()[0].verts[3]]),
            Sign::Positive);
}

TEST(Delaunay, InteriorPointSplitsIntoFour) {
  const std::vector<Point3> p{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.25, 0.25, 0.25}};
  const TetMesh m = delaunay(p);
  ASSERT_EQ(m.num_tets(), 4u);
  // Brute force over all C(5,4) candidates: exactly the four tets containing
  // vertex 4 are empty-sphere, and the mesh must be that set.
  std::set<TetKey> expected;
  for (int skip = 0; skip < 5; ++skip) {
    TetKey k{};
    int j = 0;
    for (std::uint32_t i = 0; i < 5; ++i)
      if (static_cast<int>(i) != skip) k[j++] = i;
    const Point3 &a = p[k[0]], &b = p[k[1]], &c = p[k[2]], &d = p[k[3]];
    const Point3& e = p[skip];
    Sign o = orient3d(a, b, c, d);
    if (o == Sign::Zero) continue;
    const Sign s = o == Sign::Positive ? insphere(a, b, c, d, e) : insphere(b, a, c, d, e);
    if (s != Sign::Positive) expected.insert(k);
  }
  EXPECT_EQ(canonical(m), expected);
  EXPECT_NEAR(total_volume(m), 1.0 / 6.0, 1e-15);
}

TEST(Delaunay, CubeCorners) {
  std::vector<Point3> p;
  for (int k = 0; k < 8; ++k) p.push_back({double(k & 1), double((k >> 1) & 1), double((k >> 2) & 1)});
  const TetMesh m = delaunay(p);
  EXPECT_TRUE(m.num_tets() == 5 || m.num_tets() == 6) << m.num_tets();
  EXPECT_EQ(brute_force_violations(m), 0u);
  EXPECT_NEAR(total_volume(m), 1.0, 1e-14);
  EXPECT_TRUE(audit_mesh(m).ok()) << audit_mesh(m).summary();
}

TEST(Delaunay, Errors) {
  try {
    delaunay(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  try {
    delaunay(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 3, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllCoplanar);
  }
}

TEST(Delaunay, RandomPointSetsPassBruteForceOracle) {
  for (std::size_t n : {10u, 50u, 200u, 500u}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto p = random_points(n, 100 * n + seed);
      const TetMesh m = delaunay(p);
      EXPECT_EQ(brute_force_violations(m), 0u) << "n=" << n;
      const MeshAudit audit = audit_mesh(m);
      EXPECT_TRUE(audit.ok()) << audit.summary();
      EXPECT_EQ(audit.unreferenced_points, 0u);
    }
  }
}

TEST(Delaunay, LatticeDegeneraciesAreHandled) {
  // Integer lattice: massively cospherical and coplanar.
  std::vector<Point3> p;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) p.push_back({double(i), double(j), double(k)});
  const TetMesh m = delaunay(p);
  EXPECT_EQ(brute_force_violations(m), 0u);
  EXPECT_NEAR(total_volume(m), 27.0, 1e-12);
  const MeshAudit audit = audit_mesh(m);
  EXPECT_TRUE(audit.ok()) << audit.summary();
}

TEST(Delaunay, DuplicatesAreLeftUnreferenced) {
  auto p = random_points(40, 9);
  p.push_back(p[3]);
  p.push_back(p[17]);
  const TetMesh m = delaunay(p);
  const MeshAudit audit = audit_mesh(m);
  EXPECT_TRUE(audit.ok()) << audit.summary();
  EXPECT_EQ(audit.unreferenced_points, 2u);
}

TEST(Delaunay, PermutationInvariance) {
  const auto p = random_points(300, 77);
  const TetMesh m0 = delaunay(p);
  std::vector<std::uint32_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Point3> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[perm[i]];
  const TetMesh m1 = delaunay(q);
  EXPECT_EQ(canonical(m0), canonical(m1, &perm));
  // Also without spatial sorting: insertion order must not matter.
  DelaunayOptions opt;
  opt.spatial_sort = false;
  EXPECT_EQ(canonical(m0), canonical(delaunay(q, opt), &perm));
}

TEST(Delaunay, CosphericalPermutationInvariance) {
  // Cube lattice: with the coordinate-keyed perturbation even tied inputs give
  // the same tets regardless of input order.
  std::vector<Point3> p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) p.push_back({double(i), double(j), double(k)});
  const TetMesh m0 = delaunay(p);
  std::vector<std::uint32_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Point3> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[perm[i]];
  EXPECT_EQ(canonical(m0), canonical(delaunay(q), &perm));
}

TEST(Delaunay, AdjacencySymmetry) {
  const TetMesh m = delaunay(random_points(200, 5));
  const auto& tets = m.tets();
  for (std::uint32_t t = 0; t < tets.size(); ++t) {
    for (int f = 0; f < 4; ++f) {
      const auto n = tets[t].neighbors[f];
      if (n == kBoundary) continue;
      int back = -1;
      for (int g = 0; g < 4; ++g)
        if (tets[n].neighbors[g] == t) back = g;
      ASSERT_GE(back, 0);
      // shared face: the three vertices other than the opposite ones coincide
      std::set<std::uint32_t> a, b;
      for (int i = 0; i < 4; ++i) {
        if (i != f) a.insert(tets[t].verts[i]);
        if (i != back) b.insert(tets[n].verts[i]);
      }
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Delaunay, CircumsphereCacheIsEquidistant) {
  const TetMesh m = delaunay(random_points(100, 8));
  for (std::size_t t = 0; t < m.num_tets(); ++t) {
    const auto& tet = m.tets()[t];
    for (const Point3& v : m.tet_points(t)) {
      EXPECT_NEAR(norm2(v - tet.circumcenter), tet.circumradius_sq,
                  1e-9 * std::max(1.0, tet.circumradius_sq));
    }
  }
}

TEST(Delaunay, UpdatePositionsKeepsTopology) {
  auto p = random_points(60, 2);
  TetMesh m = delaunay(p);
  const auto before = canonical(m);
  for (auto& q : p) q = q * 2.0 + Vec3{1, 0, 0};
  m.update_positions(p);
  EXPECT_EQ(canonical(m), before);
  const auto& t = m.tets()[0];
  EXPECT_NEAR(norm(t.centroid - centroid(p[t.verts[0]], p[t.verts[1]], p[t.verts[2]], p[t.verts[3]])),
              0.0, 1e-14);
}

namespace {

// Five points on the unit sphere in 2-3 flip position: triangle abc on the
// equator band, d above and e below. Moving e radially by +/- eps switches
// between the 2-tet and the 3-tet triangulation.
std::vector<Point3> flip_configuration(double eps) {
  const double pi = 3.14159265358979323846;
  std::vector<Point3> p;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * pi * i / 3.0;
    p.push_back({std::cos(a) * 0.9, std::sin(a) * 0.9, std::sqrt(1.0 - 0.81)});
  }
  p.push_back({0.1, 0.05, 1.0});
  p.back() = normalized(p.back());
  Point3 e = normalized(Point3{-0.05, 0.1, -1.0});
  p.push_back(e * (1.0 + eps));
  return p;
}

double circumcenter_spread(const std::vector<TetMesh>& meshes) {
  std::vector<Point3> centers;
  for (const auto& m : meshes)
    for (const auto& t : m.tets()) centers.push_back(t.circumcenter);
  double spread = 0.0;
  for (const auto& a : centers)
    for (const auto& b : centers) spread = std::max(spread, norm(a - b));
  return spread;
}

}  // namespace

TEST(Delaunay, FlipContinuity) {
  for (double eps : {1e-3, 1e-5}) {
    const TetMesh outside = delaunay(flip_configuration(eps));
    const TetMesh inside = delaunay(flip_configuration(-eps));
    ASSERT_NE(outside.num_tets(), inside.num_tets()) << "configuration must straddle a flip";
    EXPECT_LT(circumcenter_spread({outside, inside}), 10.0 * eps);
  }
}
