#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "radmesh/field/contract.hpp"
#include "radmesh/field/field.hpp"
#include "radmesh/field/hash_grid.hpp"
#include "radmesh/field/sh.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/check/finite_diff.hpp"

using namespace radmesh;
using namespace radmesh::field;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

HashGridConfig toy_grid_config() {
  HashGridConfig c;
  c.levels = 2;
  c.n_min = 2;
  c.n_max = 4;
  c.log2_table_size = 6;  // 64 entries: level 0 dense (27), level 1 hashed (125 > 64)
  c.features = 2;
  return c;
}

void randomize(std::span<double> p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : p) x = u(rng);
}

}  // namespace

TEST(Contract, Examples) {
  EXPECT_EQ(contract({0.3, 0, 0}), (Point3{0.3, 0, 0}));
  const Point3 c = contract({4, 0, 0});
  EXPECT_DOUBLE_EQ(c.x, 1.75);
  EXPECT_DOUBLE_EQ(c.y, 0.0);
  EXPECT_NEAR(norm(contract({1e12, 3e11, -2e12})), 2.0, 1e-11);
  EXPECT_LT(norm(contract({1e12, 3e11, -2e12})), 2.0);
}

TEST(Contract, BackwardMatchesFiniteDifferences) {
  const Point3 x{1.3, -0.7, 2.1};
  const Vec3 g{0.3, -1.1, 0.6};
  const Vec3 an = contract_backward(x, g);
  for (int k = 0; k < 3; ++k) {
    Point3 a = x, b = x;
    a[k] += 1e-6;
    b[k] -= 1e-6;
    const double fd = (dot(g, contract(a)) - dot(g, contract(b))) / 2e-6;
    EXPECT_LT(rel_err(an[k], fd), 1e-7);
  }
}

TEST(Downweight, Examples) {
  EXPECT_DOUBLE_EQ(downweight(0.0, 16), 1.0);
  const double n = 64.0;
  EXPECT_NEAR(downweight(1.0 / (2.0 * std::sqrt(2.0) * n), n), 0.8427007929497149, 1e-14);
  EXPECT_LT(downweight(1e9, n), 1e-9);
}

TEST(Downweight, StrictlyDecreasing) {
  for (double n : {16.0, 100.0, 512.0}) {
    // below r0 the erf rounds to exactly 1 in double precision
    const double r0 = 1.0 / (4.0 * std::sqrt(8.0) * n);
    double prev = downweight(r0 / 1.3, n);
    for (double r = r0; r < 1.0; r *= 1.3) {
      const double v = downweight(r, n);
      EXPECT_LT(v, prev);
      prev = v;
      const double fd = (downweight(r * (1 + 1e-6), n) - downweight(r * (1 - 1e-6), n)) / (2e-6 * r);
      EXPECT_LT(rel_err(downweight_derivative(r, n), fd), 1e-5);
    }
  }
}

TEST(HashGrid, LevelsStrictlyIncreasing) {
  const HashGrid g;
  EXPECT_EQ(g.resolution(0), 16);
  EXPECT_EQ(g.resolution(g.levels() - 1), 512);
  for (int l = 1; l < g.levels(); ++l) EXPECT_GT(g.resolution(l), g.resolution(l - 1));
  for (double p : g.params()) EXPECT_LE(std::abs(p), 1e-4);
  EXPECT_TRUE(g.level_is_dense(0));
  EXPECT_FALSE(g.level_is_dense(g.levels() - 1));
}

TEST(HashGrid, ZeroFeaturesGiveZeroVector) {
  HashGrid g;
  std::fill(g.params().begin(), g.params().end(), 0.0);
  for (double b : query(g, {0.1, 0.2, 0.3}, 0.05)) EXPECT_EQ(b, 0.0);
}

TEST(HashGrid, LatticeNodeReturnsEntry) {
  HashGrid g(toy_grid_config(), 3);
  randomize(g.params(), 4, 1.0);
  // level 1 has n=4: u = x/4 + 0.5 and p = 4u, so x = (1,0,0) sits on node
  // (3,2,2); the contraction is the identity on the unit ball.
  const Point3 x{1.0, 0.0, 0.0};
  const auto b = query(g, x, 0.0);
  const auto e = g.entry(1, {3, 2, 2});
  EXPECT_DOUBLE_EQ(b[2], e[0]);
  EXPECT_DOUBLE_EQ(b[3], e[1]);
}

TEST(HashGrid, ToyGridManualTrilinearAndDownweight) {
  HashGrid g(toy_grid_config(), 3);
  randomize(g.params(), 8, 1.0);
  // Unit tet: centroid (1/4,1/4,1/4), circumradius sqrt(3)/2.
  const Point3 c{0.25, 0.25, 0.25};
  const double R = std::sqrt(0.75);
  const auto b = query(g, c, R);
  for (int l = 0; l < 2; ++l) {
    const int n = g.resolution(l);
    const double u = 0.25 / 4.0 + 0.5;  // same on each axis
    const double p = u * n;
    const auto i0 = static_cast<std::int64_t>(std::floor(p));
    const double f = p - i0;
    const double phi = std::erf(1.0 / std::sqrt(8.0 * (R / 4.0) * (R / 4.0) * n * n));
    for (int ch = 0; ch < 2; ++ch) {
      double acc = 0.0;
      for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
          for (int dz = 0; dz < 2; ++dz) {
            const double w = (dx ? f : 1 - f) * (dy ? f : 1 - f) * (dz ? f : 1 - f);
            acc += w * g.entry(l, {i0 + dx, i0 + dy, i0 + dz})[ch];
          }
      EXPECT_NEAR(b[l * 2 + ch], phi * acc, 1e-15);
    }
  }
}

TEST(HashGrid, BackwardMatchesFiniteDifferences) {
  HashGrid g(toy_grid_config(), 5);
  randomize(g.params(), 6, 1.0);
  std::vector<double> w(g.feature_dim());
  randomize(w, 7, 1.0);
  for (const Point3 c : {Point3{0.13, -0.41, 0.27}, Point3{1.7, 0.4, -2.3}}) {
    const double R = 0.31;
    auto f = [&](const HashGrid& grid, const Point3& x, double r) {
      const auto b = query(grid, x, r);
      double s = 0;
      for (std::size_t i = 0; i < b.size(); ++i) s += w[i] * b[i];
      return s;
    };
    QueryCache cache;
    query(g, c, R, &cache);
    std::vector<double> gp(g.params().size(), 0.0);
    Vec3 gc{};
    double gr = 0.0;
    query_backward(g, cache, w, gp, gc, gr);
    const double h = 1e-6;
    for (std::size_t i = 0; i < gp.size(); ++i) {
      HashGrid a = g, b = g;
      a.params()[i] += h;
      b.params()[i] -= h;
      const double fd = (f(a, c, R) - f(b, c, R)) / (2 * h);
      EXPECT_NEAR(gp[i], fd, 1e-8);
    }
    for (int k = 0; k < 3; ++k) {
      Point3 a = c, b = c;
      a[k] += h;
      b[k] -= h;
      EXPECT_LT(rel_err(gc[k], (f(g, a, R) - f(g, b, R)) / (2 * h)), 1e-4);
    }
    EXPECT_LT(rel_err(gr, (f(g, c, R + h) - f(g, c, R - h)) / (2 * h)), 1e-4);
  }
}

TEST(ShBasis, DegreeZeroConstant) {
  const auto y = sh_basis({0, 0, 1}, 0);
  EXPECT_NEAR(y[0], 0.28209479177387814, 1e-16);
  EXPECT_NEAR(y[0], 1.0 / (2.0 * std::sqrt(std::numbers::pi)), 1e-16);
}

TEST(ShBasis, BandOneAlongZ) {
  const auto y = sh_basis({0, 0, 1}, 1);
  const double k = std::sqrt(3.0 / (4.0 * std::numbers::pi));
  EXPECT_NEAR(y[1], 0.0, 1e-16);
  EXPECT_NEAR(y[2], k, 1e-15);
  EXPECT_NEAR(y[3], 0.0, 1e-16);
}

TEST(ShBasis, SampledOrthonormality) {
  // 1e5 quasi-random directions on a spherical Fibonacci lattice; the equal
  // area points keep the sampling error well under the 1e-3 tolerance.
  const int N = 100000;
  constexpr int K = kMaxShCoeffs;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::array<std::array<double, K>, K> acc{};
  for (int s = 0; s < N; ++s) {
    const double z = 1.0 - (2.0 * s + 1.0) / N;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * s;
    const auto y = sh_basis({r * std::cos(phi), r * std::sin(phi), z}, kMaxShDegree);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) acc[i][j] += y[i] * y[j];
  }
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      EXPECT_NEAR(4.0 * std::numbers::pi * acc[i][j] / N, i == j ? 1.0 : 0.0, 1e-3);
}

TEST(ShBasis, ExactQuadratureOrthonormality) {
  // Product Gauss-Legendre in cos(theta) times uniform phi integrates the
  // degree <= 6 products exactly.
  const int nt = 16, np = 32;
  std::vector<double> x(nt), w(nt);
  for (int i = 0; i < nt; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (nt + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= nt; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = nt * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        w[i] = 2.0 / ((1 - z * z) * dp * dp);
        break;
      }
    }
    x[i] = z;
  }
  constexpr int K = kMaxShCoeffs;
  std::array<std::array<double, K>, K> acc{};
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / np;
      const double s = std::sqrt(1 - x[i] * x[i]);
      const auto y = sh_basis({s * std::cos(phi), s * std::sin(phi), x[i]}, kMaxShDegree);
      const double wt = w[i] * 2.0 * std::numbers::pi / np;
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b) acc[a][b] += wt * y[a] * y[b];
    }
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) EXPECT_NEAR(acc[a][b], a == b ? 1.0 : 0.0, 1e-3);
}

TEST(ShBasis, BackwardMatchesFiniteDifferences) {
  const Vec3 d = normalized(Vec3{0.3, -0.5, 0.8});
  std::vector<double> w(kMaxShCoeffs);
  randomize(w, 2, 1.0);
  Vec3 gd{};
  sh_basis_backward(d, 3, w, gd);
  for (int k = 0; k < 3; ++k) {
    Vec3 a = d, b = d;
    a[k] += 1e-6;
    b[k] -= 1e-6;
    const auto ya = sh_basis(a, 3), yb = sh_basis(b, 3);
    double fd = 0;
    for (int i = 0; i < kMaxShCoeffs; ++i) fd += w[i] * (ya[i] - yb[i]) / 2e-6;
    EXPECT_LT(rel_err(gd[k], fd), 1e-7);
  }
}

namespace {

// Sets the output bias of a head and zeroes its second layer weights so the
// head output is exactly the bias.
void pin_head_output(Heads& heads, const DenseHead& h, std::span<const double> value) {
  auto p = heads.params();
  const std::size_t w2 = h.offset + static_cast<std::size_t>(h.hidden) * h.in + h.hidden;
  for (int i = 0; i < h.out * h.hidden; ++i) p[w2 + i] = 0.0;
  for (int o = 0; o < h.out; ++o) p[w2 + static_cast<std::size_t>(h.out) * h.hidden + o] = value[o];
}

}  // namespace

TEST(TetAttributes, Examples) {
  Heads heads(16, HeadsConfig{}, 1);
  std::vector<double> b(16, 0.01);
  const double zero[3] = {0, 0, 0};
  pin_head_output(heads, heads.sigma_head(), zero);
  pin_head_output(heads, heads.grad_head(), zero);
  const Vec3 dir = normalized(Vec3{1, 2, 3});
  auto a = tet_attributes(heads, b, {0, 0, 0}, 1.0, dir);
  EXPECT_DOUBLE_EQ(a.sigma, 1.0);
  EXPECT_EQ(a.grad, Vec3{});
  for (int c = 0; c < 3; ++c) EXPECT_GE(a.base_color[c], 0.0);

  // Saturated gradient: |grad| -> min(c0)/R
  const double big[3] = {0.0, 3e7, -4e7};
  pin_head_output(heads, heads.grad_head(), big);
  a = tet_attributes(heads, b, {0, 0, 0}, 2.0, dir);
  EXPECT_NEAR(norm(a.grad), min_component(a.base_color) / 2.0, 1e-12);
}

TEST(TetAttributes, ColorAtCenterAndTightBound) {
  Heads heads(16, HeadsConfig{}, 1);
  std::vector<double> b(16, 0.0);
  // c0 = softplus_10(z) = 0.5 on every channel, independent of direction:
  // only the DC coefficient is nonzero.
  const int K = heads.sh_count();
  std::vector<double> sh(3 * K, 0.0);
  const double z = std::log(std::expm1(10.0 * 0.5)) / 10.0;
  for (int c = 0; c < 3; ++c) sh[c * K] = z / 0.28209479177387814;
  pin_head_output(heads, heads.sh_head(), sh);
  const Vec3 u = normalized(Vec3{0.2, -0.4, 0.9});
  const double big[3] = {u.x * 1e9, u.y * 1e9, u.z * 1e9};
  pin_head_output(heads, heads.grad_head(), big);
  const Point3 center{0.3, 0.1, -0.2};
  const double R = 0.7;
  const auto a = tet_attributes(heads, b, center, R, {0, 0, 1});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(a.base_color[c], 0.5, 1e-12);
  const Rgb at_center = tet_color_at(a, center);
  EXPECT_EQ(at_center, a.base_color);
  const Rgb at_edge = tet_color_at(a, center - u * R);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(at_edge[c], 0.0, 1e-9);
}

TEST(TetAttributes, NonNegativeOnQuerySphere) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.05, 3.0);
  Heads heads(16, HeadsConfig{}, 9);
  randomize(heads.params(), 10, 1.5);
  std::vector<double> b(16);
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    for (auto& x : b) x = g(rng);
    const Point3 center{g(rng), g(rng), g(rng)};
    const double R = u(rng);
    const Vec3 dir = normalized(Vec3{g(rng), g(rng), g(rng)});
    const auto a = tet_attributes(heads, b, center, R, dir);
    ASSERT_GT(a.sigma, 0.0);
    ASSERT_TRUE(std::isfinite(a.sigma) && is_finite(a.base_color) && is_finite(a.grad));
    const Vec3 e = normalized(Vec3{g(rng), g(rng), g(rng)});
    const Rgb c = tet_color_at(a, center + e * R);
    worst = std::min(worst, min_component(c));
  }
  EXPECT_GE(worst, -1e-6);
}

namespace {

geometry::TetMesh small_mesh(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<Point3> p(n);
  for (auto& q : p) q = {u(rng), u(rng), u(rng)};
  return geometry::delaunay(p);
}

// Scalar objective: a fixed random linear functional of all attributes.
struct Probe {
  std::vector<AttributeGrad> w;
  double operator()(const std::vector<TetAttributes>& attrs) const {
    double s = 0.0;
    for (std::size_t t = 0; t < attrs.size(); ++t) {
      s += w[t].sigma * attrs[t].sigma + dot(w[t].base_color, attrs[t].base_color) +
           dot(w[t].grad, attrs[t].grad) + dot(w[t].center, attrs[t].center);
    }
    return s;
  }
};

Probe make_probe(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Probe p;
  p.w.resize(n);
  for (auto& w : p.w) {
    w.sigma = u(rng);
    w.base_color = {u(rng), u(rng), u(rng)};
    w.grad = {u(rng), u(rng), u(rng)};
    w.center = {u(rng), u(rng), u(rng)};
  }
  return p;
}

Field small_field(QueryCenter center, std::uint64_t seed) {
  FieldConfig cfg;
  cfg.grid = toy_grid_config();
  cfg.grid.levels = 3;
  cfg.grid.n_max = 8;
  cfg.heads.hidden = 8;
  cfg.center = center;
  cfg.radius_cap = 2.5;
  Field f(cfg, seed);
  randomize(f.grid().params(), seed + 1, 0.5);
  randomize(f.heads().params(), seed + 2, 0.5);
  return f;
}

}  // namespace

class FieldGradient : public ::testing::TestWithParam<QueryCenter> {};

TEST_P(FieldGradient, MatchesFiniteDifferences) {
  Field field = small_field(GetParam(), 40);
  geometry::TetMesh mesh = small_mesh(12, 41);
  const Point3 eye{3.0, -2.0, 1.0};
  const Probe probe = make_probe(mesh.num_tets(), 42);
  FieldGrad grad;
  grad.resize_like(field, mesh.num_points());
  backward_field(field, mesh, eye, probe.w, grad, 1);

  auto eval = [&](const Field& f, const geometry::TetMesh& m) {
    return probe(evaluate_field(f, m, eye, 1));
  };
  const double h = 1e-5;
  std::vector<double> fd(grad.grid.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    fd[i] = check::central_difference(
        [&](double d) {
          Field a = field;
          a.grid().params()[i] += d;
          return eval(a, mesh);
        },
        h);
  }
  EXPECT_LT(check::vector_rel_err(grad.grid, fd), 1e-4) << "grid";
  fd.assign(grad.heads.size(), 0.0);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    fd[i] = check::central_difference(
        [&](double d) {
          Field a = field;
          a.heads().params()[i] += d;
          return eval(a, mesh);
        },
        h);
  }
  EXPECT_LT(check::vector_rel_err(grad.heads, fd), 1e-4) << "heads";
  std::vector<double> an;
  fd.clear();
  for (std::size_t v = 0; v < mesh.num_points(); ++v) {
    for (int k = 0; k < 3; ++k) {
      an.push_back(grad.vertices[v][k]);
      fd.push_back(check::central_difference(
          [&](double d) {
            auto p = mesh.points();
            p[v][k] += d;
            geometry::TetMesh m = mesh;
            m.update_positions(p);
            return eval(field, m);
          },
          h));
    }
  }
  EXPECT_LT(check::vector_rel_err(an, fd), 1e-4) << "vertices";
}

INSTANTIATE_TEST_SUITE_P(Centers, FieldGradient,
                         ::testing::Values(QueryCenter::Centroid, QueryCenter::Circumcenter));

TEST(FieldEvaluation, ParallelMatchesSerial) {
  Field field = small_field(QueryCenter::Centroid, 3);
  const auto mesh = small_mesh(40, 4);
  const auto a = evaluate_field(field, mesh, {1, 2, 3}, 1);
  const auto b = evaluate_field(field, mesh, {1, 2, 3}, 3);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].sigma, b[t].sigma);
    EXPECT_EQ(a[t].grad, b[t].grad);
  }
}

TEST(WeightDecay, Examples) {
  HashGrid g(toy_grid_config(), 1);
  std::fill(g.params().begin(), g.params().end(), 0.0);
  EXPECT_EQ(weight_decay(g), 0.0);
  HashGridConfig one = toy_grid_config();
  one.levels = 1;
  HashGrid g1(one, 1);
  std::fill(g1.params().begin(), g1.params().end(), 2.0);
  EXPECT_DOUBLE_EQ(weight_decay(g1), 4.0);
  randomize(g.params(), 5, 1.0);
  double expected = 0.0;
  for (int l = 0; l < g.levels(); ++l) {
    double s = 0;
    const std::size_t cnt = g.level_entries(l) * g.features();
    for (std::size_t i = 0; i < cnt; ++i) s += std::pow(g.params()[g.level_offset(l) + i], 2);
    expected += s / cnt;
  }
  EXPECT_NEAR(weight_decay(g), expected, 1e-14);
}
