#include "radmesh/field/field.hpp"

#include <algorithm>
#include <cmath>

#include "radmesh/field/sh.hpp"
#include "radmesh/parallel.hpp"

namespace radmesh::field {

namespace {

double softplus(double z, double beta) {
  const double bz = beta * z;
  if (bz > 30.0) return z + std::log1p(std::exp(-bz)) / beta;
  return std::log1p(std::exp(bz)) / beta;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Intermediate values of one tet evaluation, kept for the reverse pass.
struct Workspace {
  QueryCache query;
  std::vector<double> b;
  std::vector<double> hid_sigma, hid_sh, hid_grad;
  std::vector<double> y_sigma, y_sh, y_grad;
  std::array<double, kMaxShCoeffs> basis{};
  std::array<double, 3> z{};
  Vec3 view_dir;
  double view_dist = 0.0;
  int argmin = 0;
  TetAttributes attrs;

  Workspace(const Heads& h, int feature_dim) {
    b.resize(feature_dim);
    hid_sigma.resize(h.sigma_head().hidden);
    hid_sh.resize(h.sh_head().hidden);
    hid_grad.resize(h.grad_head().hidden);
    y_sigma.resize(h.sigma_head().out);
    y_sh.resize(h.sh_head().out);
    y_grad.resize(h.grad_head().out);
  }
};

void forward_heads(const Heads& heads, std::span<const double> b, const Point3& center,
                   double radius, const Vec3& view_dir, double beta, Workspace& ws) {
  const auto params = heads.params();
  heads.sigma_head().forward(params, b, ws.hid_sigma, ws.y_sigma);
  heads.sh_head().forward(params, b, ws.hid_sh, ws.y_sh);
  heads.grad_head().forward(params, b, ws.hid_grad, ws.y_grad);
  const int K = heads.sh_count();
  ws.basis = sh_basis(view_dir, heads.sh_degree());
  TetAttributes& a = ws.attrs;
  a.sigma = std::exp(ws.y_sigma[0]);
  for (int c = 0; c < 3; ++c) {
    double z = 0.0;
    for (int j = 0; j < K; ++j) z += ws.y_sh[c * K + j] * ws.basis[j];
    ws.z[c] = z;
    a.base_color[c] = softplus(z, beta);
  }
  ws.argmin = 0;
  for (int c = 1; c < 3; ++c) {
    if (a.base_color[c] < a.base_color[ws.argmin]) ws.argmin = c;
  }
  const Vec3 h{ws.y_grad[0], ws.y_grad[1], ws.y_grad[2]};
  const double s = std::sqrt(1.0 + norm2(h));
  a.grad_pre = h;
  a.grad = h * (a.base_color[ws.argmin] / (radius * s));
  a.center = center;
  a.radius = radius;
}

void forward_tet(const Field& field, const geometry::TetMesh& mesh, std::size_t t,
                 const Point3& eye, Workspace& ws) {
  Point3 center;
  double radius;
  bool clamped;
  tet_query_frame(field, mesh, t, center, radius, clamped);
  query_into(field.grid(), center, radius, ws.b, &ws.query);
  const Vec3 offset = center - eye;
  ws.view_dist = norm(offset);
  ws.view_dir = ws.view_dist > 0.0 ? offset / ws.view_dist : Vec3{0.0, 0.0, 1.0};
  forward_heads(field.heads(), ws.b, center, radius, ws.view_dir, field.config().softplus_beta,
                ws);
  ws.attrs.radius_clamped = clamped;
}

}  // namespace

Field::Field(const FieldConfig& config, std::uint64_t seed)
    : config_(config),
      grid_(config.grid, seed),
      heads_(config.grid.levels * config.grid.features, config.heads, seed ^ 0x9e3779b97f4a7c15ull) {}

TetAttributes tet_attributes(const Heads& heads, std::span<const double> b, const Point3& center,
                             double radius, const Vec3& view_dir, double softplus_beta) {
  Workspace ws(heads, static_cast<int>(b.size()));
  forward_heads(heads, b, center, radius, view_dir, softplus_beta, ws);
  return ws.attrs;
}

void tet_query_frame(const Field& field, const geometry::TetMesh& mesh, std::size_t t,
                     Point3& center, double& radius, bool& clamped) {
  const auto& tet = mesh.tets()[t];
  center = field.config().center == QueryCenter::Centroid ? tet.centroid : tet.circumcenter;
  const double r = std::sqrt(tet.circumradius_sq);
  const double cap =
      field.config().radius_cap > 0.0 ? field.config().radius_cap : mesh.bounding_diameter();
  clamped = !(r <= cap);
  radius = clamped ? cap : r;
}

std::vector<TetAttributes> evaluate_field(const Field& field, const geometry::TetMesh& mesh,
                                          const Point3& eye, std::size_t threads) {
  std::vector<TetAttributes> out(mesh.num_tets());
  const std::size_t workers = resolve_threads(threads);
  parallel_chunks(mesh.num_tets(), workers, workers,
                  [&](std::size_t begin, std::size_t end, std::size_t) {
                    Workspace ws(field.heads(), field.grid().feature_dim());
                    for (std::size_t t = begin; t < end; ++t) {
                      forward_tet(field, mesh, t, eye, ws);
                      out[t] = ws.attrs;
                    }
                  });
  return out;
}

void FieldGrad::resize_like(const Field& field, std::size_t num_points) {
  grid.assign(field.grid().params().size(), 0.0);
  heads.assign(field.heads().params().size(), 0.0);
  vertices.assign(num_points, Vec3{});
}

void FieldGrad::zero() {
  std::fill(grid.begin(), grid.end(), 0.0);
  std::fill(heads.begin(), heads.end(), 0.0);
  std::fill(vertices.begin(), vertices.end(), Vec3{});
}

FieldGrad& FieldGrad::operator+=(const FieldGrad& o) {
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] += o.grid[i];
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i] += o.heads[i];
  for (std::size_t i = 0; i < vertices.size(); ++i) vertices[i] += o.vertices[i];
  return *this;
}

void backward_field(const Field& field, const geometry::TetMesh& mesh, const Point3& eye,
                    std::span<const AttributeGrad> grad_attrs, FieldGrad& out,
                    std::size_t threads) {
  const std::size_t n = mesh.num_tets();
  const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(n, 1));
  const double beta = field.config().softplus_beta;
  const Heads& heads = field.heads();
  const int K = heads.sh_count();
  // Per-tet vertex gradients, scattered serially afterwards for a fixed order.
  std::vector<std::array<Vec3, 4>> tet_vertex_grad(n);
  std::vector<FieldGrad> shards(workers > 1 ? workers - 1 : 0);
  for (auto& s : shards) {
    s.grid.assign(out.grid.size(), 0.0);
    s.heads.assign(out.heads.size(), 0.0);
  }

  parallel_chunks(n, workers, workers, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    std::vector<double>& g_grid = chunk == 0 ? out.grid : shards[chunk - 1].grid;
    std::vector<double>& g_heads = chunk == 0 ? out.heads : shards[chunk - 1].heads;
    Workspace ws(field.heads(), field.grid().feature_dim());
    std::vector<double> g_b(ws.b.size());
    std::vector<double> g_ys(1), g_ysh(ws.y_sh.size()), g_yd(3);
    for (std::size_t t = begin; t < end; ++t) {
      auto& gv = tet_vertex_grad[t];
      gv = {};
      const AttributeGrad& ga = grad_attrs[t];
      if (ga.is_zero()) continue;
      forward_tet(field, mesh, t, eye, ws);
      const TetAttributes& a = ws.attrs;

      Vec3 g_center = ga.center;
      double g_radius = 0.0;
      Rgb g_c0 = ga.base_color;

      // grad = h * m / (R s), s = sqrt(1 + |h|^2), m = min channel of c0
      const Vec3 h = a.grad_pre;
      const double s = std::sqrt(1.0 + norm2(h));
      const double m = a.base_color[ws.argmin];
      const Vec3 unit = h / s;
      g_c0[ws.argmin] += dot(ga.grad, unit) / a.radius;
      if (!a.radius_clamped) g_radius -= dot(ga.grad, a.grad) / a.radius;
      const Vec3 g_h = (ga.grad / s - h * (dot(h, ga.grad) / (s * s * s))) * (m / a.radius);
      g_yd[0] = g_h.x;
      g_yd[1] = g_h.y;
      g_yd[2] = g_h.z;

      g_ys[0] = ga.sigma * a.sigma;

      std::array<double, kMaxShCoeffs> g_basis{};
      for (int c = 0; c < 3; ++c) {
        const double gz = g_c0[c] * sigmoid(beta * ws.z[c]);
        for (int j = 0; j < K; ++j) {
          g_ysh[c * K + j] = gz * ws.basis[j];
          g_basis[j] += gz * ws.y_sh[c * K + j];
        }
      }
      Vec3 g_dir{};
      sh_basis_backward(ws.view_dir, heads.sh_degree(), std::span<const double>(g_basis.data(), K),
                        g_dir);
      if (ws.view_dist > 0.0) {
        g_center += (g_dir - ws.view_dir * dot(ws.view_dir, g_dir)) / ws.view_dist;
      }

      std::fill(g_b.begin(), g_b.end(), 0.0);
      const auto params = heads.params();
      heads.sigma_head().backward(params, ws.b, ws.hid_sigma, g_ys, g_heads, g_b);
      heads.sh_head().backward(params, ws.b, ws.hid_sh, g_ysh, g_heads, g_b);
      heads.grad_head().backward(params, ws.b, ws.hid_grad, g_yd, g_heads, g_b);

      double g_query_radius = 0.0;
      query_backward(field.grid(), ws.query, g_b, g_grid, g_center, g_query_radius);
      if (!a.radius_clamped) g_radius += g_query_radius;

      const auto v = mesh.tet_points(t);
      const auto& tet = mesh.tets()[t];
      if (field.config().center == QueryCenter::Centroid) {
        for (auto& g : gv) g += g_center * 0.25;
        if (g_radius != 0.0) {
          geometry::circumsphere_backward(v, tet.circumcenter, Vec3{}, g_radius, gv);
        }
      } else {
        geometry::circumsphere_backward(v, tet.circumcenter, g_center, g_radius, gv);
      }
    }
  });

  for (const auto& s : shards) {
    for (std::size_t i = 0; i < out.grid.size(); ++i) out.grid[i] += s.grid[i];
    for (std::size_t i = 0; i < out.heads.size(); ++i) out.heads[i] += s.heads[i];
  }
  for (std::size_t t = 0; t < n; ++t) {
    const auto& verts = mesh.tets()[t].verts;
    for (int i = 0; i < 4; ++i) out.vertices[verts[i]] += tet_vertex_grad[t][i];
  }
}

double weight_decay(const HashGrid& grid) {
  const auto p = grid.params();
  double total = 0.0;
  for (int l = 0; l < grid.levels(); ++l) {
    const std::size_t begin = grid.level_offset(l);
    const std::size_t count = grid.level_entries(l) * grid.features();
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) sum += p[i] * p[i];
    total += sum / static_cast<double>(count);
  }
  return total;
}

void weight_decay_backward(const HashGrid& grid, double lambda, std::span<double> grad) {
  const auto p = grid.params();
  for (int l = 0; l < grid.levels(); ++l) {
    const std::size_t begin = grid.level_offset(l);
    const std::size_t count = grid.level_entries(l) * grid.features();
    const double scale = 2.0 * lambda / static_cast<double>(count);
    for (std::size_t i = begin; i < begin + count; ++i) grad[i] += scale * p[i];
  }
}

}  // namespace radmesh::field
