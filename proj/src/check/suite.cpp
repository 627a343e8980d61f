#include "radmesh/check/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "radmesh/check/finite_diff.hpp"
#include "radmesh/check/oracles.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/optim/train.hpp"
#include "radmesh/render/renderer.hpp"
#include "radmesh/render/segment.hpp"
#include "radmesh/sorting/power_sort.hpp"

namespace radmesh::check {

using field::Rgb;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

CheckResult bounded(std::string name, double value, double limit, std::string detail,
                    Clock::time_point start) {
  CheckResult r;
  r.name = std::move(name);
  r.value = value;
  r.limit = limit;
  r.passed = value < limit;
  r.detail = std::move(detail);
  r.seconds = since(start);
  return r;
}

void randomize(std::span<double> p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : p) x = u(rng);
}

// Squared-error loss of a bundle of rays against fixed random weights.
struct RayLoss {
  std::vector<render::Ray> rays;
  std::vector<Vec3> weights;
  Vec3 background{0.1, 0.2, 0.3};

  double value(const geometry::TetMesh& mesh, std::span<const field::TetAttributes> attrs) const {
    render::RenderOptions opts;
    opts.early_out = 0.0;
    opts.background = background;
    const auto order = sorting::visibility_order(mesh, rays[0].origin);
    double L = 0.0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
      L += dot(weights[i], render::render_pixel(mesh, attrs, order, rays[i], opts).color);
    }
    return L;
  }

  std::vector<field::AttributeGrad> gradient(const geometry::TetMesh& mesh,
                                             std::span<const field::TetAttributes> attrs) const {
    render::RenderOptions opts;
    opts.early_out = 0.0;
    opts.background = background;
    std::vector<field::AttributeGrad> ga(mesh.num_tets());
    std::vector<Vec3> gv(mesh.num_points());
    const auto order = sorting::visibility_order(mesh, rays[0].origin);
    render::RayRecord rec;
    for (std::size_t i = 0; i < rays.size(); ++i) {
      render::trace_ray(mesh, attrs, order, rays[i], opts, rec);
      render::backward_ray(mesh, attrs, rec, weights[i], background, {}, ga, gv);
    }
    return ga;
  }
};

struct GradCase {
  field::Field field;
  geometry::TetMesh mesh;
  optim::View view;
  optim::LossWeights weights{0.2, 0.05, 0.01};
  double scale = 2.0;

  double loss(const field::Field& f, const geometry::TetMesh& m) const {
    return optim::evaluate_loss(f, m, view, weights, {}, scale, 1).total;
  }
  field::FieldGrad gradient() const {
    field::FieldGrad g;
    g.resize_like(field, mesh.num_points());
    optim::compute_gradients(field, mesh, view, weights, {}, scale, g, 1);
    return g;
  }
};

GradCase grad_case(std::size_t points, std::uint64_t seed) {
  field::FieldConfig cfg;
  cfg.grid.levels = 3;
  cfg.grid.n_min = 2;
  cfg.grid.n_max = 8;
  cfg.grid.log2_table_size = 6;
  cfg.heads.hidden = 8;
  cfg.heads.sh_degree = 1;
  cfg.radius_cap = 2.5;
  field::Field f(cfg, seed);
  randomize(f.grid().params(), seed + 1, 0.5);
  randomize(f.heads().params(), seed + 2, 0.5);

  optim::View view;
  const int size = 16;
  view.camera = render::Camera::pinhole(size, size, size * 0.9, size * 0.9, size * 0.5, size * 0.5);
  view.camera.look_at({2.4, -1.7, 1.1}, {0.05, 0.02, -0.03});
  view.image = render::ImageD(size, size);
  std::mt19937_64 rng(seed + 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : view.image.rgb) v = u(rng);
  return {std::move(f), random_mesh(points, seed + 3, 0.8), std::move(view)};
}

std::vector<std::array<std::uint32_t, 4>> canonical_tets(const geometry::TetMesh& mesh) {
  std::vector<std::array<std::uint32_t, 4>> out;
  for (const auto& t : mesh.tets()) {
    auto v = t.verts;
    std::sort(v.begin(), v.end());
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Five points on the unit sphere in 2-3 flip position; moving the last one
// radially by +/- eps switches between the 2-tet and 3-tet triangulation.
std::vector<Point3> flip_configuration(double eps) {
  std::vector<Point3> p;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0;
    p.push_back({std::cos(a) * 0.9, std::sin(a) * 0.9, std::sqrt(1.0 - 0.81)});
  }
  p.push_back(normalized(Point3{0.1, 0.05, 1.0}));
  p.push_back(normalized(Point3{-0.05, 0.1, -1.0}) * (1.0 + eps));
  return p;
}

}  // namespace

render::Camera orbit_camera(render::CameraModel model, int size, double angle, double distance) {
  render::Camera cam =
      model == render::CameraModel::Pinhole
          ? render::Camera::pinhole(size, size, size * 0.9, size * 0.9, size * 0.5, size * 0.5)
          : render::Camera::fisheye(size, size, size / std::numbers::pi, size * 0.5, size * 0.5,
                                    std::numbers::pi);
  cam.look_at({distance * std::cos(angle), distance * std::sin(angle), 0.2 * distance}, {0, 0, 0});
  return cam;
}

CheckResult delaunay_audit(const std::vector<std::size_t>& sizes, std::size_t sets,
                           std::uint64_t seed, double time_limit_seconds) {
  const auto start = Clock::now();
  std::size_t failures = 0;
  std::size_t tets = 0;
  std::string first;
  for (std::size_t s = 0; s < sets; ++s) {
    const std::size_t n = sizes[s % sizes.size()];
    const geometry::TetMesh mesh = random_mesh(n, seed + s);
    tets += mesh.num_tets();
    const geometry::MeshAudit audit = geometry::audit_mesh(mesh, 200, seed + s);
    if (!audit.ok()) {
      if (failures == 0) first = "set " + std::to_string(s) + ": " + audit.summary();
      ++failures;
    }
  }
  const double seconds = since(start);
  CheckResult r = bounded("delaunay audit", static_cast<double>(failures), 1.0,
                          std::to_string(sets) + " sets, " + std::to_string(tets) + " tets, " +
                              std::to_string(failures) + " failing, " + fmt(seconds) + " s" +
                              (first.empty() ? "" : "; " + first),
                          start);
  r.passed = failures == 0 && seconds < time_limit_seconds;
  return r;
}

CheckResult visibility_order(std::size_t meshes, std::size_t points, std::size_t rays,
                             std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::size_t violations = 0;
  std::size_t crossings = 0;
  for (std::size_t m = 0; m < meshes; ++m) {
    const geometry::TetMesh mesh = random_mesh(points, seed + 1000 + m);
    for (std::size_t r = 0; r < rays; ++r) {
      const Point3 o{u(rng), u(rng), u(rng)};
      const Vec3 d = normalized(Vec3{g(rng), g(rng), g(rng)});
      const auto order = sorting::visibility_order(mesh, o);
      double last = -1.0;
      for (const auto t : order) {
        double t_in, t_out;
        if (!clip_ray(mesh.tet_points(t), o, d, t_in, t_out)) continue;
        ++crossings;
        if (t_in < last - 1e-9) ++violations;
        last = std::max(last, t_in);
      }
    }
  }
  return bounded("visibility order", static_cast<double>(violations), 1.0,
                 std::to_string(meshes * rays) + " rays, " + std::to_string(crossings) +
                     " crossings, " + std::to_string(violations) + " violations",
                 start);
}

CheckResult segment_quadrature(std::size_t segments, std::size_t steps, std::uint64_t seed,
                               double tolerance) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  double worst_small = 0.0;
  for (std::size_t i = 0; i < segments; ++i) {
    const bool small = i % 2 == 0;
    const double d = small ? std::pow(10.0, -12.0 + 10.0 * u(rng)) : std::pow(10.0, -2.0 + 3.5 * u(rng));
    const double len = 0.1 + u(rng);
    const double sigma = d / len;
    const Rgb c_in{u(rng), u(rng), u(rng)};
    const Rgb c_out{u(rng), u(rng), u(rng)};
    const double t0 = u(rng);
    const auto s = render::integrate_segment(sigma, t0, t0 + len, c_in, c_out);
    const Rgb q = quadrature_segment(sigma, len, c_in, c_out, steps);
    for (int ch = 0; ch < 3; ++ch) {
      const double e = std::abs(s.delta[ch] - q[ch]) / std::abs(q[ch]);
      worst = std::max(worst, e);
      if (small) worst_small = std::max(worst_small, e);
    }
  }
  return bounded("segment quadrature", worst, tolerance,
                 std::to_string(segments) + " segments, max rel " + fmt(worst) +
                     " (d <= 1e-2: " + fmt(worst_small) + ")",
                 start);
}

CheckResult image_oracle(render::CameraModel model, std::size_t min_tets, int size,
                         std::uint64_t seed, double tolerance) {
  const auto start = Clock::now();
  std::size_t n = 8;
  geometry::TetMesh mesh = random_mesh(n, seed);
  while (mesh.num_tets() < min_tets) mesh = random_mesh(++n, seed);
  const auto attrs = random_attributes(mesh, seed + 1);
  render::RenderOptions opts;
  opts.background = {0.2, 0.1, 0.05};
  double worst = 0.0;
  for (const double angle : {0.3, 2.1}) {
    const render::Camera cam = orbit_camera(model, size, angle);
    const render::ImageD img = render::FrameRenderer(mesh, attrs, cam, opts).render();
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const auto ray = render::generate_ray(cam, x + 0.5, y + 0.5);
        Rgb ref = opts.background;
        if (ray) ref = brute_force_pixel(mesh, attrs, ray->origin, ray->dir, opts.background, opts.early_out);
        for (int ch = 0; ch < 3; ++ch) worst = std::max(worst, std::abs(img.at(x, y)[ch] - ref[ch]));
      }
    }
  }
  const std::string name = model == render::CameraModel::Pinhole ? "image oracle (pinhole)"
                                                                 : "image oracle (fisheye)";
  return bounded(name, worst, tolerance,
                 std::to_string(mesh.num_tets()) + " tets, " + std::to_string(size) + "x" +
                     std::to_string(size) + " x2 views, max abs " + fmt(worst),
                 start);
}

CheckResult energy_conservation(std::size_t rays, std::uint64_t seed, double tolerance) {
  const auto start = Clock::now();
  const geometry::TetMesh mesh = random_mesh(100, seed);
  const auto attrs = random_attributes(mesh, seed + 1, 8.0);
  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  render::RenderOptions opts;
  opts.early_out = 0.0;
  double worst = 0.0;
  render::RayRecord rec;
  const std::size_t per_eye = 1000;
  for (std::size_t done = 0; done < rays;) {
    const Point3 eye = normalized(Vec3{u(rng), u(rng), u(rng)}) * 2.5;
    const auto order = sorting::visibility_order(mesh, eye);
    for (std::size_t r = 0; r < per_eye && done < rays; ++r, ++done) {
      render::trace_ray(mesh, attrs, order, {eye, Point3{u(rng), u(rng), u(rng)} - eye}, opts, rec);
      double sum = 0.0;
      for (const auto& s : rec.segments) sum += s.transmittance * s.alpha;
      worst = std::max(worst, std::abs(rec.transmittance + sum - 1.0));
    }
  }
  return bounded("energy conservation", worst, tolerance,
                 std::to_string(rays) + " rays, max |T + sum w alpha - 1| = " + fmt(worst), start);
}

std::vector<CheckResult> gradient_checks(std::uint64_t seed, double attr_tolerance,
                                         double vertex_tolerance) {
  std::vector<CheckResult> out;
  {
    // density and color attributes through the renderer adjoint
    const auto start = Clock::now();
    const geometry::TetMesh mesh = random_mesh(40, seed);
    const auto attrs = random_attributes(mesh, seed + 1, 4.0, 0.5);
    std::mt19937_64 rng(seed + 2);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    std::uniform_real_distribution<double> w(-1, 1);
    RayLoss loss;
    const Point3 eye{2.2, -1.3, 0.8};
    for (int i = 0; i < 60; ++i) {
      loss.rays.push_back({eye, (Point3{u(rng), u(rng), u(rng)} - eye) * 0.5});
      loss.weights.push_back({w(rng), w(rng), w(rng)});
    }
    const auto ga = loss.gradient(mesh, attrs);
    std::vector<double> density_a, density_n, color_a, color_n;
    for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
      const auto perturb = [&](auto&& set) {
        return central_difference(
            [&](double h) {
              auto a = attrs;
              set(a[t], h);
              return loss.value(mesh, a);
            },
            1e-5);
      };
      density_a.push_back(ga[t].sigma);
      density_n.push_back(perturb([](field::TetAttributes& a, double h) { a.sigma += h; }));
      for (int c = 0; c < 3; ++c) {
        color_a.push_back(ga[t].base_color[c]);
        color_n.push_back(perturb([c](field::TetAttributes& a, double h) { a.base_color[c] += h; }));
        color_a.push_back(ga[t].grad[c]);
        color_n.push_back(perturb([c](field::TetAttributes& a, double h) { a.grad[c] += h; }));
      }
    }
    const double ed = vector_rel_err(density_a, density_n);
    const double ec = vector_rel_err(color_a, color_n);
    out.push_back(bounded("density gradient", ed, attr_tolerance,
                          std::to_string(mesh.num_tets()) + " tets, rel " + fmt(ed), start));
    out.push_back(bounded("color gradient", ec, attr_tolerance,
                          std::to_string(mesh.num_tets()) + " tets, rel " + fmt(ec), start));
  }
  {
    const auto start = Clock::now();
    const GradCase c = grad_case(10, seed + 10);
    const field::FieldGrad g = c.gradient();
    std::vector<double> fd_grid(g.grid.size()), fd_heads(g.heads.size());
    for (std::size_t i = 0; i < fd_grid.size(); ++i) {
      fd_grid[i] = central_difference(
          [&](double h) {
            field::Field f = c.field;
            f.grid().params()[i] += h;
            return c.loss(f, c.mesh);
          },
          1e-5);
    }
    for (std::size_t i = 0; i < fd_heads.size(); ++i) {
      fd_heads[i] = central_difference(
          [&](double h) {
            field::Field f = c.field;
            f.heads().params()[i] += h;
            return c.loss(f, c.mesh);
          },
          1e-5);
    }
    const double eg = vector_rel_err(g.grid, fd_grid);
    const double eh = vector_rel_err(g.heads, fd_heads);
    out.push_back(bounded("grid gradient", eg, attr_tolerance,
                          std::to_string(g.grid.size()) + " params, rel " + fmt(eg), start));
    out.push_back(bounded("head gradient", eh, attr_tolerance,
                          std::to_string(g.heads.size()) + " params, rel " + fmt(eh), start));
  }
  {
    const auto start = Clock::now();
    const GradCase c = grad_case(10, seed + 20);
    const auto pts = c.mesh.points();
    const field::FieldGrad g = c.gradient();
    std::vector<double> analytic, fd;
    std::size_t flips = 0;
    const auto reference = canonical_tets(c.mesh);
    const double h = 1e-6;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        for (const double s : {-2.0 * h, 2.0 * h}) {
          std::vector<Point3> moved(pts.begin(), pts.end());
          moved[i][a] += s;
          if (canonical_tets(geometry::delaunay(moved)) != reference) ++flips;
        }
        analytic.push_back(g.vertices[i][a]);
        fd.push_back(central_difference(
            [&](double d) {
              std::vector<Point3> moved(pts.begin(), pts.end());
              moved[i][a] += d;
              geometry::TetMesh m = c.mesh;
              m.update_positions(moved);
              return c.loss(c.field, m);
            },
            h));
      }
    }
    const double ev = vector_rel_err(analytic, fd);
    CheckResult r = bounded("vertex gradient", ev, vertex_tolerance,
                            std::to_string(pts.size()) + " vertices, rel " + fmt(ev) + ", " +
                                std::to_string(flips) + " flips within the stencil",
                            start);
    r.passed = r.passed && flips == 0;
    out.push_back(r);
  }
  return out;
}

CheckResult flip_continuity(double eps) {
  const auto start = Clock::now();
  const geometry::TetMesh outside = geometry::delaunay(flip_configuration(eps));
  const geometry::TetMesh inside = geometry::delaunay(flip_configuration(-eps));
  std::vector<Point3> centers;
  for (const auto* m : {&outside, &inside}) {
    for (const auto& t : m->tets()) centers.push_back(t.circumcenter);
  }
  double spread = 0.0;
  for (const auto& a : centers) {
    for (const auto& b : centers) spread = std::max(spread, norm(a - b));
  }
  CheckResult r = bounded("flip continuity eps=" + fmt(eps), spread, 10.0 * eps,
                          std::to_string(outside.num_tets()) + " vs " +
                              std::to_string(inside.num_tets()) + " tets, spread " + fmt(spread),
                          start);
  r.passed = r.passed && outside.num_tets() != inside.num_tets();
  return r;
}

std::vector<CheckResult> selftest(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(delaunay_audit({10, 50, 200}, 6, seed, 60.0));
  out.push_back(visibility_order(2, 200, 100, seed));
  out.push_back(segment_quadrature(200, 100000, seed));
  out.push_back(image_oracle(render::CameraModel::Pinhole, 200, 24, seed));
  out.push_back(image_oracle(render::CameraModel::Fisheye, 200, 24, seed));
  out.push_back(energy_conservation(1000, seed));
  for (auto& r : gradient_checks(seed)) out.push_back(std::move(r));
  out.push_back(flip_continuity(1e-3));
  out.push_back(flip_continuity(1e-5));
  return out;
}

}  // namespace radmesh::check
