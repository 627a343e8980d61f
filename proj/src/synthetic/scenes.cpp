#include "radmesh/synthetic/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/render/renderer.hpp"

namespace radmesh::synthetic {

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "teapot") return SceneKind::Teapot;
  if (name == "boxes") return SceneKind::Boxes;
  if (name == "thin-rods") return SceneKind::ThinRods;
  throw Error(ErrorCode::Format, "unknown synthetic scene '" + name + "' (teapot, boxes, thin-rods)");
}

std::string scene_kind_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::Teapot: return "teapot";
    case SceneKind::Boxes: return "boxes";
    case SceneKind::ThinRods: return "thin-rods";
  }
  return "unknown";
}

TeacherScene teacher_from_function(std::string name, std::vector<Point3> points,
                                   const VolumeFunction& volume) {
  TeacherScene scene;
  scene.name = std::move(name);
  scene.mesh = geometry::delaunay(points);
  scene.attrs.resize(scene.mesh.num_tets());
  for (std::size_t t = 0; t < scene.attrs.size(); ++t) {
    const Point3 c = scene.mesh.tets()[t].centroid;
    auto& a = scene.attrs[t];
    a.sigma = volume.density(c);
    a.base_color = volume.color(c);
    a.center = c;
    a.radius = std::sqrt(scene.mesh.tets()[t].circumradius_sq);
  }
  return scene;
}

std::vector<Point3> lattice_points(int cells, double extent) {
  std::vector<Point3> pts;
  pts.reserve(static_cast<std::size_t>(cells + 1) * (cells + 1) * (cells + 1));
  const double h = 2.0 * extent / cells;
  for (int i = 0; i <= cells; ++i) {
    for (int j = 0; j <= cells; ++j) {
      for (int k = 0; k <= cells; ++k) pts.push_back({-extent + i * h, -extent + j * h, -extent + k * h});
    }
  }
  return pts;
}

namespace {

double segment_distance(const Point3& p, const Point3& a, const Point3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(p - (a + ab * t));
}

double smooth_inside(double signed_distance, double width) {
  return 0.5 * (1.0 - std::tanh(signed_distance / width));
}

}  // namespace

TeacherScene teapot_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto pts = lattice_points(14, 0.9);
  const double h = 1.8 / 14;
  for (auto& p : pts) p += Vec3{u(rng), u(rng), u(rng)} * (0.2 * h);
  // extra samples on the body surface
  for (int i = 0; i < 800; ++i) {
    Vec3 d{u(rng), u(rng), u(rng)};
    if (norm2(d) < 1e-6) continue;
    d = normalized(d);
    pts.push_back({0.5 * d.x, 0.5 * d.y, 0.35 * d.z});
  }
  const Point3 spout_a{0.42, 0.0, -0.05};
  const Point3 spout_b{0.8, 0.0, 0.3};
  auto body_sd = [](const Point3& p) {
    const double q = std::sqrt(p.x * p.x / 0.25 + p.y * p.y / 0.25 + p.z * p.z / 0.1225);
    return (q - 1.0) * 0.35;
  };
  auto handle_sd = [](const Point3& p) {
    const double dx = p.x + 0.5, dz = p.z;
    const double ring = std::sqrt(dx * dx + dz * dz) - 0.2;
    return std::sqrt(ring * ring + p.y * p.y) - 0.05;
  };
  VolumeFunction vf;
  vf.density = [=](const Point3& p) {
    const double sd = std::min({body_sd(p), handle_sd(p),
                                segment_distance(p, spout_a, spout_b) - 0.07,
                                norm(p - Point3{0, 0, 0.38}) - 0.07});
    return 40.0 * smooth_inside(sd, 0.02);
  };
  vf.color = [=](const Point3& p) {
    const double t = std::clamp(0.5 + p.z, 0.0, 1.0);
    if (handle_sd(p) < 0.02 || segment_distance(p, spout_a, spout_b) < 0.09) {
      return Rgb{0.35, 0.2, 0.12};
    }
    return Rgb{0.85 - 0.2 * t, 0.45 + 0.2 * t, 0.2 + 0.3 * t};
  };
  return teacher_from_function("teapot", std::move(pts), vf);
}

std::vector<Box> boxes_scene_boxes() {
  return {{{-0.75, -0.5, -0.25}, {-0.25, 0.0, 0.25}}, {{0.25, 0.0, -0.25}, {0.75, 0.5, 0.25}}};
}

TeacherScene boxes_scene(std::uint64_t) {
  const auto boxes = boxes_scene_boxes();
  VolumeFunction vf;
  vf.density = [boxes](const Point3& p) {
    for (const Box& b : boxes) {
      if (p.x > b.lo.x && p.x < b.hi.x && p.y > b.lo.y && p.y < b.hi.y && p.z > b.lo.z &&
          p.z < b.hi.z) {
        return 6.0;
      }
    }
    return 0.0;
  };
  vf.color = [boxes](const Point3& p) {
    return p.x < 0.0 ? Rgb{1.0, 0.8, 0.6} : Rgb{0.6, 0.9, 1.0};
  };
  return teacher_from_function("boxes", lattice_points(8, 1.0), vf);
}

std::vector<Rod> thin_rods_scene_rods() {
  return {{{-0.6, -0.3, -0.5}, {0.5, 0.35, 0.5}, 0.03}, {{0.4, -0.6, -0.3}, {-0.3, 0.5, 0.4}, 0.03}};
}

TeacherScene thin_rods_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto rods = thin_rods_scene_rods();
  auto pts = lattice_points(8, 1.0);
  for (auto& p : pts) p += Vec3{u(rng), u(rng), u(rng)} * 0.02;
  for (const Rod& rod : rods) {
    const Vec3 axis = rod.b - rod.a;
    const double len = norm(axis);
    const Vec3 w = axis / len;
    const Vec3 e1 = normalized(cross(w, std::abs(w.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    const Vec3 e2 = cross(w, e1);
    const int rings = static_cast<int>(len / rod.radius);
    for (int i = 0; i <= rings; ++i) {
      const Point3 c = rod.a + axis * (static_cast<double>(i) / rings);
      pts.push_back(c + Vec3{u(rng), u(rng), u(rng)} * (0.05 * rod.radius));
      for (int k = 0; k < 6; ++k) {
        const double ang = 2.0 * std::numbers::pi * (k + 0.5 * (i % 2)) / 6.0;
        pts.push_back(c + (e1 * std::cos(ang) + e2 * std::sin(ang)) * (1.6 * rod.radius));
      }
    }
  }
  VolumeFunction vf;
  vf.density = [rods](const Point3& p) {
    for (const Rod& r : rods) {
      if (segment_distance(p, r.a, r.b) < r.radius) return 60.0;
    }
    return 0.0;
  };
  vf.color = [rods](const Point3& p) {
    for (const Rod& r : rods) {
      if (segment_distance(p, r.a, r.b) < r.radius) return Rgb{0.95, 0.9, 0.3};
    }
    return Rgb{0.2, 0.3, 0.5};
  };
  return teacher_from_function("thin-rods", std::move(pts), vf);
}

TeacherScene make_scene(SceneKind kind, std::uint64_t seed) {
  switch (kind) {
    case SceneKind::Teapot: return teapot_scene(seed);
    case SceneKind::Boxes: return boxes_scene(seed);
    case SceneKind::ThinRods: return thin_rods_scene(seed);
  }
  throw Error(ErrorCode::Format, "unknown scene kind");
}

TeacherScene random_teacher(std::size_t min_tets, std::uint64_t seed, double radius,
                            double density_min, double density_max, double slope_fraction) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto ball_point = [&] {
    while (true) {
      const Point3 p{2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1};
      if (norm2(p) <= 1.0) return p * radius;
    }
  };
  std::vector<Point3> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(ball_point());
  TeacherScene scene;
  scene.name = "random-teacher";
  while (true) {
    if (pts.size() >= 4) {
      try {
        scene.mesh = geometry::delaunay(pts);
        if (scene.mesh.num_tets() >= min_tets) break;
      } catch (const Error&) {
      }
    }
    pts.push_back(ball_point());
  }
  scene.attrs.resize(scene.mesh.num_tets());
  for (std::size_t t = 0; t < scene.attrs.size(); ++t) {
    auto& a = scene.attrs[t];
    const auto& tet = scene.mesh.tets()[t];
    a.sigma = density_min + (density_max - density_min) * u(rng);
    a.base_color = {0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng)};
    a.center = tet.centroid;
    a.radius = std::sqrt(tet.circumradius_sq);
    const double cmin = std::min({a.base_color.x, a.base_color.y, a.base_color.z});
    Vec3 dir{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
    dir = normalized(dir);
    a.grad = dir * (slope_fraction * u(rng) * cmin / a.radius);
  }
  return scene;
}

std::vector<Point3> jitter_points(const geometry::TetMesh& mesh, double fraction,
                                  std::uint64_t seed) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : mesh.tets()) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        total += norm(mesh.points()[t.verts[i]] - mesh.points()[t.verts[j]]);
        ++count;
      }
    }
  }
  const double amplitude = count ? fraction * total / count : 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> out = mesh.points();
  for (auto& p : out) p += Vec3{u(rng), u(rng), u(rng)} * amplitude;
  return out;
}

std::vector<render::Camera> orbit_cameras(std::size_t count, int width, int height,
                                          const Point3& target, double distance,
                                          double fov_degrees, render::CameraModel model) {
  std::vector<render::Camera> cams;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double fov = fov_degrees * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < count; ++i) {
    // Fibonacci directions, skipping the exact poles
    const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    const Vec3 dir{r * std::cos(phi), r * std::sin(phi), z};
    render::Camera cam;
    if (model == render::CameraModel::Pinhole) {
      const double f = 0.5 * width / std::tan(0.5 * fov);
      cam = render::Camera::pinhole(width, height, f, f, 0.5 * width, 0.5 * height);
    } else {
      const double f = 0.5 * width / (0.5 * fov);
      cam = render::Camera::fisheye(width, height, f, 0.5 * width, 0.5 * height, fov);
    }
    cam.look_at(target + dir * distance, target);
    cams.push_back(cam);
  }
  return cams;
}

std::vector<optim::View> render_views(const TeacherScene& scene,
                                      const std::vector<render::Camera>& cameras,
                                      std::size_t threads) {
  std::vector<optim::View> views;
  render::RenderOptions opts;
  opts.background = scene.background;
  opts.threads = threads;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    optim::View v;
    v.camera = cameras[i];
    v.image = render::FrameRenderer(scene.mesh, scene.attrs, cameras[i], opts).render();
    v.name = scene.name + "_" + std::to_string(i);
    views.push_back(std::move(v));
  }
  return views;
}

namespace {

Point3 closest_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double point_tet_distance(const Point3& p, const std::array<Point3, 4>& v) {
  const double vol = dot(v[1] - v[0], cross(v[2] - v[0], v[3] - v[0]));
  bool inside = vol != 0.0;
  for (int i = 0; i < 4 && inside; ++i) {
    auto w = v;
    w[i] = p;
    if (dot(w[1] - w[0], cross(w[2] - w[0], w[3] - w[0])) / vol < 0.0) inside = false;
  }
  if (inside) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : geometry::kFaceVerts) {
    best = std::min(best, norm(p - closest_on_triangle(p, v[f[0]], v[f[1]], v[f[2]])));
  }
  return best;
}

bool tet_touches_rod(const std::array<Point3, 4>& v, const Rod& rod, int samples) {
  for (int i = 0; i <= samples; ++i) {
    const Point3 p = rod.a + (rod.b - rod.a) * (static_cast<double>(i) / samples);
    if (point_tet_distance(p, v) <= rod.radius) return true;
  }
  return false;
}

}  // namespace radmesh::synthetic
