#include "radmesh/render/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "radmesh/parallel.hpp"
#include "radmesh/sorting/power_sort.hpp"

namespace radmesh::render {

namespace {

struct ScreenBox {
  bool visible = true;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

ScreenBox full_image(const Camera& cam) {
  return {true, 0.0, 0.0, double(cam.width), double(cam.height)};
}

ScreenBox pinhole_box(const Camera& cam, const std::array<Point3, 4>& v) {
  const Mat3 rt = cam.rotation.transposed();
  ScreenBox box{true, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  int behind = 0;
  for (const Point3& p : v) {
    const Vec3 c = rt * (p - cam.position);
    if (!(c.z > 0.0)) {
      ++behind;
      continue;
    }
    const double px = cam.cx + cam.fx * c.x / c.z;
    const double py = cam.cy + cam.fy * c.y / c.z;
    box.x0 = std::min(box.x0, px);
    box.x1 = std::max(box.x1, px);
    box.y0 = std::min(box.y0, py);
    box.y1 = std::max(box.y1, py);
  }
  if (behind == 4) return {false};
  if (behind > 0) return full_image(cam);
  return box;
}

bool angle_in(double a, double lo, double hi) {
  // a, lo in [-pi, pi]; hi may exceed pi
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  while (a < lo) a += kTwoPi;
  return a <= hi;
}

ScreenBox fisheye_box(const Camera& cam, const std::array<Point3, 4>& v) {
  const Point3 center = (v[0] + v[1] + v[2] + v[3]) * 0.25;
  double r = 0.0;
  for (const Point3& p : v) r = std::max(r, norm(p - center));
  r *= 1.0 + 1e-9;
  const Vec3 c = cam.rotation.transposed() * (center - cam.position);
  const double dist = norm(c);
  if (dist <= r) return full_image(cam);
  const double f = cam.fx;
  const double theta_c = std::acos(std::clamp(c.z / dist, -1.0, 1.0));
  const double beta = std::asin(std::min(1.0, r / dist));
  const double theta_lo = theta_c - beta;
  const double theta_hi = std::min(theta_c + beta, std::numbers::pi);
  if (theta_lo > 0.5 * cam.fov) return {false};
  const double r_hi = f * theta_hi;
  ScreenBox box{true, cam.cx - r_hi, cam.cy - r_hi, cam.cx + r_hi, cam.cy + r_hi};
  if (theta_lo <= 0.0 || std::sin(beta) >= std::sin(theta_c)) return box;
  const double r_lo = f * theta_lo;
  const double phi_c = std::atan2(c.y, c.x);
  const double half = std::asin(std::sin(beta) / std::sin(theta_c));
  const double phi0 = phi_c - half;
  const double phi1 = phi_c + half;
  box = {true, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto add = [&](double rad, double phi) {
    const double px = cam.cx + rad * std::cos(phi);
    const double py = cam.cy + rad * std::sin(phi);
    box.x0 = std::min(box.x0, px);
    box.x1 = std::max(box.x1, px);
    box.y0 = std::min(box.y0, py);
    box.y1 = std::max(box.y1, py);
  };
  add(r_lo, phi0);
  add(r_lo, phi1);
  add(r_hi, phi0);
  add(r_hi, phi1);
  for (int k = -2; k <= 2; ++k) {
    const double a = k * 0.5 * std::numbers::pi;
    if (angle_in(a, phi0, phi1)) add(r_hi, a);
  }
  return box;
}

}  // namespace

void trace_ray(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
               std::span<const std::uint32_t> candidates, const Ray& ray,
               const RenderOptions& options, RayRecord& record) {
  record.ray = ray;
  record.valid = true;
  record.segments.clear();
  const double dir_len = norm(ray.dir);
  double T = 1.0;
  Rgb C;
  for (const std::uint32_t t : candidates) {
    const Hit hit = intersect_tet(ray, mesh.tet_points(t));
    if (!hit.hit) continue;
    const TetAttributes& a = attrs[t];
    SegmentRecord s;
    s.tet = t;
    s.t_in = hit.t_in;
    s.t_out = hit.t_out;
    s.face_in = hit.face_in;
    s.face_out = hit.face_out;
    s.sigma = a.sigma;
    s.c_in = tet_color_at(a, ray.at(hit.t_in));
    s.c_out = tet_color_at(a, ray.at(hit.t_out));
    const SegmentIntegral seg =
        integrate_segment(a.sigma * dir_len, hit.t_in, hit.t_out, s.c_in, s.c_out);
    s.depth = a.sigma * dir_len * (hit.t_out - hit.t_in);
    s.alpha = seg.alpha;
    s.delta = seg.delta;
    s.transmittance = T;
    C += seg.delta * T;
    T *= 1.0 - seg.alpha;
    record.segments.push_back(s);
    if (options.early_out > 0.0 && T < options.early_out) break;
  }
  record.transmittance = T;
  record.color = C + options.background * T;
}

PixelResult render_pixel(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                         std::span<const std::uint32_t> order, const Ray& ray,
                         const RenderOptions& options) {
  RayRecord record;
  trace_ray(mesh, attrs, order, ray, options, record);
  return {record.color, record.transmittance};
}

FrameRenderer::FrameRenderer(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                             const Camera& camera, const RenderOptions& options)
    : mesh_(mesh), attrs_(attrs), camera_(camera), options_(options) {
  if (attrs.size() != mesh.num_tets()) {
    throw Error(ErrorCode::DimensionMismatch, "attribute count does not match tet count");
  }
  camera_.validate();
  order_ = sorting::visibility_order(mesh, camera_.origin(), options_.threads);
  bin_tets();
}

void FrameRenderer::bin_tets() {
  const int ts = std::max(1, options_.tile_size);
  tiles_x_ = (camera_.width + ts - 1) / ts;
  tiles_y_ = (camera_.height + ts - 1) / ts;
  const std::size_t n_tiles = static_cast<std::size_t>(tiles_x_) * tiles_y_;

  // tile range per tet, in visibility order
  std::vector<std::array<int, 4>> ranges(order_.size());
  parallel_for(order_.size(), options_.threads, [&](std::size_t i) {
    const auto v = mesh_.tet_points(order_[i]);
    const ScreenBox box = camera_.model == CameraModel::Pinhole ? pinhole_box(camera_, v)
                                                                : fisheye_box(camera_, v);
    if (!box.visible) {
      ranges[i] = {0, -1, 0, -1};
      return;
    }
    // pixel i is covered when its center i + 0.5 lies in the box; one pixel
    // of slack absorbs rounding
    auto pixel_range = [&](double lo, double hi, int limit, int& a, int& b) {
      const double fa = std::ceil(lo - 1.5);
      const double fb = std::floor(hi + 0.5);
      if (!(fb >= 0.0) || !(fa <= limit - 1)) return false;
      a = static_cast<int>(std::max(fa, 0.0)) / ts;
      b = static_cast<int>(std::min(fb, double(limit - 1))) / ts;
      return true;
    };
    int x0, x1, y0, y1;
    if (!pixel_range(box.x0, box.x1, camera_.width, x0, x1) ||
        !pixel_range(box.y0, box.y1, camera_.height, y0, y1)) {
      ranges[i] = {0, -1, 0, -1};
      return;
    }
    ranges[i] = {x0, x1, y0, y1};
  });

  tile_offsets_.assign(n_tiles + 1, 0);
  for (const auto& r : ranges) {
    for (int ty = r[2]; ty <= r[3]; ++ty) {
      for (int tx = r[0]; tx <= r[1]; ++tx) ++tile_offsets_[static_cast<std::size_t>(ty) * tiles_x_ + tx + 1];
    }
  }
  for (std::size_t i = 0; i < n_tiles; ++i) tile_offsets_[i + 1] += tile_offsets_[i];
  tile_tets_.resize(tile_offsets_.back());
  std::vector<std::uint32_t> fill(tile_offsets_.begin(), tile_offsets_.end() - 1);
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i];
    for (int ty = r[2]; ty <= r[3]; ++ty) {
      for (int tx = r[0]; tx <= r[1]; ++tx) {
        tile_tets_[fill[static_cast<std::size_t>(ty) * tiles_x_ + tx]++] = order_[i];
      }
    }
  }
}

std::span<const std::uint32_t> FrameRenderer::candidates(int x, int y) const {
  const int ts = std::max(1, options_.tile_size);
  const std::size_t tile = static_cast<std::size_t>(y / ts) * tiles_x_ + x / ts;
  return {tile_tets_.data() + tile_offsets_[tile], tile_tets_.data() + tile_offsets_[tile + 1]};
}

void FrameRenderer::trace_pixel(int x, int y, RayRecord& record) const {
  const auto ray = generate_ray(camera_, x + 0.5, y + 0.5);
  if (!ray) {
    record = RayRecord{};
    record.color = options_.background;
    return;
  }
  trace_ray(mesh_, attrs_, candidates(x, y), *ray, options_, record);
}

ImageD FrameRenderer::render(ImageD* transmittance) const {
  ImageD image(camera_.width, camera_.height);
  if (transmittance) *transmittance = ImageD(camera_.width, camera_.height);
  parallel_for(static_cast<std::size_t>(camera_.height), options_.threads, [&](std::size_t row) {
    RayRecord record;
    const int y = static_cast<int>(row);
    for (int x = 0; x < camera_.width; ++x) {
      trace_pixel(x, y, record);
      image.set(x, y, record.color);
      if (transmittance) {
        const double t = record.transmittance;
        transmittance->set(x, y, {t, t, t});
      }
    }
  });
  return image;
}

ImageBuffer render_image(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                         const Camera& camera, const RenderOptions& options) {
  return FrameRenderer(mesh, attrs, camera, options).render().cast<float>();
}

void backward_ray(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                  const RayRecord& record, const Rgb& grad_color, const Rgb& background,
                  std::span<const SegmentGrad> segment_grads, std::span<AttributeGrad> grad_attrs,
                  std::span<Vec3> grad_vertices) {
  if (!record.valid) return;
  const Ray& ray = record.ray;
  const double dir_len = norm(ray.dir);
  Rgb suffix = background;  // color seen behind segment k, S_{k+1}
  for (std::size_t k = record.segments.size(); k-- > 0;) {
    const SegmentRecord& s = record.segments[k];
    const TetAttributes& a = attrs[s.tet];
    AttributeGrad& ga = grad_attrs[s.tet];

    const Rgb g_delta = grad_color * s.transmittance;
    const double g_alpha = -s.transmittance * dot(grad_color, suffix);
    suffix = s.delta + suffix * (1.0 - s.alpha);

    double g_sigma = 0.0;
    double g_tin = 0.0;
    double g_tout = 0.0;
    Rgb g_cin;
    Rgb g_cout;
    if (std::isinf(s.depth)) {
      g_cin = g_delta;
    } else {
      const SegmentWeights w = segment_weights(s.depth);
      g_cin = g_delta * w.g;
      g_cout = g_delta * w.h;
      const double g_d =
          dot(g_delta, s.c_in * w.dg + s.c_out * w.dh) + g_alpha * std::exp(-s.depth);
      g_sigma += g_d * (s.t_out - s.t_in) * dir_len;
      g_tout += g_d * s.sigma * dir_len;
      g_tin -= g_d * s.sigma * dir_len;
    }
    if (!segment_grads.empty()) {
      g_sigma += segment_grads[k].sigma;
      g_tin += segment_grads[k].t_in;
      g_tout += segment_grads[k].t_out;
    }

    // c(p) = c0 + grad . (p - center) on every channel
    const double s_in = g_cin.x + g_cin.y + g_cin.z;
    const double s_out = g_cout.x + g_cout.y + g_cout.z;
    const Point3 p_in = ray.at(s.t_in);
    const Point3 p_out = ray.at(s.t_out);
    ga.sigma += g_sigma;
    ga.base_color += g_cin + g_cout;
    ga.grad += (p_in - a.center) * s_in + (p_out - a.center) * s_out;
    ga.center -= a.grad * (s_in + s_out);
    const double grad_dot_dir = dot(a.grad, ray.dir);
    g_tin += s_in * grad_dot_dir;
    g_tout += s_out * grad_dot_dir;

    if (grad_vertices.empty()) continue;
    const auto v = mesh.tet_points(s.tet);
    std::array<Vec3, 4> gv{};
    if (s.face_in != kNoFace) face_crossing_backward(ray, v, s.face_in, s.t_in, g_tin, gv);
    if (s.face_out != kNoFace) face_crossing_backward(ray, v, s.face_out, s.t_out, g_tout, gv);
    const auto& verts = mesh.tets()[s.tet].verts;
    for (int i = 0; i < 4; ++i) grad_vertices[verts[i]] += gv[i];
  }
}

}  // namespace radmesh::render
