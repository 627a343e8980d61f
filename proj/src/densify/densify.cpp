#include "radmesh/densify/densify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radmesh/optim/losses.hpp"
#include "radmesh/parallel.hpp"

namespace radmesh::densify {

void CameraTetStats::add(const CameraTetStats& o) {
  hits += o.hits;
  mass += o.mass;
  error_mass += o.error_mass;
  residual += o.residual;
  residual_sq += o.residual_sq;
  entry_sum += o.entry_sum;
  exit_sum += o.exit_sum;
}

SplitStats::SplitStats(std::size_t num_tets)
    : mass_(num_tets, 0.0),
      residual_(num_tets),
      residual_sq_(num_tets),
      views_(num_tets, 0),
      top_(num_tets) {}

void SplitStats::add_camera(int camera, std::span<const CameraTetStats> stats) {
  if (stats.size() != num_tets()) {
    throw Error(ErrorCode::DimensionMismatch, "camera statistics do not match the tet count");
  }
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const CameraTetStats& s = stats[k];
    if (s.hits == 0) continue;
    mass_[k] += s.mass;
    residual_[k] += s.residual;
    residual_sq_[k] += s.residual_sq;
    ++views_[k];
    ViewScore v{camera, s.score(), s.entry_sum / s.mass, s.exit_sum / s.mass};
    auto& top = top_[k];
    if (top[0].camera < 0 || v.score > top[0].score) {
      top[1] = top[0];
      top[0] = v;
    } else if (top[1].camera < 0 || v.score > top[1].score) {
      top[1] = v;
    }
  }
}

double SplitStats::ssim_score(std::size_t k) const {
  if (views_[k] < 2) return 0.0;
  return 0.5 * (top_[k][0].score + top_[k][1].score);
}

double SplitStats::variance_score(std::size_t k) const {
  const double m = mass_[k];
  if (!(m > 0.0)) return 0.0;
  double var = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = residual_[k][ch] / m;
    var += residual_sq_[k][ch] / m - mean * mean;
  }
  return std::max(0.0, var) * m;
}

ImageD ssim_error_map(const ImageD& render, const ImageD& gt) {
  ImageD map;
  optim::ssim(render, gt, {}, &map);
  ImageD err(render.width, render.height);
  for (std::size_t i = 0; i < render.pixels(); ++i) {
    const double s = (map.rgb[i * 3] + map.rgb[i * 3 + 1] + map.rgb[i * 3 + 2]) / 3.0;
    const double e = std::clamp((1.0 - s) * 0.5, 0.0, 1.0);
    err.rgb[i * 3] = err.rgb[i * 3 + 1] = err.rgb[i * 3 + 2] = e;
  }
  return err;
}

void accumulate_camera(const geometry::TetMesh& mesh, std::span<const TetAttributes> attrs,
                       const Camera& camera, const ImageD& gt,
                       const render::RenderOptions& options, std::vector<CameraTetStats>& out) {
  const render::FrameRenderer renderer(mesh, attrs, camera, options);
  const ImageD image = renderer.render();
  render::require_same_size(image, gt);
  const ImageD error = ssim_error_map(image, gt);
  out.assign(mesh.num_tets(), {});
  render::RayRecord record;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      renderer.trace_pixel(x, y, record);
      if (!record.valid) continue;
      const double s = error.at(x, y).x;
      const Rgb delta = image.at(x, y) - gt.at(x, y);
      const Rgb delta_sq{delta.x * delta.x, delta.y * delta.y, delta.z * delta.z};
      for (const auto& seg : record.segments) {
        const double w = seg.transmittance * seg.alpha;
        if (!(w > 0.0)) continue;
        CameraTetStats& st = out[seg.tet];
        ++st.hits;
        st.mass += w;
        st.error_mass += w * s;
        st.residual += delta * w;
        st.residual_sq += delta_sq * w;
        st.entry_sum += record.ray.at(seg.t_in) * w;
        st.exit_sum += record.ray.at(seg.t_out) * w;
      }
    }
  }
}

SplitStats accumulate(const field::Field& field, const geometry::TetMesh& mesh,
                      std::span<const DensifyView> views, const render::RenderOptions& options,
                      std::size_t threads) {
  SplitStats stats(mesh.num_tets());
  const std::size_t batch = resolve_threads(threads);
  render::RenderOptions inner = options;
  if (batch > 1) inner.threads = 1;
  std::vector<std::vector<CameraTetStats>> shards(std::min(batch, views.size()));
  for (std::size_t first = 0; first < views.size(); first += batch) {
    const std::size_t count = std::min(batch, views.size() - first);
    parallel_chunks(count, count, batch, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t i = b; i < e; ++i) {
        const DensifyView& v = views[first + i];
        const auto attrs = field::evaluate_field(field, mesh, v.camera->origin(), inner.threads);
        accumulate_camera(mesh, attrs, *v.camera, *v.image, inner, shards[i]);
      }
    });
    for (std::size_t i = 0; i < count; ++i) stats.add_camera(static_cast<int>(first + i), shards[i]);
  }
  return stats;
}

void closest_points(const Point3& a0, const Point3& a1, const Point3& b0, const Point3& b1,
                    Point3& pa, Point3& pb) {
  const Vec3 d1 = a1 - a0;
  const Vec3 d2 = b1 - b0;
  const Vec3 r = a0 - b0;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  constexpr double kTiny = 1e-300;
  double s = 0.0, t = 0.0;
  if (a <= kTiny && e <= kTiny) {
    pa = a0;
    pb = b0;
    return;
  }
  if (a <= kTiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e <= kTiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  pa = a0 + d1 * s;
  pb = b0 + d2 * t;
}

namespace {

double signed_volume(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  return dot(b - a, cross(c - a, d - a));
}

}  // namespace

bool strictly_inside(const std::array<Point3, 4>& v, const Point3& p, double tolerance) {
  const double vol = signed_volume(v[0], v[1], v[2], v[3]);
  if (vol == 0.0) return false;
  for (int i = 0; i < 4; ++i) {
    auto w = v;
    w[i] = p;
    if (signed_volume(w[0], w[1], w[2], w[3]) / vol < tolerance) return false;
  }
  return true;
}

Point3 random_interior_point(const std::array<Point3, 4>& v, std::mt19937_64& rng,
                             double tolerance) {
  std::exponential_distribution<double> expo(1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::array<double, 4> w;
    for (double& x : w) x = expo(rng);
    const double sum = w[0] + w[1] + w[2] + w[3];
    for (double& x : w) x /= sum;
    if (*std::min_element(w.begin(), w.end()) < tolerance) continue;
    const Point3 p = v[0] * w[0] + v[1] * w[1] + v[2] * w[2] + v[3] * w[3];
    if (strictly_inside(v, p, tolerance)) return p;
  }
  return (v[0] + v[1] + v[2] + v[3]) * 0.25;
}

Point3 place_point(const std::array<Point3, 2>& seg_a, const std::array<Point3, 2>& seg_b,
                   const std::array<Point3, 4>& tet, std::mt19937_64& rng,
                   Provenance& provenance, double tolerance) {
  Point3 pa, pb;
  closest_points(seg_a[0], seg_a[1], seg_b[0], seg_b[1], pa, pb);
  const Point3 mid = (pa + pb) * 0.5;
  if (is_finite(mid) && strictly_inside(tet, mid, tolerance)) {
    provenance = Provenance::Intersection;
    return mid;
  }
  provenance = Provenance::FallbackRandom;
  return random_interior_point(tet, rng, tolerance);
}

std::vector<SplitDecision> select_splits(const SplitStats& stats, const geometry::TetMesh& mesh,
                                         const DensifyConfig& config, std::mt19937_64& rng) {
  std::vector<SplitDecision> out;
  for (std::size_t k = 0; k < stats.num_tets(); ++k) {
    const double s = stats.ssim_score(k);
    const double t = stats.variance_score(k);
    const bool by_ssim = s > config.ssim_threshold;
    const bool by_var = t > config.variance_threshold;
    if (!by_ssim && !by_var) continue;
    SplitDecision d;
    d.tet = static_cast<std::uint32_t>(k);
    d.trigger = by_ssim ? Trigger::Ssim : Trigger::TotalVariance;
    d.ssim_triggered = by_ssim;
    d.variance_triggered = by_var;
    d.ssim_score = s;
    d.variance_score = t;
    const auto v = mesh.tet_points(k);
    if (stats.views(k) >= 2) {
      const auto& top = stats.top_views(k);
      d.point = place_point({top[0].mean_in, top[0].mean_out}, {top[1].mean_in, top[1].mean_out},
                            v, rng, d.provenance, config.interior_tolerance);
    } else {
      d.provenance = Provenance::FallbackRandom;
      d.point = random_interior_point(v, rng, config.interior_tolerance);
    }
    out.push_back(d);
  }
  return out;
}

std::vector<std::size_t> sample_views(std::size_t total, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, total);
  // partial Fisher-Yates with an explicit draw so results do not depend on
  // the standard library's shuffle
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace radmesh::densify
