#pragma once

// Split statistics straight from the definitions: exhaustive ray/tet
// clipping, compositing in entry order, then one pass over pixels and tets.

#include <algorithm>
#include <span>
#include <vector>

#include "radmesh/check/oracles.hpp"
#include "radmesh/densify/densify.hpp"

namespace radmesh::check {

inline std::vector<densify::CameraTetStats> naive_camera_stats(
    const geometry::TetMesh& mesh, std::span<const field::TetAttributes> attrs,
    const render::Camera& cam, const render::ImageD& gt) {
  render::ImageD image(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const auto ray = render::generate_ray(cam, x + 0.5, y + 0.5);
      if (!ray) continue;
      image.set(x, y, brute_force_pixel(mesh, attrs, ray->origin, ray->dir, {}, 0.0));
    }
  }
  const render::ImageD error = densify::ssim_error_map(image, gt);
  std::vector<densify::CameraTetStats> out(mesh.num_tets());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const auto ray = render::generate_ray(cam, x + 0.5, y + 0.5);
      if (!ray) continue;
      const Vec3 delta = image.at(x, y) - gt.at(x, y);
      double T = 1.0;
      for (const auto& s : brute_segments(mesh, ray->origin, ray->dir)) {
        const double d = attrs[s.tet].sigma * norm(ray->dir) * (s.t_out - s.t_in);
        const double alpha = -std::expm1(-d);
        const double w = T * alpha;
        T *= 1.0 - alpha;
        if (!(w > 0.0)) continue;
        auto& st = out[s.tet];
        ++st.hits;
        st.mass += w;
        st.error_mass += w * error.at(x, y).x;
        st.residual += delta * w;
        st.residual_sq += Vec3{delta.x * delta.x, delta.y * delta.y, delta.z * delta.z} * w;
        st.entry_sum += ray->at(s.t_in) * w;
        st.exit_sum += ray->at(s.t_out) * w;
      }
    }
  }
  return out;
}

struct NaiveScores {
  double ssim = 0.0;
  double variance = 0.0;
  std::size_t cameras = 0;
};

/// S_k as the mean of the two largest per-camera scores and T_k as the
/// mass-weighted residual variance over all cameras, summed over channels.
inline NaiveScores naive_scores(const std::vector<std::vector<densify::CameraTetStats>>& per_camera,
                                std::size_t k) {
  std::vector<double> scores;
  double mass = 0.0;
  Vec3 r, r2;
  for (const auto& cam : per_camera) {
    if (cam[k].hits == 0) continue;
    scores.push_back(cam[k].error_mass / cam[k].hits);
    mass += cam[k].mass;
    r += cam[k].residual;
    r2 += cam[k].residual_sq;
  }
  std::sort(scores.rbegin(), scores.rend());
  NaiveScores out;
  out.cameras = scores.size();
  out.ssim = scores.size() < 2 ? 0.0 : 0.5 * (scores[0] + scores[1]);
  if (mass > 0.0) {
    for (int ch = 0; ch < 3; ++ch) out.variance += r2[ch] / mass - (r[ch] / mass) * (r[ch] / mass);
    out.variance *= mass;
  }
  return out;
}

}  // namespace radmesh::check
