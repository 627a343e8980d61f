#include "radmesh/render/segment.hpp"

#include <cmath>
#include <limits>

#include "radmesh/geometry/tet_mesh.hpp"

namespace radmesh::render {

Hit intersect_tet(const Ray& ray, const std::array<Point3, 4>& v) {
  Hit hit;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 4; ++f) {
    const Vec3 n = inward_normal(v, f);
    const Point3& a = v[geometry::kFaceVerts[f][0]];
    const double num = dot(n, a - ray.origin);
    const double den = dot(n, ray.dir);
    if (den > 0.0) {
      const double t = num / den;
      if (t > t_enter) {
        t_enter = t;
        hit.face_in = static_cast<std::uint8_t>(f);
      }
    } else if (den < 0.0) {
      const double t = num / den;
      if (t < t_exit) {
        t_exit = t;
        hit.face_out = static_cast<std::uint8_t>(f);
      }
    } else if (num > 0.0) {
      return hit;  // parallel to the face and outside its half-space
    }
  }
  if (!(t_exit > std::max(t_enter, 0.0))) return hit;
  hit.hit = true;
  if (t_enter < 0.0) {
    t_enter = 0.0;
    hit.face_in = kNoFace;
  }
  hit.t_in = t_enter;
  hit.t_out = t_exit;
  return hit;
}

void face_crossing_backward(const Ray& ray, const std::array<Point3, 4>& v, int f, double t,
                            double grad_t, std::array<Vec3, 4>& grad_v) {
  if (grad_t == 0.0) return;
  const auto& fv = geometry::kFaceVerts[f];
  const Point3& a = v[fv[0]];
  const Point3& b = v[fv[1]];
  const Point3& c = v[fv[2]];
  const Vec3 e1 = c - a;
  const Vec3 e2 = b - a;
  const Vec3 n = cross(e1, e2);
  const double den = dot(n, ray.dir);
  // t = n . (a - o) / (n . dir): dt/dn = (a - p) / den with p = o + t dir,
  // and the explicit dependence on a through the numerator is n / den.
  const Vec3 g_n = (a - ray.at(t)) * (grad_t / den);
  const Vec3 g_e1 = cross(e2, g_n);
  const Vec3 g_e2 = cross(g_n, e1);
  grad_v[fv[2]] += g_e1;
  grad_v[fv[1]] += g_e2;
  grad_v[fv[0]] += n * (grad_t / den) - g_e1 - g_e2;
}

SegmentWeights segment_weights(double d) {
  SegmentWeights w;
  if (d < 0.1) {
    // g = sum_{n>=1} (-1)^{n+1} d^n / (n+1)!,  h = sum_{n>=1} (-1)^{n+1} n d^n / (n+1)!
    double fact = 2.0;  // (n+1)!
    double sign = 1.0;
    double dpow = 1.0;  // d^{n-1}
    for (int n = 1; n <= 14; ++n) {
      const double term = sign * dpow / fact;
      w.g += term * d;
      w.h += term * n * d;
      w.dg += term * n;
      w.dh += term * n * n;
      dpow *= d;
      fact *= (n + 2);
      sign = -sign;
    }
    w.alpha = -std::expm1(-d);
    return w;
  }
  const double e = std::exp(-d);
  w.alpha = -std::expm1(-d);
  const double r = w.alpha / d;
  w.g = 1.0 - r;
  w.h = r - e;
  // d(alpha/d)/dd = (d e - alpha) / d^2
  const double dr = (d * e - w.alpha) / (d * d);
  w.dg = -dr;
  w.dh = dr + e;
  return w;
}

SegmentIntegral integrate_segment(double sigma, double t_in, double t_out, const Rgb& c_in,
                                  const Rgb& c_out) {
  SegmentIntegral out;
  const double d = sigma * (t_out - t_in);
  if (std::isinf(d)) {
    // opaque limit: the entry color is all that is seen
    out.alpha = 1.0;
    out.delta = c_in;
    return out;
  }
  const SegmentWeights w = segment_weights(d);
  out.alpha = w.alpha;
  out.delta = c_in * w.g + c_out * w.h;
  return out;
}

}  // namespace radmesh::render
