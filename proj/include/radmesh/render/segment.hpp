#pragma once

#include <array>
#include <cstdint>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/render/camera.hpp"
#include "radmesh/vec.hpp"

namespace radmesh::render {

using field::Rgb;

inline constexpr std::uint8_t kNoFace = 0xFF;

struct Hit {
  bool hit = false;
  double t_in = 0.0;
  double t_out = 0.0;
  std::uint8_t face_in = kNoFace;  // kNoFace when t_in was clamped to the origin
  std::uint8_t face_out = kNoFace;
};

/// Cyrus-Beck clipping of a ray against the four face planes of a positively
/// oriented tet (vertex slots as in geometry::kFaceVerts). With inward normals
/// n_f, num = n_f . (v_f - origin) and den = n_f . dir: faces with den > 0 are
/// entered, faces with den < 0 are exited. Entry is clamped to t = 0 when the
/// origin lies inside the tet.
Hit intersect_tet(const Ray& ray, const std::array<Point3, 4>& v);

/// Inward normal of face f (not normalized): (v_c - v_a) x (v_b - v_a) for the
/// face's outward-wound triple (a, b, c).
inline Vec3 inward_normal(const std::array<Point3, 4>& v, int f);

/// Adds d t / d v for the crossing t = num/den of face f, scaled by grad_t.
void face_crossing_backward(const Ray& ray, const std::array<Point3, 4>& v, int f, double t,
                            double grad_t, std::array<Vec3, 4>& grad_v);

/// Weights of the closed-form segment integral: delta = g(d) c_in + h(d) c_out
/// with g = 1 - alpha/d, h = alpha/d - exp(-d) and alpha = 1 - exp(-d). Small
/// optical depths use the Taylor series, so d -> 0 is exact in the limit.
struct SegmentWeights {
  double alpha = 0.0;
  double g = 0.0;
  double h = 0.0;
  double dg = 0.0;  // derivatives with respect to d
  double dh = 0.0;
};
SegmentWeights segment_weights(double d);

struct SegmentIntegral {
  Rgb delta;  // premultiplied color contribution
  double alpha = 0.0;
};

/// Emission integral across one cell: optical depth d = sigma * (t_out - t_in)
/// (t measured in scene units along a unit direction).
SegmentIntegral integrate_segment(double sigma, double t_in, double t_out, const Rgb& c_in,
                                  const Rgb& c_out);

inline Vec3 inward_normal(const std::array<Point3, 4>& v, int f) {
  const auto& fv = geometry::kFaceVerts[f];
  return cross(v[fv[2]] - v[fv[0]], v[fv[1]] - v[fv[0]]);
}

}  // namespace radmesh::render
