#pragma once

#include <optional>

#include "radmesh/vec.hpp"

namespace radmesh::render {

enum class CameraModel { Pinhole, Fisheye };

/// Posed camera in the OpenCV convention: camera +z looks forward, +x right,
/// +y down. `rotation` maps camera-frame directions to world directions and
/// `position` is the camera center, so the pose is world-from-camera.
///
/// Pinhole uses fx, fy, cx, cy. The equidistant fisheye uses fx as f (image
/// radius = f * angle from the optical axis), cx, cy and the full field of
/// view `fov` in radians (at most 2 pi).
struct Camera {
  CameraModel model = CameraModel::Pinhole;
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double fov = 0.0;
  Mat3 rotation;
  Point3 position;

  const Point3& origin() const { return position; }

  static Camera pinhole(int width, int height, double fx, double fy, double cx, double cy);
  static Camera fisheye(int width, int height, double f, double cx, double cy, double fov);

  /// Places the camera at `eye` looking at `target`; `up` is the approximate
  /// world up direction (image -y).
  Camera& look_at(const Point3& eye, const Point3& target, const Vec3& up = {0, 0, 1});

  /// Throws Error(Format) when the intrinsics or pose are invalid.
  void validate() const;
};

struct Ray {
  Point3 origin;
  Vec3 dir;  // not normalized for pinhole cameras
  Point3 at(double t) const { return origin + dir * t; }
};

/// Ray through continuous pixel coordinates (px, py); pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center is (i + 0.5, j + 0.5). Pinhole rays
/// have direction R * ((px-cx)/fx, (py-cy)/fy, 1); fisheye rays are unit
/// length and empty outside the field of view. Throws Error(OutOfBounds) when
/// (px, py) is outside [0, width] x [0, height].
std::optional<Ray> generate_ray(const Camera& cam, double px, double py);

/// Projection of a world point to continuous pixel coordinates. Returns false
/// for points behind a pinhole camera.
bool project(const Camera& cam, const Point3& p, double& px, double& py);

}  // namespace radmesh::render
