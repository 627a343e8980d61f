#include "radmesh/render/camera.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "radmesh/error.hpp"

namespace radmesh::render {

Camera Camera::pinhole(int width, int height, double fx, double fy, double cx, double cy) {
  Camera c;
  c.model = CameraModel::Pinhole;
  c.width = width;
  c.height = height;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  return c;
}

Camera Camera::fisheye(int width, int height, double f, double cx, double cy, double fov) {
  Camera c;
  c.model = CameraModel::Fisheye;
  c.width = width;
  c.height = height;
  c.fx = f;
  c.fy = f;
  c.cx = cx;
  c.cy = cy;
  c.fov = fov;
  return c;
}

Camera& Camera::look_at(const Point3& eye, const Point3& target, const Vec3& up) {
  const Vec3 forward = normalized(target - eye);
  Vec3 right = cross(forward, up);
  if (norm2(right) < 1e-24) right = cross(forward, std::abs(forward.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0});
  right = normalized(right);
  const Vec3 down = cross(forward, right);
  // columns: camera x (right), y (down), z (forward) in world coordinates
  rotation = Mat3{{right.x, down.x, forward.x, right.y, down.y, forward.y, right.z, down.z,
                   forward.z}};
  position = eye;
  return *this;
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::Format, "camera size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::Format, "focal length must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::Format, "principal point must be finite");
  }
  if (model == CameraModel::Fisheye && !(fov > 0.0 && fov <= 2.0 * std::numbers::pi + 1e-12)) {
    throw Error(ErrorCode::Format, "fisheye fov must be in (0, 2 pi]");
  }
  if (!is_finite(position)) throw Error(ErrorCode::Format, "camera position must be finite");
  // rotation must be orthonormal
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double v = dot(rotation.col(i), rotation.col(j));
      if (std::abs(v - (i == j ? 1.0 : 0.0)) > 1e-6) {
        throw Error(ErrorCode::Format, "camera rotation is not orthonormal");
      }
    }
  }
}

std::optional<Ray> generate_ray(const Camera& cam, double px, double py) {
  if (!(px >= 0.0 && px <= cam.width && py >= 0.0 && py <= cam.height)) {
    throw Error(ErrorCode::OutOfBounds,
                "pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside image");
  }
  Vec3 d;
  if (cam.model == CameraModel::Pinhole) {
    d = {(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0};
  } else {
    const double u = (px - cam.cx) / cam.fx;
    const double v = (py - cam.cy) / cam.fx;
    const double theta = std::sqrt(u * u + v * v);
    if (theta > 0.5 * cam.fov || theta > std::numbers::pi) return std::nullopt;
    if (theta == 0.0) {
      d = {0.0, 0.0, 1.0};
    } else {
      const double s = std::sin(theta) / theta;
      d = {u * s, v * s, std::cos(theta)};
    }
  }
  return Ray{cam.position, cam.rotation * d};
}

bool project(const Camera& cam, const Point3& p, double& px, double& py) {
  const Vec3 c = cam.rotation.transposed() * (p - cam.position);
  if (cam.model == CameraModel::Pinhole) {
    if (!(c.z > 0.0)) return false;
    px = cam.cx + cam.fx * c.x / c.z;
    py = cam.cy + cam.fy * c.y / c.z;
    return true;
  }
  const double r = std::sqrt(c.x * c.x + c.y * c.y);
  const double theta = std::atan2(r, c.z);
  if (r == 0.0) {
    px = cam.cx;
    py = cam.cy;
    return c.z > 0.0;
  }
  px = cam.cx + cam.fx * theta * c.x / r;
  py = cam.cy + cam.fx * theta * c.y / r;
  return true;
}

}  // namespace radmesh::render
