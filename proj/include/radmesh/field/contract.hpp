#pragma once

#include <cmath>
#include <numbers>

#include "radmesh/vec.hpp"

namespace radmesh::field {

/// Radial contraction of unbounded space into the open ball of radius 2:
/// identity inside the unit ball, (2 - 1/|x|) x/|x| outside.
inline Point3 contract(const Point3& x) {
  const double r2 = norm2(x);
  if (r2 <= 1.0) return x;
  const double r = std::sqrt(r2);
  return x * ((2.0 - 1.0 / r) / r);
}

/// Adjoint of contract: returns J^T g (J is symmetric).
inline Vec3 contract_backward(const Point3& x, const Vec3& g) {
  const double r2 = norm2(x);
  if (r2 <= 1.0) return g;
  const double r = std::sqrt(r2);
  const double a = 2.0 / r - 1.0 / r2;
  const double b = -2.0 / (r2 * r) + 2.0 / (r2 * r2);
  return g * a + x * (b * dot(x, g));
}

/// Spectral norm of the contraction Jacobian at distance r from the origin.
inline double contract_scale(double r) { return r <= 1.0 ? 1.0 : (2.0 * r - 1.0) / (r * r); }
inline double contract_scale_derivative(double r) {
  return r <= 1.0 ? 0.0 : 2.0 * (1.0 - r) / (r * r * r);
}

/// Anti-aliasing attenuation of a grid level with resolution n for a query of
/// scale `radius` (both in the same normalized grid units):
/// erf(1 / sqrt(8 radius^2 n^2)).
inline double downweight(double radius, double n) {
  if (radius <= 0.0) return 1.0;
  return std::erf(1.0 / (std::sqrt(8.0) * radius * n));
}

/// d downweight / d radius.
inline double downweight_derivative(double radius, double n) {
  if (radius <= 0.0) return 0.0;
  const double z = 1.0 / (std::sqrt(8.0) * radius * n);
  return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z) * (-z / radius);
}

}  // namespace radmesh::field
