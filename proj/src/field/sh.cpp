#include "radmesh/field/sh.hpp"

#include <stdexcept>

namespace radmesh::field {

namespace {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2a = 1.0925484305920792;
constexpr double kC2b = 0.31539156525252005;
constexpr double kC2c = 0.5462742152960396;
constexpr double kC3a = 0.5900435899266435;
constexpr double kC3b = 2.890611442640554;
constexpr double kC3c = 0.4570457994644658;
constexpr double kC3d = 0.3731763325901154;
constexpr double kC3e = 1.445305721320277;
}  // namespace

std::array<double, kMaxShCoeffs> sh_basis(const Vec3& dir, int degree) {
  if (degree < 0 || degree > kMaxShDegree) throw std::invalid_argument("sh degree out of range");
  std::array<double, kMaxShCoeffs> y{};
  const double x = dir.x, yy = dir.y, z = dir.z;
  y[0] = kC0;
  if (degree >= 1) {
    y[1] = kC1 * yy;
    y[2] = kC1 * z;
    y[3] = kC1 * x;
  }
  if (degree >= 2) {
    y[4] = kC2a * x * yy;
    y[5] = kC2a * yy * z;
    y[6] = kC2b * (3.0 * z * z - 1.0);
    y[7] = kC2a * x * z;
    y[8] = kC2c * (x * x - yy * yy);
  }
  if (degree >= 3) {
    y[9] = kC3a * yy * (3.0 * x * x - yy * yy);
    y[10] = kC3b * x * yy * z;
    y[11] = kC3c * yy * (5.0 * z * z - 1.0);
    y[12] = kC3d * z * (5.0 * z * z - 3.0);
    y[13] = kC3c * x * (5.0 * z * z - 1.0);
    y[14] = kC3e * z * (x * x - yy * yy);
    y[15] = kC3a * x * (x * x - 3.0 * yy * yy);
  }
  return y;
}

void sh_basis_backward(const Vec3& dir, int degree, std::span<const double> g, Vec3& grad_dir) {
  const double x = dir.x, y = dir.y, z = dir.z;
  double gx = 0.0, gy = 0.0, gz = 0.0;
  if (degree >= 1) {
    gy += kC1 * g[1];
    gz += kC1 * g[2];
    gx += kC1 * g[3];
  }
  if (degree >= 2) {
    gx += kC2a * y * g[4];
    gy += kC2a * x * g[4];
    gy += kC2a * z * g[5];
    gz += kC2a * y * g[5];
    gz += kC2b * 6.0 * z * g[6];
    gx += kC2a * z * g[7];
    gz += kC2a * x * g[7];
    gx += kC2c * 2.0 * x * g[8];
    gy -= kC2c * 2.0 * y * g[8];
  }
  if (degree >= 3) {
    gx += kC3a * 6.0 * x * y * g[9];
    gy += kC3a * (3.0 * x * x - 3.0 * y * y) * g[9];
    gx += kC3b * y * z * g[10];
    gy += kC3b * x * z * g[10];
    gz += kC3b * x * y * g[10];
    gy += kC3c * (5.0 * z * z - 1.0) * g[11];
    gz += kC3c * 10.0 * y * z * g[11];
    gz += kC3d * (15.0 * z * z - 3.0) * g[12];
    gx += kC3c * (5.0 * z * z - 1.0) * g[13];
    gz += kC3c * 10.0 * x * z * g[13];
    gx += kC3e * 2.0 * x * z * g[14];
    gy -= kC3e * 2.0 * y * z * g[14];
    gz += kC3e * (x * x - y * y) * g[14];
    gx += kC3a * (3.0 * x * x - 3.0 * y * y) * g[15];
    gy -= kC3a * 6.0 * x * y * g[15];
  }
  grad_dir += Vec3{gx, gy, gz};
}

}  // namespace radmesh::field
