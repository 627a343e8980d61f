#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace radmesh::check {

/// Fourth-order central difference: f(delta) evaluates the objective with one
/// coordinate shifted by delta.
template <class F>
double central_difference(F&& f, double h) {
  return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// |a - b| / max(|a|, |b|) over whole gradient vectors. Per-component ratios
/// are dominated by finite-difference rounding on entries many orders of
/// magnitude below the rest of the gradient.
inline double vector_rel_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
}

}  // namespace radmesh::check
