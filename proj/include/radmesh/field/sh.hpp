#pragma once

#include <array>
#include <span>

#include "radmesh/vec.hpp"

namespace radmesh::field {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real orthonormal spherical harmonics up to `degree` (<= 3) evaluated at the
/// unit direction `dir`. Order within a band is m = -l..l, no Condon-Shortley
/// phase (band 1 is sqrt(3/4pi) * (y, z, x)).
std::array<double, kMaxShCoeffs> sh_basis(const Vec3& dir, int degree);

/// Adds d(sum_i grad_basis[i] * Y_i)/d(dir) to grad_dir, treating Y as
/// polynomials in (x, y, z).
void sh_basis_backward(const Vec3& dir, int degree, std::span<const double> grad_basis,
                       Vec3& grad_dir);

}  // namespace radmesh::field
