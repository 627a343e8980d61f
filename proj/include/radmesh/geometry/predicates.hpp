#pragma once

#include "radmesh/vec.hpp"

namespace radmesh::geometry {

enum class Sign : int { Negative = -1, Zero = 0, Positive = 1 };

constexpr Sign operator-(Sign s) { return static_cast<Sign>(-static_cast<int>(s)); }

/// Sign of det[b-a, c-a, d-a]. Positive for (0,0,0),(1,0,0),(0,1,0),(0,0,1).
/// A floating-point filter decides most inputs; the rest are evaluated in
/// exact rational arithmetic, so the returned sign is always exact.
Sign orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Positive when e lies strictly inside the circumsphere of the positively
/// oriented tetrahedron (a,b,c,d), negative outside, zero on the sphere. Exact.
Sign insphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
              const Point3& e);

/// Floating-point six-times signed volume, no exactness guarantee.
double orient3d_approx(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Counters for how often the exact fallback ran (diagnostics, not thread-safe
/// in the sense of being precise under contention).
struct PredicateStats {
  unsigned long long orient_exact = 0;
  unsigned long long insphere_exact = 0;
};
PredicateStats predicate_stats();

}  // namespace radmesh::geometry
