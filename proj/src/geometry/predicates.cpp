#include "radmesh/geometry/predicates.hpp"

#include <gmpxx.h>

#include <atomic>
#include <cmath>

namespace radmesh::geometry {

namespace {

// Half an ulp of 1.0; the forward error bounds below follow Shewchuk's
// adaptive-precision predicates (stage A bounds).
constexpr double kEpsilon = 0x1p-53;
constexpr double kOrientBound = (7.0 + 56.0 * kEpsilon) * kEpsilon;
constexpr double kInsphereBound = (16.0 + 224.0 * kEpsilon) * kEpsilon;

std::atomic<unsigned long long> g_orient_exact{0};
std::atomic<unsigned long long> g_insphere_exact{0};

Sign sign_of(int s) { return s > 0 ? Sign::Positive : (s < 0 ? Sign::Negative : Sign::Zero); }

// det[a-d; b-d; c-d] (rows), which is the negation of det[b-a, c-a, d-a].
int orient_exact_rows(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const mpq_class adx = mpq_class(a.x) - d.x, ady = mpq_class(a.y) - d.y,
                  adz = mpq_class(a.z) - d.z;
  const mpq_class bdx = mpq_class(b.x) - d.x, bdy = mpq_class(b.y) - d.y,
                  bdz = mpq_class(b.z) - d.z;
  const mpq_class cdx = mpq_class(c.x) - d.x, cdy = mpq_class(c.y) - d.y,
                  cdz = mpq_class(c.z) - d.z;
  const mpq_class det = adz * (bdx * cdy - cdx * bdy) + bdz * (cdx * ady - adx * cdy) +
                        cdz * (adx * bdy - bdx * ady);
  return sgn(det);
}

int insphere_exact_rows(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
                        const Point3& e) {
  auto diff = [&](const Point3& p) {
    return std::array<mpq_class, 3>{mpq_class(p.x) - e.x, mpq_class(p.y) - e.y,
                                    mpq_class(p.z) - e.z};
  };
  const auto A = diff(a), B = diff(b), C = diff(c), D = diff(d);
  const mpq_class ab = A[0] * B[1] - B[0] * A[1];
  const mpq_class bc = B[0] * C[1] - C[0] * B[1];
  const mpq_class cd = C[0] * D[1] - D[0] * C[1];
  const mpq_class da = D[0] * A[1] - A[0] * D[1];
  const mpq_class ac = A[0] * C[1] - C[0] * A[1];
  const mpq_class bd = B[0] * D[1] - D[0] * B[1];
  const mpq_class abc = A[2] * bc - B[2] * ac + C[2] * ab;
  const mpq_class bcd = B[2] * cd - C[2] * bd + D[2] * bc;
  const mpq_class cda = C[2] * da + D[2] * ac + A[2] * cd;
  const mpq_class dab = D[2] * ab + A[2] * bd + B[2] * da;
  auto lift = [](const std::array<mpq_class, 3>& p) {
    return mpq_class(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  };
  const mpq_class det = (lift(D) * abc - lift(C) * dab) + (lift(B) * cda - lift(A) * bcd);
  return sgn(det);
}

}  // namespace

double orient3d_approx(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  return dot(b - a, cross(c - a, d - a));
}

Sign orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const double adx = a.x - d.x, bdx = b.x - d.x, cdx = c.x - d.x;
  const double ady = a.y - d.y, bdy = b.y - d.y, cdy = c.y - d.y;
  const double adz = a.z - d.z, bdz = b.z - d.z, cdz = c.z - d.z;

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;

  const double det =
      adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * std::fabs(adz) +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * std::fabs(bdz) +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * std::fabs(cdz);
  const double errbound = kOrientBound * permanent;
  if (det > errbound) return Sign::Negative;
  if (-det > errbound) return Sign::Positive;
  g_orient_exact.fetch_add(1, std::memory_order_relaxed);
  return -sign_of(orient_exact_rows(a, b, c, d));
}

Sign insphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
              const Point3& e) {
  const double aex = a.x - e.x, bex = b.x - e.x, cex = c.x - e.x, dex = d.x - e.x;
  const double aey = a.y - e.y, bey = b.y - e.y, cey = c.y - e.y, dey = d.y - e.y;
  const double aez = a.z - e.z, bez = b.z - e.z, cez = c.z - e.z, dez = d.z - e.z;

  const double aexbey = aex * bey, bexaey = bex * aey;
  const double bexcey = bex * cey, cexbey = cex * bey;
  const double cexdey = cex * dey, dexcey = dex * cey;
  const double dexaey = dex * aey, aexdey = aex * dey;
  const double aexcey = aex * cey, cexaey = cex * aey;
  const double bexdey = bex * dey, dexbey = dex * bey;
  const double ab = aexbey - bexaey, bc = bexcey - cexbey, cd = cexdey - dexcey;
  const double da = dexaey - aexdey, ac = aexcey - cexaey, bd = bexdey - dexbey;

  const double abc = aez * bc - bez * ac + cez * ab;
  const double bcd = bez * cd - cez * bd + dez * bc;
  const double cda = cez * da + dez * ac + aez * cd;
  const double dab = dez * ab + aez * bd + bez * da;

  const double alift = aex * aex + aey * aey + aez * aez;
  const double blift = bex * bex + bey * bey + bez * bez;
  const double clift = cex * cex + cey * cey + cez * cez;
  const double dlift = dex * dex + dey * dey + dez * dez;

  const double det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);

  const double aezp = std::fabs(aez), bezp = std::fabs(bez), cezp = std::fabs(cez),
               dezp = std::fabs(dez);
  const double aexbeyp = std::fabs(aexbey), bexaeyp = std::fabs(bexaey);
  const double bexceyp = std::fabs(bexcey), cexbeyp = std::fabs(cexbey);
  const double cexdeyp = std::fabs(cexdey), dexceyp = std::fabs(dexcey);
  const double dexaeyp = std::fabs(dexaey), aexdeyp = std::fabs(aexdey);
  const double aexceyp = std::fabs(aexcey), cexaeyp = std::fabs(cexaey);
  const double bexdeyp = std::fabs(bexdey), dexbeyp = std::fabs(dexbey);
  const double permanent =
      ((cexdeyp + dexceyp) * bezp + (dexbeyp + bexdeyp) * cezp + (bexceyp + cexbeyp) * dezp) *
          alift +
      ((dexaeyp + aexdeyp) * cezp + (aexceyp + cexaeyp) * dezp + (cexdeyp + dexceyp) * aezp) *
          blift +
      ((aexbeyp + bexaeyp) * dezp + (bexdeyp + dexbeyp) * aezp + (dexaeyp + aexdeyp) * bezp) *
          clift +
      ((bexceyp + cexbeyp) * aezp + (cexaeyp + aexceyp) * bezp + (aexbeyp + bexaeyp) * cezp) *
          dlift;
  const double errbound = kInsphereBound * permanent;
  // The row determinant is positive for "inside" when (a,b,c,d) is negatively
  // oriented in the row convention, i.e. positively oriented in ours.
  if (det > errbound) return Sign::Negative;
  if (-det > errbound) return Sign::Positive;
  g_insphere_exact.fetch_add(1, std::memory_order_relaxed);
  return -sign_of(insphere_exact_rows(a, b, c, d, e));
}

PredicateStats predicate_stats() {
  return {g_orient_exact.load(), g_insphere_exact.load()};
}

}  // namespace radmesh::geometry
