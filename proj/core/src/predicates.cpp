#include "predicates.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <limits>

namespace damseep::detail {

namespace {

using i128 = __int128;
using boost::multiprecision::int256_t;

template <class T>
int sign(const T& v) {
    return (v > 0) - (v < 0);
}

}  // namespace

int orient(const IPoint& a, const IPoint& b, const IPoint& c) {
    const i128 abx = b.x - a.x, aby = b.y - a.y;
    const i128 acx = c.x - a.x, acy = c.y - a.y;
    return sign(abx * acy - aby * acx);
}

int diametral_sign(const IPoint& a, const IPoint& b, const IPoint& c) {
    const i128 ax = a.x - c.x, ay = a.y - c.y, bx = b.x - c.x, by = b.y - c.y;
    return sign(ax * bx + ay * by);
}

int incircle(const IPoint& a, const IPoint& b, const IPoint& c, const IPoint& d) {
    // coordinates are bounded by 2^37 so the differences are exact in double
    const double adx = double(a.x - d.x), ady = double(a.y - d.y);
    const double bdx = double(b.x - d.x), bdy = double(b.y - d.y);
    const double cdx = double(c.x - d.x), cdy = double(c.y - d.y);

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double alift = adx * adx + ady * ady;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double blift = bdx * bdx + bdy * bdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double clift = cdx * cdx + cdy * cdy;

    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    constexpr double eps = std::numeric_limits<double>::epsilon() * 0.5;
    const double bound = (10.0 + 96.0 * eps) * eps * permanent;
    if (det > bound) return 1;
    if (-det > bound) return -1;

    const int256_t ax = a.x - d.x, ay = a.y - d.y;
    const int256_t bx = b.x - d.x, by = b.y - d.y;
    const int256_t cx = c.x - d.x, cy = c.y - d.y;
    const int256_t exact = (ax * ax + ay * ay) * (bx * cy - cx * by) + (bx * bx + by * by) * (cx * ay - ax * cy) +
                           (cx * cx + cy * cy) * (ax * by - bx * ay);
    return sign(exact);
}

}  // namespace damseep::detail
