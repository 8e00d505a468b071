#pragma once

#include <cstdint>

namespace damseep::detail {

/// Vertex on the mesher's integer lattice.
struct IPoint {
    std::int64_t x = 0;
    std::int64_t y = 0;
    friend bool operator==(const IPoint&, const IPoint&) = default;
};

/// Sign of the orientation of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear. Exact.
int orient(const IPoint& a, const IPoint& b, const IPoint& c);

/// +1 when d lies strictly inside the circumcircle of the CCW triangle (a, b, c). Exact.
int incircle(const IPoint& a, const IPoint& b, const IPoint& c, const IPoint& d);

/// Sign of (a - c) . (b - c): <= 0 means c lies in the closed diametral disk of ab.
int diametral_sign(const IPoint& a, const IPoint& b, const IPoint& c);

}  // namespace damseep::detail
