#include "damseep/geometry2d.hpp"

#include <algorithm>
#include <limits>

namespace damseep {

double signed_area(std::span<const Point> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

Point centroid(std::span<const Point> poly) {
    const std::size_t n = poly.size();
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    // shift to the first vertex to keep the sums well conditioned
    const Point o = poly.empty() ? Point{} : poly[0];
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i] - o;
        const Point b = poly[(i + 1) % n] - o;
        const double c = cross(a, b);
        a2 += c;
        cx += (a.x + b.x) * c;
        cy += (a.y + b.y) * c;
    }
    if (a2 == 0.0) {
        Point s{};
        for (const auto& p : poly) s = s + p;
        return (1.0 / static_cast<double>(std::max<std::size_t>(n, 1))) * s;
    }
    return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

bool is_convex(std::span<const Point> poly, double tol) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    const double scale = std::max(1.0, area(poly));
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i], b = poly[(i + 1) % n], c = poly[(i + 2) % n];
        if (cross(b - a, c - b) < -tol * scale) return false;
    }
    return true;
}

namespace {

int sign_of(double v) { return (v > 0) - (v < 0); }

bool segments_touch(Point a, Point b, Point c, Point d) {
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    if (sign_of(d1) * sign_of(d2) < 0 && sign_of(d3) * sign_of(d4) < 0) return true;
    auto on = [](Point p, Point q, Point r, double cr) {
        return cr == 0.0 && std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    return on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4);
}

}  // namespace

bool is_simple(std::span<const Point> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return true;
}

double distance_to_segment(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

bool contains(std::span<const Point> poly, Point p, double tol) {
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[i], b = poly[j];
        if (distance_to_segment(p, a, b) <= tol) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

HalfPlane HalfPlane::left_of(Point a, Point b) {
    // left of a->b: cross(b-a, p-a) >= 0  <=>  dot(n, p) <= dot(n, a) with n = (dy, -dx)
    const Point d = b - a;
    const Point n{d.y, -d.x};
    return {n, dot(n, a)};
}

Polygon clip(const Polygon& convex, const HalfPlane& h) {
    Polygon out;
    const std::size_t n = convex.size();
    if (n == 0) return out;
    const double scale = norm(h.normal);
    const double eps = 1e-12 * std::max(1.0, scale);
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = convex[i], b = convex[(i + 1) % n];
        const double fa = h.eval(a), fb = h.eval(b);
        const bool ina = fa <= eps, inb = fb <= eps;
        if (ina) out.push_back(a);
        if (ina != inb && std::abs(fa - fb) > 0) {
            const double t = fa / (fa - fb);
            if (t > 0.0 && t < 1.0) out.push_back(a + t * (b - a));
        }
    }
    return cleanup(std::move(out));
}

Polygon intersect_convex(const Polygon& a, const Polygon& b) {
    Polygon r = a;
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n && !r.empty(); ++i) r = clip(r, HalfPlane::left_of(b[i], b[(i + 1) % n]));
    return r;
}

std::vector<Polygon> subtract_convex(const Polygon& a, const Polygon& b, double min_area) {
    std::vector<Polygon> pieces;
    Polygon rest = a;
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n && !rest.empty(); ++i) {
        const HalfPlane inner = HalfPlane::left_of(b[i], b[(i + 1) % n]);
        Polygon outside = clip(rest, inner.complement());
        if (outside.size() >= 3 && area(outside) > min_area) pieces.push_back(std::move(outside));
        rest = clip(rest, inner);
    }
    return pieces;
}

Polygon cleanup(Polygon poly, double tol) {
    if (poly.size() < 3) return poly;
    double extent = 0.0;
    for (const auto& p : poly) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
    const double dtol = tol * std::max(1.0, extent);
    Polygon out;
    for (const auto& p : poly)
        if (out.empty() || distance(out.back(), p) > dtol) out.push_back(p);
    while (out.size() > 1 && distance(out.front(), out.back()) <= dtol) out.pop_back();
    bool changed = true;
    while (changed && out.size() >= 3) {
        changed = false;
        for (std::size_t i = 0; i < out.size() && out.size() >= 3; ++i) {
            const std::size_t n = out.size();
            const Point a = out[(i + n - 1) % n], b = out[i], c = out[(i + 1) % n];
            const double len = std::max(distance(a, b), distance(b, c));
            if (std::abs(cross(b - a, c - a)) <= dtol * len && dot(b - a, c - b) >= 0.0) {
                out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
                changed = true;
            }
        }
    }
    if (out.size() < 3) return {};
    if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
    return out;
}

double convex_width(std::span<const Point> convex) {
    const std::size_t n = convex.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = convex[i], b = convex[(i + 1) % n];
        const double len = distance(a, b);
        if (len == 0.0) continue;
        double far = 0.0;
        for (const auto& p : convex) far = std::max(far, std::abs(cross(b - a, p - a)) / len);
        best = std::min(best, far);
    }
    return best;
}

Polygon rectangle(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

}  // namespace damseep
