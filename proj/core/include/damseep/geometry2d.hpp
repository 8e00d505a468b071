#pragma once

#include <cmath>
#include <compare>
#include <span>
#include <vector>

namespace damseep {

/// Point in the section plane. x is horizontal (m), y is elevation (m a.s.l.).
struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

using Polygon = std::vector<Point>;

/// Signed shoelace area; positive for counter-clockwise vertex order.
double signed_area(std::span<const Point> poly);
inline double area(std::span<const Point> poly) { return std::abs(signed_area(poly)); }

Point centroid(std::span<const Point> poly);

bool is_convex(std::span<const Point> poly, double tol = 1e-12);

/// True when the polygon has no pair of non-adjacent edges that touch.
bool is_simple(std::span<const Point> poly);

/// Even-odd test; points within `tol` of an edge count as inside.
bool contains(std::span<const Point> poly, Point p, double tol = 1e-9);

double distance_to_segment(Point p, Point a, Point b);

/// Half plane { p : dot(normal, p) <= offset }.
struct HalfPlane {
    Point normal;
    double offset = 0.0;

    /// Left side of the directed line a -> b.
    static HalfPlane left_of(Point a, Point b);
    HalfPlane complement() const { return {-1.0 * normal, -offset}; }
    double eval(Point p) const { return dot(normal, p) - offset; }
};

/// Sutherland-Hodgman clip of a convex polygon; the result is CCW, possibly empty.
Polygon clip(const Polygon& convex, const HalfPlane& h);
Polygon intersect_convex(const Polygon& a, const Polygon& b);

/// Convex pieces of `a \ b` for convex CCW polygons. Pieces below `min_area` are dropped.
std::vector<Polygon> subtract_convex(const Polygon& a, const Polygon& b, double min_area);

/// Removes repeated and collinear vertices, orients CCW.
Polygon cleanup(Polygon poly, double tol = 1e-10);

/// Minimum width of a convex polygon (smallest caliper distance).
double convex_width(std::span<const Point> convex);

Polygon rectangle(double x0, double y0, double x1, double y1);

}  // namespace damseep
