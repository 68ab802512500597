#pragma once

#include <cmath>
#include <optional>

#include "mammopos/common.hpp"

namespace mammopos {

// 2D primitives for the positioning rules. Coordinates are continuous pixel
// positions; the pixel-index convention is inclusive (0..width-1).

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline bool is_finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }

/// Directed segment. Zero-length segments are rejected at construction so the
/// line through a segment is always well defined.
class Segment {
public:
    Segment(Point p0, Point p1) : p0_(p0), p1_(p1) {
        if (!is_finite(p0) || !is_finite(p1))
            throw ContractError("segment endpoints must be finite");
        if (p0.x == p1.x && p0.y == p1.y)
            throw ContractError("zero-length segment");
    }

    Point p0() const { return p0_; }
    Point p1() const { return p1_; }
    Point direction() const { return p1_ - p0_; }
    double length() const { return norm(direction()); }

    friend bool operator==(const Segment&, const Segment&) = default;

private:
    Point p0_, p1_;
};

struct Bounds {
    int width = 0;
    int height = 0;

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

inline constexpr double kParallelTolerance = 1e-9;

/// Intersection point of the infinite lines through two segments, or nothing
/// when the lines are parallel. The determinant test is scaled by the product
/// of the segment lengths so the degeneracy guard is unit-free.
inline std::optional<Point> line_intersection(const Segment& a, const Segment& b) {
    const Point da = a.direction();
    const Point db = b.direction();
    const double det = cross(da, db);
    if (std::abs(det) < kParallelTolerance * norm(da) * norm(db)) return std::nullopt;
    const double t = cross(b.p0() - a.p0(), db) / det;
    return a.p0() + t * da;
}

/// Inclusive pixel-index containment: 0 <= x <= width-1 and 0 <= y <= height-1.
inline bool point_in_bounds(const Point& p, const Bounds& b) {
    return p.x >= 0.0 && p.x <= static_cast<double>(b.width - 1) &&
           p.y >= 0.0 && p.y <= static_cast<double>(b.height - 1);
}

inline double distance(const Point& p, const Point& q) { return norm(p - q); }

/// Distance from p to the infinite line through s.
inline double perpendicular_distance(const Point& p, const Segment& s) {
    return std::abs(cross(s.direction(), p - s.p0())) / s.length();
}

}  // namespace mammopos
