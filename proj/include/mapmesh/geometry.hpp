#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mapmesh {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Point operator+(Point a, Point b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point operator-(Point a, Point b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point operator*(double s, Point a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point a, Point b) noexcept = default;
};

constexpr double dot(Point a, Point b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point a, Point b) noexcept { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Point a) noexcept { return dot(a, a); }
inline double norm(Point a) noexcept { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) noexcept { return norm(a - b); }
constexpr double distance2(Point a, Point b) noexcept { return norm2(a - b); }

/// Axis-aligned rectangle. Empty when min > max.
struct Rect {
    Point min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Point max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

    constexpr bool empty() const noexcept { return min.x > max.x || min.y > max.y; }
    constexpr double width() const noexcept { return empty() ? 0.0 : max.x - min.x; }
    constexpr double height() const noexcept { return empty() ? 0.0 : max.y - min.y; }

    constexpr void expand(Point p) noexcept
    {
        min.x = std::min(min.x, p.x);
        min.y = std::min(min.y, p.y);
        max.x = std::max(max.x, p.x);
        max.y = std::max(max.y, p.y);
    }
    constexpr void expand(const Rect& r) noexcept
    {
        if (!r.empty()) {
            expand(r.min);
            expand(r.max);
        }
    }
    constexpr bool contains(Point p) const noexcept
    {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
    friend constexpr bool operator==(const Rect&, const Rect&) noexcept = default;
};

/// Gap between two rectangles (0 when they overlap).
inline double rect_gap(const Rect& a, const Rect& b) noexcept
{
    const double dx = std::max({0.0, a.min.x - b.max.x, b.min.x - a.max.x});
    const double dy = std::max({0.0, a.min.y - b.max.y, b.min.y - a.max.y});
    return std::hypot(dx, dy);
}

inline Rect bounding_box(std::span<const Point> pts) noexcept
{
    Rect r;
    for (Point p : pts) {
        r.expand(p);
    }
    return r;
}

/// Squared distance from p to segment [a, b]. Projection, clamp, compare; no sqrt.
constexpr double segment_distance2(Point p, Point a, Point b) noexcept
{
    const Point ab = b - a;
    const Point ap = p - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(ap, ab) / len2 : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const Point d = ap - t * ab;
    return norm2(d);
}

inline double segment_distance(Point p, Point a, Point b) noexcept
{
    return std::sqrt(segment_distance2(p, a, b));
}

namespace detail {

inline int orientation(Point a, Point b, Point c) noexcept
{
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(Point p, Point a, Point b) noexcept
{
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

} // namespace detail

/// Closed-segment intersection test (touching counts).
inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) noexcept
{
    using detail::on_segment;
    using detail::orientation;
    const int o1 = orientation(p1, p2, q1);
    const int o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1);
    const int o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) {
        return true;
    }
    if (o1 == 0 && on_segment(q1, p1, p2)) return true;
    if (o2 == 0 && on_segment(q2, p1, p2)) return true;
    if (o3 == 0 && on_segment(p1, q1, q2)) return true;
    if (o4 == 0 && on_segment(p2, q1, q2)) return true;
    return false;
}

inline double segment_segment_distance(Point p1, Point p2, Point q1, Point q2) noexcept
{
    if (segments_intersect(p1, p2, q1, q2)) {
        return 0.0;
    }
    return std::sqrt(std::min({segment_distance2(p1, q1, q2), segment_distance2(p2, q1, q2),
                               segment_distance2(q1, p1, p2), segment_distance2(q2, p1, p2)}));
}

/// Shoelace signed area; positive for counter-clockwise rings.
inline double signed_area(std::span<const Point> ring) noexcept
{
    const std::size_t n = ring.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += cross(ring[i], ring[(i + 1) % n]);
    }
    return 0.5 * s;
}

/// Area centroid of a simple polygon. Vertices are shifted to the first
/// vertex before accumulation to keep cancellation small for projected
/// coordinates with large offsets.
inline Point polygon_centroid(std::span<const Point> ring) noexcept
{
    const std::size_t n = ring.size();
    const Point o = ring[0];
    double a2 = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point p = ring[i] - o;
        const Point q = ring[(i + 1) % n] - o;
        const double c = cross(p, q);
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    if (a2 == 0.0) {
        return o;
    }
    return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

/// Point in polygon, boundary inclusive.
inline bool point_in_polygon(Point p, std::span<const Point> ring) noexcept
{
    const std::size_t n = ring.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = ring[j];
        const Point b = ring[i];
        if (detail::orientation(a, b, p) == 0 && detail::on_segment(p, a, b)) {
            return true;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xi) {
                inside = !inside;
            }
        }
    }
    return inside;
}

/// Index of the first pair of non-adjacent edges that intersect, or -1.
/// Quadratic in vertex count; footprints are small.
inline long first_self_intersection(std::span<const Point> ring) noexcept
{
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a1 = ring[i];
        const Point a2 = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            const Point b1 = ring[j];
            const Point b2 = ring[(j + 1) % n];
            if (adjacent) {
                // Adjacent edges share one vertex; they only conflict when
                // they fold back onto each other.
                const Point shared = (j == i + 1) ? a2 : a1;
                const Point u = (j == i + 1) ? a1 : a2;
                const Point v = (j == i + 1) ? b2 : b1;
                if (detail::orientation(shared, u, v) == 0 && dot(u - shared, v - shared) > 0.0) {
                    return static_cast<long>(i);
                }
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) {
                return static_cast<long>(i);
            }
        }
    }
    return -1;
}

inline bool is_simple_polygon(std::span<const Point> ring) noexcept
{
    return ring.size() >= 3 && first_self_intersection(ring) < 0 && std::abs(signed_area(ring)) > 0.0;
}

/// Minimum distance between two simple polygons, interiors included.
inline double polygon_distance(std::span<const Point> a, std::span<const Point> b) noexcept
{
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            if (segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])) {
                return 0.0;
            }
        }
    }
    if (point_in_polygon(a[0], b) || point_in_polygon(b[0], a)) {
        return 0.0;
    }
    // Disjoint boundaries: the minimum is attained at a vertex of one polygon.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            best = std::min(best, segment_distance2(a[i], b[j], b[(j + 1) % nb]));
            best = std::min(best, segment_distance2(b[j], a[i], a[(i + 1) % na]));
        }
    }
    return std::sqrt(best);
}

} // namespace mapmesh
