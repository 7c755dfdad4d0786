#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace autolap {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
    double norm_sq() const { return x * x + y * y; }

    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
    // Rotate a world-frame vector into the body frame of a pose with this heading.
    Vec2 to_body(double heading) const {
        double c = std::cos(heading), s = std::sin(heading);
        return {c * x + s * y, -s * x + c * y};
    }
    Vec2 rotated(double angle) const {
        double c = std::cos(angle), s = std::sin(angle);
        return {c * x - s * y, s * x + c * y};
    }
};

inline Vec2 operator*(double k, const Vec2& v) { return v * k; }

// Wrap into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    else if (a > M_PI) a -= two_pi;
    return a;
}

struct Rect {
    Vec2 lo, hi;
    bool contains(const Vec2& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
};

// Convex polygon, counter-clockwise winding.
struct Polygon {
    std::vector<Vec2> pts;

    bool contains(const Vec2& p) const {
        size_t n = pts.size();
        if (n < 3) return false;
        for (size_t i = 0; i < n; ++i) {
            const Vec2& a = pts[i];
            const Vec2& b = pts[(i + 1) % n];
            if ((b - a).cross(p - a) < 0.0) return false;
        }
        return true;
    }
};

inline Polygon make_box(const Vec2& lo, const Vec2& hi) {
    return Polygon{{{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}}};
}

// Earliest parameter t >= 0 where origin + t*dir crosses segment [a, b].
std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir,
                                      const Vec2& a, const Vec2& b);

// Nearest hit of a ray against the polygon boundary within max_range.
std::optional<double> ray_polygon_hit(const Vec2& origin, const Vec2& dir,
                                      const Polygon& poly, double max_range);

// Earliest s in (0, 1] where the segment p0->p1 touches the polygon boundary,
// or 0 if p0 is already inside.
std::optional<double> segment_polygon_entry(const Vec2& p0, const Vec2& p1,
                                            const Polygon& poly);

// Earliest s in (0, 1] where the segment leaves the rectangle.
std::optional<double> segment_rect_exit(const Vec2& p0, const Vec2& p1, const Rect& r);

}  // namespace autolap
