#include "autolap/geometry.hpp"

#include <algorithm>

namespace autolap {

std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir,
                                      const Vec2& a, const Vec2& b) {
    // Solve origin + t*dir = a + u*(b - a), t >= 0, u in [0, 1].
    Vec2 seg = b - a;
    double denom = dir.cross(seg);
    if (std::abs(denom) < 1e-12) return std::nullopt;  // parallel
    Vec2 diff = a - origin;
    double t = diff.cross(seg) / denom;
    double u = diff.cross(dir) / denom;
    if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return t;
}

std::optional<double> ray_polygon_hit(const Vec2& origin, const Vec2& dir,
                                      const Polygon& poly, double max_range) {
    double best = max_range;
    bool hit = false;
    size_t n = poly.pts.size();
    for (size_t i = 0; i < n; ++i) {
        auto t = ray_segment_hit(origin, dir, poly.pts[i], poly.pts[(i + 1) % n]);
        if (t && *t <= best) {
            best = *t;
            hit = true;
        }
    }
    if (!hit) return std::nullopt;
    return best;
}

std::optional<double> segment_polygon_entry(const Vec2& p0, const Vec2& p1,
                                            const Polygon& poly) {
    if (poly.contains(p0)) return 0.0;
    Vec2 d = p1 - p0;
    double len = d.norm();
    if (len < 1e-12) return std::nullopt;
    double best = 2.0;
    size_t n = poly.pts.size();
    for (size_t i = 0; i < n; ++i) {
        auto t = ray_segment_hit(p0, d, poly.pts[i], poly.pts[(i + 1) % n]);
        if (t && *t <= 1.0 && *t < best) best = *t;
    }
    if (best > 1.0) return std::nullopt;
    return best;
}

std::optional<double> segment_rect_exit(const Vec2& p0, const Vec2& p1, const Rect& r) {
    if (!r.contains(p0)) return 0.0;
    if (r.contains(p1)) return std::nullopt;
    // Clip against each wall, keep the earliest crossing.
    Vec2 d = p1 - p0;
    double best = 2.0;
    auto consider = [&](double t) {
        if (t > 0.0 && t <= 1.0 && t < best) best = t;
    };
    if (std::abs(d.x) > 1e-12) {
        consider((r.lo.x - p0.x) / d.x);
        consider((r.hi.x - p0.x) / d.x);
    }
    if (std::abs(d.y) > 1e-12) {
        consider((r.lo.y - p0.y) / d.y);
        consider((r.hi.y - p0.y) / d.y);
    }
    if (best > 1.0) return std::nullopt;
    return best;
}

}  // namespace autolap
