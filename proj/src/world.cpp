#include "autolap/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "autolap/rng.hpp"

namespace autolap {

static const TerrainCell kNominal{};

const TerrainCell& WorldMap::cell_at(const Vec2& p) const {
    if (terrain.empty()) return kNominal;
    int gx = (int)std::floor((p.x - bounds.lo.x) / cell_size);
    int gy = (int)std::floor((p.y - bounds.lo.y) / cell_size);
    gx = std::clamp(gx, 0, grid_w - 1);
    gy = std::clamp(gy, 0, grid_h - 1);
    return terrain[(size_t)gy * grid_w + gx];
}

bool WorldMap::inside_obstacle(const Vec2& p) const {
    for (const auto& poly : obstacles)
        if (poly.contains(p)) return true;
    return false;
}

bool WorldMap::in_free_space(const Vec2& p) const {
    return bounds.contains(p) && !inside_obstacle(p);
}

StepResult step_dynamics(const CarState& state, const Action& action,
                         const WorldMap& map, const DynamicsParams& p) {
    const bool finite = std::isfinite(state.position.x) && std::isfinite(state.position.y) &&
                        std::isfinite(state.heading) && std::isfinite(state.speed) &&
                        std::isfinite(action.velocity_target) && std::isfinite(action.steering);
    if (!finite || p.dt <= 0.0) throw std::invalid_argument("step_dynamics: bad input");

    const TerrainCell& cell = map.cell_at(state.position);
    const double target = action.velocity_target * cell.speed_factor;

    // exact relaxation of dv/dt = (target - v)/tau, then multiplicative drag
    const double relax = 1.0 - std::exp(-p.dt / p.speed_tau);
    double v_new = state.speed + (target - state.speed) * relax;
    v_new *= std::exp(-(double)cell.drag * p.dt);

    const double yaw_rate = state.speed / p.wheelbase * std::tan(action.steering);
    const double heading_new = wrap_angle(state.heading + yaw_rate * p.dt);

    const Vec2 dir{std::cos(heading_new), std::sin(heading_new)};
    const Vec2 p0 = state.position;
    Vec2 p1 = p0 + dir * (v_new * p.dt);

    // earliest contact along the motion segment: obstacles or the outer wall
    double s_hit = 2.0;
    for (const auto& poly : map.obstacles) {
        auto s = segment_polygon_entry(p0, p1, poly);
        if (s && *s < s_hit) s_hit = *s;
    }
    if (auto s = segment_rect_exit(p0, p1, map.bounds); s && *s < s_hit) s_hit = *s;
    const bool collided = s_hit <= 1.0;

    CarState out;
    out.heading = heading_new;
    out.yaw_rate = yaw_rate;

    const double a_lat_raw = v_new * v_new * std::tan(action.steering) / p.wheelbase;
    const double cap = 0.9 * p.accel_threshold;
    out.lateral_accel = std::clamp(a_lat_raw, -cap, cap);

    if (collided) {
        // clamp to contact, nudged back so the next step starts in free space
        const double s_back = std::max(0.0, s_hit - 1e-6 / std::max(1e-9, (p1 - p0).norm()));
        out.position = p0 + (p1 - p0) * s_back;
        out.speed = 0.0;
        out.lateral_accel = 5.0 * p.accel_threshold;
        out.linear_accel = Vec2{-state.speed / p.dt, 0.0};
    } else {
        out.position = p1;
        out.speed = v_new;
        out.linear_accel = Vec2{(v_new - state.speed) / p.dt, out.lateral_accel};
    }
    return {out, collided};
}

std::vector<float> render_frame(const CarState& state, const WorldMap& map,
                                const RasterParams& rp) {
    std::vector<float> col(rp.width, 1.0f);
    for (int j = 0; j < rp.width; ++j) {
        const double ang =
            state.heading + rp.fov / 2.0 - rp.fov * ((double)j + 0.5) / rp.width;
        const Vec2 dir{std::cos(ang), std::sin(ang)};

        double hit = rp.max_range;
        for (const auto& poly : map.obstacles) {
            auto t = ray_polygon_hit(state.position, dir, poly, hit);
            if (t && *t < hit) hit = *t;
        }
        // outer wall: the exit point of a long ray through the bounds
        auto exit = segment_rect_exit(state.position, state.position + dir * rp.max_range,
                                      map.bounds);
        if (exit) hit = std::min(hit, *exit * rp.max_range);

        // darken by the worst terrain under the ray up to the hit point
        float factor = 1.0f;
        const double step = std::max(0.25 * map.cell_size, 1e-3);
        for (double d = step * 0.5; d < hit; d += step)
            factor = std::min(factor, map.cell_at(state.position + dir * d).speed_factor);

        col[j] = (float)(hit / rp.max_range) * factor;
    }
    std::vector<float> frame((size_t)rp.height * rp.width);
    for (int i = 0; i < rp.height; ++i)
        std::copy(col.begin(), col.end(), frame.begin() + (size_t)i * rp.width);
    return frame;
}

void push_frame(EgoRaster& raster, std::vector<float> frame) {
    const size_t fl = raster.frame_len();
    std::copy(raster.frames.begin() + fl, raster.frames.begin() + 3 * fl,
              raster.frames.begin());
    std::copy(frame.begin(), frame.end(), raster.frames.begin() + 2 * fl);
}

EgoRaster initial_raster(const CarState& state, const WorldMap& map,
                         const RasterParams& rp) {
    EgoRaster r;
    r.width = rp.width;
    r.height = rp.height;
    r.frames.resize(3 * r.frame_len());
    auto f = render_frame(state, map, rp);
    for (int i = 0; i < 3; ++i)
        std::copy(f.begin(), f.end(), r.frames.begin() + (size_t)i * r.frame_len());
    return r;
}

RelativeGoal relative_goal(const CarState& state, const Vec2& checkpoint) {
    const Vec2 d = checkpoint - state.position;
    const double dist = d.norm();
    if (dist <= 0.0) return {{1.0, 0.0}, 0.0};
    return {d.to_body(state.heading) * (1.0 / dist), dist};
}

// ------------------------------------------------------------------ FLMAP ---

std::string map_to_text(const WorldMap& map) {
    std::ostringstream os;
    os.precision(17);
    os << "FLMAP v1\n";
    os << "map_id " << map.map_id << "\n";
    os << "bounds " << map.bounds.lo.x << " " << map.bounds.lo.y << " " << map.bounds.hi.x
       << " " << map.bounds.hi.y << "\n";
    os << "cell_size " << map.cell_size << "\n";
    os << "grid " << map.grid_w << " " << map.grid_h << "\n";
    os << "speed_factors";
    for (const auto& c : map.terrain) os << " " << c.speed_factor;
    os << "\ndrag_factors";
    for (const auto& c : map.terrain) os << " " << c.drag;
    os << "\nobstacles " << map.obstacles.size() << "\n";
    for (const auto& poly : map.obstacles) {
        os << "poly " << poly.pts.size();
        for (const auto& v : poly.pts) os << " " << v.x << " " << v.y;
        os << "\n";
    }
    return os.str();
}

WorldMap map_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "FLMAP v1")
        throw std::runtime_error("map: bad header");
    WorldMap m;
    auto expect = [&](std::istream& s, const char* key) {
        std::string k;
        s >> k;
        if (k != key) throw std::runtime_error(std::string("map: expected ") + key);
    };
    expect(is, "map_id");
    is >> m.map_id;
    expect(is, "bounds");
    is >> m.bounds.lo.x >> m.bounds.lo.y >> m.bounds.hi.x >> m.bounds.hi.y;
    expect(is, "cell_size");
    is >> m.cell_size;
    expect(is, "grid");
    is >> m.grid_w >> m.grid_h;
    if (m.grid_w < 0 || m.grid_h < 0 || (size_t)m.grid_w * m.grid_h > (64u << 20))
        throw std::runtime_error("map: bad grid");
    m.terrain.resize((size_t)m.grid_w * m.grid_h);
    expect(is, "speed_factors");
    for (auto& c : m.terrain) is >> c.speed_factor;
    expect(is, "drag_factors");
    for (auto& c : m.terrain) is >> c.drag;
    expect(is, "obstacles");
    size_t n;
    is >> n;
    for (size_t i = 0; i < n; ++i) {
        expect(is, "poly");
        size_t k;
        is >> k;
        Polygon poly;
        poly.pts.resize(k);
        for (auto& v : poly.pts) is >> v.x >> v.y;
        m.obstacles.push_back(std::move(poly));
    }
    if (!is) throw std::runtime_error("map: truncated");
    return m;
}

void save_map(const std::string& path, const WorldMap& map) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << map_to_text(map);
}

WorldMap load_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return map_from_text(ss.str());
}

// -------------------------------------------------------------- generator ---

WorldMap generate_scatter_map(uint64_t seed, double half_extent, int n_obstacles,
                              int n_mud) {
    Rng rng = Rng::substream(seed, "scatter-map");
    WorldMap m;
    m.map_id = seed;
    m.bounds = {{-half_extent, -half_extent}, {half_extent, half_extent}};
    m.cell_size = 1.0;
    m.grid_w = (int)std::ceil(m.bounds.width() / m.cell_size);
    m.grid_h = (int)std::ceil(m.bounds.height() / m.cell_size);
    m.terrain.assign((size_t)m.grid_w * m.grid_h, TerrainCell{});

    const double clear_radius = 3.0;  // keep the spawn area open
    for (int i = 0; i < n_obstacles; ++i) {
        for (int attempt = 0; attempt < 50; ++attempt) {
            const Vec2 c{rng.uniform(m.bounds.lo.x + 2, m.bounds.hi.x - 2),
                         rng.uniform(m.bounds.lo.y + 2, m.bounds.hi.y - 2)};
            if (c.norm() < clear_radius + 2.0) continue;
            const double w = rng.uniform(0.6, 2.5), h = rng.uniform(0.6, 2.5);
            m.obstacles.push_back(make_box({c.x - w / 2, c.y - h / 2},
                                           {c.x + w / 2, c.y + h / 2}));
            break;
        }
    }
    for (int i = 0; i < n_mud; ++i) {
        const Vec2 c{rng.uniform(m.bounds.lo.x + 3, m.bounds.hi.x - 3),
                     rng.uniform(m.bounds.lo.y + 3, m.bounds.hi.y - 3)};
        const double r = rng.uniform(1.5, 3.5);
        const float factor = (float)rng.uniform(0.25, 0.6);
        for (int gy = 0; gy < m.grid_h; ++gy)
            for (int gx = 0; gx < m.grid_w; ++gx) {
                const Vec2 p{m.bounds.lo.x + (gx + 0.5) * m.cell_size,
                             m.bounds.lo.y + (gy + 0.5) * m.cell_size};
                if ((p - c).norm() < r) {
                    auto& cell = m.terrain[(size_t)gy * m.grid_w + gx];
                    cell.speed_factor = std::min(cell.speed_factor, factor);
                    cell.drag = std::max(cell.drag, 0.3f);
                }
            }
    }
    return m;
}

bool path_exists(const WorldMap& map, const Vec2& from, const Vec2& to) {
    if (!map.in_free_space(from) || !map.in_free_space(to)) return false;
    const int w = map.grid_w, h = map.grid_h;
    if (w <= 0 || h <= 0) return true;
    auto cell_of = [&](const Vec2& p) {
        int gx = std::clamp((int)std::floor((p.x - map.bounds.lo.x) / map.cell_size), 0, w - 1);
        int gy = std::clamp((int)std::floor((p.y - map.bounds.lo.y) / map.cell_size), 0, h - 1);
        return std::pair{gx, gy};
    };
    auto free_cell = [&](int gx, int gy) {
        const Vec2 c{map.bounds.lo.x + (gx + 0.5) * map.cell_size,
                     map.bounds.lo.y + (gy + 0.5) * map.cell_size};
        return !map.inside_obstacle(c);
    };
    auto [sx, sy] = cell_of(from);
    auto [tx, ty] = cell_of(to);
    std::vector<uint8_t> seen((size_t)w * h, 0);
    std::deque<std::pair<int, int>> q{{sx, sy}};
    seen[(size_t)sy * w + sx] = 1;
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        if (x == tx && y == ty) return true;
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (seen[(size_t)ny * w + nx] || !free_cell(nx, ny)) continue;
            seen[(size_t)ny * w + nx] = 1;
            q.emplace_back(nx, ny);
        }
    }
    return false;
}

}  // namespace autolap
