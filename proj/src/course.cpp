#include "autolap/course.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "autolap/nets.hpp"
#include "autolap/replay.hpp"
#include "autolap/rng.hpp"

namespace autolap {

namespace {

double point_segment_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.norm_sq();
    if (len2 <= 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

}  // namespace

Vec2 ReferencePath::at(double s) const {
    s = std::fmod(s, total);
    if (s < 0) s += total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const size_t i = it == cum.begin() ? 0 : (size_t)(it - cum.begin()) - 1;
    const Vec2& a = points[i];
    const Vec2& b = points[(i + 1) % points.size()];
    const double seg = (i + 1 < cum.size() ? cum[i + 1] : total) - cum[i];
    const double t = seg > 0 ? (s - cum[i]) / seg : 0.0;
    return a + (b - a) * t;
}

double ReferencePath::heading_at(double s) const {
    const Vec2 d = at(s + 0.05) - at(s - 0.05);
    return std::atan2(d.y, d.x);
}

double ReferencePath::nearest_s(const Vec2& p) const {
    double best = 1e18, best_s = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        const Vec2& a = points[i];
        const Vec2& b = points[(i + 1) % points.size()];
        const Vec2 ab = b - a;
        const double len2 = ab.norm_sq();
        const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d = (p - (a + ab * t)).norm();
        if (d < best) {
            best = d;
            const double seg = (i + 1 < cum.size() ? cum[i + 1] : total) - cum[i];
            best_s = cum[i] + t * seg;
        }
    }
    return best_s;
}

double ReferencePath::distance_to(const Vec2& p) const {
    double best = 1e18;
    for (size_t i = 0; i < points.size(); ++i)
        best = std::min(best,
                        point_segment_dist(p, points[i], points[(i + 1) % points.size()]));
    return best;
}

ReferencePath resample_closed(const std::vector<Vec2>& waypoints, double spacing) {
    // perimeter of the closed waypoint polygon
    double perim = 0.0;
    for (size_t i = 0; i < waypoints.size(); ++i)
        perim += (waypoints[(i + 1) % waypoints.size()] - waypoints[i]).norm();

    ReferencePath path;
    double carried = 0.0;
    for (size_t i = 0; i < waypoints.size(); ++i) {
        const Vec2& a = waypoints[i];
        const Vec2& b = waypoints[(i + 1) % waypoints.size()];
        const double seg = (b - a).norm();
        double s = carried;
        while (s < seg) {
            path.points.push_back(a + (b - a) * (s / seg));
            s += spacing;
        }
        carried = s - seg;
    }
    path.cum.resize(path.points.size());
    double acc = 0.0;
    for (size_t i = 0; i < path.points.size(); ++i) {
        path.cum[i] = acc;
        acc += (path.points[(i + 1) % path.points.size()] - path.points[i]).norm();
    }
    path.total = acc;
    return path;
}

CourseMap generate_course(uint64_t course_seed, double corridor_half_width) {
    // Counter-clockwise loop: bottom straight, right-hand sweep, top straight
    // broken by a flat-topped chicane, left-side return to the start line.
    // No two non-adjacent corridor sections run close to each other: a stale
    // goal can then never reward driving into a wall for long, because the
    // detour around any wall between the car and its checkpoint stays short.
    std::vector<Vec2> wp = {
        {0.0, 0.0},    {4.0, 0.0},    {8.0, 0.0},    {12.5, 0.0},
        {15.3, 0.7},   {16.9, 2.6},   {17.4, 5.2},   {16.9, 7.9},
        {15.4, 10.3},  {13.6, 12.4},  {12.2, 13.6},
        // chicane on the top straight, flat peaks so the centerline cannot be
        // short-cut by a straight chord
        {11.0, 13.6},  {10.4, 16.0},  {8.4, 16.0},   {7.4, 11.2},
        {5.4, 11.2},   {4.8, 13.6},   {3.6, 13.6},
        {1.2, 13.0},   {-0.4, 11.4},  {-1.3, 9.2},   {-1.7, 6.6},
        {-1.5, 3.6},   {-0.9, 1.2},
    };

    Rng jit = Rng::substream(course_seed, "course-jitter");
    for (auto& p : wp) {
        p.x += jit.uniform(-0.25, 0.25);
        p.y += jit.uniform(-0.25, 0.25);
    }
    // re-anchor so the start line sits exactly at the origin
    const Vec2 shift = wp[0];
    for (auto& p : wp) p = p - shift;

    CourseMap cm;
    cm.path = resample_closed(wp, 0.25);
    cm.start_pos = cm.path.points[0];
    cm.start_heading = cm.path.heading_at(0.0);

    Vec2 lo{1e18, 1e18}, hi{-1e18, -1e18};
    for (const auto& p : cm.path.points) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    const double margin = corridor_half_width + 1.0;
    const double cs = 0.5;
    WorldMap& map = cm.map;
    map.cell_size = cs;
    map.bounds.lo = {std::floor((lo.x - margin) / cs) * cs,
                     std::floor((lo.y - margin) / cs) * cs};
    map.bounds.hi = {std::ceil((hi.x + margin) / cs) * cs,
                     std::ceil((hi.y + margin) / cs) * cs};
    map.grid_w = (int)std::lround(map.bounds.width() / cs);
    map.grid_h = (int)std::lround(map.bounds.height() / cs);
    map.terrain.assign((size_t)map.grid_w * map.grid_h, TerrainCell{});
    map.map_id = (1ull << 63) | course_seed;  // disjoint from practice-map ids

    // everything farther than the corridor half-width from the centerline
    // becomes wall; blocked cells are merged into row runs, then runs with
    // identical spans into multi-row boxes
    std::vector<uint8_t> blocked((size_t)map.grid_w * map.grid_h, 0);
    for (int j = 0; j < map.grid_h; ++j)
        for (int i = 0; i < map.grid_w; ++i) {
            const Vec2 c{map.bounds.lo.x + (i + 0.5) * cs,
                         map.bounds.lo.y + (j + 0.5) * cs};
            if (cm.path.distance_to(c) > corridor_half_width)
                blocked[(size_t)j * map.grid_w + i] = 1;
        }

    struct Run {
        int x0, x1, y0, y1;  // cell index ranges, inclusive
        bool carried = false;
    };
    std::vector<Run> open, done;
    for (int j = 0; j < map.grid_h; ++j) {
        std::vector<Run> row;
        for (int i = 0; i < map.grid_w;) {
            if (!blocked[(size_t)j * map.grid_w + i]) {
                ++i;
                continue;
            }
            int i0 = i;
            while (i < map.grid_w && blocked[(size_t)j * map.grid_w + i]) ++i;
            row.push_back({i0, i - 1, j, j, false});
        }
        std::vector<Run> next_open;
        for (auto& r : row) {
            bool merged = false;
            for (auto& o : open)
                if (!o.carried && o.x0 == r.x0 && o.x1 == r.x1) {
                    o.carried = true;
                    next_open.push_back({o.x0, o.x1, o.y0, j, false});
                    merged = true;
                    break;
                }
            if (!merged) next_open.push_back(r);
        }
        for (const auto& o : open)
            if (!o.carried) done.push_back(o);
        open = std::move(next_open);
    }
    for (const auto& o : open) done.push_back(o);
    for (const auto& r : done)
        map.obstacles.push_back(
            make_box({map.bounds.lo.x + r.x0 * cs, map.bounds.lo.y + r.y0 * cs},
                     {map.bounds.lo.x + (r.x1 + 1) * cs, map.bounds.lo.y + (r.y1 + 1) * cs}));
    return cm;
}

Action pursuit_action(const CarState& car, const ReferencePath& path,
                      const PursuitParams& pp, const DynamicsParams& dp,
                      const ActionRanges& ranges, const Action& prev) {
    const double s = path.nearest_s(car.position);
    const Vec2 target = path.at(s + pp.lookahead);
    const Vec2 body = (target - car.position).to_body(car.heading);
    const double phi = std::atan2(body.y, body.x);
    const double dist = std::max(0.3, body.norm());
    const double curvature = 2.0 * std::sin(phi) / dist;
    double steer = std::atan(curvature * dp.wheelbase);

    // slow down if the path bends within the scan window ahead
    const double h0 = path.heading_at(s + pp.lookahead);
    const double h1 = path.heading_at(s + pp.lookahead + pp.corner_lookahead);
    const bool bend = std::abs(wrap_angle(h1 - h0)) > pp.corner_threshold ||
                      std::abs(phi) > pp.corner_threshold;
    double v = bend ? pp.v_corner : pp.v_straight;

    Action a;
    a.steering = std::clamp(steer, prev.steering - pp.slew_steer,
                            prev.steering + pp.slew_steer);
    a.steering = std::clamp(a.steering, -ranges.steer_max, ranges.steer_max);
    a.velocity_target =
        std::clamp(v, prev.velocity_target - pp.slew_v, prev.velocity_target + pp.slew_v);
    a.velocity_target = std::clamp(a.velocity_target, ranges.v_min, ranges.v_max);
    return a;
}

namespace {

struct DriveResult {
    std::vector<CarState> states;        // N+1 poses, pre- and post-step
    std::vector<Action> actions;         // N raw actions
    std::vector<EgoRaster> rasters;      // N observation stacks (pre-step)
    double lap_arc_index = -1;           // first step index with full-loop progress
    int collisions = 0;
};

DriveResult drive_loop(const CourseMap& cm, const PursuitParams& pp,
                       const DynamicsParams& dp, const ActionRanges& ranges,
                       const RasterParams* rp, double extra_arc, int max_steps) {
    DriveResult out;
    CarState car;
    car.position = cm.start_pos;
    car.heading = cm.start_heading;
    EgoRaster raster;
    if (rp) raster = initial_raster(car, cm.map, *rp);
    Action prev{ranges.v_min, 0.0};
    double s_prev = cm.path.nearest_s(car.position);
    double progress = 0.0;

    out.states.push_back(car);
    for (int step = 0; step < max_steps; ++step) {
        const Action act = pursuit_action(car, cm.path, pp, dp, ranges, prev);
        if (rp) out.rasters.push_back(raster);
        out.actions.push_back(act);

        const StepResult res = step_dynamics(car, act, cm.map, dp);
        car = res.state;
        if (rp) push_frame(raster, render_frame(car, cm.map, *rp));
        out.states.push_back(car);
        if (res.collided) ++out.collisions;
        prev = act;

        const double s_now = cm.path.nearest_s(car.position);
        double ds = s_now - s_prev;
        if (ds < -cm.path.total / 2) ds += cm.path.total;
        if (ds > cm.path.total / 2) ds -= cm.path.total;
        progress += ds;
        s_prev = s_now;
        if (out.lap_arc_index < 0 && progress >= cm.path.total)
            out.lap_arc_index = step + 1;  // pose index that closed the loop
        if (out.lap_arc_index >= 0 && progress >= cm.path.total + extra_arc) break;
    }
    return out;
}

}  // namespace

DemoLap record_demo_lap(const CourseMap& cm, int n_checkpoints, double reach_radius,
                        const RasterParams& rp, const DynamicsParams& dp,
                        const ActionRanges& ranges) {
    PursuitParams pp;  // defaults stay under 1.5 m/s
    DriveResult dr = drive_loop(cm, pp, dp, ranges, &rp, 2.0, 3000);
    if (dr.collisions > 0 || dr.lap_arc_index < 0) {
        DemoError err;
        err.message = dr.collisions > 0
                          ? "demonstration lap collided"
                          : "demonstration lap did not close the loop";
        for (const auto& s : dr.states) err.trajectory.push_back(s.position);
        throw err;
    }

    const size_t lap_end = (size_t)dr.lap_arc_index;
    std::vector<double> driven(dr.states.size(), 0.0);
    for (size_t i = 1; i < dr.states.size(); ++i)
        driven[i] = driven[i - 1] + (dr.states[i].position - dr.states[i - 1].position).norm();

    DemoLap demo;
    demo.driven_length = driven[lap_end];
    demo.collisions = 0;

    // checkpoints: arc-length-uniform over the driven lap; the last one is the
    // start/finish pose itself
    demo.course.reach_radius = reach_radius;
    for (int k = 1; k <= n_checkpoints; ++k) {
        if (k == n_checkpoints) {
            demo.course.checkpoints.push_back(dr.states[0].position);
            break;
        }
        const double target = demo.driven_length * k / n_checkpoints;
        size_t best = 0;
        double bd = 1e18;
        for (size_t i = 0; i <= lap_end; ++i)
            if (std::abs(driven[i] - target) < bd) {
                bd = std::abs(driven[i] - target);
                best = i;
            }
        demo.course.checkpoints.push_back(dr.states[best].position);
    }

    // replay the recorded poses through the checkpoint logic to attach goals
    // and rewards exactly as the online loop would see them
    PracticeState ps;
    const RewardParams rwp;
    const size_t n_steps = dr.actions.size();
    demo.traj.map_seed = cm.map.map_id;
    demo.traj.map_id = "course-" + std::to_string(cm.map.map_id & ~(1ull << 63));
    for (size_t i = 0; i < n_steps; ++i) {
        const CarState& s = dr.states[i];
        const CarState& s2 = dr.states[i + 1];
        const int g = ps.active_checkpoint_index;
        const RelativeGoal rg = relative_goal(s, demo.course.checkpoints[(size_t)g]);

        PriorStep stp;
        stp.pixels = dr.rasters[i].frames;
        stp.proprio = make_proprio(s);
        stp.prev_action = i == 0 ? std::array<float, 2>{-1.0f, 0.0f}
                                 : normalize_action(dr.actions[i - 1], ranges);
        stp.action = normalize_action(dr.actions[i], ranges);
        stp.position = s.position;
        stp.heading = s.heading;
        stp.speed = s.speed;
        stp.lateral_accel = s.lateral_accel;
        demo.traj.steps.push_back(std::move(stp));
        demo.goals.push_back({(float)rg.unit_dir.x, (float)rg.unit_dir.y,
                              (float)rg.distance});

        const double now = (double)(i + 1) * dp.dt;
        const CheckpointEvent ev =
            advance_checkpoint(ps, s2.position, demo.course, now);
        if (ev.lap_completed && demo.lap_time == 0.0) demo.lap_time = ev.lap_time;
        const Vec2 vel = Vec2{std::cos(s2.heading), std::sin(s2.heading)} * s2.speed;
        const Vec2 dir_world =
            relative_goal(s2, demo.course.checkpoints[(size_t)g]).unit_dir.rotated(s2.heading);
        demo.rewards.push_back(
            (float)compute_reward(vel, dir_world, s2.lateral_accel, false, rwp));
    }
    if (demo.lap_time == 0.0) {
        DemoError err;
        err.message = "demonstration lap never hit the final checkpoint";
        for (const auto& s : dr.states) err.trajectory.push_back(s.position);
        throw err;
    }
    return demo;
}

void save_demo(const std::string& dir, const CourseMap& cm, const DemoLap& demo) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_map(dir + "/map.flmap", cm.map);

    nlohmann::json j;
    j["version"] = 1;
    j["course_seed"] = cm.map.map_id & ~(1ull << 63);
    j["reach_radius"] = demo.course.reach_radius;
    j["lap_time"] = demo.lap_time;
    j["driven_length"] = demo.driven_length;
    j["checkpoints"] = nlohmann::json::array();
    for (const auto& c : demo.course.checkpoints)
        j["checkpoints"].push_back({c.x, c.y});
    std::ofstream(dir + "/course.json") << j.dump(2) << "\n";

    std::vector<TransitionRecord> recs;
    const size_t flen = demo.traj.steps.empty() ? 0 : demo.traj.steps[0].pixels.size();
    for (size_t i = 0; i < demo.traj.steps.size(); ++i) {
        const auto& s = demo.traj.steps[i];
        TransitionRecord t;
        t.features = s.pixels;
        t.proprio = s.proprio;
        t.goal = demo.goals[i];
        t.prev_action = s.prev_action;
        t.action = s.action;
        t.reward = i < demo.rewards.size() ? demo.rewards[i] : 0.0f;
        t.done = 0;
        t.step = i;
        recs.push_back(std::move(t));
    }
    save_transitions(dir + "/traj0.bin", recs, flen);
    save_poses(dir + "/traj0.pose", demo.traj);
}

LoadedDemo load_demo(const std::string& dir) {
    std::ifstream in(dir + "/course.json");
    if (!in) throw std::runtime_error("missing course.json in " + dir);
    nlohmann::json j;
    in >> j;

    LoadedDemo out;
    out.cm = generate_course(j["course_seed"].get<uint64_t>());
    out.demo.course.reach_radius = j["reach_radius"];
    for (const auto& c : j["checkpoints"])
        out.demo.course.checkpoints.push_back({c[0].get<double>(), c[1].get<double>()});
    out.demo.lap_time = j["lap_time"];
    out.demo.driven_length = j["driven_length"];

    size_t flen = 0;
    auto recs = load_transitions(dir + "/traj0.bin", &flen);
    out.demo.traj.map_seed = out.cm.map.map_id;
    out.demo.traj.map_id = "course-" + std::to_string(j["course_seed"].get<uint64_t>());
    out.demo.traj.steps.resize(recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
        out.demo.traj.steps[i].pixels = std::move(recs[i].features);
        out.demo.traj.steps[i].proprio = recs[i].proprio;
        out.demo.traj.steps[i].prev_action = recs[i].prev_action;
        out.demo.traj.steps[i].action = recs[i].action;
        out.demo.goals.push_back(recs[i].goal);
        out.demo.rewards.push_back(recs[i].reward);
    }
    load_poses(dir + "/traj0.pose", out.demo.traj);
    return out;
}

double oracle_lap_time(const CourseMap& cm, const DynamicsParams& dp,
                       const ActionRanges& ranges) {
    PursuitParams pp;
    pp.lookahead = 1.8;
    pp.v_straight = 3.4;
    pp.v_corner = 1.6;
    pp.corner_lookahead = 3.2;
    pp.slew_v = 0.5;
    pp.slew_steer = 0.15;
    DriveResult dr = drive_loop(cm, pp, dp, ranges, nullptr, 0.0, 3000);
    if (dr.lap_arc_index < 0) return -1.0;
    return dr.lap_arc_index * dp.dt;
}

}  // namespace autolap
