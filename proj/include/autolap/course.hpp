#pragma once

#include <string>
#include <vector>

#include "autolap/fsm.hpp"
#include "autolap/iql.hpp"
#include "autolap/world.hpp"

namespace autolap {

// Closed centerline resampled to a dense polyline, addressed by arc length.
struct ReferencePath {
    std::vector<Vec2> points;
    std::vector<double> cum;  // arc length at each point, cum[0] = 0
    double total = 0.0;

    Vec2 at(double s) const;          // wraps around the loop
    double heading_at(double s) const;
    double nearest_s(const Vec2& p) const;
    double distance_to(const Vec2& p) const;
};

ReferencePath resample_closed(const std::vector<Vec2>& waypoints, double spacing);

// A drivable loop: corridor free space around the centerline, everything
// else filled with axis-aligned wall boxes. Course map ids live in the
// high-bit namespace so they can never collide with prior-dataset maps.
struct CourseMap {
    WorldMap map;
    ReferencePath path;
    Vec2 start_pos;
    double start_heading = 0.0;
};

// ~60 m loop with one hairpin and one chicane; the seed jitters the corner
// geometry without changing topology.
CourseMap generate_course(uint64_t course_seed, double corridor_half_width = 1.5);

// Pure-pursuit follower over a reference path with slew-limited commands.
struct PursuitParams {
    double lookahead = 1.2;      // m along the path
    double v_straight = 1.4;     // m/s command on straights
    double v_corner = 0.8;       // m/s command in bends
    double corner_lookahead = 2.5;  // m of path scanned for upcoming curvature
    double corner_threshold = 0.35;  // rad of heading change that means "bend"
    double slew_v = 0.28;        // max command change per step, m/s
    double slew_steer = 0.09;    // rad
};

Action pursuit_action(const CarState& car, const ReferencePath& path,
                      const PursuitParams& pp, const DynamicsParams& dp,
                      const ActionRanges& ranges, const Action& prev);

// Demonstration lap: scripted slow traversal, checkpoint extraction by
// arc-length-uniform subsampling of the driven path, and rewards recomputed
// against those checkpoints exactly as the online loop would.
struct DemoLap {
    PriorTrajectory traj;   // pixels, poses, normalized actions
    std::vector<std::array<float, 3>> goals;  // per-step body-frame goal
    std::vector<float> rewards;               // per-step, arrival convention
    Course course;
    double lap_time = 0.0;
    double driven_length = 0.0;
    int collisions = 0;
};

struct DemoError {
    std::string message;
    std::vector<Vec2> trajectory;  // diagnostic dump
};

DemoLap record_demo_lap(const CourseMap& cm, int n_checkpoints, double reach_radius,
                        const RasterParams& rp, const DynamicsParams& dp,
                        const ActionRanges& ranges);

// On-disk demo bundle: map, course, trajectory, poses.
void save_demo(const std::string& dir, const CourseMap& cm, const DemoLap& demo);
struct LoadedDemo {
    CourseMap cm;
    DemoLap demo;
};
LoadedDemo load_demo(const std::string& dir);

// Scripted-oracle lap: the same follower pushed to a tuned high speed on the
// ground-truth path; reference denominator for reports.
double oracle_lap_time(const CourseMap& cm, const DynamicsParams& dp,
                       const ActionRanges& ranges);

}  // namespace autolap
