#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autolap/geometry.hpp"

namespace autolap {

struct CarState {
    Vec2 position;
    double heading = 0.0;        // wrapped to (-pi, pi]
    double speed = 0.0;          // longitudinal m/s, >= 0 outside recovery
    double yaw_rate = 0.0;       // rad/s
    double lateral_accel = 0.0;  // m/s^2, signed
    Vec2 linear_accel;           // body frame m/s^2
};

struct Action {
    double velocity_target = 0.0;  // m/s
    double steering = 0.0;         // rad
};

struct ActionRanges {
    double v_min = 0.5, v_max = 3.5;
    double steer_max = 0.5;
};

struct TerrainCell {
    float speed_factor = 1.0f;  // (0, 1], 1 on nominal ground
    float drag = 0.0f;          // >= 0
};

struct WorldMap {
    uint64_t map_id = 0;
    Rect bounds;
    std::vector<Polygon> obstacles;
    double cell_size = 1.0;
    int grid_w = 0, grid_h = 0;
    std::vector<TerrainCell> terrain;  // row-major, y-major outer

    const TerrainCell& cell_at(const Vec2& p) const;
    bool inside_obstacle(const Vec2& p) const;
    // inside bounds and outside every obstacle polygon
    bool in_free_space(const Vec2& p) const;
};

struct DynamicsParams {
    double dt = 0.1;             // s
    double wheelbase = 0.33;     // m
    double speed_tau = 0.4;      // s, first-order lag time constant
    double accel_threshold = 6.0;  // A; collisions spike lateral_accel to 5*A
};

struct StepResult {
    CarState state;
    bool collided = false;
};

// Kinematic bicycle with exact first-order speed relaxation toward
// velocity_target * terrain speed-factor. Collisions clamp the position to
// the contact point, zero the speed, and spike lateral_accel to 5*A;
// obstacle-free lateral accel is capped at 0.9*A so only contact crosses
// the threshold. Throws on non-finite inputs.
StepResult step_dynamics(const CarState& state, const Action& action,
                         const WorldMap& map, const DynamicsParams& p);

struct RasterParams {
    int width = 64;
    int height = 64;
    double fov = 2.0943951023931953;  // 120 degrees
    double max_range = 8.0;
};

struct EgoRaster {
    int width = 0, height = 0;
    // 3 frames oldest-first, each height*width floats in [0,1]
    std::vector<float> frames;

    size_t frame_len() const { return (size_t)width * height; }
    float* frame(int i) { return frames.data() + (size_t)i * frame_len(); }
    const float* frame(int i) const { return frames.data() + (size_t)i * frame_len(); }
};

// One rendered frame: column j carries the normalized nearest-hit distance of
// ray j (1 = nothing within range), scaled by the minimum terrain speed-factor
// sampled along the ray, replicated down all rows.
std::vector<float> render_frame(const CarState& state, const WorldMap& map,
                                const RasterParams& rp);
// Pushes a fresh frame, dropping the oldest.
void push_frame(EgoRaster& raster, std::vector<float> frame);
// All three frames set to the first rendering.
EgoRaster initial_raster(const CarState& state, const WorldMap& map,
                         const RasterParams& rp);

struct RelativeGoal {
    Vec2 unit_dir;  // body frame; (1,0) when distance == 0
    double distance = 0.0;
};
RelativeGoal relative_goal(const CarState& state, const Vec2& checkpoint);

// Versioned text format, header "FLMAP v1".
std::string map_to_text(const WorldMap& map);
WorldMap map_from_text(const std::string& text);  // throws on malformed input
void save_map(const std::string& path, const WorldMap& map);
WorldMap load_map(const std::string& path);

// Random practice arena: scattered convex boxes plus low-speed-factor mud
// patches inside a square of the given half-extent. Start region near the
// center is kept clear.
WorldMap generate_scatter_map(uint64_t seed, double half_extent = 15.0,
                              int n_obstacles = 12, int n_mud = 3);

// Coarse grid connectivity between two free-space points (4-neighborhood on
// terrain cells whose centers are free).
bool path_exists(const WorldMap& map, const Vec2& from, const Vec2& to);

}  // namespace autolap
