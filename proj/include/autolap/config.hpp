#pragma once

#include <string>

#include "autolap/ekf.hpp"
#include "autolap/fsm.hpp"
#include "autolap/iql.hpp"
#include "autolap/learner.hpp"
#include "autolap/nets.hpp"
#include "autolap/world.hpp"

namespace autolap {

// One declarative text file drives a whole run: flat `key = value` lines,
// `#` comments. Every training hyperparameter is a named key so ablations
// and scaled-down profiles never require code edits.
struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "runs/out";
    uint64_t step_budget = 100000;  // env steps (practicing + recovering)
    bool stop_on_first_lap = false;  // end early once one lap completes (T2F runs)
    uint64_t course_seed = 0;
    int n_checkpoints = 4;
    double reach_radius = 2.0;

    std::string demo_dir;      // demo-lap bundle (map + course + trajectory)
    std::string encoder_file;  // frozen encoder weights
    std::string resume_from;   // learner checkpoint dir

    // ablations
    bool no_demo = false;           // empty demo buffer, all-online batches
    bool no_pretrain = false;       // raw pixels on the wire, encoder learns online
    bool no_pseudo_resets = false;  // blocked states never trigger recovery
    bool state_based = false;       // privileged pose features, no encoder

    std::string link = "loopback";  // or "tcp"
    double link_latency = 0.0;      // seconds, loopback only
    int tcp_port = 0;               // 0 picks a free port
    int flush_every = 10;           // records per transition batch
    size_t robot_buffer_cap = 10000;  // unacked records, drop-oldest beyond
    double heartbeat_every = 1.0;     // seconds
    int telemetry_stride = 1;         // steps between telemetry rows
    uint64_t checkpoint_every = 0;    // env steps; 0 = final only

    // sensor model
    double position_noise = 0.15;  // m per axis
    double wheel_noise = 0.1;      // m/s
    double gyro_noise = 0.01;      // rad/s
    double accel_noise = 0.05;     // m/s^2
    double vel_noise = 0.1;        // m/s per axis, heading-filter measurement
    double pos_filter_alpha = 0.25;  // position belief smoothing
    EkfNoise ekf;

    int eval_laps = 5;
    double eval_lap_timeout = 120.0;  // sim seconds per attempt

    int prior_maps = 20;
    int prior_steps = 1000;
    int iql_updates = 1000;

    NetConfig net;
    LearnerConfig sac;
    IqlConfig iql;
    DynamicsParams dyn;
    RewardParams reward;
    ActionRanges ranges;
    double raster_fov = 2.0943951023931953;
    double raster_max_range = 8.0;

    RasterParams raster() const {
        return {net.raster_w, net.raster_h, raster_fov, raster_max_range};
    }
    // The wire carries frozen features, raw pixels, or privileged state.
    int wire_feature_len() const {
        if (state_based) return net.state_feature_dim;
        if (no_pretrain) return net.frames * net.raster_h * net.raster_w;
        return net.feature_len();
    }
};

// Returns false on an unknown key; throws on an unparsable value.
bool set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical text with every key at its current value.
std::string dump_config(const RunConfig& cfg);

// Defaults overlaid with the file's keys; throws with the offending line.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace autolap
