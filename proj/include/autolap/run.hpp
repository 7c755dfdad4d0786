#pragma once

#include <string>
#include <vector>

#include "autolap/config.hpp"
#include "autolap/course.hpp"
#include "autolap/learner.hpp"

namespace autolap {

struct LapRecord {
    int lap_index = 0;      // 1-based completion order
    double lap_time = 0;    // seconds
    int collisions = 0;     // during this lap
    int stuck_events = 0;   // during this lap
    uint64_t env_step = 0;  // env step at completion
    double sim_time = 0;    // sim clock at completion
};

std::string laps_to_csv(const std::vector<LapRecord>& laps);
std::vector<LapRecord> laps_from_csv(const std::string& text);

// Pure view of the lap table; `report` recomputes exactly this.
struct RunSummary {
    int laps_completed = 0;
    double best_lap = -1;
    double median_lap = -1;
    double median_last5 = -1;
    double collisions_last5_median = -1;
    int total_collisions = 0;
    double time_to_first_lap = -1;  // sim seconds; -1 when no lap closed
};
RunSummary summarize_laps(const std::vector<LapRecord>& laps);

struct TrainResult {
    std::vector<LapRecord> laps;
    RunSummary summary;
    double stuck_time_at_20k = -1;  // FSM stuck-time when step 20000 passed
    double stuck_time_total = 0;
    int stuck_events_total = 0;
    uint64_t dropped_records = 0;  // robot-side drop-oldest evictions
    uint64_t env_steps = 0;
    double sim_time = 0;
    double updates_per_sec = 0;  // wall clock, reported not asserted
    SacLearner::Stats learner;
    ParamSet final_snapshot;  // actor (+ encoder when it trained online)
};

// Full practicing session: robot and learner joined by the configured link,
// outputs (laps.csv, telemetry.csv, learner.csv, running_min.csv + .svg,
// summary.json, checkpoints) written under cfg.out_dir.
TrainResult run_training(const RunConfig& cfg);

// Deterministic (mean-action) rollouts from the start line, one lap per
// attempt; attempts past the timeout count as DNF and are excluded from the
// median.
struct EvalResult {
    std::vector<double> lap_times;
    int dnf = 0;
    int collisions = 0;
    double median_lap = -1;
};
EvalResult evaluate_policy(const RunConfig& cfg, const ParamSet& snapshot,
                           const ParamSet* frozen_encoder, int n_laps,
                           uint64_t eval_seed);

// Ensemble-mean Q over a 21-point steering sweep at a fixed throttle, taken
// at the start-line observation. Works on untrained critics.
std::string critic_slice_csv(const RunConfig& cfg, const std::vector<ParamSet>& critics,
                             const ParamSet* frozen_encoder, float throttle_norm);

void write_running_min_svg(const std::string& path, const std::vector<LapRecord>& laps);

double median_of(std::vector<double> v);  // -1 on empty

}  // namespace autolap
