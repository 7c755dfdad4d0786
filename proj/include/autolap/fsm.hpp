#pragma once

#include <deque>
#include <vector>

#include "autolap/geometry.hpp"
#include "autolap/rng.hpp"
#include "autolap/world.hpp"

namespace autolap {

struct RewardParams {
    double c_stuck_penalty = 10.0;  // magnitude subtracted when stuck fires
    double c_collide = 0.2;         // s^2/m
    double accel_threshold = 6.0;   // A, m/s^2
};

// r = v . g_hat - C_stuck * 1[stuck] - C_collide * 1[|a_lat| > A] * |a_lat|
double compute_reward(const Vec2& velocity, const Vec2& goal_dir, double lateral_accel,
                      bool stuck, const RewardParams& params);

struct Course {
    std::vector<Vec2> checkpoints;  // cyclic, n_c >= 2
    double reach_radius = 2.0;
};

enum class PracticeMode { Practicing, Recovering };
enum class BlockedStatus { Ok, Collided, Stuck };

struct HistoryEntry {
    double time;
    Vec2 position;
    bool throttle_nonzero;
};

struct PracticeState {
    PracticeMode mode = PracticeMode::Practicing;
    int active_checkpoint_index = 0;
    std::deque<HistoryEntry> history;  // trailing >= 3 s of samples
    double lap_start_time = 0.0;
    int laps_completed = 0;
    int collisions_this_lap = 0;
    double practicing_since = 0.0;  // when Practicing was last (re)entered
    // recovery bookkeeping
    double recovery_started = 0.0;
    double recovery_steering = 0.0;
};

struct CheckpointEvent {
    bool advanced = false;
    bool lap_completed = false;
    double lap_time = 0.0;
    int lap_collisions = 0;  // collisions during the lap just closed
};

// Advances the cyclic index when position is within reach_radius of the
// active checkpoint; wrapping to index 0 closes a lap.
CheckpointEvent advance_checkpoint(PracticeState& ps, const Vec2& position,
                                   const Course& course, double now);

// Collided: |a_lat| beyond the threshold. Stuck: trailing 3 s of history
// moved less than 0.5 m (max pairwise), throttle non-zero throughout, and at
// least 3 s spent Practicing since the window was re-armed.
BlockedStatus detect_blocked(const PracticeState& ps, double lateral_accel, double now,
                             const RewardParams& params);

struct RecoveryCommand {
    Action action;  // reverse speed, held random steering
    bool done = false;
};

inline constexpr double kRecoveryDuration = 1.0;  // s
inline constexpr double kRecoverySpeed = -1.0;    // m/s, FSM-only

// Steering is sampled once per recovery (held thereafter).
double sample_recovery_steering(Rng& rng, double steer_max);
RecoveryCommand recovery_step(double steering_held, double elapsed_in_recovery);

void push_history(PracticeState& ps, double now, const Vec2& position,
                  bool throttle_nonzero);
// Max pairwise displacement among history entries in [now - window, now].
double window_displacement(const PracticeState& ps, double now, double window = 3.0);

// Orchestrates one post-step evaluation for the control loop.
class PracticingFsm {
public:
    PracticingFsm(Course course, RewardParams rp, Rng recovery_rng, double steer_max,
                  bool pseudo_resets_enabled = true);

    const Course& course() const { return course_; }
    const PracticeState& state() const { return ps_; }
    const RewardParams& reward_params() const { return rp_; }
    PracticeMode mode() const { return ps_.mode; }
    Vec2 active_checkpoint() const {
        return course_.checkpoints[ps_.active_checkpoint_index];
    }

    // While Recovering: the scripted command for this step.
    Action recovery_action(double now) const;

    struct PostStep {
        BlockedStatus blocked = BlockedStatus::Ok;
        bool stuck_event = false;      // rising edge, reward penalty applies once
        bool entered_recovery = false;
        bool recovery_finished = false;
        CheckpointEvent checkpoint;
        double reward = 0.0;
        bool done = false;  // transition done-mask (collision or stuck trigger)
        int goal_index_during_step = 0;
    };

    // Call once per control step after the world has stepped. `next` is the
    // post-step car state; throttle_nonzero describes the command just applied.
    PostStep post_step(const CarState& next, double now, bool throttle_nonzero);

    // Cumulative time with trailing-window displacement below the stuck
    // threshold, regardless of mode; the pseudo-reset ablation metric.
    double stuck_time() const { return stuck_time_; }
    int stuck_events() const { return stuck_events_; }
    std::vector<double> lap_times() const { return lap_times_; }

private:
    Course course_;
    RewardParams rp_;
    Rng rng_;
    double steer_max_;
    bool pseudo_resets_;
    PracticeState ps_;
    double stuck_time_ = 0.0;
    int stuck_events_ = 0;
    double last_step_time_ = 0.0;
    std::vector<double> lap_times_;
};

}  // namespace autolap
