#include "autolap/fsm.hpp"

#include <algorithm>
#include <cmath>

namespace autolap {

double compute_reward(const Vec2& velocity, const Vec2& goal_dir, double lateral_accel,
                      bool stuck, const RewardParams& params) {
    double r = velocity.dot(goal_dir);
    if (stuck) r -= params.c_stuck_penalty;
    if (std::abs(lateral_accel) > params.accel_threshold)
        r -= params.c_collide * std::abs(lateral_accel);
    return r;
}

CheckpointEvent advance_checkpoint(PracticeState& ps, const Vec2& position,
                                   const Course& course, double now) {
    CheckpointEvent ev;
    const Vec2& target = course.checkpoints[ps.active_checkpoint_index];
    if ((position - target).norm() >= course.reach_radius) return ev;
    ev.advanced = true;
    ps.active_checkpoint_index =
        (ps.active_checkpoint_index + 1) % (int)course.checkpoints.size();
    if (ps.active_checkpoint_index == 0) {
        ev.lap_completed = true;
        ev.lap_time = now - ps.lap_start_time;
        ev.lap_collisions = ps.collisions_this_lap;
        ps.lap_start_time = now;
        ++ps.laps_completed;
        ps.collisions_this_lap = 0;
    }
    return ev;
}

void push_history(PracticeState& ps, double now, const Vec2& position,
                  bool throttle_nonzero) {
    ps.history.push_back({now, position, throttle_nonzero});
    while (!ps.history.empty() && ps.history.front().time < now - 3.05)
        ps.history.pop_front();
}

double window_displacement(const PracticeState& ps, double now, double window) {
    double best = 0.0;
    const double t0 = now - window;
    for (size_t i = 0; i < ps.history.size(); ++i) {
        if (ps.history[i].time < t0) continue;
        for (size_t j = i + 1; j < ps.history.size(); ++j)
            best = std::max(best, (ps.history[j].position - ps.history[i].position).norm());
    }
    return best;
}

BlockedStatus detect_blocked(const PracticeState& ps, double lateral_accel, double now,
                             const RewardParams& params) {
    if (std::abs(lateral_accel) > params.accel_threshold) return BlockedStatus::Collided;
    if (now - ps.practicing_since < 3.0) return BlockedStatus::Ok;
    bool throttle_all = true;
    const double t0 = now - 3.0;
    for (const auto& e : ps.history)
        if (e.time >= t0 && !e.throttle_nonzero) throttle_all = false;
    if (!throttle_all) return BlockedStatus::Ok;
    if (window_displacement(ps, now) < 0.5) return BlockedStatus::Stuck;
    return BlockedStatus::Ok;
}

double sample_recovery_steering(Rng& rng, double steer_max) {
    return rng.uniform(-steer_max, steer_max);
}

RecoveryCommand recovery_step(double steering_held, double elapsed_in_recovery) {
    RecoveryCommand cmd;
    cmd.action = {kRecoverySpeed, steering_held};
    cmd.done = elapsed_in_recovery >= kRecoveryDuration;
    return cmd;
}

PracticingFsm::PracticingFsm(Course course, RewardParams rp, Rng recovery_rng,
                             double steer_max, bool pseudo_resets_enabled)
    : course_(std::move(course)),
      rp_(rp),
      rng_(std::move(recovery_rng)),
      steer_max_(steer_max),
      pseudo_resets_(pseudo_resets_enabled) {}

Action PracticingFsm::recovery_action(double now) const {
    return recovery_step(ps_.recovery_steering, now - ps_.recovery_started).action;
}

PracticingFsm::PostStep PracticingFsm::post_step(const CarState& next, double now,
                                                 bool throttle_nonzero) {
    PostStep out;
    const double dt = now - last_step_time_;
    last_step_time_ = now;

    push_history(ps_, now, next.position, throttle_nonzero);
    if (window_displacement(ps_, now) < 0.5 && now >= 3.0) stuck_time_ += dt;

    if (ps_.mode == PracticeMode::Recovering) {
        if (now - ps_.recovery_started >= kRecoveryDuration) {
            ps_.mode = PracticeMode::Practicing;
            ps_.practicing_since = now;
            out.recovery_finished = true;
        }
        return out;
    }

    out.goal_index_during_step = ps_.active_checkpoint_index;
    const Vec2 goal = course_.checkpoints[ps_.active_checkpoint_index];

    out.checkpoint = advance_checkpoint(ps_, next.position, course_, now);
    if (out.checkpoint.lap_completed) lap_times_.push_back(out.checkpoint.lap_time);

    out.blocked = detect_blocked(ps_, next.lateral_accel, now, rp_);
    out.stuck_event = out.blocked == BlockedStatus::Stuck;
    if (out.stuck_event) ++stuck_events_;

    // reward evaluated at the arrival state against the goal active during
    // the step
    const Vec2 velocity = Vec2{std::cos(next.heading), std::sin(next.heading)} * next.speed;
    const Vec2 dir = relative_goal(next, goal).unit_dir;
    const Vec2 dir_world = dir.rotated(next.heading);
    out.reward =
        compute_reward(velocity, dir_world, next.lateral_accel, out.stuck_event, rp_);

    if (out.blocked != BlockedStatus::Ok) {
        out.done = true;
        if (out.blocked == BlockedStatus::Collided) ++ps_.collisions_this_lap;
        if (pseudo_resets_) {
            ps_.mode = PracticeMode::Recovering;
            ps_.recovery_started = now;
            ps_.recovery_steering = sample_recovery_steering(rng_, steer_max_);
            out.entered_recovery = true;
        } else {
            // no recovery: re-arm the stuck window so the penalty fires at
            // most once per window
            ps_.practicing_since = now;
        }
    }
    return out;
}

}  // namespace autolap
