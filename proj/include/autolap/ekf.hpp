#pragma once

#include "autolap/geometry.hpp"

namespace autolap {

// Scalar-state heading filter. Measurement is the world-frame velocity
// vector, modeled as (v_w cos(theta), v_w sin(theta)) from wheel speed v_w.

struct EkfState {
    double heading_est = 0.0;  // wrapped to (-pi, pi]
    double variance = 1.0;     // rad^2, > 0
};

struct EkfNoise {
    double process = 0.05;  // rad^2 / s
    double meas = 0.01;     // (m/s)^2 per velocity axis
};

EkfState ekf_predict(const EkfState& ekf, double yaw_rate, double dt,
                     double process_noise);

// Skipped entirely (state returned as-is) when wheel_speed < 0.2 m/s: the
// measurement model degenerates at standstill.
EkfState ekf_update(const EkfState& ekf, double wheel_speed, const Vec2& velocity_meas,
                    double meas_noise);

}  // namespace autolap
