#include "autolap/ekf.hpp"

#include <algorithm>
#include <cmath>

namespace autolap {

EkfState ekf_predict(const EkfState& ekf, double yaw_rate, double dt,
                     double process_noise) {
    EkfState out;
    out.heading_est = wrap_angle(ekf.heading_est + yaw_rate * dt);
    out.variance = ekf.variance + process_noise * dt;
    return out;
}

EkfState ekf_update(const EkfState& ekf, double wheel_speed, const Vec2& velocity_meas,
                    double meas_noise) {
    if (wheel_speed < 0.2) return ekf;

    const double c = std::cos(ekf.heading_est), s = std::sin(ekf.heading_est);
    const double hx = wheel_speed * c, hy = wheel_speed * s;
    // Jacobian H = d h / d theta, a 2-vector
    const double Hx = -wheel_speed * s, Hy = wheel_speed * c;
    const double P = ekf.variance, R = meas_noise;

    // S = H P H^T + R I (2x2)
    const double s00 = P * Hx * Hx + R;
    const double s01 = P * Hx * Hy;
    const double s11 = P * Hy * Hy + R;
    const double det = s00 * s11 - s01 * s01;
    // inverse of S
    const double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;

    // K = P H^T S^-1 (1x2)
    const double k0 = P * (Hx * i00 + Hy * i01);
    const double k1 = P * (Hx * i01 + Hy * i11);

    const double nu_x = velocity_meas.x - hx;
    const double nu_y = velocity_meas.y - hy;

    EkfState out;
    out.heading_est = wrap_angle(ekf.heading_est + k0 * nu_x + k1 * nu_y);
    out.variance = std::max(1e-12, (1.0 - (k0 * Hx + k1 * Hy)) * P);
    return out;
}

}  // namespace autolap
