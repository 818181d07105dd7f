#pragma once

#include <Eigen/Dense>

namespace gpmpc {

// Pose and speed of the vehicle in the world frame.
struct CartesianState {
  double px = 0.0;
  double py = 0.0;
  double psi = 0.0;
  double v = 0.0;

  Eigen::Vector4d vec() const { return {px, py, psi, v}; }
  static CartesianState from(const Eigen::Vector4d& x) {
    return {x(0), x(1), x(2), x(3)};
  }
};

// Track-relative state: arc length along the centerline, signed lateral
// offset, heading error relative to the track tangent, speed.
struct CurvilinearState {
  double s = 0.0;
  double n = 0.0;
  double alpha = 0.0;
  double v = 0.0;

  Eigen::Vector4d vec() const { return {s, n, alpha, v}; }
  static CurvilinearState from(const Eigen::Vector4d& x) {
    return {x(0), x(1), x(2), x(3)};
  }
};

// Commanded speed and steering angle.
struct ControlInput {
  double v_u = 0.0;
  double delta = 0.0;

  Eigen::Vector2d vec() const { return {v_u, delta}; }
  static ControlInput from(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

// Kinematic bicycle parameters: wheelbase, speed actuation lag time constant,
// and the sampling period shared by the controller and the discretization.
struct VehicleParams {
  double wheelbase = 0.16;
  double speed_lag = 0.1;
  double ts = 0.01;
};

// Box constraints on the inputs.
struct InputBounds {
  double v_min = 0.0;
  double v_max = 1.2;
  double delta_max = 12.0 * 3.14159265358979323846 / 180.0;

  Eigen::Vector2d lower() const { return {v_min, -delta_max}; }
  Eigen::Vector2d upper() const { return {v_max, delta_max}; }

  Eigen::Vector2d clamp(const Eigen::Vector2d& u) const {
    return u.cwiseMax(lower()).cwiseMin(upper());
  }
};

}  // namespace gpmpc
