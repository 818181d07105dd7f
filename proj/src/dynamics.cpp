#include "gpmpc/dynamics.hpp"

#include <cmath>

#include "gpmpc/errors.hpp"

namespace gpmpc {

Eigen::Vector4d curvilinear_dynamics(const Eigen::Vector4d& x,
                                     const Eigen::Vector2d& u, double kappa,
                                     const VehicleParams& params) {
  const double n = x(1), alpha = x(2), v = x(3);
  const double denom = 1.0 - n * kappa;
  if (std::abs(denom) <= kSingularityGuard) {
    throw SingularityError("curvilinear model singular: 1 - n*kappa = " +
                           std::to_string(denom));
  }
  const double s_dot = v * std::cos(alpha) / denom;
  Eigen::Vector4d dx;
  dx(0) = s_dot;
  dx(1) = v * std::sin(alpha);
  dx(2) = (v / params.wheelbase) * std::tan(u(1)) - kappa * s_dot;
  dx(3) = (u(0) - v) / params.speed_lag;
  return dx;
}

Eigen::Vector4d cartesian_dynamics(const Eigen::Vector4d& x,
                                   const Eigen::Vector2d& u,
                                   const VehicleParams& params) {
  const double psi = x(2), v = x(3);
  Eigen::Vector4d dx;
  dx(0) = v * std::cos(psi);
  dx(1) = v * std::sin(psi);
  dx(2) = v * std::tan(u(1)) / params.wheelbase;
  dx(3) = (u(0) - v) / params.speed_lag;
  return dx;
}

Eigen::Vector4d step_curvilinear(const Eigen::Vector4d& x,
                                 const Eigen::Vector2d& u, double kappa,
                                 const VehicleParams& params, double ts) {
  return rk4_step(
      [&](const Eigen::Vector4d& xi) {
        return curvilinear_dynamics(xi, u, kappa, params);
      },
      x, ts);
}

Eigen::Vector4d step_curvilinear_profile(const Eigen::Vector4d& x,
                                         const Eigen::Vector2d& u,
                                         const CurvatureProfile& profile,
                                         const VehicleParams& params,
                                         double ts) {
  return rk4_step(
      [&](const Eigen::Vector4d& xi) {
        return curvilinear_dynamics(xi, u, curvature_at(profile, xi(0)),
                                    params);
      },
      x, ts);
}

Eigen::Vector4d step_cartesian(const Eigen::Vector4d& x,
                               const Eigen::Vector2d& u,
                               const VehicleParams& params, double ts) {
  return rk4_step(
      [&](const Eigen::Vector4d& xi) {
        return cartesian_dynamics(xi, u, params);
      },
      x, ts);
}

namespace {

// Continuous-time Jacobians of the constant-curvature model at (x, u).
void curvilinear_jacobians(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                           double kappa, const VehicleParams& params,
                           Eigen::Matrix4d& fx,
                           Eigen::Matrix<double, 4, 2>& fu) {
  const double n = x(1), alpha = x(2), v = x(3);
  const double denom = 1.0 - n * kappa;
  if (std::abs(denom) <= kSingularityGuard) {
    throw SingularityError("curvilinear model singular while linearizing");
  }
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  const double td = std::tan(u(1));
  const double inv_d = 1.0 / denom;

  const double ds_dn = v * ca * kappa * inv_d * inv_d;
  const double ds_da = -v * sa * inv_d;
  const double ds_dv = ca * inv_d;

  fx.setZero();
  fx(0, 1) = ds_dn;
  fx(0, 2) = ds_da;
  fx(0, 3) = ds_dv;
  fx(1, 2) = v * ca;
  fx(1, 3) = sa;
  fx(2, 1) = -kappa * ds_dn;
  fx(2, 2) = -kappa * ds_da;
  fx(2, 3) = td / params.wheelbase - kappa * ds_dv;
  fx(3, 3) = -1.0 / params.speed_lag;

  fu.setZero();
  fu(2, 1) = (v / params.wheelbase) * (1.0 + td * td);
  fu(3, 0) = 1.0 / params.speed_lag;
}

}  // namespace

void discrete_curvilinear_jacobians(const Eigen::Vector4d& x,
                                    const Eigen::Vector2d& u, double kappa,
                                    const VehicleParams& params, double ts,
                                    Eigen::Vector4d& x_next,
                                    Eigen::Matrix4d& a_mat,
                                    Eigen::Matrix<double, 4, 2>& b_mat) {
  using Mat42 = Eigen::Matrix<double, 4, 2>;

  Eigen::Vector4d k[4];
  Eigen::Matrix4d dk_dx[4];
  Mat42 dk_du[4];
  const double stage_scale[4] = {0.0, 0.5, 0.5, 1.0};

  Eigen::Vector4d xi = x;
  Eigen::Matrix4d dxi_dx = Eigen::Matrix4d::Identity();
  Mat42 dxi_du = Mat42::Zero();
  for (int stage = 0; stage < 4; ++stage) {
    if (stage > 0) {
      const double c = stage_scale[stage] * ts;
      xi = x + c * k[stage - 1];
      dxi_dx = Eigen::Matrix4d::Identity() + c * dk_dx[stage - 1];
      dxi_du = c * dk_du[stage - 1];
    }
    Eigen::Matrix4d fx;
    Mat42 fu;
    curvilinear_jacobians(xi, u, kappa, params, fx, fu);
    k[stage] = curvilinear_dynamics(xi, u, kappa, params);
    dk_dx[stage] = fx * dxi_dx;
    dk_du[stage] = fx * dxi_du + fu;
  }

  x_next = x + (ts / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
  a_mat = Eigen::Matrix4d::Identity() +
          (ts / 6.0) * (dk_dx[0] + 2.0 * dk_dx[1] + 2.0 * dk_dx[2] + dk_dx[3]);
  b_mat = (ts / 6.0) * (dk_du[0] + 2.0 * dk_du[1] + 2.0 * dk_du[2] + dk_du[3]);
}

}  // namespace gpmpc
