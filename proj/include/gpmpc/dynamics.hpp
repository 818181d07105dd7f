#pragma once

#include <Eigen/Dense>

#include "gpmpc/track.hpp"
#include "gpmpc/types.hpp"

namespace gpmpc {

// Guard on 1 - n*kappa: the curvilinear model is singular when the vehicle
// reaches the local center of curvature.
constexpr double kSingularityGuard = 1e-6;

// Track-relative dynamics with curvature frozen at a constant value:
// s' = v cos(a) / (1 - n k), n' = v sin(a),
// a' = (v/L) tan(d) - k s', v' = (v_u - v) / T.
// Throws SingularityError when |1 - n k| <= kSingularityGuard.
Eigen::Vector4d curvilinear_dynamics(const Eigen::Vector4d& x,
                                     const Eigen::Vector2d& u, double kappa,
                                     const VehicleParams& params);

// World-frame kinematic bicycle with first-order speed lag:
// px' = v cos(psi), py' = v sin(psi), psi' = v tan(d) / L, v' = (v_u - v) / T.
Eigen::Vector4d cartesian_dynamics(const Eigen::Vector4d& x,
                                   const Eigen::Vector2d& u,
                                   const VehicleParams& params);

// Classical fixed-step RK4 update with the input held constant over the step.
// f must be callable as f(x) -> derivative.
template <typename F>
Eigen::Vector4d rk4_step(const F& f, const Eigen::Vector4d& x, double ts) {
  if (ts == 0.0) return x;
  const Eigen::Vector4d k1 = f(x);
  const Eigen::Vector4d k2 = f(x + 0.5 * ts * k1);
  const Eigen::Vector4d k3 = f(x + 0.5 * ts * k2);
  const Eigen::Vector4d k4 = f(x + ts * k3);
  return x + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One discrete step of the curvilinear model with constant curvature.
Eigen::Vector4d step_curvilinear(const Eigen::Vector4d& x,
                                 const Eigen::Vector2d& u, double kappa,
                                 const VehicleParams& params, double ts);

// As above but with curvature looked up at the instantaneous arc length
// inside every derivative evaluation.
Eigen::Vector4d step_curvilinear_profile(const Eigen::Vector4d& x,
                                         const Eigen::Vector2d& u,
                                         const CurvatureProfile& profile,
                                         const VehicleParams& params, double ts);

// One discrete step of the Cartesian model.
Eigen::Vector4d step_cartesian(const Eigen::Vector4d& x,
                               const Eigen::Vector2d& u,
                               const VehicleParams& params, double ts);

// Discrete constant-curvature step together with the exact Jacobians of the
// RK4 map: x_next = F(x, u), A = dF/dx, B = dF/du, obtained by chaining the
// analytic continuous-time Jacobians through the RK4 stages.
void discrete_curvilinear_jacobians(const Eigen::Vector4d& x,
                                    const Eigen::Vector2d& u, double kappa,
                                    const VehicleParams& params, double ts,
                                    Eigen::Vector4d& x_next,
                                    Eigen::Matrix4d& a_mat,
                                    Eigen::Matrix<double, 4, 2>& b_mat);

}  // namespace gpmpc
