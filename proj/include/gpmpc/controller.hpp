#pragma once

#include <Eigen/Dense>
#include <string>

#include "gpmpc/gp.hpp"
#include "gpmpc/types.hpp"

namespace gpmpc {

// Input holding a steady state at curvature kappa: reference speed and the
// steering angle whose kinematic turn radius matches 1/kappa.
ControlInput feedforward(double kappa, double r_v, double wheelbase);

// Deployable approximate law: feedforward from local curvature plus the two
// GP residual means, saturated to the input box. Evaluation is a total
// function of the feature vector.
class ApproxController {
 public:
  ApproxController(GpModel gp_vu, GpModel gp_delta, const InputBounds& bounds,
                   const VehicleParams& vehicle, double r_v);

  // xi = (n, alpha, v, kappa)
  ControlInput act(const Eigen::Vector4d& xi) const;

  const GpModel& model_vu() const { return gp_vu_; }
  const GpModel& model_delta() const { return gp_delta_; }
  const InputBounds& bounds() const { return bounds_; }
  double r_v() const { return r_v_; }
  const VehicleParams& vehicle() const { return vehicle_; }

 private:
  GpModel gp_vu_;
  GpModel gp_delta_;
  InputBounds bounds_;
  VehicleParams vehicle_;
  double r_v_;
  mutable Eigen::VectorXd ws_vu_;
  mutable Eigen::VectorXd ws_delta_;
};

ControlInput approx_policy(const CurvilinearState& state, double kappa,
                           const ApproxController& controller);

// Reads gp_model_vu and gp_model_delta from a directory.
ApproxController load_approx_controller(const std::string& model_dir,
                                        const InputBounds& bounds,
                                        const VehicleParams& vehicle,
                                        double r_v);

struct PolicyErrorReport {
  Eigen::Vector2d rmse = Eigen::Vector2d::Zero();
  Eigen::Vector2d max_abs = Eigen::Vector2d::Zero();
  Eigen::Index count = 0;
};

// Error of the deployed law against the exact MPC inputs encoded by labeled
// features (label = exact first input minus feedforward).
PolicyErrorReport policy_error_report(const ApproxController& controller,
                                      const Eigen::MatrixXd& features,
                                      const Eigen::MatrixXd& labels);

// CSV `output,rmse,max_abs,count` with one row per input dimension.
void export_policy_error(const PolicyErrorReport& report,
                         const std::string& path);

}  // namespace gpmpc
