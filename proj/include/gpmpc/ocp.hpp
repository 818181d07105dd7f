#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gpmpc/dynamics.hpp"
#include "gpmpc/track.hpp"
#include "gpmpc/types.hpp"

namespace gpmpc {

// Tracking-OCP weights, horizon, and input bounds.
struct OcpParams {
  double w1 = 100.0;
  double w2 = 5.0;
  double w3 = 5.0;
  Eigen::Matrix2d w_u = Eigen::Vector2d(5.0, 2.0).asDiagonal();
  int horizon = 40;
  double v_min = 0.0;
  double v_max = 1.2;
  double delta_min = -12.0 * 3.14159265358979323846 / 180.0;
  double delta_max = 12.0 * 3.14159265358979323846 / 180.0;
  double r_v = 0.5;
  VehicleParams vehicle;
  double tol_kkt = 1e-6;
  int max_iter = 50;

  InputBounds bounds() const {
    InputBounds b;
    b.v_min = v_min;
    b.v_max = v_max;
    b.delta_max = delta_max;
    return b;
  }
  void validate() const;
};

// Input that holds the vehicle on a path of the given curvature at the
// reference speed: (r_v, arctan(L * kappa)).
Eigen::Vector2d reference_input(double kappa, double r_v, double wheelbase);

// Stage cost w1 (n v)^2 + w2 a^2 + w3 (v - r_v)^2 + (u - u_ref)' W_u (u - u_ref).
double stage_cost(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                  const Eigen::Vector2d& u_ref, const OcpParams& params);

// Terminal cost: the stage cost without the input term.
double terminal_cost(const Eigen::Vector4d& x, const OcpParams& params);

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double step_norm = 0.0;
};

struct OcpSolution {
  Eigen::MatrixXd states;  // 4 x (N+1)
  Eigen::MatrixXd inputs;  // 2 x N
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  std::vector<IterationRecord> trace;
};

// Minimizes 1/2 d'Hd + g'd over lb <= d <= ub (H positive definite) with a
// primal active-set method started at d = 0, which must be feasible.
Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& lb,
                             const Eigen::VectorXd& ub);

// Gauss-Newton SQP solver for the tracking OCP with single-shooting
// condensing: states are eliminated by rollout, the decision variable is the
// stacked input sequence, and the only constraints are the input boxes.
// Instances carry mutable workspace; use one per thread.
class OcpSolver {
 public:
  explicit OcpSolver(const OcpParams& params);

  const OcpParams& params() const { return params_; }

  // Full solve to tol_kkt or max_iter. kappa_seq holds one frozen curvature
  // per prediction stage.
  OcpSolution solve(const Eigen::Vector4d& x0, const Eigen::VectorXd& kappa_seq,
                    const OcpSolution* warm_start = nullptr);

  // Real-time iteration: exactly one Gauss-Newton step from the previous
  // solution shifted by one stage (last stage duplicated).
  OcpSolution rti(const Eigen::Vector4d& x0, const Eigen::VectorXd& kappa_seq,
                  const OcpSolution& previous);

  // Nonlinear objective of a stacked input sequence (rollout included).
  double rollout_cost(const Eigen::Vector4d& x0,
                      const Eigen::VectorXd& kappa_seq,
                      const Eigen::VectorXd& u_flat) const;

  // Exact gradient of rollout_cost at u_flat, from the condensed residual
  // Jacobian; exposed for verification against finite differences.
  Eigen::VectorXd cost_gradient(const Eigen::Vector4d& x0,
                                const Eigen::VectorXd& kappa_seq,
                                const Eigen::VectorXd& u_flat);

 private:
  struct Linearization {
    double cost = 0.0;
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd states;
  };

  void linearize(const Eigen::Vector4d& x0, const Eigen::VectorXd& kappa_seq,
                 const Eigen::VectorXd& u_flat, Linearization& lin) const;
  double projected_gradient_norm(const Eigen::VectorXd& u_flat,
                                 const Eigen::VectorXd& grad) const;
  OcpSolution run(const Eigen::Vector4d& x0, const Eigen::VectorXd& kappa_seq,
                  Eigen::VectorXd u_flat, int iter_limit);

  OcpParams params_;
  Eigen::Matrix2d w_u_sqrt_;
  Eigen::VectorXd lb_, ub_;
  Eigen::VectorXd u_ref_flat_;
  Linearization lin_;
};

// Curvatures over the horizon under constant-speed arc-length prediction:
// stage i queries the profile at s_now + i * Ts * r_v.
Eigen::VectorXd kappa_sequence(const CurvatureProfile& profile, double s_now,
                               const OcpParams& params);

// Stateful MPC policy with warm starting across calls.
class MpcController {
 public:
  enum class Mode { kFull, kRti };

  MpcController(const OcpParams& params, Mode mode);

  // Policy on a track: builds the horizon curvatures from the profile.
  ControlInput act(const CurvilinearState& x, const CurvatureProfile& profile);

  // Policy with a single frozen curvature over the whole horizon.
  ControlInput act_constant_kappa(const CurvilinearState& x, double kappa);

  const OcpSolution& last_solution() const { return last_; }
  bool has_solution() const { return has_last_; }
  void reset() { has_last_ = false; }

 private:
  ControlInput act_with_sequence(const CurvilinearState& x,
                                 const Eigen::VectorXd& kappa_seq);

  OcpSolver solver_;
  Mode mode_;
  OcpSolution last_;
  bool has_last_ = false;
};

// CSV export `iter,objective,kkt_residual,step_norm`.
void export_solver_diagnostics(const OcpSolution& solution,
                               const std::string& path);

}  // namespace gpmpc
