#include "gpmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "gpmpc/csv.hpp"
#include "gpmpc/errors.hpp"

namespace gpmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd flatten_inputs(const Eigen::MatrixXd& inputs) {
  return Eigen::Map<const Eigen::VectorXd>(inputs.data(), inputs.size());
}

}  // namespace

void OcpParams::validate() const {
  if (!(w1 > 0.0 && w2 > 0.0 && w3 > 0.0)) {
    throw std::invalid_argument("stage-cost weights must be positive");
  }
  if ((w_u - w_u.transpose()).norm() > 1e-12 ||
      Eigen::LLT<Eigen::Matrix2d>(w_u).info() != Eigen::Success) {
    throw std::invalid_argument("W_u must be symmetric positive definite");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(v_min < v_max) || !(delta_min < delta_max)) {
    throw std::invalid_argument("input bounds must be non-degenerate");
  }
  if (!(vehicle.wheelbase > 0.0 && vehicle.speed_lag > 0.0 && vehicle.ts > 0.0)) {
    throw std::invalid_argument("vehicle parameters must be positive");
  }
  if (!(tol_kkt > 0.0) || max_iter < 1) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
}

Eigen::Vector2d reference_input(double kappa, double r_v, double wheelbase) {
  return {r_v, std::atan(wheelbase * kappa)};
}

double stage_cost(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                  const Eigen::Vector2d& u_ref, const OcpParams& params) {
  const Eigen::Vector2d du = u - u_ref;
  return terminal_cost(x, params) + du.dot(params.w_u * du);
}

double terminal_cost(const Eigen::Vector4d& x, const OcpParams& params) {
  const double nv = x(1) * x(3);
  const double dv = x(3) - params.r_v;
  return params.w1 * nv * nv + params.w2 * x(2) * x(2) + params.w3 * dv * dv;
}

Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& lb,
                             const Eigen::VectorXd& ub) {
  const Eigen::Index n = g.size();
  if (h.rows() != n || h.cols() != n || lb.size() != n || ub.size() != n) {
    throw std::invalid_argument("solve_box_qp: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lb(i) > 1e-9 || ub(i) < -1e-9 || lb(i) > ub(i)) {
      throw std::invalid_argument("solve_box_qp: origin must be feasible");
    }
  }

  Eigen::VectorXd d = Eigen::VectorXd::Zero(n).cwiseMax(lb).cwiseMin(ub);
  // 0 = free, -1 = fixed at lower bound, +1 = fixed at upper bound.
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  const double mult_tol = 1e-10 * (1.0 + g.lpNorm<Eigen::Infinity>());

  const int max_outer = 100 * static_cast<int>(n) + 100;
  for (int outer = 0; outer < max_outer; ++outer) {
    std::vector<Eigen::Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 0) free_idx.push_back(i);
    }

    bool reached_subproblem_optimum = true;
    if (!free_idx.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Eigen::VectorXd d_bound = d;
      for (Eigen::Index i : free_idx) d_bound(i) = 0.0;
      const Eigen::VectorXd rhs_full = -(g + h * d_bound);

      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        rhs(a) = rhs_full(free_idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < nf; ++b) {
          hff(a, b) = h(free_idx[static_cast<std::size_t>(a)],
                        free_idx[static_cast<std::size_t>(b)]);
        }
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(hff);
      if (llt.info() != Eigen::Success) {
        throw IllConditionedError("solve_box_qp: reduced Hessian not PD");
      }
      const Eigen::VectorXd target = llt.solve(rhs);

      // Step from the current point toward the subproblem optimum, stopping
      // at the first blocking bound.
      double step = 1.0;
      Eigen::Index blocking = -1;
      int blocking_side = 0;
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
        const double p = target(a) - d(i);
        if (std::abs(p) < 1e-15) continue;
        double limit = kInf;
        int side = 0;
        if (p > 0.0 && ub(i) < kInf) {
          limit = std::max(0.0, (ub(i) - d(i)) / p);
          side = 1;
        } else if (p < 0.0) {
          limit = std::max(0.0, (lb(i) - d(i)) / p);
          side = -1;
        }
        if (limit < step) {
          step = limit;
          blocking = i;
          blocking_side = side;
        }
      }
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
        d(i) += step * (target(a) - d(i));
      }
      if (blocking >= 0) {
        d(blocking) = blocking_side > 0 ? ub(blocking) : lb(blocking);
        state[static_cast<std::size_t>(blocking)] = blocking_side;
        reached_subproblem_optimum = false;
      }
    }

    if (reached_subproblem_optimum) {
      const Eigen::VectorXd grad = h * d + g;
      Eigen::Index release = -1;
      double worst = mult_tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int st = state[static_cast<std::size_t>(i)];
        const double violation =
            st < 0 ? -grad(i) : (st > 0 ? grad(i) : 0.0);
        if (violation > worst) {
          worst = violation;
          release = i;
        }
      }
      if (release < 0) return d;
      state[static_cast<std::size_t>(release)] = 0;
    }
  }
  throw NumericalError("solve_box_qp: iteration limit exceeded");
}

OcpSolver::OcpSolver(const OcpParams& params) : params_(params) {
  params_.validate();
  const Eigen::LLT<Eigen::Matrix2d> llt(params_.w_u);
  w_u_sqrt_ = llt.matrixL().transpose();

  const int n = params_.horizon;
  lb_.resize(2 * n);
  ub_.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    lb_(2 * i) = params_.v_min;
    lb_(2 * i + 1) = params_.delta_min;
    ub_(2 * i) = params_.v_max;
    ub_(2 * i + 1) = params_.delta_max;
  }

  lin_.residual.resize(5 * n + 3);
  lin_.jacobian = Eigen::MatrixXd::Zero(5 * n + 3, 2 * n);
  lin_.states.resize(4, n + 1);
}

void OcpSolver::linearize(const Eigen::Vector4d& x0,
                          const Eigen::VectorXd& kappa_seq,
                          const Eigen::VectorXd& u_flat,
                          Linearization& lin) const {
  const int n = params_.horizon;
  const Eigen::Index nu = 2 * n;
  const double sw1 = std::sqrt(params_.w1);
  const double sw2 = std::sqrt(params_.w2);
  const double sw3 = std::sqrt(params_.w3);

  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(4, nu);
  Eigen::MatrixXd sens_next(4, nu);
  Eigen::Vector4d x = x0;
  lin.states.col(0) = x;

  for (int i = 0; i < n; ++i) {
    const Eigen::Index row = 5 * i;
    lin.residual(row) = sw1 * x(1) * x(3);
    lin.residual(row + 1) = sw2 * x(2);
    lin.residual(row + 2) = sw3 * (x(3) - params_.r_v);
    if (i > 0) {
      lin.jacobian.row(row) = sw1 * (x(3) * sens.row(1) + x(1) * sens.row(3));
      lin.jacobian.row(row + 1) = sw2 * sens.row(2);
      lin.jacobian.row(row + 2) = sw3 * sens.row(3);
    }

    const Eigen::Vector2d u = u_flat.segment<2>(2 * i);
    const Eigen::Vector2d u_ref =
        reference_input(kappa_seq(i), params_.r_v, params_.vehicle.wheelbase);
    lin.residual.segment<2>(row + 3) = w_u_sqrt_ * (u - u_ref);
    lin.jacobian.block<2, 2>(row + 3, 2 * i) = w_u_sqrt_;

    Eigen::Vector4d x_next;
    Eigen::Matrix4d a_mat;
    Eigen::Matrix<double, 4, 2> b_mat;
    discrete_curvilinear_jacobians(x, u, kappa_seq(i), params_.vehicle,
                                   params_.vehicle.ts, x_next, a_mat, b_mat);
    sens_next.noalias() = a_mat * sens;
    sens_next.middleCols<2>(2 * i) += b_mat;
    sens.swap(sens_next);
    x = x_next;
    lin.states.col(i + 1) = x;
  }

  const Eigen::Index row = 5 * n;
  lin.residual(row) = sw1 * x(1) * x(3);
  lin.residual(row + 1) = sw2 * x(2);
  lin.residual(row + 2) = sw3 * (x(3) - params_.r_v);
  lin.jacobian.row(row) = sw1 * (x(3) * sens.row(1) + x(1) * sens.row(3));
  lin.jacobian.row(row + 1) = sw2 * sens.row(2);
  lin.jacobian.row(row + 2) = sw3 * sens.row(3);

  if (!lin.residual.allFinite()) {
    throw NumericalError("ocp linearization produced non-finite residuals");
  }
  lin.cost = lin.residual.squaredNorm();
}

double OcpSolver::projected_gradient_norm(const Eigen::VectorXd& u_flat,
                                          const Eigen::VectorXd& grad) const {
  return (u_flat - (u_flat - grad).cwiseMax(lb_).cwiseMin(ub_))
      .lpNorm<Eigen::Infinity>();
}

double OcpSolver::rollout_cost(const Eigen::Vector4d& x0,
                               const Eigen::VectorXd& kappa_seq,
                               const Eigen::VectorXd& u_flat) const {
  const int n = params_.horizon;
  Eigen::Vector4d x = x0;
  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d u = u_flat.segment<2>(2 * i);
    const Eigen::Vector2d u_ref =
        reference_input(kappa_seq(i), params_.r_v, params_.vehicle.wheelbase);
    cost += stage_cost(x, u, u_ref, params_);
    x = step_curvilinear(x, u, kappa_seq(i), params_.vehicle,
                         params_.vehicle.ts);
  }
  cost += terminal_cost(x, params_);
  if (!std::isfinite(cost)) {
    throw NumericalError("ocp rollout produced non-finite cost");
  }
  return cost;
}

Eigen::VectorXd OcpSolver::cost_gradient(const Eigen::Vector4d& x0,
                                         const Eigen::VectorXd& kappa_seq,
                                         const Eigen::VectorXd& u_flat) {
  linearize(x0, kappa_seq, u_flat, lin_);
  return 2.0 * lin_.jacobian.transpose() * lin_.residual;
}

OcpSolution OcpSolver::run(const Eigen::Vector4d& x0,
                           const Eigen::VectorXd& kappa_seq,
                           Eigen::VectorXd u_flat, int iter_limit) {
  const int n = params_.horizon;
  const Eigen::Index nu = 2 * n;

  OcpSolution sol;
  double best_cost = kInf;
  Eigen::VectorXd u_best = u_flat;
  Eigen::VectorXd grad(nu);
  double kkt = kInf;
  double last_step = 0.0;
  int n_steps = 0;
  bool converged = false;

  while (true) {
    linearize(x0, kappa_seq, u_flat, lin_);
    grad.noalias() = 2.0 * lin_.jacobian.transpose() * lin_.residual;
    kkt = projected_gradient_norm(u_flat, grad);
    sol.trace.push_back(
        {static_cast<int>(sol.trace.size()), lin_.cost, kkt, last_step});
    if (lin_.cost < best_cost) {
      best_cost = lin_.cost;
      u_best = u_flat;
    }
    if (kkt <= params_.tol_kkt) {
      converged = true;
      break;
    }
    if (n_steps >= iter_limit) break;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(nu, nu);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(lin_.jacobian.transpose(),
                                                    2.0);
    const Eigen::MatrixXd hess_full = hess.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd delta =
        solve_box_qp(hess_full, grad, lb_ - u_flat, ub_ - u_flat);
    if (delta.lpNorm<Eigen::Infinity>() <= 1e-14) break;

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 8; ++halving) {
      double trial;
      try {
        trial = rollout_cost(x0, kappa_seq, u_flat + t * delta);
      } catch (const SingularityError&) {
        trial = kInf;
      } catch (const NumericalError&) {
        trial = kInf;
      }
      if (trial <= lin_.cost + 1e-12 * (1.0 + lin_.cost)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    u_flat += t * delta;
    last_step = t * delta.norm();
    ++n_steps;
  }

  if (!converged && best_cost < lin_.cost) {
    u_flat = u_best;
    linearize(x0, kappa_seq, u_flat, lin_);
    grad.noalias() = 2.0 * lin_.jacobian.transpose() * lin_.residual;
    kkt = projected_gradient_norm(u_flat, grad);
  }

  sol.inputs = Eigen::Map<const Eigen::MatrixXd>(u_flat.data(), 2, n);
  sol.states = lin_.states;
  sol.objective = lin_.cost;
  sol.iterations = n_steps;
  sol.kkt_residual = kkt;
  sol.converged = converged;
  return sol;
}

OcpSolution OcpSolver::solve(const Eigen::Vector4d& x0,
                             const Eigen::VectorXd& kappa_seq,
                             const OcpSolution* warm_start) {
  if (kappa_seq.size() != params_.horizon) {
    throw std::invalid_argument("solve: kappa_seq must have one entry per stage");
  }
  if (!x0.allFinite()) throw NumericalError("solve: non-finite initial state");

  Eigen::VectorXd u0(2 * params_.horizon);
  if (warm_start && warm_start->inputs.size() == 2 * params_.horizon) {
    u0 = flatten_inputs(warm_start->inputs);
  } else {
    for (int i = 0; i < params_.horizon; ++i) {
      u0.segment<2>(2 * i) = reference_input(kappa_seq(i), params_.r_v,
                                             params_.vehicle.wheelbase);
    }
  }
  u0 = u0.cwiseMax(lb_).cwiseMin(ub_);
  return run(x0, kappa_seq, u0, params_.max_iter);
}

OcpSolution OcpSolver::rti(const Eigen::Vector4d& x0,
                           const Eigen::VectorXd& kappa_seq,
                           const OcpSolution& previous) {
  const int n = params_.horizon;
  const Eigen::Index nu = 2 * n;
  if (previous.inputs.size() != nu) {
    return solve(x0, kappa_seq, nullptr);
  }

  const Eigen::VectorXd prev = flatten_inputs(previous.inputs);
  Eigen::VectorXd u_flat(nu);
  u_flat.head(nu - 2) = prev.tail(nu - 2);
  u_flat.tail<2>() = prev.tail<2>();
  u_flat = u_flat.cwiseMax(lb_).cwiseMin(ub_);

  linearize(x0, kappa_seq, u_flat, lin_);
  const double entry_cost = lin_.cost;
  Eigen::VectorXd grad = 2.0 * lin_.jacobian.transpose() * lin_.residual;
  const double kkt = projected_gradient_norm(u_flat, grad);

  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(nu, nu);
  hess.selfadjointView<Eigen::Lower>().rankUpdate(lin_.jacobian.transpose(),
                                                  2.0);
  const Eigen::MatrixXd hess_full = hess.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd delta =
      solve_box_qp(hess_full, grad, lb_ - u_flat, ub_ - u_flat);

  double t = 1.0;
  double step_norm = 0.0;
  for (int halving = 0; halving <= 8; ++halving) {
    double trial;
    try {
      trial = rollout_cost(x0, kappa_seq, u_flat + t * delta);
    } catch (const SingularityError&) {
      trial = kInf;
    } catch (const NumericalError&) {
      trial = kInf;
    }
    if (trial <= entry_cost + 1e-12 * (1.0 + entry_cost)) {
      u_flat += t * delta;
      step_norm = t * delta.norm();
      break;
    }
    t *= 0.5;
  }

  OcpSolution sol;
  sol.inputs = Eigen::Map<const Eigen::MatrixXd>(u_flat.data(), 2, n);
  sol.states.resize(4, n + 1);
  Eigen::Vector4d x = x0;
  sol.states.col(0) = x;
  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d u = u_flat.segment<2>(2 * i);
    const Eigen::Vector2d u_ref =
        reference_input(kappa_seq(i), params_.r_v, params_.vehicle.wheelbase);
    cost += stage_cost(x, u, u_ref, params_);
    x = step_curvilinear(x, u, kappa_seq(i), params_.vehicle,
                         params_.vehicle.ts);
    sol.states.col(i + 1) = x;
  }
  sol.objective = cost + terminal_cost(x, params_);
  sol.iterations = 1;
  sol.kkt_residual = kkt;
  sol.converged = kkt <= params_.tol_kkt;
  sol.trace.push_back({0, entry_cost, kkt, step_norm});
  return sol;
}

Eigen::VectorXd kappa_sequence(const CurvatureProfile& profile, double s_now,
                               const OcpParams& params) {
  Eigen::VectorXd seq(params.horizon);
  for (int i = 0; i < params.horizon; ++i) {
    seq(i) = curvature_at(
        profile, s_now + static_cast<double>(i) * params.vehicle.ts * params.r_v);
  }
  return seq;
}

MpcController::MpcController(const OcpParams& params, Mode mode)
    : solver_(params), mode_(mode) {}

ControlInput MpcController::act(const CurvilinearState& x,
                                const CurvatureProfile& profile) {
  return act_with_sequence(x, kappa_sequence(profile, x.s, solver_.params()));
}

ControlInput MpcController::act_constant_kappa(const CurvilinearState& x,
                                               double kappa) {
  return act_with_sequence(
      x, Eigen::VectorXd::Constant(solver_.params().horizon, kappa));
}

ControlInput MpcController::act_with_sequence(const CurvilinearState& x,
                                              const Eigen::VectorXd& kappa_seq) {
  if (mode_ == Mode::kFull) {
    last_ = solver_.solve(x.vec(), kappa_seq, has_last_ ? &last_ : nullptr);
    if (!last_.converged) {
      std::cerr << "mpc: returning best non-converged iterate (kkt "
                << last_.kkt_residual << ")\n";
    }
  } else {
    last_ = has_last_ ? solver_.rti(x.vec(), kappa_seq, last_)
                      : solver_.solve(x.vec(), kappa_seq, nullptr);
  }
  has_last_ = true;
  const Eigen::Vector2d u = solver_.params().bounds().clamp(last_.inputs.col(0));
  return ControlInput::from(u);
}

void export_solver_diagnostics(const OcpSolution& solution,
                               const std::string& path) {
  CsvWriter csv(path, {"iter", "objective", "kkt_residual", "step_norm"});
  for (const IterationRecord& rec : solution.trace) {
    csv.row({CsvWriter::cell(rec.iter), CsvWriter::cell(rec.objective),
             CsvWriter::cell(rec.kkt_residual), CsvWriter::cell(rec.step_norm)});
  }
}

}  // namespace gpmpc
