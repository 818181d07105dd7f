#include "gpmpc/controller.hpp"

#include <cmath>
#include <utility>

#include "gpmpc/csv.hpp"

namespace gpmpc {

ControlInput feedforward(double kappa, double r_v, double wheelbase) {
  return {r_v, std::atan(wheelbase * kappa)};
}

ApproxController::ApproxController(GpModel gp_vu, GpModel gp_delta,
                                   const InputBounds& bounds,
                                   const VehicleParams& vehicle, double r_v)
    : gp_vu_(std::move(gp_vu)),
      gp_delta_(std::move(gp_delta)),
      bounds_(bounds),
      vehicle_(vehicle),
      r_v_(r_v) {
  if (gp_vu_.feature_dim() != 4 || gp_delta_.feature_dim() != 4) {
    throw std::invalid_argument("controller expects 4-dimensional features");
  }
}

ControlInput ApproxController::act(const Eigen::Vector4d& xi) const {
  const ControlInput ff = feedforward(xi(3), r_v_, vehicle_.wheelbase);
  const Eigen::Vector2d raw(
      ff.v_u + posterior_mean_fast(gp_vu_, xi, &ws_vu_),
      ff.delta + posterior_mean_fast(gp_delta_, xi, &ws_delta_));
  return ControlInput::from(bounds_.clamp(raw));
}

ControlInput approx_policy(const CurvilinearState& state, double kappa,
                           const ApproxController& controller) {
  return controller.act(Eigen::Vector4d(state.n, state.alpha, state.v, kappa));
}

ApproxController load_approx_controller(const std::string& model_dir,
                                        const InputBounds& bounds,
                                        const VehicleParams& vehicle,
                                        double r_v) {
  GpModel vu = load_gp_model(model_dir + "/gp_model_vu");
  GpModel delta = load_gp_model(model_dir + "/gp_model_delta");
  return ApproxController(std::move(vu), std::move(delta), bounds, vehicle,
                          r_v);
}

PolicyErrorReport policy_error_report(const ApproxController& controller,
                                      const Eigen::MatrixXd& features,
                                      const Eigen::MatrixXd& labels) {
  PolicyErrorReport report;
  report.count = features.rows();
  if (report.count == 0) return report;

  Eigen::Vector2d sq_sum = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Eigen::Vector4d xi = features.row(i).transpose();
    const ControlInput ff =
        feedforward(xi(3), controller.r_v(), controller.vehicle().wheelbase);
    const Eigen::Vector2d exact =
        ff.vec() + labels.row(i).transpose();
    const Eigen::Vector2d err = controller.act(xi).vec() - exact;
    sq_sum += err.cwiseAbs2();
    report.max_abs = report.max_abs.cwiseMax(err.cwiseAbs());
  }
  report.rmse = (sq_sum / static_cast<double>(report.count)).cwiseSqrt();
  return report;
}

void export_policy_error(const PolicyErrorReport& report,
                         const std::string& path) {
  CsvWriter csv(path, {"output", "rmse", "max_abs", "count"});
  csv.row({"vu", CsvWriter::cell(report.rmse(0)),
           CsvWriter::cell(report.max_abs(0)), CsvWriter::cell(report.count)});
  csv.row({"delta", CsvWriter::cell(report.rmse(1)),
           CsvWriter::cell(report.max_abs(1)), CsvWriter::cell(report.count)});
}

}  // namespace gpmpc
