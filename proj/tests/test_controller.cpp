#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <vector>

#include "gpmpc/controller.hpp"
#include "gpmpc/csv.hpp"
#include "gpmpc/gp.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/pipeline.hpp"
#include "gpmpc/random.hpp"
#include "gpmpc/types.hpp"
#include "oracles.hpp"

using namespace gpmpc;

namespace {

GpHyperparams unit_hyper(double sigma2 = 1e-4) {
  GpHyperparams hyper;
  hyper.s_f = 1.0;
  hyper.lambda = Eigen::VectorXd::Ones(5);
  hyper.sigma2 = sigma2;
  return hyper;
}

Eigen::MatrixXd domain_features(int n, Rng& rng) {
  const FeatureDomain domain = FeatureDomain::defaults(OcpParams{});
  Eigen::MatrixXd x(n, 4);
  for (int i = 0; i < n; ++i) x.row(i) = domain.sample(rng).transpose();
  return x;
}

// Residual surfaces small enough that feedforward plus residual stays inside
// the input box for |kappa| <= 1.
void smooth_labels(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  y.resize(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    y(i, 0) = 0.08 * std::sin(2.0 * x(i, 0)) - 0.05 * (x(i, 2) - 0.5);
    y(i, 1) = 0.015 * std::tanh(3.0 * x(i, 0)) + 0.01 * x(i, 1);
  }
}

GpModel zero_model(int output_index, Rng& rng) {
  const Eigen::MatrixXd x = domain_features(8, rng);
  return fit_alpha(x, Eigen::VectorXd::Zero(8), unit_hyper(), output_index);
}

ApproxController trained_controller(int n, Rng& rng, double sigma2 = 1e-4) {
  const OcpParams params;
  const Eigen::MatrixXd x = domain_features(n, rng);
  Eigen::MatrixXd y;
  smooth_labels(x, y);
  GpModel vu = fit_alpha(x, y.col(0), unit_hyper(sigma2), 0);
  GpModel delta = fit_alpha(x, y.col(1), unit_hyper(sigma2), 1);
  return ApproxController(std::move(vu), std::move(delta), params.bounds(),
                          params.vehicle, params.r_v);
}

}  // namespace

TEST_CASE("feedforward follows the kinematic turn radius") {
  const ControlInput straight = feedforward(0.0, 0.5, 0.16);
  CHECK(straight.v_u == 0.5);
  CHECK(straight.delta == 0.0);

  const ControlInput corner = feedforward(1.0, 0.5, 0.16);
  CHECK(corner.v_u == 0.5);
  CHECK(corner.delta == doctest::Approx(0.15866).epsilon(5e-5));
  CHECK(corner.delta == std::atan(0.16));

  CHECK(feedforward(-1.0, 0.5, 0.16).delta == -corner.delta);
  CHECK(feedforward(-0.37, 0.5, 0.16).delta ==
        -feedforward(0.37, 0.5, 0.16).delta);
}

TEST_CASE("zero-residual models pass the clamped feedforward through") {
  const OcpParams params;
  Rng rng(51);
  ApproxController controller(zero_model(0, rng), zero_model(1, rng),
                              params.bounds(), params.vehicle, params.r_v);

  for (const double kappa : {0.0, 0.6, -1.1}) {
    CAPTURE(kappa);
    const ControlInput u = controller.act(Eigen::Vector4d(0.1, -0.2, 0.7, kappa));
    CHECK(u.v_u == params.r_v);
    CHECK(u.delta == std::atan(params.vehicle.wheelbase * kappa));
  }

  // arctan(0.16 * 2) = 0.31 rad exceeds the 0.2094 rad steering box.
  const ControlInput wide = controller.act(Eigen::Vector4d(0.0, 0.0, 0.5, 2.0));
  CHECK(wide.delta == params.delta_max);
  const ControlInput wide_neg =
      controller.act(Eigen::Vector4d(0.0, 0.0, 0.5, -2.0));
  CHECK(wide_neg.delta == -params.delta_max);
}

TEST_CASE("residual sums clamp exactly at the bounds") {
  const OcpParams params;
  Rng rng(52);

  const Eigen::Vector4d xi(0.0, 0.0, 0.5, 1.3);
  Eigen::MatrixXd x_single(1, 4);
  x_single.row(0) = xi.transpose();
  const GpModel push_delta =
      fit_alpha(x_single, Eigen::VectorXd::Constant(1, 0.05), unit_hyper(), 1);
  ApproxController steer(zero_model(0, rng), push_delta, params.bounds(),
                         params.vehicle, params.r_v);
  REQUIRE(posterior_mean_fast(steer.model_delta(), xi) > 0.01);
  CHECK(steer.act(xi).delta == params.delta_max);

  const Eigen::Vector4d xv(0.0, 0.0, 1.0, 0.0);
  Eigen::MatrixXd xv_single(1, 4);
  xv_single.row(0) = xv.transpose();
  const GpModel push_vu =
      fit_alpha(xv_single, Eigen::VectorXd::Constant(1, 1.0), unit_hyper(), 0);
  ApproxController speed(push_vu, zero_model(1, rng), params.bounds(),
                         params.vehicle, params.r_v);
  REQUIRE(posterior_mean_fast(speed.model_vu(), xv) > 0.7);
  CHECK(speed.act(xv).v_u == params.v_max);
}

TEST_CASE("curvilinear states map onto the feature vector") {
  Rng rng(53);
  const ApproxController controller = trained_controller(30, rng);
  const CurvilinearState state{2.7, 0.04, -0.12, 0.61};
  const double kappa = 0.8;
  const ControlInput via_state = approx_policy(state, kappa, controller);
  const ControlInput direct =
      controller.act(Eigen::Vector4d(0.04, -0.12, 0.61, kappa));
  CHECK(via_state.v_u == direct.v_u);
  CHECK(via_state.delta == direct.delta);
}

TEST_CASE("outputs stay inside the input box over a dense random sweep") {
  const OcpParams params;
  Rng rng(54);
  const Eigen::MatrixXd x = domain_features(60, rng);
  Eigen::MatrixXd y(60, 2);
  for (int i = 0; i < 60; ++i) {
    y(i, 0) = rng.uniform(-0.8, 0.8);
    y(i, 1) = rng.uniform(-0.5, 0.5);
  }
  ApproxController controller(fit_alpha(x, y.col(0), unit_hyper(), 0),
                              fit_alpha(x, y.col(1), unit_hyper(), 1),
                              params.bounds(), params.vehicle, params.r_v);

  const FeatureDomain domain = FeatureDomain::defaults(params);
  int clamped = 0;
  for (int i = 0; i < 100000; ++i) {
    const ControlInput u = controller.act(domain.sample(rng));
    REQUIRE(u.v_u >= params.v_min);
    REQUIRE(u.v_u <= params.v_max);
    REQUIRE(std::abs(u.delta) <= params.delta_max);
    if (u.v_u == params.v_min || u.v_u == params.v_max ||
        std::abs(u.delta) == params.delta_max) {
      ++clamped;
    }
  }
  CHECK(clamped > 0);
}

TEST_CASE("identical queries return bit-identical inputs") {
  Rng rng(55);
  const ApproxController controller = trained_controller(40, rng);
  Rng qrng(56);
  const FeatureDomain domain = FeatureDomain::defaults(OcpParams{});
  for (int i = 0; i < 25; ++i) {
    const Eigen::Vector4d xi = domain.sample(qrng);
    const ControlInput a = controller.act(xi);
    const ControlInput b = controller.act(xi);
    CHECK(a.v_u == b.v_u);
    CHECK(a.delta == b.delta);
  }
}

TEST_CASE("saved controllers evaluate identically after loading") {
  const OcpParams params;
  Rng rng(57);
  const ApproxController controller = trained_controller(35, rng);

  oracles::TempDir dir("controller_models");
  save_gp_model(controller.model_vu(), dir.file("gp_model_vu"));
  save_gp_model(controller.model_delta(), dir.file("gp_model_delta"));
  const ApproxController loaded = load_approx_controller(
      dir.str(), params.bounds(), params.vehicle, params.r_v);

  Rng qrng(58);
  const FeatureDomain domain = FeatureDomain::defaults(params);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector4d xi = domain.sample(qrng);
    const ControlInput a = controller.act(xi);
    const ControlInput b = loaded.act(xi);
    CHECK(a.v_u == b.v_u);
    CHECK(a.delta == b.delta);
  }
}

TEST_CASE("outputs vary continuously along a curvature slice") {
  Rng rng(59);
  const ApproxController controller = trained_controller(40, rng);
  const OcpParams params;
  const double kappa_max = std::tan(params.delta_max) / params.vehicle.wheelbase;

  const int steps = 500;
  const double dk = 2.0 * kappa_max / steps;

  // Kernel slope bound along standardized kappa, mapped to raw units, as in
  // the posterior Lipschitz check; the feedforward adds at most L.
  const auto kernel_slope = [&](const GpModel& model) {
    const double q_hi =
        std::max(std::abs((kappa_max - model.feat_mean(3)) / model.feat_std(3)),
                 std::abs((-kappa_max - model.feat_mean(3)) / model.feat_std(3)));
    double lip = 0.0;
    for (Eigen::Index i = 0; i < model.size(); ++i) {
      lip += std::abs(model.alpha(i)) * model.hyper.lambda(4) *
             (std::abs(model.features(i, 3)) + q_hi);
    }
    return model.hyper.s_f * (2.0 / std::sqrt(3.0)) * lip / model.feat_std(3);
  };
  const double bound_vu = kernel_slope(controller.model_vu());
  const double bound_delta =
      kernel_slope(controller.model_delta()) + params.vehicle.wheelbase;

  Eigen::Vector4d xi(0.05, -0.1, 0.6, 0.0);
  ControlInput prev{};
  for (int step = 0; step <= steps; ++step) {
    xi(3) = -kappa_max + dk * step;
    const ControlInput u = controller.act(xi);
    if (step > 0) {
      CHECK(std::abs(u.v_u - prev.v_u) <= bound_vu * dk + 1e-12);
      CHECK(std::abs(u.delta - prev.delta) <= bound_delta * dk + 1e-12);
    }
    prev = u;
  }
}

TEST_CASE("policy error report is empty for an empty test set") {
  Rng rng(60);
  const ApproxController controller = trained_controller(20, rng);
  const PolicyErrorReport report = policy_error_report(
      controller, Eigen::MatrixXd(0, 4), Eigen::MatrixXd(0, 2));
  CHECK(report.count == 0);
  CHECK(report.rmse(0) == 0.0);
  CHECK(report.rmse(1) == 0.0);
  CHECK(report.max_abs(0) == 0.0);
  CHECK(report.max_abs(1) == 0.0);
}

TEST_CASE("interpolation-trained controllers match the encoded expert") {
  const OcpParams params;
  Rng rng(61);
  Eigen::MatrixXd x(150, 4);
  for (int i = 0; i < 150; ++i) {
    x.row(i) << rng.uniform(-0.25, 0.25), rng.uniform(-0.5, 0.5),
        rng.uniform(0.1, 1.1), rng.uniform(-1.0, 1.0);
  }
  Eigen::MatrixXd y;
  smooth_labels(x, y);
  const double sigma2 = 1e-6;
  ApproxController controller(fit_alpha(x, y.col(0), unit_hyper(sigma2), 0),
                              fit_alpha(x, y.col(1), unit_hyper(sigma2), 1),
                              params.bounds(), params.vehicle, params.r_v);

  const PolicyErrorReport report = policy_error_report(controller, x, y);
  REQUIRE(report.count == 150);
  CHECK(report.rmse(0) <= 3.0 * std::sqrt(sigma2));
  CHECK(report.rmse(1) <= 3.0 * std::sqrt(sigma2));
}

TEST_CASE("test error shrinks along the greedy selection trace") {
  const FeatureDomain domain = FeatureDomain::defaults(OcpParams{});
  Rng rng(62);
  Eigen::MatrixXd x(400, 4), xt(100, 4);
  for (int i = 0; i < 400; ++i) x.row(i) = domain.sample(rng).transpose();
  for (int i = 0; i < 100; ++i) xt.row(i) = domain.sample(rng).transpose();
  Eigen::MatrixXd y, yt;
  smooth_labels(x, y);
  smooth_labels(xt, yt);

  SelectionOptions opt;
  opt.budget = 120;
  opt.refit_every = 0;
  opt.seed = 12;
  opt.initial = unit_hyper();
  const SelectionResult res = greedy_select(x, y, 0, xt, yt, opt);
  REQUIRE(res.trace.size() == 120);
  CHECK(res.trace[119].rmse_vu <= res.trace[19].rmse_vu);
  CHECK(res.trace[119].rmse_delta <= res.trace[19].rmse_delta);
}

TEST_CASE("evaluation cost grows linearly with the active set") {
  const OcpParams params;
  Rng rng(63);
  const std::vector<int> sizes = {250, 500, 1000, 2000};
  std::vector<double> per_eval;

  Rng qrng(64);
  const Eigen::MatrixXd queries = domain_features(512, qrng);
  double sink = 0.0;

  for (const int n : sizes) {
    const Eigen::MatrixXd x = domain_features(n, rng);
    Eigen::MatrixXd y;
    smooth_labels(x, y);
    GpHyperparams hyper = unit_hyper(1e-2);
    ApproxController controller(fit_alpha(x, y.col(0), hyper, 0),
                                fit_alpha(x, y.col(1), hyper, 1),
                                params.bounds(), params.vehicle, params.r_v);

    for (int i = 0; i < 512; ++i) {
      sink += controller.act(queries.row(i).transpose()).v_u;
    }
    double best = 1e100;
    for (int rep = 0; rep < 5; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      for (int pass = 0; pass < 8; ++pass) {
        for (int i = 0; i < 512; ++i) {
          sink += controller.act(queries.row(i).transpose()).v_u;
        }
      }
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;
      best = std::min(best, elapsed.count() / (8.0 * 512.0));
    }
    per_eval.push_back(best);
  }
  CHECK(std::isfinite(sink));

  const auto m = static_cast<double>(sizes.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    sx += sizes[i];
    sy += per_eval[i];
    sxx += static_cast<double>(sizes[i]) * sizes[i];
    sxy += sizes[i] * per_eval[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double fit = intercept + slope * sizes[i];
    ss_res += (per_eval[i] - fit) * (per_eval[i] - fit);
    ss_tot += (per_eval[i] - sy / m) * (per_eval[i] - sy / m);
  }
  CAPTURE(per_eval[0]);
  CAPTURE(per_eval[1]);
  CAPTURE(per_eval[2]);
  CAPTURE(per_eval[3]);
  CHECK(slope > 0.0);
  CHECK(1.0 - ss_res / ss_tot >= 0.95);
}

TEST_CASE("policy error export writes one row per output") {
  Rng rng(65);
  const ApproxController controller = trained_controller(25, rng);
  const Eigen::MatrixXd x = domain_features(30, rng);
  Eigen::MatrixXd y;
  smooth_labels(x, y);
  const PolicyErrorReport report = policy_error_report(controller, x, y);

  oracles::TempDir dir("controller_report");
  const std::string path = dir.file("policy_error.csv");
  export_policy_error(report, path);

  const CsvTable table = read_csv(path);
  REQUIRE(table.columns ==
          std::vector<std::string>{"output", "rmse", "max_abs", "count"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][0] == "vu");
  CHECK(table.rows[1][0] == "delta");
  CHECK(std::stod(table.rows[0][1]) == report.rmse(0));
  CHECK(std::stod(table.rows[1][1]) == report.rmse(1));
  CHECK(std::stod(table.rows[0][2]) == report.max_abs(0));
  CHECK(std::stod(table.rows[1][2]) == report.max_abs(1));
  CHECK(std::stoi(table.rows[0][3]) == report.count);
}
