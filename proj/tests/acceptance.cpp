// Acceptance gate: every release-blocking property of the pipeline checked
// end to end, one verdict line per criterion. Exits nonzero on any failure.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gpmpc/controller.hpp"
#include "gpmpc/gp.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/pipeline.hpp"
#include "gpmpc/random.hpp"
#include "gpmpc/sim.hpp"
#include "gpmpc/track.hpp"
#include "oracles.hpp"

namespace {

using namespace gpmpc;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

class Runner {
 public:
  void criterion(int id, const std::string& label,
                 const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%2d/12] %s %s: %s (%.1f s)\n", id, out.pass ? "PASS" : "FAIL",
                label.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures_;
  }

  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

void setup_line(const std::string& what, double secs) {
  std::printf("        setup: %s (%.1f s)\n", what.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome check_fast_mean() {
  OcpParams params;
  const FeatureDomain domain = FeatureDomain::defaults(params);
  Rng rng(1001);
  GpHyperparams hyper;
  hyper.lambda = Eigen::VectorXd::Ones(5);
  hyper.sigma2 = 1e-3;
  const int n_train = 200;
  double worst = 0.0;
  for (int output = 0; output < 2; ++output) {
    Eigen::MatrixXd x(n_train, 4);
    for (int i = 0; i < n_train; ++i) x.row(i) = domain.sample(rng).transpose();
    Eigen::MatrixXd x_std = x;
    for (int j = 0; j < 4; ++j) {
      x_std.col(j).array() -= x_std.col(j).mean();
      const double sd = std::max(
          std::sqrt(x_std.col(j).squaredNorm() / double(n_train - 1)), 1e-12);
      x_std.col(j) /= sd;
    }
    Eigen::MatrixXd k = gram(x_std, hyper);
    k.diagonal().array() += hyper.sigma2;
    const Eigen::LLT<Eigen::MatrixXd> llt(k);
    Eigen::VectorXd z(n_train);
    for (int i = 0; i < n_train; ++i) z(i) = rng.normal();
    const Eigen::VectorXd y = Eigen::MatrixXd(llt.matrixL()) * z;
    const GpModel model = fit_alpha(x, y, hyper, output);
    for (int q = 0; q < 1000; ++q) {
      const Eigen::Vector4d xi = domain.sample(rng);
      const double fast = posterior_mean_fast(model, xi);
      const double full = posterior_full(model, xi).first;
      worst = std::max(worst,
                       std::abs(fast - full) / (1.0 + std::abs(full)));
    }
  }
  return {worst <= 1e-12, "max relative gap " + num(worst) +
                              " over 2x1000 queries at 200 points, tol 1e-12"};
}

Outcome check_kernel_validity() {
  OcpParams params;
  const FeatureDomain domain = FeatureDomain::defaults(params);
  Rng rng(1002);
  double min_eig = std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(50));
    GpHyperparams hyper;
    hyper.s_f = std::exp(rng.uniform(std::log(0.1), std::log(5.0)));
    hyper.lambda.resize(5);
    for (int j = 0; j < 5; ++j) {
      hyper.lambda(j) = std::exp(rng.uniform(std::log(1e-3), std::log(3.0)));
    }
    Eigen::MatrixXd x(n, 4);
    for (int i = 0; i < n; ++i) x.row(i) = domain.sample(rng).transpose();
    const Eigen::MatrixXd k = gram(x, hyper);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    worst_ratio = std::max(
        worst_ratio, k.cwiseAbs().maxCoeff() / (hyper.s_f * M_PI / 6.0));
  }
  const bool pass = min_eig >= -1e-10 && worst_ratio < 1.0;
  return {pass, "min eigenvalue " + num(min_eig) +
                    " (floor -1e-10), largest entry at " +
                    num(100.0 * worst_ratio) + "% of the s_f*pi/6 cap"};
}

Outcome check_equilibrium() {
  OcpParams params;
  OcpSolver solver(params);
  const Eigen::Vector4d x0(0.0, 0.0, 0.0, params.r_v);
  const OcpSolution straight =
      solver.solve(x0, Eigen::VectorXd::Zero(params.horizon));
  const double err_v = std::abs(straight.inputs(0, 0) - params.r_v);
  const double err_delta = std::abs(straight.inputs(1, 0));
  const OcpSolution corner =
      solver.solve(x0, Eigen::VectorXd::Ones(params.horizon));
  const double err_ff =
      std::abs(corner.inputs(1, 0) - std::atan(params.vehicle.wheelbase));
  const bool pass = straight.converged && corner.converged && err_v <= 1e-6 &&
                    err_delta <= 1e-6 && straight.objective <= 1e-10 &&
                    err_ff <= 1e-4;
  return {pass, "equilibrium input error " + num(std::max(err_v, err_delta)) +
                    " (tol 1e-6), objective " + num(straight.objective) +
                    " (tol 1e-10), cornering steer error " + num(err_ff) +
                    " (tol 1e-4)"};
}

Outcome check_two_stage_oracle() {
  OcpParams params;
  params.horizon = 2;
  OcpSolver solver(params);
  Rng rng(1004);
  double worst_v = 0.0;
  double worst_delta = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector4d x0(0.0, rng.uniform(-0.15, 0.15),
                             rng.uniform(-0.4, 0.4), rng.uniform(0.1, 1.1));
    const Eigen::VectorXd kappa =
        Eigen::VectorXd::Constant(2, rng.uniform(-1.3, 1.3));
    const oracles::TwoStageOptimum opt =
        oracles::brute_force_two_stage(params, x0, kappa);
    const OcpSolution sol = solver.solve(x0, kappa);
    if (!sol.converged) {
      return {false, "solver did not converge on state " +
                         std::to_string(trial)};
    }
    worst_v = std::max(
        worst_v, std::abs(sol.inputs(0, 0) - opt.u0(0)) / opt.grid_dv);
    worst_delta = std::max(
        worst_delta, std::abs(sol.inputs(1, 0) - opt.u0(1)) / opt.grid_ddelta);
  }
  const bool pass = worst_v <= 1.0 && worst_delta <= 1.0;
  return {pass, "first-input gap " + num(worst_v) + " (v_u) and " +
                    num(worst_delta) +
                    " (delta) grid spacings over 20 states, tol 1.0"};
}

Outcome check_gradient() {
  OcpParams params;
  OcpSolver solver(params);
  Rng rng(1005);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector4d x0(0.0, rng.uniform(-0.15, 0.15),
                             rng.uniform(-0.4, 0.4), rng.uniform(0.1, 1.1));
    Eigen::VectorXd kappa(params.horizon);
    for (int i = 0; i < params.horizon; ++i) kappa(i) = rng.uniform(-1.3, 1.3);
    Eigen::VectorXd u_flat(2 * params.horizon);
    for (int i = 0; i < params.horizon; ++i) {
      u_flat(2 * i) = rng.uniform(params.v_min, params.v_max);
      u_flat(2 * i + 1) = rng.uniform(params.delta_min, params.delta_max);
    }
    const Eigen::VectorXd grad = solver.cost_gradient(x0, kappa, u_flat);
    const Eigen::VectorXd fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& u) {
          return solver.rollout_cost(x0, kappa, u);
        },
        u_flat, 1e-6);
    worst = std::max(worst, (grad - fd).lpNorm<Eigen::Infinity>() /
                                (1.0 + fd.lpNorm<Eigen::Infinity>()));
  }
  return {worst <= 1e-4, "max relative gradient error " + num(worst) +
                             " over 50 iterates, tol 1e-4"};
}

// The smoke-scale comparison holds hyperparameters equal across the two
// arms: with only one refit inside a 300-point budget, each arm's fit is
// conditioned on its own subsample and the Nelder-Mead outcome dominates the
// RMSE gap, drowning the selection-rule signal the inequality is about. The
// deployment-scale comparison keeps the production refit cadence.
Outcome check_greedy_beats_random(const Dataset& data,
                                  const SelectionResult& deployed_vu,
                                  const SelectionResult& deployed_delta) {
  const int n_pool = 2000;
  const int n_test = 500;
  if (data.pool_features.rows() < n_pool ||
      data.test_features.rows() < n_test) {
    return {false, "dataset too small for the reduced selection run"};
  }
  const Eigen::MatrixXd pool_x = data.pool_features.topRows(n_pool);
  const Eigen::MatrixXd pool_y = data.pool_labels.topRows(n_pool);
  const Eigen::MatrixXd test_x = data.test_features.topRows(n_test);
  const Eigen::MatrixXd test_y = data.test_labels.topRows(n_test);

  SelectionOptions options;
  options.budget = 300;
  options.refit_every = 0;
  options.initial.lambda = Eigen::VectorXd::Ones(5);

  options.seed = 61;
  const SelectionResult greedy_vu =
      greedy_select(pool_x, pool_y, 0, test_x, test_y, options);
  options.seed = 62;
  const SelectionResult greedy_delta =
      greedy_select(pool_x, pool_y, 1, test_x, test_y, options);

  Rng rng(63);
  const std::vector<int> order = random_select(n_pool, options.budget, rng);
  const SelectionResult random_vu =
      evaluate_selection(pool_x, pool_y, 0, order, test_x, test_y, options);
  const SelectionResult random_delta =
      evaluate_selection(pool_x, pool_y, 1, order, test_x, test_y, options);

  const double g_vu = greedy_vu.trace.back().rmse_vu;
  const double r_vu = random_vu.trace.back().rmse_vu;
  const double g_delta = greedy_delta.trace.back().rmse_delta;
  const double r_delta = random_delta.trace.back().rmse_delta;

  SelectionOptions medium;
  medium.budget = static_cast<int>(
      std::min<Eigen::Index>(1000, data.pool_features.rows()));
  medium.refit_every = 250;
  medium.fit_subsample = 320;
  medium.refit_nm = {2, 200, 101};
  medium.initial.lambda = Eigen::VectorXd::Ones(5);
  Rng rng_medium(103);
  const std::vector<int> order_medium =
      random_select(static_cast<int>(data.pool_features.rows()),
                    medium.budget, rng_medium);
  medium.seed = 101;
  const SelectionResult random_vu_medium = evaluate_selection(
      data.pool_features, data.pool_labels, 0, order_medium,
      data.test_features, data.test_labels, medium);
  medium.seed = 102;
  const SelectionResult random_delta_medium = evaluate_selection(
      data.pool_features, data.pool_labels, 1, order_medium,
      data.test_features, data.test_labels, medium);

  const double gm_vu = deployed_vu.trace.back().rmse_vu;
  const double rm_vu = random_vu_medium.trace.back().rmse_vu;
  const double gm_delta = deployed_delta.trace.back().rmse_delta;
  const double rm_delta = random_delta_medium.trace.back().rmse_delta;

  const bool pass = g_vu <= r_vu && g_delta <= r_delta && gm_vu <= rm_vu &&
                    gm_delta <= rm_delta;
  return {pass, "test RMSE greedy vs random, hyper-matched smoke: v_u " +
                    num(g_vu) + " vs " + num(r_vu) + ", delta " +
                    num(g_delta) + " vs " + num(r_delta) +
                    "; deployed scale with refits: v_u " + num(gm_vu) +
                    " vs " + num(rm_vu) + ", delta " + num(gm_delta) +
                    " vs " + num(rm_delta)};
}

Outcome check_scaling(const OcpParams& params) {
  GpHyperparams hyper;
  hyper.lambda = Eigen::VectorXd::Ones(5);
  hyper.sigma2 = 1e-2;
  const FeatureDomain domain = FeatureDomain::defaults(params);
  const auto make_controller = [&](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y_vu(n);
    Eigen::VectorXd y_delta(n);
    for (int i = 0; i < n; ++i) {
      x.row(i) = domain.sample(rng).transpose();
      y_vu(i) = 0.01 * rng.normal();
      y_delta(i) = 0.01 * rng.normal();
    }
    GpModel vu = fit_alpha(x, y_vu, hyper, 0);
    GpModel delta = fit_alpha(x, y_delta, hyper, 1);
    return ApproxController(std::move(vu), std::move(delta), params.bounds(),
                            params.vehicle, params.r_v);
  };
  const ApproxController small = make_controller(1000, 201);
  const ApproxController large = make_controller(2000, 202);
  const auto queries = benchmark_queries(params, 2000, 78);
  // Interleaved repetitions with a min-of-medians estimate per size damp
  // machine-load drift between the two measurements.
  double t_small = std::numeric_limits<double>::infinity();
  double t_large = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 3; ++rep) {
    t_small = std::min(t_small, benchmark_gp(small, queries).median);
    t_large = std::min(t_large, benchmark_gp(large, queries).median);
  }
  const double ratio = t_small > 0.0 ? t_large / t_small : 0.0;
  const bool pass = ratio >= 1.4 && ratio <= 2.6;
  return {pass, "median per call " + num(t_small) + " s at 1000 points, " +
                    num(t_large) + " s at 2000, ratio " + num(ratio) +
                    " (need 1.4..2.6)"};
}

Outcome check_transform_consistency() {
  OcpParams params;
  SimConfig cart;
  cart.track = straight_track(20.0);
  cart.kind = ControllerKind::kMpcFull;
  cart.duration = 3.0;
  SimConfig curv = cart;
  curv.plant = PlantModel::kCurvilinear;
  const SimResult res_cart = simulate(cart, params, nullptr);
  const SimResult res_curv = simulate(curv, params, nullptr);
  if (!res_cart.completed || !res_curv.completed ||
      res_cart.log.size() != res_curv.log.size()) {
    return {false, "straight-track runs did not complete identically"};
  }
  double worst_plant = 0.0;
  for (std::size_t k = 0; k < res_cart.log.size(); ++k) {
    const Eigen::Vector4d d =
        res_cart.log[k].curv.vec() - res_curv.log[k].curv.vec();
    worst_plant = std::max(worst_plant, d.lpNorm<Eigen::Infinity>());
  }

  const Centerline centerline = Centerline::build(circle_track(1.0));
  const double length = circle_track(1.0).total_length();
  Rng rng(1011);
  double worst_round = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    CurvilinearState state;
    state.s = rng.uniform(0.1, length - 0.1);
    state.n = rng.uniform(-0.3, 0.3);
    state.alpha = rng.uniform(-0.5, 0.5);
    state.v = rng.uniform(0.1, 1.2);
    const CartesianState cart_state = centerline.to_cartesian(state);
    const CurvilinearState back =
        centerline.to_curvilinear(cart_state, state.s);
    worst_round = std::max(
        {worst_round, std::abs(back.s - state.s), std::abs(back.n - state.n),
         std::abs(back.alpha - state.alpha), std::abs(back.v - state.v)});
  }
  const bool pass = worst_plant <= 1e-6 && worst_round <= 1e-6;
  return {pass, "plant-model state gap " + num(worst_plant) +
                    " per step, projection round trip " + num(worst_round) +
                    ", tol 1e-6 each"};
}

Outcome check_cli_determinism() {
  const oracles::TempDir dir("acceptance_cli");
  const std::string config_path = dir.file("smoke.json");
  {
    std::ofstream out(config_path);
    out << R"({
  "pipeline": {"n_rollouts": 12, "rollout_len": 40, "n_test": 120,
               "budget": 60, "refit_every": 30, "fit_subsample": 128,
               "refit_restarts": 1, "refit_evals": 80,
               "final_restarts": 1, "final_evals": 100, "n_deploy": 60},
  "sim": {"duration": 3.0}
})";
  }
  const std::string log_path = dir.file("cli.log");
  const std::vector<std::string> commands = {
      "generate-data", "train",             "eval",
      "simulate --kind gp", "simulate --kind mpc-rti",
      "benchmark --evals 40", "compare"};
  const auto run_into = [&](const std::string& out_dir) -> std::string {
    for (const std::string& cmd : commands) {
      const std::string line = std::string("\"") + GPMPC_CLI_PATH + "\" " +
                               cmd + " --config \"" + config_path +
                               "\" --seed 3 --out \"" + out_dir + "\" >> \"" +
                               log_path + "\" 2>&1";
      if (std::system(line.c_str()) != 0) return cmd;
    }
    return "";
  };

  const std::string dir_a = dir.file("run_a");
  const std::string dir_b = dir.file("run_b");
  for (const std::string& out_dir : {dir_a, dir_b}) {
    const std::string failed = run_into(out_dir);
    if (!failed.empty()) {
      std::string tail = slurp(log_path);
      if (tail.size() > 240) tail = tail.substr(tail.size() - 240);
      for (char& c : tail) {
        if (c == '\n') c = ' ';
      }
      return {false, "'" + failed + "' exited nonzero; log tail: " + tail};
    }
  }

  const auto listing = [](const std::string& root) {
    std::set<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().extension() != ".json") {
        names.insert(entry.path().filename().string());
      }
    }
    return names;
  };
  const std::set<std::string> names_a = listing(dir_a);
  if (names_a.empty()) return {false, "no comparable output files produced"};
  if (names_a != listing(dir_b)) {
    return {false, "the two passes produced different file sets"};
  }
  for (const std::string& name : names_a) {
    if (slurp(dir_a + "/" + name) != slurp(dir_b + "/" + name)) {
      return {false, name + " differs between identically seeded runs"};
    }
  }
  return {true, std::to_string(names_a.size()) +
                    " output files byte-identical across re-runs"};
}

}  // namespace

int main() {
  std::printf("acceptance checks: gp imitation of a curvilinear tracking mpc\n");
  Runner runner;

  runner.criterion(1, "fast posterior mean matches the direct solve",
                   check_fast_mean);
  runner.criterion(2, "kernel matrices stay positive semidefinite and bounded",
                   check_kernel_validity);
  runner.criterion(3, "solver reproduces equilibrium and cornering feedforward",
                   check_equilibrium);
  runner.criterion(4, "short-horizon solutions match a grid-search oracle",
                   check_two_stage_oracle);
  runner.criterion(5, "condensed gradient matches finite differences",
                   check_gradient);

  OcpParams params;
  Dataset data;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const FeatureDomain domain = FeatureDomain::defaults(params);
    Rng rng(42);
    const std::vector<ReachableSample> samples =
        sample_reachable(params, domain, 200, 50, rng);
    Eigen::MatrixXd features(static_cast<Eigen::Index>(samples.size()), 4);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      features.row(i) = samples[static_cast<std::size_t>(i)].xi.transpose();
    }
    Eigen::MatrixXd labeled;
    Eigen::MatrixXd labels;
    label_pool(features, params, labeled, labels);
    data = split_dataset(labeled, labels, 1500, rng);
    setup_line("labeled dataset, pool " +
                   std::to_string(data.pool_features.rows()) + " + test " +
                   std::to_string(data.test_features.rows()),
               seconds_since(t0));
  } catch (const std::exception& e) {
    std::printf("setup failed while building the dataset: %s\n", e.what());
    return 1;
  }

  std::optional<ApproxController> controller;
  SelectionResult greedy_vu;
  SelectionResult greedy_delta;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    SelectionOptions options;
    options.budget = static_cast<int>(
        std::min<Eigen::Index>(1000, data.pool_features.rows()));
    options.refit_every = 250;
    options.fit_subsample = 320;
    options.refit_nm = {2, 200, 101};
    options.initial.lambda = Eigen::VectorXd::Ones(5);

    options.seed = 101;
    greedy_vu = greedy_select(data.pool_features, data.pool_labels, 0,
                              data.test_features, data.test_labels, options);
    options.seed = 102;
    greedy_delta = greedy_select(data.pool_features, data.pool_labels, 1,
                                 data.test_features, data.test_labels,
                                 options);

    GpModel model_vu = build_deployment_model(
        data.pool_features, data.pool_labels, 0, greedy_vu.indices, 1000,
        greedy_vu.hyper, NmOptions{3, 400, 103}, 320);
    GpModel model_delta = build_deployment_model(
        data.pool_features, data.pool_labels, 1, greedy_delta.indices, 1000,
        greedy_delta.hyper, NmOptions{3, 400, 104}, 320);
    const std::string sizes = std::to_string(model_vu.size()) + "+" +
                              std::to_string(model_delta.size());
    controller.emplace(std::move(model_vu), std::move(model_delta),
                       params.bounds(), params.vehicle, params.r_v);
    setup_line("deployed models (" + sizes + " greedily selected points)",
               seconds_since(t0));
  } catch (const std::exception& e) {
    std::printf("setup failed while training the deployed models: %s\n",
                e.what());
    return 1;
  }

  runner.criterion(6, "greedy selection beats random selection on held-out error",
                   [&] {
                     return check_greedy_beats_random(data, greedy_vu,
                                                      greedy_delta);
                   });

  std::optional<SimResult> gp_run;
  runner.criterion(
      7, "closed loop stays within two centimeters after the first lap", [&] {
        SimConfig config;
        config.track = benchmark_track();
        config.kind = ControllerKind::kGp;
        config.duration = 40.0;
        gp_run = simulate(config, params, &*controller);
        const double deviation = max_abs_n(gp_run->log, 1);
        const bool pass =
            gp_run->completed && gp_run->lap_count >= 1 && deviation <= 0.02;
        return Outcome{pass, "max |n| after the first lap " + num(deviation) +
                                 " m (tol 0.02) over " +
                                 std::to_string(gp_run->lap_count) + " laps"};
      });

  runner.criterion(
      8, "closed-loop cost within thirty percent of the exact controller",
      [&] {
        if (!gp_run || !gp_run->completed) {
          return Outcome{false, "no completed gp run to compare against"};
        }
        SimConfig config = gp_run->config;
        config.kind = ControllerKind::kMpcFull;
        const SimResult mpc_run = simulate(config, params, nullptr);
        if (!mpc_run.completed) {
          return Outcome{false, "exact-controller run aborted early"};
        }
        const double ratio =
            mpc_run.j_cl > 0.0 ? gp_run->j_cl / mpc_run.j_cl : 0.0;
        return Outcome{ratio <= 1.3 && ratio > 0.0,
                       "mean stage cost " + num(gp_run->j_cl) + " vs " +
                           num(mpc_run.j_cl) + ", ratio " + num(ratio) +
                           " (tol 1.3)"};
      });

  runner.criterion(
      9, "deployed policy is at least three times faster than one solver iteration",
      [&] {
        const auto queries = benchmark_queries(params, 1000, 77);
        const TimingStats t_gp = benchmark_gp(*controller, queries);
        const TimingStats t_rti = benchmark_rti(params, queries);
        const double speedup =
            t_gp.median > 0.0 ? t_rti.median / t_gp.median : 0.0;
        return Outcome{speedup >= 3.0,
                       "median per call " + num(t_gp.median) + " s vs " +
                           num(t_rti.median) + " s, speedup " + num(speedup) +
                           " (need >= 3)"};
      });

  runner.criterion(10, "evaluation time scales linearly with training-set size",
                   [&] { return check_scaling(params); });
  runner.criterion(11, "curvilinear and cartesian simulations agree",
                   check_transform_consistency);
  runner.criterion(12, "fixed-seed command-line runs are byte-identical",
                   check_cli_determinism);

  if (runner.failures() == 0) {
    std::printf("all 12 criteria passed\n");
    return 0;
  }
  std::printf("%d of 12 criteria failed\n", runner.failures());
  return 1;
}
