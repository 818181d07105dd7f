#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "gpmpc/config.hpp"
#include "gpmpc/controller.hpp"
#include "gpmpc/csv.hpp"
#include "gpmpc/gp.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/pipeline.hpp"
#include "gpmpc/random.hpp"
#include "gpmpc/sim.hpp"
#include "gpmpc/track.hpp"

namespace {

using namespace gpmpc;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
};

Config load_or_default(const GlobalArgs& args) {
  return args.config_path.empty() ? default_config()
                                  : load_config(args.config_path);
}

void ensure_out(const GlobalArgs& args) {
  std::filesystem::create_directories(args.out_dir);
}

nlohmann::json timing_to_json(const TimingStats& t) {
  return {{"median", t.median}, {"mean", t.mean}, {"p25", t.p25},
          {"p75", t.p75},       {"min", t.min},   {"max", t.max},
          {"n", t.n}};
}

void write_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

int run_generate_data(const GlobalArgs& args) {
  const Config config = load_or_default(args);
  ensure_out(args);

  const FeatureDomain domain = FeatureDomain::defaults(config.ocp);
  Rng rng(args.seed);
  const std::vector<ReachableSample> samples =
      sample_reachable(config.ocp, domain, config.pipeline.n_rollouts,
                       config.pipeline.rollout_len, rng);
  std::cout << "sampled " << samples.size() << " reachable features from "
            << config.pipeline.n_rollouts << " rollouts\n";

  Eigen::MatrixXd features(static_cast<Eigen::Index>(samples.size()), 4);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    features.row(i) = samples[static_cast<std::size_t>(i)].xi.transpose();
  }

  Eigen::MatrixXd labeled, labels;
  label_pool(features, config.ocp, labeled, labels);
  std::cout << "labeled " << labeled.rows() << " points ("
            << features.rows() - labeled.rows() << " discarded)\n";

  const int n_test = static_cast<int>(
      std::min<Eigen::Index>(config.pipeline.n_test, labeled.rows() / 4));
  const Dataset data = split_dataset(labeled, labels, n_test, rng);
  save_dataset_csv(data, args.out_dir + "/dataset.csv");
  save_config(config, args.out_dir + "/config_used.json");
  std::cout << "dataset: " << data.pool_features.rows() << " pool + "
            << data.test_features.rows() << " test -> " << args.out_dir
            << "/dataset.csv\n";
  return 0;
}

int run_train(const GlobalArgs& args, std::string dataset_path) {
  const Config config = load_or_default(args);
  ensure_out(args);
  if (dataset_path.empty()) dataset_path = args.out_dir + "/dataset.csv";
  const Dataset data = load_dataset_csv(dataset_path);
  if (data.pool_features.rows() < 1) {
    throw std::runtime_error("empty pool in " + dataset_path);
  }

  SelectionOptions options;
  options.budget = static_cast<int>(std::min<Eigen::Index>(
      config.pipeline.budget, data.pool_features.rows()));
  options.refit_every = config.pipeline.refit_every;
  options.fit_subsample = config.pipeline.fit_subsample;
  options.refit_nm = {config.pipeline.refit_restarts,
                      config.pipeline.refit_evals, args.seed};
  options.initial = config.gp_initial;

  const NmOptions final_nm_vu{config.pipeline.final_restarts,
                              config.pipeline.final_evals, args.seed + 2};
  const NmOptions final_nm_delta{config.pipeline.final_restarts,
                                 config.pipeline.final_evals, args.seed + 3};

  options.seed = args.seed;
  const SelectionResult greedy_vu =
      greedy_select(data.pool_features, data.pool_labels, 0,
                    data.test_features, data.test_labels, options);
  export_selection_trace(greedy_vu, args.out_dir + "/selection_trace_vu.csv");

  options.seed = args.seed + 1;
  const SelectionResult greedy_delta =
      greedy_select(data.pool_features, data.pool_labels, 1,
                    data.test_features, data.test_labels, options);
  export_selection_trace(greedy_delta,
                         args.out_dir + "/selection_trace_delta.csv");

  const int n_deploy = std::min(config.pipeline.n_deploy, options.budget);
  const GpModel model_vu = build_deployment_model(
      data.pool_features, data.pool_labels, 0, greedy_vu.indices, n_deploy,
      greedy_vu.hyper, final_nm_vu, config.pipeline.fit_subsample);
  const GpModel model_delta = build_deployment_model(
      data.pool_features, data.pool_labels, 1, greedy_delta.indices, n_deploy,
      greedy_delta.hyper, final_nm_delta, config.pipeline.fit_subsample);
  save_gp_model(model_vu, args.out_dir + "/gp_model_vu");
  save_gp_model(model_delta, args.out_dir + "/gp_model_delta");

  if (!greedy_vu.trace.empty() && !greedy_delta.trace.empty()) {
    std::cout << "greedy final test RMSE: vu "
              << greedy_vu.trace.back().rmse_vu << ", delta "
              << greedy_delta.trace.back().rmse_delta << "\n";
  }
  std::cout << "models (" << model_vu.size() << " and " << model_delta.size()
            << " points) -> " << args.out_dir << "\n";
  return 0;
}

int run_eval(const GlobalArgs& args, std::string model_dir,
             std::string testset) {
  const Config config = load_or_default(args);
  ensure_out(args);
  if (model_dir.empty()) model_dir = args.out_dir;
  if (testset.empty()) testset = args.out_dir + "/dataset.csv";

  const ApproxController controller = load_approx_controller(
      model_dir, config.ocp.bounds(), config.ocp.vehicle, config.ocp.r_v);
  const Dataset data = load_dataset_csv(testset);
  const bool use_test = data.test_features.rows() > 0;
  const Eigen::MatrixXd& features =
      use_test ? data.test_features : data.pool_features;
  const Eigen::MatrixXd& labels =
      use_test ? data.test_labels : data.pool_labels;

  const PolicyErrorReport report =
      policy_error_report(controller, features, labels);
  export_policy_error(report, args.out_dir + "/error_report.csv");
  std::cout << "error report over " << report.count << " points: RMSE vu "
            << report.rmse(0) << ", delta " << report.rmse(1) << " -> "
            << args.out_dir << "/error_report.csv\n";
  return 0;
}

int run_simulate(const GlobalArgs& args, const std::string& kind,
                 std::string model_dir) {
  Config config = load_or_default(args);
  ensure_out(args);
  if (!kind.empty()) config.sim.kind = controller_kind_from_string(kind);
  config.sim.seed = args.seed;
  if (model_dir.empty()) model_dir = args.out_dir;

  std::optional<ApproxController> gp;
  if (config.sim.kind == ControllerKind::kGp) {
    gp.emplace(load_approx_controller(model_dir, config.ocp.bounds(),
                                      config.ocp.vehicle, config.ocp.r_v));
  }

  const SimResult result =
      simulate(config.sim, config.ocp, gp ? &*gp : nullptr);
  const std::string tag = to_string(config.sim.kind);
  export_sim_trace(result, args.out_dir + "/trace_" + tag + ".csv");

  const Centerline centerline = Centerline::build(config.sim.track);
  export_centerline_csv(centerline, 0.01, args.out_dir + "/centerline.csv");

  // Representative converged solve from the initial state for diagnostics.
  OcpSolver solver(config.ocp);
  Eigen::VectorXd kappa_seq =
      kappa_sequence(config.sim.track, config.sim.x0.s, config.ocp);
  const OcpSolution diag = solver.solve(config.sim.x0.vec(), kappa_seq);
  export_solver_diagnostics(diag, args.out_dir + "/solver_diag.csv");

  nlohmann::json doc;
  doc["kind"] = tag;
  doc["completed"] = result.completed;
  doc["error"] = result.error;
  doc["j_cl"] = result.j_cl;
  doc["lap_count"] = result.lap_count;
  doc["steps"] = result.log.size();
  doc["max_abs_n"] = max_abs_n(result.log);
  doc["max_abs_n_after_first_lap"] = max_abs_n(result.log, 1);
  {
    std::vector<double> times;
    for (std::size_t k = 0; k + 1 < result.log.size(); ++k) {
      times.push_back(result.log[k].compute_time);
    }
    doc["controller_timing"] = timing_to_json(timing_stats(std::move(times)));
  }
  write_json(doc, args.out_dir + "/sim_summary.json");

  std::cout << "simulated " << result.log.size() << " records, J_cl "
            << result.j_cl << ", laps " << result.lap_count << "\n";
  if (!result.completed) {
    std::cerr << "simulation aborted: " << result.error << "\n";
    return 1;
  }
  return 0;
}

int run_benchmark(const GlobalArgs& args, std::string model_dir, int evals) {
  const Config config = load_or_default(args);
  ensure_out(args);
  if (model_dir.empty()) model_dir = args.out_dir;

  const ApproxController controller = load_approx_controller(
      model_dir, config.ocp.bounds(), config.ocp.vehicle, config.ocp.r_v);
  const auto queries = benchmark_queries(config.ocp, evals, args.seed);

  const TimingStats gp = benchmark_gp(controller, queries);
  const TimingStats rti = benchmark_rti(config.ocp, queries);
  const TimingStats full = benchmark_full(config.ocp, queries);

  nlohmann::json doc;
  doc["queries"] = evals;
  doc["seed"] = args.seed;
  doc["n_train_vu"] = controller.model_vu().size();
  doc["n_train_delta"] = controller.model_delta().size();
  doc["gp"] = timing_to_json(gp);
  doc["mpc_rti"] = timing_to_json(rti);
  doc["mpc_full"] = timing_to_json(full);
  doc["speedup_median_rti_over_gp"] =
      gp.median > 0.0 ? rti.median / gp.median : 0.0;
  write_json(doc, args.out_dir + "/benchmark.json");

  std::cout << "median per call: gp " << gp.median << " s, rti " << rti.median
            << " s, full " << full.median << " s (speedup rti/gp "
            << (gp.median > 0.0 ? rti.median / gp.median : 0.0) << ")\n";
  return 0;
}

int run_compare(const GlobalArgs& args, std::string model_dir) {
  Config config = load_or_default(args);
  ensure_out(args);
  if (model_dir.empty()) model_dir = args.out_dir;

  const ApproxController controller = load_approx_controller(
      model_dir, config.ocp.bounds(), config.ocp.vehicle, config.ocp.r_v);

  SimConfig sim_config = config.sim;
  sim_config.seed = args.seed;
  sim_config.kind = ControllerKind::kMpcFull;
  const SimResult mpc = simulate(sim_config, config.ocp, nullptr);
  sim_config.kind = ControllerKind::kGp;
  const SimResult gp = simulate(sim_config, config.ocp, &controller);

  const CompareSummary summary = compare_report(mpc, gp, args.out_dir);
  const Centerline centerline = Centerline::build(config.sim.track);
  export_centerline_csv(centerline, 0.01, args.out_dir + "/centerline.csv");

  std::cout << "J_cl mpc " << summary.j_cl_mpc << ", gp " << summary.j_cl_gp
            << ", ratio " << summary.ratio << "\n";
  std::cout << "max |n| after first lap: mpc " << summary.max_abs_n_mpc
            << ", gp " << summary.max_abs_n_gp << "\n";
  if (!mpc.completed || !gp.completed) {
    std::cerr << "at least one run aborted early\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvilinear MPC imitation with greedy-trained GP residuals"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON config file");
  app.add_option("--seed", args.seed, "RNG seed");
  app.add_option("--out", args.out_dir, "output directory");

  auto* gen = app.add_subcommand(
      "generate-data", "Sample reachable features and label them by MPC");

  std::string dataset_path;
  auto* train = app.add_subcommand(
      "train", "Greedy subset selection and deployment model fit");
  train->add_option("--dataset", dataset_path, "dataset CSV");

  std::string model_dir;
  std::string testset;
  auto* eval = app.add_subcommand("eval", "Error report on a test set");
  eval->add_option("--model-dir", model_dir, "directory with gp_model_*");
  eval->add_option("--testset", testset, "dataset CSV with test rows");

  std::string kind;
  auto* sim = app.add_subcommand("simulate", "Closed-loop simulation");
  sim->add_option("--kind", kind, "mpc-full | mpc-rti | gp");
  sim->add_option("--model-dir", model_dir, "directory with gp_model_*");

  int evals = 1000;
  auto* bench =
      app.add_subcommand("benchmark", "Per-call controller timing");
  bench->add_option("--model-dir", model_dir, "directory with gp_model_*");
  bench->add_option("--evals", evals, "timed evaluations per controller");

  auto* comp = app.add_subcommand(
      "compare", "MPC vs GP closed loop on the same track");
  comp->add_option("--model-dir", model_dir, "directory with gp_model_*");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate_data(args);
    if (train->parsed()) return run_train(args, dataset_path);
    if (eval->parsed()) return run_eval(args, model_dir, testset);
    if (sim->parsed()) return run_simulate(args, kind, model_dir);
    if (bench->parsed()) return run_benchmark(args, model_dir, evals);
    if (comp->parsed()) return run_compare(args, model_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
