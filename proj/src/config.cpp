#include "gpmpc/config.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <vector>

#include "gpmpc/track.hpp"

namespace gpmpc {

namespace {

using nlohmann::json;

Eigen::VectorXd to_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  Eigen::Index i = 0;
  for (const auto& x : arr) v(i++) = x.get<double>();
  return v;
}

json from_vector(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

CurvatureProfile parse_track(const json& node) {
  if (node.is_string()) {
    const std::string name = node.get<std::string>();
    if (name == "benchmark") return benchmark_track();
    if (name == "straight") return straight_track(20.0);
    if (name == "circle") return circle_track(1.0);
    throw std::invalid_argument("unknown track name: " + name);
  }
  CurvatureProfile profile;
  profile.breakpoints = to_vector(node.at("breakpoints"));
  profile.kappas = to_vector(node.at("kappas"));
  profile.closed = node.value("closed", false);
  profile.validate();
  return profile;
}

}  // namespace

Config default_config() {
  Config config;
  config.gp_initial.lambda = Eigen::VectorXd::Ones(5);
  config.sim.track = benchmark_track();
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path);
  json doc = json::parse(in);

  Config config = default_config();

  if (doc.contains("vehicle")) {
    const json& v = doc["vehicle"];
    VehicleParams& vp = config.ocp.vehicle;
    vp.wheelbase = v.value("wheelbase", vp.wheelbase);
    vp.speed_lag = v.value("speed_lag", vp.speed_lag);
    vp.ts = v.value("ts", vp.ts);
  }

  if (doc.contains("ocp")) {
    const json& o = doc["ocp"];
    OcpParams& p = config.ocp;
    p.w1 = o.value("w1", p.w1);
    p.w2 = o.value("w2", p.w2);
    p.w3 = o.value("w3", p.w3);
    if (o.contains("w_u")) {
      const Eigen::VectorXd wu = to_vector(o["w_u"]);
      if (wu.size() != 2) throw std::invalid_argument("w_u needs 2 entries");
      p.w_u = wu.asDiagonal();
    }
    p.horizon = o.value("horizon", p.horizon);
    p.r_v = o.value("r_v", p.r_v);
    p.v_min = o.value("v_min", p.v_min);
    p.v_max = o.value("v_max", p.v_max);
    if (o.contains("delta_max")) {
      const double dmax = o["delta_max"].get<double>();
      p.delta_max = dmax;
      p.delta_min = -dmax;
    }
    p.tol_kkt = o.value("tol_kkt", p.tol_kkt);
    p.max_iter = o.value("max_iter", p.max_iter);
  }

  if (doc.contains("gp")) {
    const json& g = doc["gp"];
    GpHyperparams& h = config.gp_initial;
    h.s_f = g.value("s_f", h.s_f);
    h.sigma2 = g.value("sigma2", h.sigma2);
    if (g.contains("lambda")) h.lambda = to_vector(g["lambda"]);
  }

  if (doc.contains("pipeline")) {
    const json& pl = doc["pipeline"];
    PipelineConfig& p = config.pipeline;
    p.n_rollouts = pl.value("n_rollouts", p.n_rollouts);
    p.rollout_len = pl.value("rollout_len", p.rollout_len);
    p.n_test = pl.value("n_test", p.n_test);
    p.budget = pl.value("budget", p.budget);
    p.refit_every = pl.value("refit_every", p.refit_every);
    p.fit_subsample = pl.value("fit_subsample", p.fit_subsample);
    p.refit_restarts = pl.value("refit_restarts", p.refit_restarts);
    p.refit_evals = pl.value("refit_evals", p.refit_evals);
    p.final_restarts = pl.value("final_restarts", p.final_restarts);
    p.final_evals = pl.value("final_evals", p.final_evals);
    p.n_deploy = pl.value("n_deploy", p.n_deploy);
  }

  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    SimConfig& sc = config.sim;
    if (s.contains("kind")) {
      sc.kind = controller_kind_from_string(s["kind"].get<std::string>());
    }
    if (s.contains("plant")) {
      const std::string plant = s["plant"].get<std::string>();
      if (plant == "cartesian") {
        sc.plant = PlantModel::kCartesian;
      } else if (plant == "curvilinear") {
        sc.plant = PlantModel::kCurvilinear;
      } else {
        throw std::invalid_argument("unknown plant model: " + plant);
      }
    }
    sc.duration = s.value("duration", sc.duration);
    sc.control_period = s.value("control_period", sc.control_period);
    sc.substeps = s.value("substeps", sc.substeps);
    sc.seed = s.value("seed", sc.seed);
    if (s.contains("x0")) {
      const json& x0 = s["x0"];
      sc.x0.s = x0.value("s", sc.x0.s);
      sc.x0.n = x0.value("n", sc.x0.n);
      sc.x0.alpha = x0.value("alpha", sc.x0.alpha);
      sc.x0.v = x0.value("v", sc.x0.v);
    }
    if (s.contains("track")) sc.track = parse_track(s["track"]);
  }

  return config;
}

void save_config(const Config& config, const std::string& path) {
  json doc;
  doc["vehicle"] = {{"wheelbase", config.ocp.vehicle.wheelbase},
                    {"speed_lag", config.ocp.vehicle.speed_lag},
                    {"ts", config.ocp.vehicle.ts}};
  doc["ocp"] = {{"w1", config.ocp.w1},
                {"w2", config.ocp.w2},
                {"w3", config.ocp.w3},
                {"w_u", json::array({config.ocp.w_u(0, 0), config.ocp.w_u(1, 1)})},
                {"horizon", config.ocp.horizon},
                {"r_v", config.ocp.r_v},
                {"v_min", config.ocp.v_min},
                {"v_max", config.ocp.v_max},
                {"delta_max", config.ocp.delta_max},
                {"tol_kkt", config.ocp.tol_kkt},
                {"max_iter", config.ocp.max_iter}};
  doc["gp"] = {{"s_f", config.gp_initial.s_f},
               {"sigma2", config.gp_initial.sigma2},
               {"lambda", from_vector(config.gp_initial.lambda)}};
  doc["pipeline"] = {{"n_rollouts", config.pipeline.n_rollouts},
                     {"rollout_len", config.pipeline.rollout_len},
                     {"n_test", config.pipeline.n_test},
                     {"budget", config.pipeline.budget},
                     {"refit_every", config.pipeline.refit_every},
                     {"fit_subsample", config.pipeline.fit_subsample},
                     {"refit_restarts", config.pipeline.refit_restarts},
                     {"refit_evals", config.pipeline.refit_evals},
                     {"final_restarts", config.pipeline.final_restarts},
                     {"final_evals", config.pipeline.final_evals},
                     {"n_deploy", config.pipeline.n_deploy}};
  doc["sim"] = {{"kind", to_string(config.sim.kind)},
                {"plant", config.sim.plant == PlantModel::kCartesian
                              ? "cartesian"
                              : "curvilinear"},
                {"duration", config.sim.duration},
                {"control_period", config.sim.control_period},
                {"substeps", config.sim.substeps},
                {"seed", config.sim.seed},
                {"x0",
                 {{"s", config.sim.x0.s},
                  {"n", config.sim.x0.n},
                  {"alpha", config.sim.x0.alpha},
                  {"v", config.sim.x0.v}}},
                {"track",
                 {{"breakpoints", from_vector(config.sim.track.breakpoints)},
                  {"kappas", from_vector(config.sim.track.kappas)},
                  {"closed", config.sim.track.closed}}}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace gpmpc
