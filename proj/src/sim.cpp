#include "gpmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

#include "gpmpc/csv.hpp"
#include "gpmpc/dynamics.hpp"
#include "gpmpc/errors.hpp"
#include "gpmpc/pipeline.hpp"

namespace gpmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ControllerKind controller_kind_from_string(const std::string& name) {
  if (name == "mpc-full") return ControllerKind::kMpcFull;
  if (name == "mpc-rti") return ControllerKind::kMpcRti;
  if (name == "gp") return ControllerKind::kGp;
  throw std::invalid_argument("unknown controller kind: " + name);
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kMpcFull:
      return "mpc-full";
    case ControllerKind::kMpcRti:
      return "mpc-rti";
    case ControllerKind::kGp:
      return "gp";
  }
  return "unknown";
}

void SimConfig::validate() const {
  track.validate();
  if (duration <= 0.0) throw std::invalid_argument("duration must be > 0");
  if (control_period <= 0.0) {
    throw std::invalid_argument("control period must be > 0");
  }
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
}

SimResult simulate(const SimConfig& config, const OcpParams& params,
                   const ApproxController* gp_controller) {
  config.validate();
  if (config.kind == ControllerKind::kGp && gp_controller == nullptr) {
    throw std::invalid_argument("gp simulation needs a trained controller");
  }

  SimResult result;
  result.config = config;

  const Centerline centerline = Centerline::build(config.track);
  const double length = config.track.total_length();
  const bool closed = config.track.closed;
  const auto n_steps = static_cast<int>(
      std::floor(config.duration / config.control_period + 1e-9));
  const double sub_ts = config.control_period / config.substeps;
  result.log.reserve(static_cast<std::size_t>(n_steps) + 1);

  MpcController mpc(params, config.kind == ControllerKind::kMpcRti
                                ? MpcController::Mode::kRti
                                : MpcController::Mode::kFull);

  Eigen::Vector4d cart = centerline.to_cartesian(config.x0).vec();
  Eigen::Vector4d curv = config.x0.vec();
  double s_hint = closed ? wrap_s(config.track, config.x0.s) : config.x0.s;
  double s_prev = s_hint;
  int laps = 0;

  try {
    for (int k = 0; k <= n_steps; ++k) {
      CurvilinearState meas;
      CartesianState cart_state;
      if (config.plant == PlantModel::kCartesian) {
        cart_state = CartesianState::from(cart);
        meas = centerline.to_curvilinear(cart_state, s_hint);
      } else {
        meas = CurvilinearState::from(curv);
        if (closed) meas.s = wrap_s(config.track, meas.s);
        cart_state = centerline.to_cartesian(meas);
      }
      if (k > 0 && closed && s_prev - meas.s > 0.5 * length) ++laps;
      s_prev = meas.s;
      s_hint = meas.s;

      SimRecord rec;
      rec.t = k * config.control_period;
      rec.curv = meas;
      rec.cart = cart_state;
      rec.lap = laps;

      if (k == n_steps) {
        // Final record repeats the last applied input; nothing is applied.
        rec.input = result.log.empty() ? ControlInput{0.0, 0.0}
                                       : result.log.back().input;
        result.log.push_back(rec);
        break;
      }

      const auto start = Clock::now();
      ControlInput u;
      if (config.kind == ControllerKind::kGp) {
        const double kappa = curvature_at(config.track, meas.s);
        u = approx_policy(meas, kappa, *gp_controller);
      } else {
        u = mpc.act(meas, config.track);
      }
      rec.compute_time = seconds_since(start);
      rec.input = u;
      result.log.push_back(rec);

      for (int i = 0; i < config.substeps; ++i) {
        if (config.plant == PlantModel::kCartesian) {
          cart = step_cartesian(cart, u.vec(), params.vehicle, sub_ts);
        } else {
          curv = step_curvilinear_profile(curv, u.vec(), config.track,
                                          params.vehicle, sub_ts);
        }
      }
    }
    result.completed = true;
  } catch (const ProjectionError& e) {
    result.error = e.what();
  } catch (const SingularityError& e) {
    result.error = e.what();
  } catch (const NumericalError& e) {
    result.error = e.what();
  }

  result.lap_count = laps;
  result.j_cl = result.log.empty()
                    ? 0.0
                    : closed_loop_cost(result.log, params, config.track);
  return result;
}

double closed_loop_cost(const std::vector<SimRecord>& log,
                        const OcpParams& params,
                        const CurvatureProfile& profile) {
  if (log.empty()) return 0.0;
  const std::size_t n_cl = log.size() > 1 ? log.size() - 1 : log.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < n_cl; ++k) {
    const SimRecord& rec = log[k];
    const Eigen::Vector2d u_ref =
        reference_input(curvature_at(profile, rec.curv.s), params.r_v,
                        params.vehicle.wheelbase);
    sum += stage_cost(rec.curv.vec(), rec.input.vec(), u_ref, params);
  }
  return sum / static_cast<double>(n_cl);
}

double max_abs_n(const std::vector<SimRecord>& log, int min_lap) {
  double best = 0.0;
  bool any = false;
  for (const SimRecord& rec : log) {
    if (rec.lap >= min_lap) {
      best = std::max(best, std::abs(rec.curv.n));
      any = true;
    }
  }
  if (!any) {
    for (const SimRecord& rec : log) {
      best = std::max(best, std::abs(rec.curv.n));
    }
  }
  return best;
}

void export_sim_trace(const SimResult& result, const std::string& path) {
  CsvWriter csv(path, {"t", "s", "n", "alpha", "v", "p_x", "p_y", "psi", "v_u",
                       "delta", "lap"});
  for (const SimRecord& rec : result.log) {
    csv.row({CsvWriter::cell(rec.t), CsvWriter::cell(rec.curv.s),
             CsvWriter::cell(rec.curv.n), CsvWriter::cell(rec.curv.alpha),
             CsvWriter::cell(rec.curv.v), CsvWriter::cell(rec.cart.px),
             CsvWriter::cell(rec.cart.py), CsvWriter::cell(rec.cart.psi),
             CsvWriter::cell(rec.input.v_u), CsvWriter::cell(rec.input.delta),
             CsvWriter::cell(rec.lap)});
  }
}

TimingStats timing_stats(std::vector<double> samples) {
  TimingStats stats;
  stats.n = static_cast<int>(samples.size());
  if (samples.empty()) return stats;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  stats.min = samples.front();
  stats.max = samples.back();
  stats.mean =
      std::accumulate(samples.begin(), samples.end(), 0.0) /
      static_cast<double>(n);
  stats.median = n % 2 == 1 ? samples[n / 2]
                            : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(n))) ;
    return samples[std::min(n - 1, idx == 0 ? 0 : idx - 1)];
  };
  stats.p25 = rank(0.25);
  stats.p75 = rank(0.75);
  return stats;
}

Eigen::Matrix<double, Eigen::Dynamic, 4> benchmark_queries(
    const OcpParams& params, int n, std::uint64_t seed) {
  const FeatureDomain domain = FeatureDomain::defaults(params);
  Rng rng(seed);
  Eigen::Matrix<double, Eigen::Dynamic, 4> queries(n, 4);
  for (int i = 0; i < n; ++i) {
    queries.row(i) = domain.sample(rng).transpose();
  }
  return queries;
}

TimingStats benchmark_gp(
    const ApproxController& controller,
    const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries, int warmup) {
  const Eigen::Index n = queries.rows();
  if (n < 1) throw std::invalid_argument("benchmark needs queries");
  double sink = 0.0;
  for (int i = 0; i < warmup; ++i) {
    sink += controller.act(queries.row(i % n).transpose()).v_u;
  }
  std::vector<double> samples(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector4d xi = queries.row(i).transpose();
    const auto start = Clock::now();
    const ControlInput u = controller.act(xi);
    samples[static_cast<std::size_t>(i)] = seconds_since(start);
    sink += u.v_u + u.delta;
  }
  if (!std::isfinite(sink)) throw NumericalError("benchmark produced nan");
  return timing_stats(std::move(samples));
}

namespace {

CurvilinearState query_state(const Eigen::Vector4d& xi) {
  return CurvilinearState{0.0, xi(0), xi(1), xi(2)};
}

TimingStats benchmark_mpc(const OcpParams& params,
                          const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries,
                          int warmup, MpcController::Mode mode,
                          bool cold_start) {
  const Eigen::Index n = queries.rows();
  if (n < 1) throw std::invalid_argument("benchmark needs queries");
  MpcController controller(params, mode);
  double sink = 0.0;
  for (int i = 0; i < warmup; ++i) {
    const Eigen::Vector4d xi = queries.row(i % n).transpose();
    if (cold_start) controller.reset();
    sink += controller.act_constant_kappa(query_state(xi), xi(3)).v_u;
  }
  if (!cold_start && warmup == 0) {
    // Prime the warm start so every timed call is a plain iteration.
    const Eigen::Vector4d xi = queries.row(0).transpose();
    controller.act_constant_kappa(query_state(xi), xi(3));
  }
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector4d xi = queries.row(i).transpose();
    if (cold_start) controller.reset();
    try {
      const auto start = Clock::now();
      const ControlInput u = controller.act_constant_kappa(query_state(xi), xi(3));
      samples.push_back(seconds_since(start));
      sink += u.v_u + u.delta;
    } catch (const NumericalError&) {
      controller.reset();
    } catch (const SingularityError&) {
      controller.reset();
    }
  }
  if (!std::isfinite(sink)) throw NumericalError("benchmark produced nan");
  return timing_stats(std::move(samples));
}

}  // namespace

TimingStats benchmark_rti(
    const OcpParams& params,
    const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries, int warmup) {
  return benchmark_mpc(params, queries, warmup, MpcController::Mode::kRti,
                       false);
}

TimingStats benchmark_full(
    const OcpParams& params,
    const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries, int warmup) {
  return benchmark_mpc(params, queries, warmup, MpcController::Mode::kFull,
                       true);
}

namespace {

nlohmann::json timing_json(const TimingStats& stats) {
  return {{"median", stats.median}, {"mean", stats.mean},
          {"p25", stats.p25},       {"p75", stats.p75},
          {"min", stats.min},       {"max", stats.max},
          {"n", stats.n}};
}

TimingStats log_timing(const std::vector<SimRecord>& log) {
  std::vector<double> samples;
  samples.reserve(log.size());
  for (std::size_t k = 0; k + 1 < log.size(); ++k) {
    samples.push_back(log[k].compute_time);
  }
  return timing_stats(std::move(samples));
}

bool same_profile(const CurvatureProfile& a, const CurvatureProfile& b) {
  return a.closed == b.closed &&
         a.breakpoints.size() == b.breakpoints.size() &&
         a.kappas.size() == b.kappas.size() &&
         (a.breakpoints.array() == b.breakpoints.array()).all() &&
         (a.kappas.array() == b.kappas.array()).all();
}

}  // namespace

CompareSummary compare_report(const SimResult& mpc, const SimResult& gp,
                              const std::string& out_dir) {
  if (!same_profile(mpc.config.track, gp.config.track)) {
    throw std::invalid_argument("compared runs used different tracks");
  }

  CompareSummary summary;
  summary.j_cl_mpc = mpc.j_cl;
  summary.j_cl_gp = gp.j_cl;
  summary.ratio = mpc.j_cl > 0.0 ? gp.j_cl / mpc.j_cl : 0.0;
  summary.max_abs_n_mpc = max_abs_n(mpc.log, 1);
  summary.max_abs_n_gp = max_abs_n(gp.log, 1);
  summary.timing_mpc = log_timing(mpc.log);
  summary.timing_gp = log_timing(gp.log);

  export_sim_trace(mpc, out_dir + "/trace_mpc.csv");
  export_sim_trace(gp, out_dir + "/trace_gp.csv");

  nlohmann::json doc;
  doc["mpc"] = {{"kind", to_string(mpc.config.kind)},
                {"j_cl", mpc.j_cl},
                {"lap_count", mpc.lap_count},
                {"max_abs_n_after_first_lap", summary.max_abs_n_mpc},
                {"completed", mpc.completed},
                {"timing", timing_json(summary.timing_mpc)}};
  doc["gp"] = {{"kind", to_string(gp.config.kind)},
               {"j_cl", gp.j_cl},
               {"lap_count", gp.lap_count},
               {"max_abs_n_after_first_lap", summary.max_abs_n_gp},
               {"completed", gp.completed},
               {"timing", timing_json(summary.timing_gp)}};
  doc["j_cl_ratio"] = summary.ratio;

  std::ofstream out(out_dir + "/compare_summary.json");
  if (!out) throw std::runtime_error("cannot write " + out_dir +
                                     "/compare_summary.json");
  out << doc.dump(2) << "\n";
  return summary;
}

}  // namespace gpmpc
