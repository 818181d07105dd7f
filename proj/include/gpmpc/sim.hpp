#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gpmpc/controller.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/random.hpp"
#include "gpmpc/track.hpp"
#include "gpmpc/types.hpp"

namespace gpmpc {

enum class ControllerKind { kMpcFull, kMpcRti, kGp };

// Which model the simulated plant integrates. Cartesian is the ground truth;
// the curvilinear plant exists to cross-check the coordinate transforms.
enum class PlantModel { kCartesian, kCurvilinear };

ControllerKind controller_kind_from_string(const std::string& name);
std::string to_string(ControllerKind kind);

struct SimConfig {
  CurvatureProfile track;
  ControllerKind kind = ControllerKind::kMpcFull;
  PlantModel plant = PlantModel::kCartesian;
  double duration = 30.0;       // [s]
  double control_period = 0.01; // [s]
  int substeps = 10;            // plant RK4 substeps per control period
  std::uint64_t seed = 0;
  CurvilinearState x0{0.0, 0.05, 0.0, 0.3};

  void validate() const;
};

struct SimRecord {
  double t = 0.0;
  CurvilinearState curv;
  CartesianState cart;
  ControlInput input;
  double compute_time = 0.0;  // controller call wall time [s]
  int lap = 0;
};

struct SimResult {
  std::vector<SimRecord> log;
  double j_cl = 0.0;
  int lap_count = 0;
  bool completed = false;
  std::string error;
  SimConfig config;
};

// Closed-loop simulation: at every control period the plant state is
// projected into curvilinear coordinates, the configured controller is
// queried, and the input is held over the substeps. s wraps on closed
// tracks and a backward jump of more than half the length counts a lap.
// Projection or model-singularity failures end the run early with the
// partial log and the error string set.
SimResult simulate(const SimConfig& config, const OcpParams& params,
                   const ApproxController* gp_controller);

// Mean stage cost over the applied inputs (the last record repeats the final
// input and is excluded), with the input reference rebuilt from the local
// curvature at each record.
double closed_loop_cost(const std::vector<SimRecord>& log,
                        const OcpParams& params,
                        const CurvatureProfile& profile);

// Largest |n| over records with lap >= min_lap (over the whole log when no
// record reaches min_lap).
double max_abs_n(const std::vector<SimRecord>& log, int min_lap = 0);

// Trace CSV `t,s,n,alpha,v,p_x,p_y,psi,v_u,delta,lap`; compute times are
// wall-clock measurements and deliberately stay out of the file.
void export_sim_trace(const SimResult& result, const std::string& path);

struct TimingStats {
  double median = 0.0;
  double mean = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double min = 0.0;
  double max = 0.0;
  int n = 0;
};

TimingStats timing_stats(std::vector<double> samples);

// Per-call wall time of the deployed GP law over iid feature-domain queries
// (100 discarded warm-up calls first).
TimingStats benchmark_gp(const ApproxController& controller,
                         const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries,
                         int warmup = 100);

// Per-call wall time of one real-time iteration, chained along the query
// sequence after one full solve primes the warm start.
TimingStats benchmark_rti(const OcpParams& params,
                          const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries,
                          int warmup = 100);

// Per-call wall time of a converged solve from cold start at every query.
TimingStats benchmark_full(const OcpParams& params,
                           const Eigen::Matrix<double, Eigen::Dynamic, 4>& queries,
                           int warmup = 10);

// Feature-domain queries shared by all benchmark subjects.
Eigen::Matrix<double, Eigen::Dynamic, 4> benchmark_queries(
    const OcpParams& params, int n, std::uint64_t seed);

struct CompareSummary {
  double j_cl_mpc = 0.0;
  double j_cl_gp = 0.0;
  double ratio = 0.0;
  double max_abs_n_mpc = 0.0;
  double max_abs_n_gp = 0.0;
  TimingStats timing_mpc;
  TimingStats timing_gp;
};

// Writes per-controller trace CSVs plus a JSON summary with both costs,
// their ratio, and the timing statistics. Throws std::invalid_argument when
// the two runs used different tracks.
CompareSummary compare_report(const SimResult& mpc, const SimResult& gp,
                              const std::string& out_dir);

}  // namespace gpmpc
