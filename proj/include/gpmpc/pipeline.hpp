#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gpmpc/gp.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/random.hpp"

namespace gpmpc {

// Box of admissible feature vectors (n, alpha, v, kappa).
struct FeatureDomain {
  Eigen::Vector4d lower;
  Eigen::Vector4d upper;

  // n within +-0.3 m, alpha within +-0.6 rad, v spanning the velocity bounds,
  // kappa up to the curvature a saturated steady steering can hold.
  static FeatureDomain defaults(const OcpParams& params);

  bool contains(const Eigen::Vector4d& xi) const {
    return (xi.array() >= lower.array()).all() &&
           (xi.array() <= upper.array()).all();
  }
  Eigen::Vector4d sample(Rng& rng) const;
};

struct ReachableSample {
  Eigen::Vector4d xi;
  int rollout = 0;
};

// Approximates the closed-loop reachable set: uniform draws from the domain
// are rolled out under the full MPC policy on randomized piecewise-linear
// curvature profiles; every visited in-domain feature joins the pool.
// Rollouts hitting a model singularity are truncated.
std::vector<ReachableSample> sample_reachable(const OcpParams& params,
                                              const FeatureDomain& domain,
                                              int n_rollouts, int rollout_len,
                                              Rng& rng);

// Residual label for one feature on a constant-curvature horizon:
// first optimal input minus feedforward. False when the solve fails to
// converge (the sample must then be discarded).
bool label_sample(const Eigen::Vector4d& xi, OcpSolver& solver,
                  Eigen::Vector2d& label);

// Labels every feature row, keeping only converged solves.
void label_pool(const Eigen::MatrixXd& features, const OcpParams& params,
                Eigen::MatrixXd& labeled_features, Eigen::MatrixXd& labels);

// Labeled pool plus held-out test split.
struct Dataset {
  Eigen::MatrixXd pool_features;  // n_pool x 4
  Eigen::MatrixXd pool_labels;    // n_pool x 2
  Eigen::MatrixXd test_features;  // n_test x 4
  Eigen::MatrixXd test_labels;    // n_test x 2
};

// Moves n_test uniformly chosen labeled rows into the test split.
Dataset split_dataset(const Eigen::MatrixXd& features,
                      const Eigen::MatrixXd& labels, int n_test, Rng& rng);

struct SelectionOptions {
  int budget = 2000;
  int refit_every = 250;
  // Hyperparameter refits run on at most this many points of the current
  // training set (evenly strided), with the reduced simplex budget below.
  int fit_subsample = 320;
  NmOptions refit_nm{2, 200, 0};
  GpHyperparams initial;
  std::uint64_t seed = 0;
};

struct SelectionStep {
  int step = 0;  // training-set size after the addition
  int index = 0;
  double pre_error = 0.0;
  double rmse_vu = 0.0;
  double rmse_delta = 0.0;
};

struct SelectionResult {
  std::vector<int> indices;
  std::vector<SelectionStep> trace;
  GpHyperparams hyper;  // hyperparameters in effect after the last refit
};

// Greedy error-maximizing selection for the GP predicting output_index: a
// uniformly chosen seed point, then repeatedly the not-yet-selected pool
// point with the largest absolute prediction error (ties to the smallest
// index). Alpha is refit incrementally after every addition; both outputs'
// test RMSE is recorded per step.
SelectionResult greedy_select(const Eigen::MatrixXd& pool_features,
                              const Eigen::MatrixXd& pool_labels,
                              int output_index,
                              const Eigen::MatrixXd& test_features,
                              const Eigen::MatrixXd& test_labels,
                              const SelectionOptions& options);

// Uniform selection without replacement.
std::vector<int> random_select(int pool_size, int budget, Rng& rng);

// RMSE curves for a prescribed selection order under the same refit cadence
// as greedy_select; evaluates the random baseline.
SelectionResult evaluate_selection(const Eigen::MatrixXd& pool_features,
                                   const Eigen::MatrixXd& pool_labels,
                                   int output_index,
                                   const std::vector<int>& order,
                                   const Eigen::MatrixXd& test_features,
                                   const Eigen::MatrixXd& test_labels,
                                   const SelectionOptions& options);

// Deployment model from the first n_deploy entries of a selection trace,
// with standardization constants recomputed on that training set and a
// final hyperparameter fit.
GpModel build_deployment_model(const Eigen::MatrixXd& pool_features,
                               const Eigen::MatrixXd& pool_labels,
                               int output_index,
                               const std::vector<int>& selection, int n_deploy,
                               const GpHyperparams& initial,
                               const NmOptions& final_nm, int fit_subsample);

// Dataset file: CSV `n,alpha,v,kappa,dvu,ddelta,source`, source in
// {pool, test}.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

// Selection trace: CSV `step,index,pre_error,rmse_vu,rmse_delta`.
void export_selection_trace(const SelectionResult& result,
                            const std::string& path);

}  // namespace gpmpc
