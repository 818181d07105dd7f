#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

namespace gpmpc {

// Hyperparameters of the arcsine (neural-network) kernel
//   k(a, b) = s_f * asin( a~' L b~ / sqrt((1 + 2 a~' L a~)(1 + 2 b~' L b~)) )
// over bias-augmented features a~ = [1, a']', with L = diag(lambda).
struct GpHyperparams {
  double s_f = 1.0;
  Eigen::VectorXd lambda;  // size n_features + 1 (bias coordinate first)
  double sigma2 = 1e-4;

  void validate() const;
};

// One fitted GP for a single output dimension. Features are stored in
// standardized form together with the constants needed to map raw queries
// into the same space. The caches make the fast posterior mean a single
// matrix-vector product plus an arcsine pass.
struct GpModel {
  int output_index = 0;
  GpHyperparams hyper;
  Eigen::VectorXd feat_mean;  // raw-feature shift, size n_features
  Eigen::VectorXd feat_std;   // raw-feature scale, size n_features
  Eigen::MatrixXd features;   // n x n_features, standardized
  Eigen::VectorXd labels;     // n
  Eigen::VectorXd alpha;      // n, solves (K + sigma2 I) alpha = labels

  // Derived caches (rebuilt on load, never serialized):
  Eigen::MatrixXd aug_lambda;  // n x (n_features+1), row i = xi_aug_i' * L
  Eigen::VectorXd sqrt_gain;   // n, sqrt(1 + 2 xi_aug_i' L xi_aug_i)
  Eigen::MatrixXd chol_lower;  // lower Cholesky factor of K + sigma2 I

  Eigen::Index size() const { return alpha.size(); }
  Eigen::Index feature_dim() const { return feat_mean.size(); }

  Eigen::VectorXd standardize(
      const Eigen::Ref<const Eigen::VectorXd>& xi_raw) const {
    return (xi_raw - feat_mean).cwiseQuotient(feat_std);
  }
};

// Kernel value for a single pair of (already model-space) feature vectors.
// The arcsine argument is clamped into [-1, 1]; an excursion beyond 1e-12 is
// a numerical error.
double nn_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_prime,
                 const GpHyperparams& hyper);

// Pairwise kernel matrix of the rows of x.
Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const GpHyperparams& hyper);

// Fits alpha = (K + sigma2 I)^-1 y by Cholesky factorization. When
// standardize is true the constants are computed from x_raw; otherwise the
// features are taken as already standardized (mean 0 / scale 1 constants).
GpModel fit_alpha(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y,
                  const GpHyperparams& hyper, int output_index,
                  bool standardize = true);

// Posterior mean k_*' alpha with the precomputed weight vector; linear cost
// in the number of training points. An optional workspace avoids per-call
// allocation on hot paths.
double posterior_mean_fast(const GpModel& model,
                           const Eigen::Ref<const Eigen::VectorXd>& xi_raw,
                           Eigen::VectorXd* workspace = nullptr);

// Exact posterior mean and variance via fresh Cholesky solves against the
// stored factor (the textbook formulas, used as the oracle for the fast
// path). Variance is clamped at zero.
std::pair<double, double> posterior_full(
    const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& xi_raw);

// Log marginal likelihood of (x, y) under the kernel hyperparameters.
double log_marginal_likelihood(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const GpHyperparams& hyper);

// Derivative-free simplex settings for the likelihood fit.
struct NmOptions {
  int restarts = 5;
  int max_evals = 500;  // objective evaluations per restart
  std::uint64_t seed = 0;
};

// Maximizes the log marginal likelihood over log(s_f), log(lambda),
// log(sigma2) with a Nelder-Mead simplex and random restarts. Deterministic
// given the seed; never returns hyperparameters with a worse likelihood than
// the initial guess.
GpHyperparams optimize_hyperparams(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   const GpHyperparams& initial,
                                   const NmOptions& options = {});

// Appends one row to the lower-triangular Cholesky factor held in the
// top-left n x n block of l (preallocated at capacity >= n+1). k_cross holds
// the kernel values against the existing n points, diag the new diagonal
// entry including the noise term. Returns false when the pivot is not
// positive.
bool cholesky_append(Eigen::MatrixXd& l, Eigen::Index n,
                     const Eigen::VectorXd& k_cross, double diag);

// Plain-text model files with a format-version line; doubles carry full
// round-trip precision. Loading rebuilds all caches and verifies the alpha
// residual invariant.
void save_gp_model(const GpModel& model, const std::string& path);
GpModel load_gp_model(const std::string& path);

}  // namespace gpmpc
