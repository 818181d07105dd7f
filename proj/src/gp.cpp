#include "gpmpc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <vector>

#include "gpmpc/csv.hpp"
#include "gpmpc/errors.hpp"
#include "gpmpc/random.hpp"

namespace gpmpc {

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676656;

Eigen::MatrixXd augment(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd aug(x.rows(), x.cols() + 1);
  aug.col(0).setOnes();
  aug.rightCols(x.cols()) = x;
  return aug;
}

void build_caches(GpModel& model) {
  const Eigen::MatrixXd aug = augment(model.features);
  model.aug_lambda = aug * model.hyper.lambda.asDiagonal();
  const Eigen::VectorXd q =
      (model.aug_lambda.array() * aug.array()).rowwise().sum();
  model.sqrt_gain = (1.0 + 2.0 * q.array()).sqrt();
}

Eigen::MatrixXd noisy_gram(const Eigen::MatrixXd& x,
                           const GpHyperparams& hyper) {
  Eigen::MatrixXd k = gram(x, hyper);
  k.diagonal().array() += hyper.sigma2;
  return k;
}

}  // namespace

void GpHyperparams::validate() const {
  if (!(s_f > 0.0) || !(sigma2 > 0.0)) {
    throw std::invalid_argument("kernel scales must be positive");
  }
  if (lambda.size() < 1 || (lambda.array() <= 0.0).any()) {
    throw std::invalid_argument("lambda entries must be positive");
  }
}

double nn_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_prime,
                 const GpHyperparams& hyper) {
  if (xi.size() != xi_prime.size() || xi.size() + 1 != hyper.lambda.size()) {
    throw std::invalid_argument("nn_kernel: dimension mismatch");
  }
  Eigen::VectorXd a(xi.size() + 1), b(xi.size() + 1);
  a(0) = 1.0;
  a.tail(xi.size()) = xi;
  b(0) = 1.0;
  b.tail(xi.size()) = xi_prime;
  const Eigen::VectorXd la = hyper.lambda.cwiseProduct(a);
  const double qa = la.dot(a);
  const double qb = hyper.lambda.cwiseProduct(b).dot(b);
  const double arg = la.dot(b) / std::sqrt((1.0 + 2.0 * qa) * (1.0 + 2.0 * qb));
  if (std::abs(arg) > 1.0 + 1e-12) {
    throw NumericalError("nn_kernel: arcsine argument out of range");
  }
  return hyper.s_f * std::asin(std::clamp(arg, -1.0, 1.0));
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const GpHyperparams& hyper) {
  hyper.validate();
  if (x.cols() + 1 != hyper.lambda.size()) {
    throw std::invalid_argument("gram: feature dimension mismatch");
  }
  const Eigen::MatrixXd aug = augment(x);
  const Eigen::MatrixXd p = aug * hyper.lambda.asDiagonal();
  Eigen::MatrixXd m(x.rows(), x.rows());
  m.noalias() = p * aug.transpose();
  const Eigen::ArrayXd denom = (1.0 + 2.0 * m.diagonal().array()).sqrt();
  // Cauchy-Schwarz gives |m_ij| <= sqrt(q_i q_j) and the denominator exceeds
  // 2 sqrt(q_i q_j), so the arcsine argument stays within [-1/2, 1/2].
  return hyper.s_f *
         (m.array() / (denom.matrix() * denom.matrix().transpose()).array())
             .asin()
             .matrix();
}

GpModel fit_alpha(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y,
                  const GpHyperparams& hyper, int output_index,
                  bool standardize) {
  if (x_raw.rows() != y.size() || x_raw.rows() < 1) {
    throw std::invalid_argument("fit_alpha: feature/label size mismatch");
  }
  hyper.validate();

  GpModel model;
  model.output_index = output_index;
  model.hyper = hyper;
  const Eigen::Index n = x_raw.rows(), d = x_raw.cols();
  if (standardize && n > 1) {
    model.feat_mean = x_raw.colwise().mean().transpose();
    const Eigen::ArrayXd var = (x_raw.rowwise() - model.feat_mean.transpose())
                                   .array()
                                   .square()
                                   .colwise()
                                   .sum()
                                   .transpose() /
                               static_cast<double>(n - 1);
    model.feat_std = var.sqrt().max(1e-12).matrix();
  } else {
    model.feat_mean = Eigen::VectorXd::Zero(d);
    model.feat_std = Eigen::VectorXd::Ones(d);
  }
  model.features = x_raw;
  model.features.rowwise() -= model.feat_mean.transpose();
  model.features = model.features * model.feat_std.cwiseInverse().asDiagonal();
  model.labels = y;

  const Eigen::MatrixXd k = noisy_gram(model.features, hyper);
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw IllConditionedError(
        "fit_alpha: Cholesky of K + sigma2 I failed (duplicate points or "
        "sigma2 too small)");
  }
  model.chol_lower = llt.matrixL();
  model.alpha = llt.solve(y);

  const double residual = (k * model.alpha - y).norm();
  if (residual > 1e-8 * y.norm() + 1e-14) {
    throw IllConditionedError("fit_alpha: alpha residual too large");
  }
  build_caches(model);
  return model;
}

double posterior_mean_fast(const GpModel& model,
                           const Eigen::Ref<const Eigen::VectorXd>& xi_raw,
                           Eigen::VectorXd* workspace) {
  const Eigen::Index d = model.feature_dim();
  const Eigen::Index n = model.size();

  // Workspace layout: augmented query (d+1 entries), then the kernel
  // numerators (n entries). Disjoint segments, so the matvec may stream.
  Eigen::VectorXd local;
  Eigen::VectorXd& ws = workspace ? *workspace : local;
  if (ws.size() != d + 1 + n) ws.resize(d + 1 + n);

  ws(0) = 1.0;
  ws.segment(1, d) = (xi_raw - model.feat_mean).cwiseQuotient(model.feat_std);
  const double q = ws.head(d + 1).cwiseAbs2().dot(model.hyper.lambda);
  const double scale = 1.0 / std::sqrt(1.0 + 2.0 * q);

  ws.tail(n).noalias() = model.aug_lambda * ws.head(d + 1);
  return model.hyper.s_f *
         ((ws.tail(n).array() * scale / model.sqrt_gain.array()).asin() *
          model.alpha.array())
             .sum();
}

std::pair<double, double> posterior_full(
    const GpModel& model, const Eigen::Ref<const Eigen::VectorXd>& xi_raw) {
  const Eigen::Index n = model.size();
  const Eigen::VectorXd xi_std = model.standardize(xi_raw);
  Eigen::VectorXd k_star(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k_star(i) = nn_kernel(model.features.row(i), xi_std, model.hyper);
  }
  const auto lower = model.chol_lower.triangularView<Eigen::Lower>();
  Eigen::VectorXd weights = lower.solve(model.labels);
  lower.transpose().solveInPlace(weights);
  const Eigen::VectorXd wk = lower.solve(k_star);
  const double mean = k_star.dot(weights);
  const double prior = nn_kernel(xi_std, xi_std, model.hyper);
  const double variance = std::max(0.0, prior - wk.squaredNorm());
  return {mean, variance};
}

double log_marginal_likelihood(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const GpHyperparams& hyper) {
  const Eigen::MatrixXd k = noisy_gram(x, hyper);
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw IllConditionedError("log_marginal_likelihood: Cholesky failed");
  }
  const Eigen::VectorXd z = llt.solve(y);
  const double logdet_half =
      llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.dot(z) - logdet_half -
         0.5 * static_cast<double>(y.size()) * std::log(kTwoPi);
}

namespace {

struct LogBox {
  Eigen::VectorXd lo, hi;
};

LogBox hyper_log_bounds(Eigen::Index n_lambda) {
  LogBox box;
  box.lo.resize(n_lambda + 2);
  box.hi.resize(n_lambda + 2);
  box.lo(0) = std::log(1e-6);
  box.hi(0) = std::log(1e3);
  for (Eigen::Index i = 0; i < n_lambda; ++i) {
    box.lo(1 + i) = std::log(1e-6);
    box.hi(1 + i) = std::log(1e4);
  }
  box.lo(n_lambda + 1) = std::log(1e-10);
  box.hi(n_lambda + 1) = std::log(1.0);
  return box;
}

Eigen::VectorXd hyper_to_log(const GpHyperparams& h) {
  Eigen::VectorXd z(h.lambda.size() + 2);
  z(0) = std::log(h.s_f);
  z.segment(1, h.lambda.size()) = h.lambda.array().log();
  z(h.lambda.size() + 1) = std::log(h.sigma2);
  return z;
}

GpHyperparams log_to_hyper(const Eigen::VectorXd& z) {
  GpHyperparams h;
  const Eigen::Index n_lambda = z.size() - 2;
  h.s_f = std::exp(z(0));
  h.lambda = z.segment(1, n_lambda).array().exp();
  h.sigma2 = std::exp(z(n_lambda + 1));
  return h;
}

// Nelder-Mead on f, starting simplex z0 + step e_j. Returns the best vertex
// found within the evaluation budget.
std::pair<Eigen::VectorXd, double> nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& z0, double step, int max_evals) {
  const Eigen::Index dim = z0.size();
  const Eigen::Index m = dim + 1;
  std::vector<Eigen::VectorXd> verts(m, z0);
  std::vector<double> vals(m);
  int evals = 0;
  for (Eigen::Index j = 1; j < m; ++j) verts[j](j - 1) += step;
  for (Eigen::Index j = 0; j < m; ++j) {
    vals[j] = f(verts[j]);
    ++evals;
  }

  std::vector<Eigen::Index> order(m);
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return vals[a] < vals[b];
    });
    const Eigen::Index best = order[0], worst = order[m - 1],
                       second = order[m - 2];
    if (vals[worst] - vals[best] <= 1e-12 * (1.0 + std::abs(vals[best]))) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != worst) centroid += verts[j];
    }
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd refl = centroid + (centroid - verts[worst]);
    const double f_refl = f(refl);
    ++evals;
    if (f_refl < vals[best]) {
      const Eigen::VectorXd expa = centroid + 2.0 * (centroid - verts[worst]);
      const double f_expa = f(expa);
      ++evals;
      if (f_expa < f_refl) {
        verts[worst] = expa;
        vals[worst] = f_expa;
      } else {
        verts[worst] = refl;
        vals[worst] = f_refl;
      }
    } else if (f_refl < vals[second]) {
      verts[worst] = refl;
      vals[worst] = f_refl;
    } else {
      const bool outside = f_refl < vals[worst];
      const double contr_coeff = outside ? 0.5 : -0.5;
      const Eigen::VectorXd contr =
          centroid + contr_coeff * (centroid - verts[worst]);
      const double f_contr = f(contr);
      ++evals;
      if (f_contr < std::min(f_refl, vals[worst])) {
        verts[worst] = contr;
        vals[worst] = f_contr;
      } else {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (j == best) continue;
          verts[j] = verts[best] + 0.5 * (verts[j] - verts[best]);
          vals[j] = f(verts[j]);
          ++evals;
        }
      }
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  return {verts[static_cast<std::size_t>(it - vals.begin())], *it};
}

}  // namespace

GpHyperparams optimize_hyperparams(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   const GpHyperparams& initial,
                                   const NmOptions& options) {
  if (x.rows() < 1 || x.rows() != y.size()) {
    throw std::invalid_argument("optimize_hyperparams: empty or mismatched data");
  }
  initial.validate();
  const Eigen::Index n_lambda = initial.lambda.size();
  const LogBox box = hyper_log_bounds(n_lambda);

  const auto objective = [&](const Eigen::VectorXd& z) -> double {
    const Eigen::VectorXd zc = z.cwiseMax(box.lo).cwiseMin(box.hi);
    const double penalty = 1e3 * (z - zc).squaredNorm();
    try {
      return -log_marginal_likelihood(x, y, log_to_hyper(zc)) + penalty;
    } catch (const IllConditionedError&) {
      return 1e300;
    }
  };

  Rng rng(options.seed);
  Eigen::VectorXd best_z = hyper_to_log(initial).cwiseMax(box.lo).cwiseMin(box.hi);
  double best_val = objective(best_z);

  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd z0(n_lambda + 2);
    if (r == 0) {
      z0 = best_z;
    } else {
      z0(0) = rng.uniform(std::log(1e-2), std::log(1e2));
      for (Eigen::Index i = 0; i < n_lambda; ++i) {
        z0(1 + i) = rng.uniform(std::log(1e-2), std::log(1e2));
      }
      z0(n_lambda + 1) = rng.uniform(std::log(1e-8), std::log(1e-2));
    }
    const auto [z, val] = nelder_mead(objective, z0, 0.4, options.max_evals);
    if (val < best_val) {
      best_val = val;
      best_z = z.cwiseMax(box.lo).cwiseMin(box.hi);
    }
  }

  GpHyperparams fitted = log_to_hyper(best_z);
  try {
    if (log_marginal_likelihood(x, y, fitted) + 1e-12 <
        log_marginal_likelihood(x, y, initial)) {
      std::cerr << "optimize_hyperparams: no improvement over initial guess\n";
      return initial;
    }
  } catch (const IllConditionedError&) {
    return initial;
  }
  return fitted;
}

bool cholesky_append(Eigen::MatrixXd& l, Eigen::Index n,
                     const Eigen::VectorXd& k_cross, double diag) {
  if (l.rows() <= n || l.cols() <= n) {
    throw std::invalid_argument("cholesky_append: factor capacity exceeded");
  }
  if (n == 0) {
    if (diag <= 0.0) return false;
    l(0, 0) = std::sqrt(diag);
    return true;
  }
  const Eigen::VectorXd row =
      l.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(k_cross);
  const double pivot = diag - row.squaredNorm();
  if (pivot <= 0.0) return false;
  l.row(n).head(n) = row.transpose();
  l(n, n) = std::sqrt(pivot);
  return true;
}

void save_gp_model(const GpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  const Eigen::Index n = model.size(), d = model.feature_dim();
  out << "gpmpc-gp-model 1\n";
  out << "output_index " << model.output_index << '\n';
  out << "rows " << n << " cols " << d << '\n';
  out << "s_f " << format_double(model.hyper.s_f) << '\n';
  out << "sigma2 " << format_double(model.hyper.sigma2) << '\n';
  out << "lambda";
  for (Eigen::Index i = 0; i < model.hyper.lambda.size(); ++i) {
    out << ' ' << format_double(model.hyper.lambda(i));
  }
  out << "\nfeat_mean";
  for (Eigen::Index i = 0; i < d; ++i) {
    out << ' ' << format_double(model.feat_mean(i));
  }
  out << "\nfeat_std";
  for (Eigen::Index i = 0; i < d; ++i) {
    out << ' ' << format_double(model.feat_std(i));
  }
  out << "\nfeatures_std\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j) out << ' ';
      out << format_double(model.features(i, j));
    }
    out << '\n';
  }
  out << "labels\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(model.labels(i)) << '\n';
  }
  out << "alpha\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(model.alpha(i)) << '\n';
  }
}

GpModel load_gp_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);

  const auto expect = [&](const std::string& token) {
    std::string word;
    if (!(in >> word) || word != token) {
      throw std::runtime_error("model file " + path + ": expected '" + token +
                               "', got '" + word + "'");
    }
  };

  expect("gpmpc-gp-model");
  int version = 0;
  in >> version;
  if (version != 1) {
    throw std::runtime_error("model file " + path + ": unsupported version");
  }

  GpModel model;
  Eigen::Index n = 0, d = 0;
  expect("output_index");
  in >> model.output_index;
  expect("rows");
  in >> n;
  expect("cols");
  in >> d;
  if (!in || n < 1 || d < 1) {
    throw std::runtime_error("model file " + path + ": bad dimensions");
  }
  expect("s_f");
  in >> model.hyper.s_f;
  expect("sigma2");
  in >> model.hyper.sigma2;
  model.hyper.lambda.resize(d + 1);
  expect("lambda");
  for (Eigen::Index i = 0; i <= d; ++i) in >> model.hyper.lambda(i);
  model.feat_mean.resize(d);
  expect("feat_mean");
  for (Eigen::Index i = 0; i < d; ++i) in >> model.feat_mean(i);
  model.feat_std.resize(d);
  expect("feat_std");
  for (Eigen::Index i = 0; i < d; ++i) in >> model.feat_std(i);
  model.features.resize(n, d);
  expect("features_std");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) in >> model.features(i, j);
  }
  model.labels.resize(n);
  expect("labels");
  for (Eigen::Index i = 0; i < n; ++i) in >> model.labels(i);
  model.alpha.resize(n);
  expect("alpha");
  for (Eigen::Index i = 0; i < n; ++i) in >> model.alpha(i);
  if (!in) throw std::runtime_error("model file " + path + ": truncated");
  model.hyper.validate();

  const Eigen::MatrixXd k = noisy_gram(model.features, model.hyper);
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw IllConditionedError("load_gp_model: Cholesky failed");
  }
  model.chol_lower = llt.matrixL();
  const double residual = (k * model.alpha - model.labels).norm();
  if (residual > 1e-8 * model.labels.norm() + 1e-14) {
    throw IllConditionedError("load_gp_model: alpha residual too large");
  }
  build_caches(model);
  return model;
}

}  // namespace gpmpc
