#include "gpmpc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpmpc/csv.hpp"
#include "gpmpc/dynamics.hpp"
#include "gpmpc/errors.hpp"
#include "gpmpc/track.hpp"

namespace gpmpc {

FeatureDomain FeatureDomain::defaults(const OcpParams& params) {
  const double kappa_max =
      std::tan(params.delta_max) / params.vehicle.wheelbase;
  FeatureDomain d;
  d.lower << -0.3, -0.6, params.v_min, -kappa_max;
  d.upper << 0.3, 0.6, params.v_max, kappa_max;
  return d;
}

Eigen::Vector4d FeatureDomain::sample(Rng& rng) const {
  Eigen::Vector4d xi;
  for (int i = 0; i < 4; ++i) xi(i) = rng.uniform(lower(i), upper(i));
  return xi;
}

std::vector<ReachableSample> sample_reachable(const OcpParams& params,
                                              const FeatureDomain& domain,
                                              int n_rollouts, int rollout_len,
                                              Rng& rng) {
  if (n_rollouts < 1) throw std::invalid_argument("need at least one rollout");
  std::vector<ReachableSample> out;
  out.reserve(static_cast<std::size_t>(n_rollouts) *
              static_cast<std::size_t>(rollout_len + 1));

  constexpr int kProfilePoints = 9;
  constexpr double kProfileSegment = 0.25;

  for (int r = 0; r < n_rollouts; ++r) {
    const Eigen::Vector4d xi0 = domain.sample(rng);

    CurvatureProfile profile;
    profile.breakpoints.resize(kProfilePoints);
    profile.kappas.resize(kProfilePoints);
    profile.closed = false;
    profile.kappas(0) = xi0(3);
    for (int j = 0; j < kProfilePoints; ++j) {
      profile.breakpoints(j) = kProfileSegment * static_cast<double>(j);
      if (j > 0) {
        profile.kappas(j) = std::clamp(profile.kappas(j - 1) + rng.uniform(-0.8, 0.8),
                                       domain.lower(3), domain.upper(3));
      }
    }

    MpcController controller(params, MpcController::Mode::kFull);
    Eigen::Vector4d x(0.0, xi0(0), xi0(1), xi0(2));
    try {
      for (int k = 0;; ++k) {
        const Eigen::Vector4d xi(x(1), x(2), x(3),
                                 curvature_at(profile, x(0)));
        if (domain.contains(xi)) out.push_back({xi, r});
        if (k == rollout_len) break;
        const ControlInput u =
            controller.act(CurvilinearState::from(x), profile);
        x = step_curvilinear_profile(x, u.vec(), profile, params.vehicle,
                                     params.vehicle.ts);
      }
    } catch (const SingularityError&) {
    } catch (const NumericalError&) {
    }
  }
  return out;
}

bool label_sample(const Eigen::Vector4d& xi, OcpSolver& solver,
                  Eigen::Vector2d& label) {
  const OcpParams& params = solver.params();
  const Eigen::VectorXd kappa_seq =
      Eigen::VectorXd::Constant(params.horizon, xi(3));
  const Eigen::Vector4d x0(0.0, xi(0), xi(1), xi(2));
  OcpSolution sol;
  try {
    sol = solver.solve(x0, kappa_seq, nullptr);
  } catch (const SingularityError&) {
    return false;
  } catch (const NumericalError&) {
    return false;
  }
  if (!sol.converged) return false;
  label = sol.inputs.col(0) -
          reference_input(xi(3), params.r_v, params.vehicle.wheelbase);
  return true;
}

void label_pool(const Eigen::MatrixXd& features, const OcpParams& params,
                Eigen::MatrixXd& labeled_features, Eigen::MatrixXd& labels) {
  OcpSolver solver(params);
  const Eigen::Index n = features.rows();
  labeled_features.resize(n, 4);
  labels.resize(n, 2);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector2d label;
    if (label_sample(features.row(i), solver, label)) {
      labeled_features.row(kept) = features.row(i);
      labels.row(kept) = label.transpose();
      ++kept;
    }
  }
  labeled_features.conservativeResize(kept, 4);
  labels.conservativeResize(kept, 2);
}

Dataset split_dataset(const Eigen::MatrixXd& features,
                      const Eigen::MatrixXd& labels, int n_test, Rng& rng) {
  const Eigen::Index n = features.rows();
  if (n_test < 0 || n_test > n) {
    throw std::invalid_argument("split_dataset: bad test size");
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  std::vector<Eigen::Index> test_idx(perm.begin(), perm.begin() + n_test);
  std::vector<Eigen::Index> pool_idx(perm.begin() + n_test, perm.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(pool_idx.begin(), pool_idx.end());

  Dataset data;
  data.test_features.resize(n_test, 4);
  data.test_labels.resize(n_test, 2);
  for (Eigen::Index i = 0; i < n_test; ++i) {
    data.test_features.row(i) = features.row(test_idx[static_cast<std::size_t>(i)]);
    data.test_labels.row(i) = labels.row(test_idx[static_cast<std::size_t>(i)]);
  }
  const auto n_pool = static_cast<Eigen::Index>(pool_idx.size());
  data.pool_features.resize(n_pool, 4);
  data.pool_labels.resize(n_pool, 2);
  for (Eigen::Index i = 0; i < n_pool; ++i) {
    data.pool_features.row(i) = features.row(pool_idx[static_cast<std::size_t>(i)]);
    data.pool_labels.row(i) = labels.row(pool_idx[static_cast<std::size_t>(i)]);
  }
  return data;
}

namespace {

Eigen::MatrixXd augment_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd aug(x.rows(), x.cols() + 1);
  aug.col(0).setOnes();
  aug.rightCols(x.cols()) = x;
  return aug;
}

struct KernelCaches {
  Eigen::MatrixXd pool_pl;  // pool_aug * Lambda
  Eigen::VectorXd pool_sg;  // sqrt(1 + 2 q_i)
  Eigen::MatrixXd test_pl;
  Eigen::VectorXd test_sg;
};

void rebuild_caches(const Eigen::MatrixXd& pool_aug,
                    const Eigen::MatrixXd& test_aug,
                    const GpHyperparams& hyper, KernelCaches& caches) {
  caches.pool_pl = pool_aug * hyper.lambda.asDiagonal();
  caches.pool_sg =
      (1.0 + 2.0 * (caches.pool_pl.array() * pool_aug.array()).rowwise().sum())
          .sqrt()
          .matrix();
  caches.test_pl = test_aug * hyper.lambda.asDiagonal();
  caches.test_sg =
      (1.0 + 2.0 * (caches.test_pl.array() * test_aug.array()).rowwise().sum())
          .sqrt()
          .matrix();
}

Eigen::VectorXd kernel_column(const Eigen::MatrixXd& pl,
                              const Eigen::VectorXd& sg, double s_f,
                              const Eigen::VectorXd& aug_p, double q_p) {
  const double scale = 1.0 / std::sqrt(1.0 + 2.0 * q_p);
  return s_f * ((pl * aug_p).array() * scale / sg.array()).asin().matrix();
}

SelectionResult selection_core(const Eigen::MatrixXd& pool_features,
                               const Eigen::MatrixXd& pool_labels,
                               int output_index,
                               const Eigen::MatrixXd& test_features,
                               const Eigen::MatrixXd& test_labels,
                               const SelectionOptions& options,
                               const std::vector<int>* order) {
  const Eigen::Index n_pool = pool_features.rows();
  const Eigen::Index n_test = test_features.rows();
  if (n_pool < 1) throw std::invalid_argument("selection: empty pool");
  if (options.budget < 1 || options.budget > n_pool) {
    throw std::invalid_argument("selection: budget must be in [1, pool size]");
  }
  if (output_index < 0 || output_index > 1) {
    throw std::invalid_argument("selection: output_index must be 0 or 1");
  }
  const int budget = options.budget;

  // Pool-wide standardization constants; the deployment model recomputes its
  // own from the final training set.
  Eigen::VectorXd mean = pool_features.colwise().mean().transpose();
  Eigen::MatrixXd centered = pool_features.rowwise() - mean.transpose();
  Eigen::VectorXd stddev =
      (centered.array().square().colwise().sum().transpose() /
       std::max<double>(1.0, static_cast<double>(n_pool - 1)))
          .sqrt()
          .max(1e-12)
          .matrix();
  const Eigen::MatrixXd pool_std = centered * stddev.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd test_std =
      (test_features.rowwise() - mean.transpose()) *
      stddev.cwiseInverse().asDiagonal();

  const Eigen::MatrixXd pool_aug = augment_rows(pool_std);
  const Eigen::MatrixXd test_aug = augment_rows(test_std);

  GpHyperparams hyper = options.initial;
  hyper.validate();
  if (hyper.lambda.size() != 5) {
    throw std::invalid_argument("selection: lambda must have 5 entries");
  }
  KernelCaches caches;
  rebuild_caches(pool_aug, test_aug, hyper, caches);

  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(budget, budget);
  Eigen::MatrixXd k_pool_sel(n_pool, budget);
  Eigen::MatrixXd k_test_sel(n_test, budget);
  Eigen::MatrixXd y_sel(budget, 2);
  Eigen::VectorXd alpha_vu, alpha_delta;
  std::vector<int> sel;
  sel.reserve(static_cast<std::size_t>(budget));
  std::vector<char> available(static_cast<std::size_t>(n_pool), 1);
  Eigen::VectorXd pred(n_pool);
  Rng rng(options.seed);

  SelectionResult result;

  const auto refresh_alpha = [&](Eigen::Index m, int col,
                                 Eigen::VectorXd& alpha) {
    alpha = y_sel.col(col).head(m);
    chol.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(alpha);
    chol.topLeftCorner(m, m)
        .triangularView<Eigen::Lower>()
        .transpose()
        .solveInPlace(alpha);
  };
  const auto refresh_alphas = [&](Eigen::Index m) {
    refresh_alpha(m, 0, alpha_vu);
    refresh_alpha(m, 1, alpha_delta);
  };

  std::size_t order_pos = 0;
  Eigen::Index t = 0;
  while (t < budget) {
    int idx = -1;
    double pre_error = 0.0;
    const Eigen::VectorXd& alpha_sel =
        output_index == 0 ? alpha_vu : alpha_delta;

    if (order) {
      while (order_pos < order->size() &&
             !available[static_cast<std::size_t>((*order)[order_pos])]) {
        ++order_pos;
      }
      if (order_pos == order->size()) break;
      idx = (*order)[order_pos];
      ++order_pos;
      const double mean_i =
          t > 0 ? k_pool_sel.row(idx).head(t).dot(alpha_sel) : 0.0;
      pre_error = std::abs(pool_labels(idx, output_index) - mean_i);
    } else if (t == 0) {
      idx = static_cast<int>(rng.index(static_cast<std::size_t>(n_pool)));
      pre_error = std::abs(pool_labels(idx, output_index));
    } else {
      pred.noalias() = k_pool_sel.leftCols(t) * alpha_sel;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n_pool; ++i) {
        if (!available[static_cast<std::size_t>(i)]) continue;
        const double err = std::abs(pool_labels(i, output_index) - pred(i));
        if (err > best) {
          best = err;
          idx = static_cast<int>(i);
        }
      }
      if (idx < 0) break;
      pre_error = best;
    }

    const Eigen::VectorXd aug_p = pool_aug.row(idx).transpose();
    const double q_p = hyper.lambda.cwiseProduct(aug_p).dot(aug_p);
    const Eigen::VectorXd pool_col =
        kernel_column(caches.pool_pl, caches.pool_sg, hyper.s_f, aug_p, q_p);
    const double k_diag = hyper.s_f * std::asin(q_p / (1.0 + 2.0 * q_p));

    Eigen::VectorXd k_cross(t);
    for (Eigen::Index a = 0; a < t; ++a) {
      k_cross(a) = pool_col(sel[static_cast<std::size_t>(a)]);
    }
    if (!cholesky_append(chol, t, k_cross, k_diag + hyper.sigma2)) {
      available[static_cast<std::size_t>(idx)] = 0;
      continue;
    }

    available[static_cast<std::size_t>(idx)] = 0;
    sel.push_back(idx);
    y_sel.row(t) = pool_labels.row(idx);
    k_pool_sel.col(t) = pool_col;
    k_test_sel.col(t) =
        kernel_column(caches.test_pl, caches.test_sg, hyper.s_f, aug_p, q_p);
    ++t;
    refresh_alphas(t);

    SelectionStep step;
    step.step = static_cast<int>(t);
    step.index = idx;
    step.pre_error = pre_error;
    if (n_test > 0) {
      step.rmse_vu = std::sqrt(
          (k_test_sel.leftCols(t) * alpha_vu - test_labels.col(0)).squaredNorm() /
          static_cast<double>(n_test));
      step.rmse_delta = std::sqrt((k_test_sel.leftCols(t) * alpha_delta -
                                   test_labels.col(1))
                                      .squaredNorm() /
                                  static_cast<double>(n_test));
    }
    result.trace.push_back(step);

    const bool refit_due = options.refit_every > 0 &&
                           t % options.refit_every == 0 && t < budget;
    if (refit_due) {
      const auto msub =
          static_cast<Eigen::Index>(std::min<Eigen::Index>(options.fit_subsample, t));
      Eigen::MatrixXd x_sub(msub, 4);
      Eigen::VectorXd y_sub(msub);
      for (Eigen::Index k = 0; k < msub; ++k) {
        const Eigen::Index pos =
            msub == 1 ? 0 : (k * (t - 1)) / (msub - 1);
        x_sub.row(k) = pool_std.row(sel[static_cast<std::size_t>(pos)]);
        y_sub(k) = y_sel(pos, output_index);
      }
      NmOptions nm = options.refit_nm;
      nm.seed = options.seed + static_cast<std::uint64_t>(t);
      const GpHyperparams refitted =
          optimize_hyperparams(x_sub, y_sub, hyper, nm);

      Eigen::MatrixXd x_sel(t, 4);
      for (Eigen::Index a = 0; a < t; ++a) {
        x_sel.row(a) = pool_std.row(sel[static_cast<std::size_t>(a)]);
      }
      Eigen::MatrixXd k_sel = gram(x_sel, refitted);
      k_sel.diagonal().array() += refitted.sigma2;
      const Eigen::LLT<Eigen::MatrixXd> llt(k_sel);
      if (llt.info() == Eigen::Success) {
        hyper = refitted;
        chol.topLeftCorner(t, t) = llt.matrixL();
        rebuild_caches(pool_aug, test_aug, hyper, caches);

        Eigen::MatrixXd sel_aug(t, 5);
        Eigen::VectorXd sel_sg(t);
        for (Eigen::Index a = 0; a < t; ++a) {
          sel_aug.row(a) = pool_aug.row(sel[static_cast<std::size_t>(a)]);
          sel_sg(a) = caches.pool_sg(sel[static_cast<std::size_t>(a)]);
        }
        k_pool_sel.leftCols(t) =
            hyper.s_f * ((caches.pool_pl * sel_aug.transpose()).array() /
                         (caches.pool_sg * sel_sg.transpose()).array())
                            .asin()
                            .matrix();
        k_test_sel.leftCols(t) =
            hyper.s_f * ((caches.test_pl * sel_aug.transpose()).array() /
                         (caches.test_sg * sel_sg.transpose()).array())
                            .asin()
                            .matrix();
        refresh_alphas(t);
      }
    }
  }

  result.indices = sel;
  result.hyper = hyper;
  return result;
}

}  // namespace

SelectionResult greedy_select(const Eigen::MatrixXd& pool_features,
                              const Eigen::MatrixXd& pool_labels,
                              int output_index,
                              const Eigen::MatrixXd& test_features,
                              const Eigen::MatrixXd& test_labels,
                              const SelectionOptions& options) {
  return selection_core(pool_features, pool_labels, output_index,
                        test_features, test_labels, options, nullptr);
}

std::vector<int> random_select(int pool_size, int budget, Rng& rng) {
  if (budget < 0 || budget > pool_size) {
    throw std::invalid_argument("random_select: budget exceeds pool");
  }
  std::vector<int> perm(static_cast<std::size_t>(pool_size));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < budget; ++i) {
    const auto j =
        static_cast<std::size_t>(i) +
        rng.index(static_cast<std::size_t>(pool_size - i));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  perm.resize(static_cast<std::size_t>(budget));
  return perm;
}

SelectionResult evaluate_selection(const Eigen::MatrixXd& pool_features,
                                   const Eigen::MatrixXd& pool_labels,
                                   int output_index,
                                   const std::vector<int>& order,
                                   const Eigen::MatrixXd& test_features,
                                   const Eigen::MatrixXd& test_labels,
                                   const SelectionOptions& options) {
  return selection_core(pool_features, pool_labels, output_index,
                        test_features, test_labels, options, &order);
}

GpModel build_deployment_model(const Eigen::MatrixXd& pool_features,
                               const Eigen::MatrixXd& pool_labels,
                               int output_index,
                               const std::vector<int>& selection, int n_deploy,
                               const GpHyperparams& initial,
                               const NmOptions& final_nm, int fit_subsample) {
  const auto n = static_cast<Eigen::Index>(
      std::min<std::size_t>(static_cast<std::size_t>(n_deploy), selection.size()));
  if (n < 1) throw std::invalid_argument("deployment model needs data");

  Eigen::MatrixXd x_sel(n, 4);
  Eigen::VectorXd y_sel(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x_sel.row(i) = pool_features.row(selection[static_cast<std::size_t>(i)]);
    y_sel(i) = pool_labels(selection[static_cast<std::size_t>(i)], output_index);
  }

  // Hyperparameter fit in the same standardized space the final model uses.
  Eigen::VectorXd mean = x_sel.colwise().mean().transpose();
  Eigen::MatrixXd centered = x_sel.rowwise() - mean.transpose();
  Eigen::VectorXd stddev =
      (centered.array().square().colwise().sum().transpose() /
       std::max<double>(1.0, static_cast<double>(n - 1)))
          .sqrt()
          .max(1e-12)
          .matrix();
  const Eigen::MatrixXd x_std = centered * stddev.cwiseInverse().asDiagonal();

  const auto msub = std::min<Eigen::Index>(fit_subsample, n);
  Eigen::MatrixXd x_sub(msub, 4);
  Eigen::VectorXd y_sub(msub);
  for (Eigen::Index k = 0; k < msub; ++k) {
    const Eigen::Index pos = msub == 1 ? 0 : (k * (n - 1)) / (msub - 1);
    x_sub.row(k) = x_std.row(pos);
    y_sub(k) = y_sel(pos);
  }
  const GpHyperparams fitted =
      optimize_hyperparams(x_sub, y_sub, initial, final_nm);
  return fit_alpha(x_sel, y_sel, fitted, output_index, true);
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  CsvWriter csv(path, {"n", "alpha", "v", "kappa", "dvu", "ddelta", "source"});
  const auto write_rows = [&](const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& y,
                              const std::string& source) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      csv.row({CsvWriter::cell(x(i, 0)), CsvWriter::cell(x(i, 1)),
               CsvWriter::cell(x(i, 2)), CsvWriter::cell(x(i, 3)),
               CsvWriter::cell(y(i, 0)), CsvWriter::cell(y(i, 1)), source});
    }
  };
  write_rows(data.pool_features, data.pool_labels, "pool");
  write_rows(data.test_features, data.test_labels, "test");
}

Dataset load_dataset_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const std::size_t ci[6] = {
      table.column_index("n"),     table.column_index("alpha"),
      table.column_index("v"),     table.column_index("kappa"),
      table.column_index("dvu"),   table.column_index("ddelta")};
  const std::size_t c_source = table.column_index("source");

  std::size_t n_pool = 0, n_test = 0;
  for (const auto& row : table.rows) {
    (row[c_source] == "test" ? n_test : n_pool)++;
  }

  Dataset data;
  data.pool_features.resize(static_cast<Eigen::Index>(n_pool), 4);
  data.pool_labels.resize(static_cast<Eigen::Index>(n_pool), 2);
  data.test_features.resize(static_cast<Eigen::Index>(n_test), 4);
  data.test_labels.resize(static_cast<Eigen::Index>(n_test), 2);
  Eigen::Index ip = 0, it = 0;
  for (const auto& row : table.rows) {
    const bool is_test = row[c_source] == "test";
    Eigen::MatrixXd& x = is_test ? data.test_features : data.pool_features;
    Eigen::MatrixXd& y = is_test ? data.test_labels : data.pool_labels;
    const Eigen::Index i = is_test ? it++ : ip++;
    for (int j = 0; j < 4; ++j) x(i, j) = std::stod(row[ci[j]]);
    y(i, 0) = std::stod(row[ci[4]]);
    y(i, 1) = std::stod(row[ci[5]]);
  }
  return data;
}

void export_selection_trace(const SelectionResult& result,
                            const std::string& path) {
  CsvWriter csv(path, {"step", "index", "pre_error", "rmse_vu", "rmse_delta"});
  for (const SelectionStep& s : result.trace) {
    csv.row({CsvWriter::cell(s.step), CsvWriter::cell(s.index),
             CsvWriter::cell(s.pre_error), CsvWriter::cell(s.rmse_vu),
             CsvWriter::cell(s.rmse_delta)});
  }
}

}  // namespace gpmpc
