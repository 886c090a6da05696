#include "sblq/baselines.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "sblq/errors.hpp"

namespace sblq {

namespace {

constexpr double kPinvCutoff = 1e-10;

StageDesign rows_subset(const StageDesign& design, const std::vector<std::size_t>& rows) {
  StageDesign out{design.stage, Matrix(static_cast<Eigen::Index>(rows.size()), design.dim()),
                  Vector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.rows.row(static_cast<Eigen::Index>(i)) = design.rows.row(r);
    out.rewards[static_cast<Eigen::Index>(i)] = design.rewards[r];
  }
  return out;
}

Vector entries(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
  return out;
}

}  // namespace

Vector fit_least_squares(const StageDesign& design, const Vector& targets) {
  if (!targets.allFinite()) throw NumericError("targets are not finite");
  const SpectralDecomposition decomp = decompose(empirical_covariance(design));
  const Vector moment = empirical_cross_moment(design, targets);
  const double sigma_max = decomp.eigenvalues.size() ? decomp.eigenvalues.maxCoeff() : 0.0;
  if (sigma_max <= 0.0) return Vector::Zero(design.dim());
  const double cutoff = kPinvCutoff * sigma_max;
  Vector coeffs = decomp.eigenvectors.transpose() * moment;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const double s = decomp.eigenvalues[j];
    coeffs[j] = s > cutoff ? coeffs[j] / s : 0.0;
  }
  return decomp.eigenvectors * coeffs;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

LassoFit fit_lasso(const StageDesign& design, const Vector& targets, double lambda, int max_iters,
                   double tol) {
  if (!(lambda >= 0.0)) throw DomainError("lasso lambda must be nonnegative");
  if (!targets.allFinite()) throw NumericError("targets are not finite");
  // Coordinate descent on the Gram form: the objective equals
  // theta^T G theta - 2 c^T theta + lambda |theta|_1 up to a constant.
  const Matrix gram = empirical_covariance(design);
  const Vector moment = empirical_cross_moment(design, targets);
  const Eigen::Index d = design.dim();

  LassoFit fit{Vector::Zero(d), 0, false};
  Vector& theta = fit.theta;
  Vector g_theta = Vector::Zero(d);  // gram * theta, kept in sync
  for (int sweep = 1; sweep <= max_iters; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double gjj = gram(j, j);
      double updated = 0.0;
      if (gjj > 0.0) {
        const double partial = moment[j] - (g_theta[j] - gjj * theta[j]);
        updated = soft_threshold(partial, lambda / 2.0) / gjj;
      }
      const double change = updated - theta[j];
      if (change != 0.0) {
        g_theta.noalias() += gram.col(j) * change;
        theta[j] = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    fit.iterations = sweep;
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

TrainResult train_baseline(const BatchDataset& dataset, Method method, const LassoSettings& lasso,
                           const TrainOptions& options) {
  if (method != Method::ls && method != Method::lasso) {
    throw DomainError("train_baseline supports ls and lasso, got '" + std::string(to_string(method)) + "'");
  }
  if (method == Method::lasso && lasso.grid.empty()) throw DomainError("lasso grid is empty");
  const int T = dataset.horizon();
  const int d = dataset.feature_dim();
  if (!options.feature_mask.empty() && static_cast<int>(options.feature_mask.size()) != d) {
    throw ShapeError("feature mask length does not match feature dimension");
  }

  TrainResult result;
  ModelBundle& model = result.model;
  model.horizon = T;
  model.feature_dim = d;
  model.method = method;
  model.lasso = lasso;
  model.feature_mask = options.feature_mask;
  model.seed = options.seed;
  model.config.reward_bound = dataset.reward_bound();
  model.stages.resize(static_cast<std::size_t>(T));
  result.reports.resize(static_cast<std::size_t>(T));

  std::vector<std::size_t> fit_rows, val_rows;
  const bool validate = method == Method::lasso && lasso.grid.size() > 1;
  if (validate) {
    std::tie(fit_rows, val_rows) =
        split_indices(dataset.size(), 1.0 - lasso.validation_fraction, options.seed);
  }

  Vector theta_next = Vector::Zero(d);
  for (int t = T; t >= 1; --t) {
    const Vector targets = construct_targets(dataset, t, theta_next);
    StageDesign design = stage_design(dataset, t);
    if (!options.feature_mask.empty()) design = mask_design(std::move(design), options.feature_mask);

    StageModel stage{t, Vector(), 0.0, 0};
    StageFitReport& report = result.reports[static_cast<std::size_t>(t - 1)];
    report.stage = t;
    if (method == Method::ls) {
      stage.theta = fit_least_squares(design, targets);
    } else {
      std::size_t best = 0;
      if (validate) {
        const StageDesign fit_design = rows_subset(design, fit_rows);
        const StageDesign val_design = rows_subset(design, val_rows);
        const Vector fit_y = entries(targets, fit_rows);
        const Vector val_y = entries(targets, val_rows);
        double best_rmse = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < lasso.grid.size(); ++g) {
          const Vector theta = fit_lasso(fit_design, fit_y, lasso.grid[g], lasso.max_iters, lasso.tol).theta;
          const double rmse =
              std::sqrt((val_design.rows * theta - val_y).squaredNorm() / static_cast<double>(val_y.size()));
          report.ks.push_back(static_cast<int>(g));
          report.lambdas.push_back(lasso.grid[g]);
          report.consecutive_diff.push_back(rmse);  // validation RMSE for baselines
          if (rmse < best_rmse) {
            best_rmse = rmse;
            best = g;
          }
        }
      }
      stage.lambda = lasso.grid[best];
      stage.k = static_cast<int>(best);
      stage.theta = fit_lasso(design, targets, stage.lambda, lasso.max_iters, lasso.tol).theta;
    }
    if (!stage.theta.allFinite()) throw NumericError("stage " + std::to_string(t) + ": non-finite estimate");
    report.selected_k = stage.k;
    report.selected_lambda = stage.lambda;
    theta_next = stage.theta;
    model.stages[static_cast<std::size_t>(t - 1)] = std::move(stage);
  }
  return result;
}

TrainResult train_method(const BatchDataset& dataset, Method method, const AdaptiveConfig& cfg,
                         const LassoSettings& lasso, const TrainOptions& options) {
  if (is_spectral(method)) {
    return train(dataset, FilterSpec::defaults(filter_kind(method)), cfg, options);
  }
  return train_baseline(dataset, method, lasso, options);
}

}  // namespace sblq
