#pragma once

#include "sblq/dataset.hpp"
#include "sblq/learner.hpp"

namespace sblq {

// Minimum-norm least squares through the pseudo-inverse of the empirical
// covariance; eigenvalues below 1e-10 * sigma_max are treated as zero.
Vector fit_least_squares(const StageDesign& design, const Vector& targets);

struct LassoFit {
  Vector theta;
  int iterations = 0;
  bool converged = false;
};

// Cyclic coordinate descent on (1/n)||y - X theta||^2 + lambda ||theta||_1.
// Stops when the largest coordinate change in a sweep falls below `tol`.
// Hitting max_iters sets converged = false rather than throwing.
LassoFit fit_lasso(const StageDesign& design, const Vector& targets, double lambda,
                   int max_iters = 10000, double tol = 1e-9);

double soft_threshold(double value, double threshold);

// Backward induction with a baseline estimator at every stage. For lasso the
// per-stage lambda is chosen on a validation split (drawn once with
// options.seed) by target RMSE, then refit on the full stage design.
TrainResult train_baseline(const BatchDataset& dataset, Method method,
                           const LassoSettings& lasso = {}, const TrainOptions& options = {});

// Dispatches to train() or train_baseline().
TrainResult train_method(const BatchDataset& dataset, Method method, const AdaptiveConfig& cfg,
                         const LassoSettings& lasso = {}, const TrainOptions& options = {});

}  // namespace sblq
