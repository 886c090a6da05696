#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sblq/dataset.hpp"
#include "sblq/spectral.hpp"

namespace sblq {

// Estimators a ModelBundle can come from.
enum class Method { ls, lasso, tikhonov, gradient_descent, cutoff };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
bool is_spectral(Method method);
FilterKind filter_kind(Method method);  // throws DomainError for ls / lasso

// Constants of the adaptive lambda-selection rule.
//
// The grid is lambda_k = q0 * q^k for k = 1..K (plus k = K + 1, needed for the
// last consecutive difference). With fixed_budget the grid length is exactly
// `budget`; otherwise it is the theory value K_{D,q} capped at `budget`.
struct AdaptiveConfig {
  double q = 0.9;
  double q0 = 100.0;
  int budget = 100;
  bool fixed_budget = true;
  double c_ada = 0.5e-5;
  double delta = 0.5;
  double c_x = 1.0;
  double reward_bound = 1.0;  // M; train() overwrites it with the dataset's bound
  // Mixing constants. c0 = 0 is the i.i.d. case: |D|_gamma = l3 = |D| b0 / 2.
  double b0 = 2.0;
  double c0 = 0.0;
  double gamma0 = 1.0;
  double c_tilde = 0.25;
  double c0_effdim = 1.0;
  double theta_norm_hint = 1.0;

  // Grid anchor and C_ada used in the reference experiments for each filter.
  static AdaptiveConfig defaults(FilterKind kind);
  void validate() const;  // throws DomainError
  bool operator==(const AdaptiveConfig&) const = default;
};

// 8 b sqrt((1 - c~)/(1 - 2c~)) sqrt(1/(1 - 2c~)); the constant the error bound
// is proved with. Not used as a default.
double theory_c_ada(const FilterSpec& filter, const AdaptiveConfig& cfg);

double effective_sample_size(double n, const AdaptiveConfig& cfg);
double ell3(double n, int d, const AdaptiveConfig& cfg);
double sample_complexity_constant(const AdaptiveConfig& cfg);  // C_sa
int grid_budget(double n, const AdaptiveConfig& cfg);
double grid_lambda(const AdaptiveConfig& cfg, int k);

// Variance proxy W at `lambda` for a stage with spectrum `decomp`.
double compute_W(const SpectralDecomposition& decomp, double lambda, double n, int d,
                 const AdaptiveConfig& cfg);

// Right-hand side of the stopping test at stage t of T.
double adaptive_threshold(int t, int T, double phi_next, double W, const AdaptiveConfig& cfg);

// y_i = r_{i,t} + max_a <theta_next, x(context_i, a)>.
Vector construct_targets(const BatchDataset& dataset, int t, const Vector& theta_next);

// max over trajectories and candidate actions of |<theta_next, x(context_i, a)>|.
double phi_bound(const BatchDataset& dataset, int t, const Vector& theta_next);

// g_lambda(Sigma_hat) E_hat[x y].
Vector fit_stage(const StageDesign& design, const Vector& targets, const FilterSpec& filter,
                 double lambda);
Vector fit_stage(const SpectralDecomposition& decomp, const Vector& cross_moment,
                 const FilterSpec& filter, double lambda);

// Trace of one stage's scan. Entries are in scan order (k = K down to 1).
struct StageFitReport {
  int stage = 0;
  int budget = 0;
  std::vector<int> ks;
  std::vector<double> lambdas;           // lambda_k
  std::vector<double> consecutive_diff;  // ||(S + lambda_{k+1})^{1/2}(theta_{k+1} - theta_k)||
  std::vector<double> thresholds;
  double phi_next = 0.0;
  int selected_k = 0;
  double selected_lambda = 0.0;
  bool triggered = false;  // false when the fallback k = K was used
};

struct StageFit {
  double lambda = 0.0;
  int k = 0;
  Vector theta;
  StageFitReport report;
};

StageFit select_lambda(const StageDesign& design, const Vector& targets, const FilterSpec& filter,
                       int t, int T, double phi_next, const AdaptiveConfig& cfg);

struct StageModel {
  int t = 1;
  Vector theta;
  double lambda = 0.0;  // 0 for ls
  int k = 0;            // grid index; 0 for ls
  bool operator==(const StageModel&) const = default;
};

struct LassoSettings {
  std::vector<double> grid = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  double validation_fraction = 0.2;
  int max_iters = 10000;
  double tol = 1e-9;
  bool operator==(const LassoSettings&) const = default;
};

// Learned per-stage parameters plus everything needed to reproduce them.
struct ModelBundle {
  static constexpr int kFormatVersion = 1;
  int format_version = kFormatVersion;
  int horizon = 0;
  int feature_dim = 0;
  Method method = Method::tikhonov;
  FilterSpec filter;  // meaningful for spectral methods
  std::vector<StageModel> stages;
  AdaptiveConfig config;
  LassoSettings lasso;
  std::vector<bool> feature_mask;  // empty: all features used
  std::uint64_t seed = 0;

  const Vector& theta(int t) const { return stages.at(static_cast<std::size_t>(t - 1)).theta; }
  std::vector<Vector> thetas() const;
  bool operator==(const ModelBundle& other) const;
};

struct TrainOptions {
  std::vector<bool> feature_mask;  // empty: keep all
  std::uint64_t seed = 0;
};

struct TrainResult {
  ModelBundle model;
  std::vector<StageFitReport> reports;  // index t - 1
};

// Backward induction t = T..1 with adaptive lambda per stage.
TrainResult train(const BatchDataset& dataset, const FilterSpec& filter, AdaptiveConfig cfg,
                  const TrainOptions& options = {});

// Weighted-norm error terms of one stage estimate against ground truth.
struct ErrorDecomposition {
  double bias = 0.0;
  double variance = 0.0;
  double multistage = 0.0;
  double total = 0.0;
};

// theta_D uses `targets`, theta_hat uses `targets_star` (targets built from the
// true next-stage parameter), theta_diamond uses `targets_noisefree`
// (E[y* | x]). Norms are weighted by (sigma_true + lambda I)^{1/2}.
ErrorDecomposition error_decomposition_diagnostic(const StageDesign& design, const Vector& targets,
                                                  const Vector& targets_star,
                                                  const Vector& targets_noisefree, double lambda,
                                                  const FilterSpec& filter,
                                                  const Vector& theta_star,
                                                  const Matrix& sigma_true);

}  // namespace sblq
