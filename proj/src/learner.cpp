#include "sblq/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sblq/errors.hpp"

namespace sblq {

namespace {

void require_stage(const BatchDataset& dataset, int t) {
  if (t < 1 || t > dataset.horizon()) {
    throw IndexError("stage " + std::to_string(t) + " out of range [1, " +
                     std::to_string(dataset.horizon()) + "]");
  }
}

void require_theta(const BatchDataset& dataset, const Vector& theta) {
  if (theta.size() != dataset.feature_dim()) {
    throw ShapeError("parameter of length " + std::to_string(theta.size()) +
                     " does not match feature dimension " + std::to_string(dataset.feature_dim()));
  }
  if (!theta.allFinite()) throw NumericError("parameter vector is not finite");
}

// max_a <theta, x(state, a)> over the candidate-action table.
double best_value(const BatchDataset& dataset, const Vector& state, const Vector& theta) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < dataset.action_count(); ++a) {
    best = std::max(best, dataset.features(state, a).dot(theta));
  }
  return best;
}

double max_clause_log(double argument) {
  if (!(argument > 0.0)) return 1.0;
  return std::max(1.0, std::log(argument));
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ls:
      return "ls";
    case Method::lasso:
      return "lasso";
    case Method::tikhonov:
      return "tikhonov";
    case Method::gradient_descent:
      return "gradient-descent";
    case Method::cutoff:
      return "cutoff";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "ls") return Method::ls;
  if (name == "lasso") return Method::lasso;
  if (name == "tikhonov") return Method::tikhonov;
  if (name == "gradient-descent") return Method::gradient_descent;
  if (name == "cutoff") return Method::cutoff;
  throw DomainError("unknown method '" + std::string(name) + "'");
}

bool is_spectral(Method method) {
  return method == Method::tikhonov || method == Method::gradient_descent ||
         method == Method::cutoff;
}

FilterKind filter_kind(Method method) {
  switch (method) {
    case Method::tikhonov:
      return FilterKind::tikhonov;
    case Method::gradient_descent:
      return FilterKind::gradient_descent;
    case Method::cutoff:
      return FilterKind::cutoff;
    default:
      throw DomainError("method '" + std::string(to_string(method)) + "' has no spectral filter");
  }
}

AdaptiveConfig AdaptiveConfig::defaults(FilterKind kind) {
  AdaptiveConfig cfg;
  switch (kind) {
    case FilterKind::tikhonov:
      cfg.q0 = 100.0;
      cfg.c_ada = 0.5e-5;
      break;
    case FilterKind::gradient_descent:
      cfg.q0 = 100.0;
      cfg.c_ada = 1e-5;
      break;
    case FilterKind::cutoff:
      cfg.q0 = 30.0;
      cfg.c_ada = 1e-4;
      break;
  }
  return cfg;
}

void AdaptiveConfig::validate() const {
  auto fail = [](const std::string& msg) { throw DomainError("adaptive config: " + msg); };
  if (!(q > 0.0 && q < 1.0)) fail("q must lie in (0, 1)");
  if (!(q0 > 0.0) || !std::isfinite(q0)) fail("q0 must be positive");
  if (budget < 1) fail("budget must be >= 1");
  if (!(c_ada >= 0.0) || !std::isfinite(c_ada)) fail("c_ada must be nonnegative");
  if (!(delta > 0.0 && delta <= 0.5)) fail("delta must lie in (0, 0.5]");
  if (!(c_x > 0.0)) fail("c_x must be positive");
  if (!(reward_bound >= 0.0)) fail("reward_bound must be nonnegative");
  if (!(b0 > 0.0)) fail("b0 must be positive");
  if (!(c0 >= 0.0)) fail("c0 must be nonnegative");
  if (!(gamma0 > 0.0)) fail("gamma0 must be positive");
  if (!(c_tilde > 0.0 && c_tilde < 0.5)) fail("c_tilde must lie in (0, 0.5)");
  if (!(c0_effdim >= 1.0)) fail("c0_effdim must be >= 1");
  if (!(theta_norm_hint >= 0.0)) fail("theta_norm_hint must be nonnegative");
}

double theory_c_ada(const FilterSpec& filter, const AdaptiveConfig& cfg) {
  const double c = cfg.c_tilde;
  return 8.0 * filter.b * std::sqrt((1.0 - c) / (1.0 - 2.0 * c)) * std::sqrt(1.0 / (1.0 - 2.0 * c));
}

double effective_sample_size(double n, const AdaptiveConfig& cfg) {
  double c1 = 0.0;
  if (cfg.c0 > 0.0) {
    const double M = cfg.reward_bound;
    const double cx = cfg.c_x;
    const double inner = std::max(M + 2.0 * cx * cfg.theta_norm_hint, cx);
    const double first = M > 0.0 ? std::sqrt(2.0) * inner / (2.0 * cx * M)
                                 : std::numeric_limits<double>::infinity();
    c1 = cfg.c0 * cfg.b0 * std::max(first, 1.0 / cx);
  }
  return n * cfg.b0 / (2.0 * std::pow(max_clause_log(c1 * n), 1.0 / cfg.gamma0));
}

double ell3(double n, int d, const AdaptiveConfig& cfg) {
  const double argument = cfg.b0 * cfg.c0 * n * 2.0 * std::sqrt(static_cast<double>(d)) / cfg.c_x;
  return n * cfg.b0 / (2.0 * std::pow(max_clause_log(argument), 1.0 / cfg.gamma0));
}

double sample_complexity_constant(const AdaptiveConfig& cfg) {
  const double cx = cfg.c_x;
  return 21.0 * cx * (1.0 + 2.0 * cx) * (std::sqrt(cfg.c0_effdim) + 1.0) / cfg.c_tilde *
         std::log(2.0 / cfg.delta);
}

int grid_budget(double n, const AdaptiveConfig& cfg) {
  if (cfg.fixed_budget) return cfg.budget;
  const double ratio =
      sample_complexity_constant(cfg) / (cfg.q0 * std::sqrt(effective_sample_size(n, cfg)));
  const double theory = std::log(ratio) / std::log(cfg.q);
  // Absorb round-off when the ratio is an exact power of q.
  const double rounded = std::ceil(theory - 1e-9);
  if (!(rounded >= 1.0)) return 1;
  if (rounded >= static_cast<double>(cfg.budget)) return cfg.budget;
  return static_cast<int>(rounded);
}

double grid_lambda(const AdaptiveConfig& cfg, int k) { return cfg.q0 * std::pow(cfg.q, k); }

double compute_W(const SpectralDecomposition& decomp, double lambda, double n, int d,
                 const AdaptiveConfig& cfg) {
  if (!(lambda > 0.0)) throw DomainError("compute_W: lambda must be positive");
  const double l3 = ell3(n, d, cfg);
  const double n_gamma = effective_sample_size(n, cfg);
  const double cx = cfg.c_x;
  const double inflation =
      1.0 + 4.0 * (13.0 * cx / std::sqrt(lambda * l3) + 21.0 * cx * cx / (lambda * l3));
  const double root_n_eff = std::max(std::sqrt(empirical_effective_dimension(decomp, lambda)), 1.0);
  return inflation * root_n_eff / std::sqrt(n_gamma) + 1.0 / (n_gamma * std::sqrt(lambda));
}

double adaptive_threshold(int t, int T, double phi_next, double W, const AdaptiveConfig& cfg) {
  const double log_term = std::log(2.0 / cfg.delta);
  return cfg.c_ada * 84.0 * ((T - t + 2) * cfg.reward_bound + phi_next) * (1.0 + cfg.c_x) * W *
         log_term * log_term;
}

Vector construct_targets(const BatchDataset& dataset, int t, const Vector& theta_next) {
  require_stage(dataset, t);
  require_theta(dataset, theta_next);
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Vector y(n);
  const bool terminal = theta_next.isZero(0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double r = dataset.trajectory(idx).rewards[static_cast<std::size_t>(t - 1)];
    y[i] = terminal ? r : r + best_value(dataset, dataset.context_state(idx, t), theta_next);
  }
  return y;
}

double phi_bound(const BatchDataset& dataset, int t, const Vector& theta_next) {
  require_stage(dataset, t);
  require_theta(dataset, theta_next);
  if (theta_next.isZero(0.0)) return 0.0;
  double phi = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Vector& state = dataset.context_state(i, t);
    for (int a = 0; a < dataset.action_count(); ++a) {
      phi = std::max(phi, std::abs(dataset.features(state, a).dot(theta_next)));
    }
  }
  return phi;
}

Vector fit_stage(const SpectralDecomposition& decomp, const Vector& cross_moment,
                 const FilterSpec& filter, double lambda) {
  return apply_filter(decomp, filter, lambda, cross_moment);
}

Vector fit_stage(const StageDesign& design, const Vector& targets, const FilterSpec& filter,
                 double lambda) {
  if (!targets.allFinite()) throw NumericError("targets are not finite");
  const SpectralDecomposition decomp = decompose(empirical_covariance(design));
  return fit_stage(decomp, empirical_cross_moment(design, targets), filter, lambda);
}

StageFit select_lambda(const StageDesign& design, const Vector& targets, const FilterSpec& filter,
                       int t, int T, double phi_next, const AdaptiveConfig& cfg) {
  cfg.validate();
  if (!targets.allFinite()) throw NumericError("stage " + std::to_string(t) + ": targets are not finite");
  const SpectralDecomposition decomp = decompose(empirical_covariance(design));
  const Vector moment = empirical_cross_moment(design, targets);
  const auto n = static_cast<double>(design.size());
  const auto d = static_cast<int>(design.dim());
  const int K = grid_budget(n, cfg);

  // thetas[k] for k = 1..K+1; index 0 unused.
  std::vector<Vector> thetas(static_cast<std::size_t>(K) + 2);
  for (int k = 1; k <= K + 1; ++k) {
    try {
      thetas[static_cast<std::size_t>(k)] = fit_stage(decomp, moment, filter, grid_lambda(cfg, k));
    } catch (const Error& e) {
      throw NumericError("stage " + std::to_string(t) + ", grid index k = " + std::to_string(k) +
                         ": " + e.what());
    }
    if (!thetas[static_cast<std::size_t>(k)].allFinite()) {
      throw NumericError("stage " + std::to_string(t) + ", grid index k = " + std::to_string(k) +
                         ": non-finite estimate");
    }
  }

  StageFit fit;
  StageFitReport& report = fit.report;
  report.stage = t;
  report.budget = K;
  report.phi_next = phi_next;
  report.selected_k = K;
  for (int k = K; k >= 1; --k) {
    const double lambda_next = grid_lambda(cfg, k + 1);
    const Vector diff = thetas[static_cast<std::size_t>(k) + 1] - thetas[static_cast<std::size_t>(k)];
    const double gap = weighted_half_norm(decomp, lambda_next, diff);
    const double W = compute_W(decomp, lambda_next, n, d, cfg);
    const double threshold = adaptive_threshold(t, T, phi_next, W, cfg);
    report.ks.push_back(k);
    report.lambdas.push_back(grid_lambda(cfg, k));
    report.consecutive_diff.push_back(gap);
    report.thresholds.push_back(threshold);
    if (gap >= threshold) {
      report.selected_k = k;
      report.triggered = true;
      break;
    }
  }
  report.selected_lambda = grid_lambda(cfg, report.selected_k);
  fit.k = report.selected_k;
  fit.lambda = report.selected_lambda;
  fit.theta = thetas[static_cast<std::size_t>(fit.k)];
  return fit;
}

std::vector<Vector> ModelBundle::thetas() const {
  std::vector<Vector> out;
  out.reserve(stages.size());
  for (const auto& s : stages) out.push_back(s.theta);
  return out;
}

bool ModelBundle::operator==(const ModelBundle& other) const {
  return format_version == other.format_version && horizon == other.horizon &&
         feature_dim == other.feature_dim && method == other.method &&
         filter.kind == other.filter.kind && stages == other.stages && config == other.config &&
         lasso == other.lasso && feature_mask == other.feature_mask && seed == other.seed;
}

TrainResult train(const BatchDataset& dataset, const FilterSpec& filter, AdaptiveConfig cfg,
                  const TrainOptions& options) {
  cfg.reward_bound = dataset.reward_bound();
  cfg.validate();
  const int T = dataset.horizon();
  const int d = dataset.feature_dim();
  if (!options.feature_mask.empty() && static_cast<int>(options.feature_mask.size()) != d) {
    throw ShapeError("feature mask length does not match feature dimension");
  }

  TrainResult result;
  ModelBundle& model = result.model;
  model.horizon = T;
  model.feature_dim = d;
  switch (filter.kind) {
    case FilterKind::tikhonov:
      model.method = Method::tikhonov;
      break;
    case FilterKind::gradient_descent:
      model.method = Method::gradient_descent;
      break;
    case FilterKind::cutoff:
      model.method = Method::cutoff;
      break;
  }
  model.filter = filter;
  model.config = cfg;
  model.feature_mask = options.feature_mask;
  model.seed = options.seed;
  model.stages.resize(static_cast<std::size_t>(T));
  result.reports.resize(static_cast<std::size_t>(T));

  Vector theta_next = Vector::Zero(d);
  for (int t = T; t >= 1; --t) {
    try {
      const Vector targets = construct_targets(dataset, t, theta_next);
      const double phi = phi_bound(dataset, t, theta_next);
      StageDesign design = stage_design(dataset, t);
      if (!options.feature_mask.empty()) design = mask_design(std::move(design), options.feature_mask);
      StageFit fit = select_lambda(design, targets, filter, t, T, phi, cfg);
      const auto idx = static_cast<std::size_t>(t - 1);
      model.stages[idx] = StageModel{t, fit.theta, fit.lambda, fit.k};
      result.reports[idx] = std::move(fit.report);
      theta_next = model.stages[idx].theta;
    } catch (const NumericError& e) {
      throw NumericError("stage " + std::to_string(t) + ": " + e.what());
    }
  }
  return result;
}

ErrorDecomposition error_decomposition_diagnostic(const StageDesign& design, const Vector& targets,
                                                  const Vector& targets_star,
                                                  const Vector& targets_noisefree, double lambda,
                                                  const FilterSpec& filter,
                                                  const Vector& theta_star,
                                                  const Matrix& sigma_true) {
  const Eigen::Index n = design.size();
  const Eigen::Index d = design.dim();
  if (targets.size() != n || targets_star.size() != n || targets_noisefree.size() != n) {
    throw ShapeError("target vectors must have one entry per design row");
  }
  if (theta_star.size() != d || sigma_true.rows() != d || sigma_true.cols() != d) {
    throw ShapeError("ground truth does not match design dimension");
  }
  const SpectralDecomposition emp = decompose(empirical_covariance(design));
  const Vector theta_d = fit_stage(emp, empirical_cross_moment(design, targets), filter, lambda);
  const Vector theta_hat = fit_stage(emp, empirical_cross_moment(design, targets_star), filter, lambda);
  const Vector theta_diamond =
      fit_stage(emp, empirical_cross_moment(design, targets_noisefree), filter, lambda);

  const SpectralDecomposition truth = decompose(sigma_true);
  ErrorDecomposition out;
  out.bias = weighted_half_norm(truth, lambda, theta_diamond - theta_star);
  out.variance = weighted_half_norm(truth, lambda, theta_diamond - theta_hat);
  out.multistage = weighted_half_norm(truth, lambda, theta_d - theta_hat);
  out.total = weighted_half_norm(truth, lambda, theta_d - theta_star);
  return out;
}

}  // namespace sblq
