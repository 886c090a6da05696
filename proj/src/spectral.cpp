#include "sblq/spectral.hpp"

#include <cmath>
#include <string>

#include "sblq/errors.hpp"

namespace sblq {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kClampTol = 1e-12;
// Eigenvalues of normalized covariances may exceed 1 by round-off.
constexpr double kUnitSpectrumSlack = 1e-12;

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("lambda must be a positive finite real, got " + std::to_string(lambda));
  }
}

void require_dim(const SpectralDecomposition& decomp, const Vector& v) {
  if (v.size() != decomp.dim()) {
    throw ShapeError("vector of length " + std::to_string(v.size()) +
                     " does not match decomposition of dimension " + std::to_string(decomp.dim()));
  }
}

}  // namespace

Matrix SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

SpectralDecomposition decompose(const Matrix& matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
    throw ShapeError("decompose expects a nonempty square matrix");
  }
  if (!matrix.allFinite()) throw NumericError("matrix has non-finite entries");
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw SymmetryError("matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");

  SpectralDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < out.eigenvalues.size(); ++j) {
    double& s = out.eigenvalues[j];
    if (s < 0.0) {
      if (s < -kClampTol * scale) {
        throw NumericError("matrix has negative eigenvalue " + std::to_string(s));
      }
      s = 0.0;
    }
  }
  return out;
}

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::tikhonov:
      return "tikhonov";
    case FilterKind::cutoff:
      return "cutoff";
    case FilterKind::gradient_descent:
      return "gradient-descent";
  }
  return "unknown";
}

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "tikhonov") return FilterKind::tikhonov;
  if (name == "cutoff") return FilterKind::cutoff;
  if (name == "gradient-descent") return FilterKind::gradient_descent;
  throw DomainError("unknown filter kind '" + std::string(name) + "'");
}

FilterSpec FilterSpec::defaults(FilterKind kind) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind) {
    case FilterKind::tikhonov:
      return {kind, 1.0, 1.0, {{0.5, 1.0}, {1.0, 1.0}}};
    case FilterKind::cutoff:
      return {kind, 1.0, inf, {{0.5, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {4.0, 1.0}}};
    case FilterKind::gradient_descent:
      // sup over p of the residual bound approaches (nu/e)^nu; 4.69 at nu = 4.
      return {kind, 1.0, inf, {{0.5, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {4.0, 5.0}}};
  }
  throw DomainError("unknown filter kind");
}

long gradient_steps(double lambda) {
  require_positive_lambda(lambda);
  const double steps = std::floor(1.0 / lambda);
  if (steps < 1.0) return 1;
  if (steps > 1e15) throw DomainError("lambda too small for gradient-descent filter");
  return static_cast<long>(steps);
}

double filter_value(const FilterSpec& spec, double lambda, double sigma) {
  require_positive_lambda(lambda);
  if (!(sigma >= 0.0)) throw DomainError("sigma must be nonnegative");
  switch (spec.kind) {
    case FilterKind::tikhonov:
      return 1.0 / (sigma + lambda);
    case FilterKind::cutoff:
      return sigma >= lambda ? 1.0 / sigma : 0.0;
    case FilterKind::gradient_descent: {
      if (sigma > 1.0 + kUnitSpectrumSlack) {
        throw DomainError("gradient-descent filter requires sigma <= 1, got " + std::to_string(sigma));
      }
      const long p = gradient_steps(lambda);
      if (sigma == 0.0) return static_cast<double>(p);
      const double s = std::min(sigma, 1.0);
      // (1 - (1 - s)^p) / s without cancellation for small s.
      return -std::expm1(static_cast<double>(p) * std::log1p(-s)) / s;
    }
  }
  throw DomainError("unknown filter kind");
}

Vector apply_filter(const SpectralDecomposition& decomp, const FilterSpec& spec, double lambda,
                    const Vector& v) {
  require_dim(decomp, v);
  if (!v.allFinite()) throw NumericError("apply_filter: vector has non-finite entries");
  Vector coeffs = decomp.eigenvectors.transpose() * v;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    coeffs[j] *= filter_value(spec, lambda, decomp.eigenvalues[j]);
  }
  return decomp.eigenvectors * coeffs;
}

double empirical_effective_dimension(const SpectralDecomposition& decomp, double lambda) {
  require_positive_lambda(lambda);
  double total = 0.0;
  for (Eigen::Index j = 0; j < decomp.dim(); ++j) {
    const double s = decomp.eigenvalues[j];
    total += s / (s + lambda);
  }
  return total;
}

double weighted_half_norm(const SpectralDecomposition& decomp, double lambda, const Vector& v) {
  require_dim(decomp, v);
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  const Vector coeffs = decomp.eigenvectors.transpose() * v;
  double total = 0.0;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    total += (decomp.eigenvalues[j] + lambda) * coeffs[j] * coeffs[j];
  }
  return std::sqrt(total);
}

}  // namespace sblq
