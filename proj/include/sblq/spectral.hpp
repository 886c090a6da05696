#pragma once

#include <limits>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sblq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Eigendecomposition of a symmetric PSD matrix: A = U diag(sigma) U^T.
// Eigenvalues are ascending and nonnegative; column j of `eigenvectors`
// pairs with eigenvalue j.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  Eigen::Index dim() const { return eigenvalues.size(); }
  Matrix reconstruct() const;
};

// Throws SymmetryError when max |A - A^T| > 1e-10, NumericError on non-finite
// entries or eigenvalues below -1e-12 (scaled by max(1, max|A|)). Smaller
// negative eigenvalues are round-off and are clamped to zero.
SpectralDecomposition decompose(const Matrix& matrix);

enum class FilterKind { tikhonov, cutoff, gradient_descent };

std::string_view to_string(FilterKind kind);
FilterKind parse_filter_kind(std::string_view name);

// A spectral filter g_lambda together with its qualification constants.
// gamma_table maps an order nu to the constant gamma_nu of the bound
// |1 - g(s) s| s^nu <= gamma_nu lambda^nu.
struct FilterSpec {
  FilterKind kind = FilterKind::tikhonov;
  double b = 1.0;
  double nu_g = 1.0;  // +infinity for non-saturating filters
  std::map<double, double> gamma_table;

  static FilterSpec defaults(FilterKind kind);
  bool saturates() const { return nu_g != std::numeric_limits<double>::infinity(); }
};

// Number of gradient-descent steps associated with lambda: max(1, floor(1/lambda)).
long gradient_steps(double lambda);

// g_lambda(sigma).
//  tikhonov:          1 / (sigma + lambda)
//  cutoff:            1 / sigma if sigma >= lambda, else 0
//  gradient-descent:  sum_{i<p} (1 - sigma)^i = (1 - (1 - sigma)^p) / sigma, p at sigma = 0
double filter_value(const FilterSpec& spec, double lambda, double sigma);

// g_lambda(A) v, with A given by its decomposition.
Vector apply_filter(const SpectralDecomposition& decomp, const FilterSpec& spec,
                    double lambda, const Vector& v);

// Tr(A (A + lambda I)^{-1}).
double empirical_effective_dimension(const SpectralDecomposition& decomp, double lambda);

// || (A + lambda I)^{1/2} v ||_2. lambda may be zero.
double weighted_half_norm(const SpectralDecomposition& decomp, double lambda, const Vector& v);

}  // namespace sblq
