#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace testing {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Matrix random_matrix(std::mt19937_64& gen, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(gen);
  return m;
}

inline Vector random_vector(std::mt19937_64& gen, int d) { return random_matrix(gen, d, 1).col(0); }

// Rows scaled to unit norm.
inline Matrix unit_rows(Matrix m) {
  for (int i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).norm();
  return m;
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sblq_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
