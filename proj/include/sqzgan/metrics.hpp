#pragma once

// Frechet distance between Gaussian fits and the Inception Score functional,
// evaluated on caller-supplied features and class probabilities.

#include <cstddef>
#include <vector>

namespace sqzgan {

/// Dense row-major square matrix.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> a;

  Matrix() = default;
  explicit Matrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

Matrix matmul(const Matrix& x, const Matrix& y);
Matrix transpose(const Matrix& x);

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi rotations. Input must be symmetric.
SymmetricEigen jacobi_eigen(const Matrix& m, int max_sweeps = 100);

/// V diag(sqrt(max(lambda, 0))) V^T. Throws on eigenvalues below -tol.
Matrix sqrt_psd(const Matrix& m, double tol = 1e-10);

struct GaussianFit {
  std::vector<double> mu;
  Matrix C;

  std::size_t dim() const { return mu.size(); }
  /// Throws ConfigError unless C is symmetric and PSD within tolerance.
  void validate(double tol = 1e-10) const;
};

/// features: rows of length d, N >= 2. Covariance uses 1/(N-1) and is
/// symmetrized as (C + C^T) / 2.
GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features);

/// ||mu_p - mu_q||^2 + tr(C_p + C_q - 2 (C_p C_q)^{1/2}), with the trace of
/// the root taken from the eigenvalues of C_p^{1/2} C_q C_p^{1/2}.
double frechet_distance(const GaussianFit& p, const GaussianFit& q);

/// Rows are probability vectors over K classes.
struct ClassProbTable {
  std::vector<std::vector<double>> rows;

  std::size_t classes() const { return rows.empty() ? 0 : rows[0].size(); }
  /// Throws ConfigError on negative entries or rows not summing to 1.
  void validate(double tol = 1e-9) const;
};

/// exp(mean_x KL(p(l|x) || p(l))), with 0 log 0 = 0.
double inception_score(const ClassProbTable& table);

}  // namespace sqzgan
