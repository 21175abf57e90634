#include "sqzgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sqzgan/errors.hpp"

namespace sqzgan {

Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.n != y.n) throw ConfigError("matmul: dimension mismatch");
  Matrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const double v = x(i, k);
      for (std::size_t j = 0; j < x.n; ++j) out(i, j) += v * y(k, j);
    }
  return out;
}

Matrix transpose(const Matrix& x) {
  Matrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j) out(j, i) = x(i, j);
  return out;
}

SymmetricEigen jacobi_eigen(const Matrix& m, int max_sweeps) {
  const std::size_t n = m.n;
  Matrix a = m;
  Matrix v(n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0;
  for (double x : a.a) scale = std::max(scale, std::fabs(x));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * scale * scale || off == 0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.vectors = Matrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values.push_back(a(order[k], order[k]));
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

Matrix sqrt_psd(const Matrix& m, double tol) {
  const SymmetricEigen e = jacobi_eigen(m);
  Matrix out(m.n);
  for (std::size_t k = 0; k < m.n; ++k) {
    if (e.values[k] < -tol) {
      throw ConfigError("matrix is not positive semidefinite (eigenvalue " +
                        std::to_string(e.values[k]) + ")");
    }
    const double r = std::sqrt(std::max(e.values[k], 0.0));
    for (std::size_t i = 0; i < m.n; ++i)
      for (std::size_t j = 0; j < m.n; ++j)
        out(i, j) += e.vectors(i, k) * r * e.vectors(j, k);
  }
  return out;
}

void GaussianFit::validate(double tol) const {
  if (C.n != mu.size()) {
    throw ConfigError("Gaussian fit: mean has " + std::to_string(mu.size()) +
                      " entries, covariance is " + std::to_string(C.n) + "x" +
                      std::to_string(C.n));
  }
  double scale = 1;
  for (double x : C.a) scale = std::max(scale, std::fabs(x));
  for (std::size_t i = 0; i < C.n; ++i)
    for (std::size_t j = i + 1; j < C.n; ++j)
      if (std::fabs(C(i, j) - C(j, i)) > tol * scale) {
        throw ConfigError("Gaussian fit: covariance is not symmetric");
      }
  const auto e = jacobi_eigen(C);
  if (!e.values.empty() && e.values.front() < -tol) {
    throw ConfigError("Gaussian fit: covariance is indefinite (eigenvalue " +
                      std::to_string(e.values.front()) + ")");
  }
}

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features) {
  const std::size_t N = features.size();
  if (N < 2) throw ConfigError("fit_gaussian needs at least 2 samples");
  const std::size_t d = features[0].size();
  if (d == 0) throw ConfigError("fit_gaussian: empty feature vectors");
  for (const auto& row : features) {
    if (row.size() != d) throw ConfigError("fit_gaussian: ragged features");
  }
  GaussianFit fit;
  fit.mu.assign(d, 0.0);
  for (const auto& row : features)
    for (std::size_t i = 0; i < d; ++i) fit.mu[i] += row[i];
  for (double& m : fit.mu) m /= double(N);
  fit.C = Matrix(d);
  for (const auto& row : features)
    for (std::size_t i = 0; i < d; ++i) {
      const double di = row[i] - fit.mu[i];
      for (std::size_t j = 0; j < d; ++j) fit.C(i, j) += di * (row[j] - fit.mu[j]);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double s = (fit.C(i, j) + fit.C(j, i)) / 2 / double(N - 1);
      fit.C(i, j) = fit.C(j, i) = s;
    }
  return fit;
}

double frechet_distance(const GaussianFit& p, const GaussianFit& q) {
  if (p.dim() != q.dim()) {
    throw ConfigError("frechet_distance: dimension " + std::to_string(p.dim()) +
                      " vs " + std::to_string(q.dim()));
  }
  p.validate();
  q.validate();
  double mean_term = 0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    mean_term += (p.mu[i] - q.mu[i]) * (p.mu[i] - q.mu[i]);
  }
  const Matrix rp = sqrt_psd(p.C);
  Matrix inner = matmul(matmul(rp, q.C), rp);
  for (std::size_t i = 0; i < inner.n; ++i)
    for (std::size_t j = i + 1; j < inner.n; ++j) {
      const double s = (inner(i, j) + inner(j, i)) / 2;
      inner(i, j) = inner(j, i) = s;
    }
  double root_trace = 0;
  for (double lambda : jacobi_eigen(inner).values) {
    if (lambda < -1e-10) {
      throw ConfigError("frechet_distance: C_p^1/2 C_q C_p^1/2 has eigenvalue " +
                        std::to_string(lambda));
    }
    root_trace += std::sqrt(std::max(lambda, 0.0));
  }
  double tr = 0;
  for (std::size_t i = 0; i < p.dim(); ++i) tr += p.C(i, i) + q.C(i, i);
  const double fd = mean_term + tr - 2 * root_trace;
  if (fd < -1e-9) {
    throw NumericError("frechet_distance: negative result " +
                       std::to_string(fd));
  }
  return std::max(fd, 0.0);
}

void ClassProbTable::validate(double tol) const {
  if (rows.empty()) throw ConfigError("class probability table is empty");
  const std::size_t K = rows[0].size();
  if (K == 0) throw ConfigError("class probability rows are empty");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != K) throw ConfigError("ragged class probability table");
    double s = 0;
    for (double v : rows[r]) {
      if (!(v >= 0)) {
        throw ConfigError("row " + std::to_string(r) +
                          " has a negative or non-finite probability");
      }
      s += v;
    }
    if (std::fabs(s - 1) > tol) {
      throw ConfigError("row " + std::to_string(r) + " sums to " +
                        std::to_string(s));
    }
  }
}

double inception_score(const ClassProbTable& table) {
  table.validate();
  const std::size_t N = table.rows.size(), K = table.classes();
  std::vector<double> marginal(K, 0.0);
  for (const auto& row : table.rows)
    for (std::size_t k = 0; k < K; ++k) marginal[k] += row[k];
  for (double& m : marginal) m /= double(N);
  double kl_sum = 0;
  for (const auto& row : table.rows) {
    double kl = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (row[k] > 0) kl += row[k] * (std::log(row[k]) - std::log(marginal[k]));
    }
    kl_sum += kl;
  }
  // Rounding can push the mean KL a hair outside [0, log K].
  const double mean_kl = std::clamp(kl_sum / double(N), 0.0, std::log(double(K)));
  return std::exp(mean_kl);
}

}  // namespace sqzgan
