#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "doctest.h"
#include "sqzgan/errors.hpp"
#include "sqzgan/metrics.hpp"
#include "sqzgan/rng.hpp"

using namespace sqzgan;
using hp = boost::multiprecision::cpp_bin_float_50;

namespace {

std::vector<std::vector<double>> random_features(std::size_t n, std::size_t d,
                                                 std::uint64_t seed,
                                                 double shift = 0) {
  CounterRng rng(seed, 21);
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      // Correlated columns so the covariance is not diagonal.
      out[i][j] = rng.normal() + (j ? 0.5 * out[i][j - 1] : 0) + shift;
  return out;
}

GaussianFit diag_fit(std::vector<double> mu, std::vector<double> var) {
  GaussianFit f;
  f.mu = std::move(mu);
  f.C = Matrix(f.mu.size());
  for (std::size_t i = 0; i < var.size(); ++i) f.C(i, i) = var[i];
  return f;
}

double max_abs(const Matrix& a, const Matrix& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    m = std::max(m, std::abs(a.a[i] - b.a[i]));
  return m;
}

Matrix random_rotation(std::size_t d, std::uint64_t seed) {
  // Orthonormalise a random matrix with modified Gram-Schmidt.
  CounterRng rng(seed, 22);
  Matrix q(d);
  for (auto& v : q.a) v = rng.normal();
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, k);
    }
    double nrm = 0;
    for (std::size_t i = 0; i < d; ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= nrm;
  }
  return q;
}

ClassProbTable random_table(std::size_t n, std::size_t k, std::uint64_t seed) {
  CounterRng rng(seed, 23);
  ClassProbTable t;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(k);
    double s = 0;
    for (auto& v : row) {
      // Occasional exact zeros exercise the 0 log 0 convention.
      v = rng.uniform() < 0.1 ? 0.0 : std::pow(rng.uniform(), 3);
      s += v;
    }
    if (s == 0) row[0] = s = 1;
    for (auto& v : row) v /= s;
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace

TEST_CASE("fit_gaussian") {
  const auto two = fit_gaussian({{0, 0}, {2, 0}});
  CHECK(two.mu == std::vector<double>{1, 0});
  CHECK(two.C(0, 0) == 2);
  CHECK(two.C(0, 1) == 0);
  CHECK(two.C(1, 1) == 0);

  const auto same = fit_gaussian({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  for (double v : same.C.a) CHECK(v == 0);

  CHECK_THROWS_AS(fit_gaussian({{1, 2}}), ConfigError);
  CHECK_THROWS_AS(fit_gaussian({{1, 2}, {1}}), ConfigError);

  // Two-pass covariance in 50-digit arithmetic.
  const auto x = random_features(50, 8, 1);
  const auto fit = fit_gaussian(x);
  std::vector<hp> mu(8, hp(0));
  for (const auto& r : x)
    for (std::size_t j = 0; j < 8; ++j) mu[j] += r[j];
  for (auto& m : mu) m /= 50;
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(std::abs(fit.mu[i] - double(mu[i])) <= 1e-14);
    for (std::size_t j = 0; j < 8; ++j) {
      hp c = 0;
      for (const auto& r : x) c += (r[i] - mu[i]) * (r[j] - mu[j]);
      c /= 49;
      CHECK(std::abs(fit.C(i, j) - double(c)) <= 1e-13);
    }
  }
  CHECK_NOTHROW(fit.validate());
}

TEST_CASE("jacobi eigen and PSD square root") {
  const auto fit = fit_gaussian(random_features(100, 12, 2));
  const auto e = jacobi_eigen(fit.C);
  for (std::size_t k = 1; k < e.values.size(); ++k)
    CHECK(e.values[k - 1] <= e.values[k]);
  const Matrix r = sqrt_psd(fit.C);
  CHECK(max_abs(matmul(r, r), fit.C) <= 1e-8);
  CHECK(max_abs(r, transpose(r)) <= 1e-12);

  Matrix bad(2);
  bad(0, 0) = 1;
  bad(1, 1) = -1;
  CHECK_THROWS(sqrt_psd(bad));
  GaussianFit g;
  g.mu = {0, 0};
  g.C = bad;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.C(1, 1) = 1;
  g.C(0, 1) = 0.5;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("frechet distance") {
  const auto p = fit_gaussian(random_features(80, 6, 3));
  const auto q = fit_gaussian(random_features(80, 6, 4, 0.3));
  CHECK(std::abs(frechet_distance(p, p)) <= 1e-9);
  CHECK(std::abs(frechet_distance(p, q) - frechet_distance(q, p)) <= 1e-9);
  CHECK(frechet_distance(p, q) > 0);

  CHECK(std::abs(frechet_distance(diag_fit({0}, {1}), diag_fit({3}, {4})) -
                 10) <= 1e-9);
  CHECK(std::abs(frechet_distance(diag_fit({0, 0}, {1, 4}),
                                  diag_fit({0, 0}, {4, 1})) -
                 2) <= 1e-9);

  // Rotating both fits leaves the distance unchanged.
  const Matrix Q = random_rotation(6, 5);
  auto rotate = [&](const GaussianFit& f) {
    GaussianFit g;
    g.mu.assign(6, 0);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) g.mu[i] += Q(i, j) * f.mu[j];
    g.C = matmul(matmul(Q, f.C), transpose(Q));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < i; ++j)
        g.C(i, j) = g.C(j, i) = (g.C(i, j) + g.C(j, i)) / 2;
    return g;
  };
  CHECK(std::abs(frechet_distance(rotate(p), rotate(q)) -
                 frechet_distance(p, q)) <= 1e-8);

  CHECK_THROWS_AS(frechet_distance(diag_fit({0}, {1}), diag_fit({0, 0}, {1, 1})),
                  ConfigError);
}

TEST_CASE("inception score") {
  ClassProbTable uniform;
  for (int i = 0; i < 5; ++i) uniform.rows.push_back(std::vector<double>(4, 0.25));
  CHECK(inception_score(uniform) == doctest::Approx(1.0).epsilon(1e-15));

  ClassProbTable onehot;
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<double> r(10, 0.0);
    r[i] = 1;
    onehot.rows.push_back(r);
  }
  CHECK(std::abs(inception_score(onehot) - 10) <= 1e-9);

  for (std::uint64_t s = 0; s < 1000; ++s) {
    const std::size_t K = 2 + s % 9;
    const auto t = random_table(1 + s % 17, K, s);
    const double is = inception_score(t);
    CHECK(is >= 1.0 - 1e-12);
    CHECK(is <= double(K) + 1e-9);
  }

  const auto t = random_table(100, 10, 7);
  std::vector<hp> marg(10, hp(0));
  for (const auto& r : t.rows)
    for (std::size_t k = 0; k < 10; ++k) marg[k] += r[k];
  for (auto& m : marg) m /= 100;
  hp kl = 0;
  for (const auto& r : t.rows)
    for (std::size_t k = 0; k < 10; ++k)
      if (r[k] > 0) kl += r[k] * log(hp(r[k]) / marg[k]);
  const double want = double(exp(kl / 100));
  CHECK(std::abs(inception_score(t) - want) <= 1e-12 * want);

  ClassProbTable bad;
  bad.rows = {{0.5, 0.6}};
  CHECK_THROWS_AS(inception_score(bad), ConfigError);
  bad.rows = {{1.5, -0.5}};
  CHECK_THROWS_AS(inception_score(bad), ConfigError);
  CHECK_THROWS_AS(inception_score(ClassProbTable{}), ConfigError);
}
