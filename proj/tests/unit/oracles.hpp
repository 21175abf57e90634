#pragma once

// Straightforward reference implementations used as test oracles. They are
// written from the defining formulas and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sqzgan/rng.hpp"
#include "sqzgan/tensor.hpp"

namespace oracle {

using sqzgan::Shape;
using sqzgan::Tensor;

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed,
                                    double scale = 1.0) {
  sqzgan::CounterRng rng(seed, 999);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// out[n,o,y,x] = sum_c sum_kh sum_kw in[n,c,y+kh-pad,x+kw-pad] w[o,c,kh,kw]
inline Tensor<double> conv2d(const Tensor<double>& in, const Tensor<double>& w,
                             const Tensor<double>* bias, int pad) {
  const long N = long(in.dim(0)), C = long(in.dim(1)), H = long(in.dim(2)),
             W = long(in.dim(3));
  const long O = long(w.dim(0)), KH = long(w.dim(2)), KW = long(w.dim(3));
  const long HO = H + 2 * pad - KH + 1, WO = W + 2 * pad - KW + 1;
  Tensor<double> out(Shape{std::size_t(N), std::size_t(O), std::size_t(HO),
                           std::size_t(WO)});
  for (long n = 0; n < N; ++n)
    for (long o = 0; o < O; ++o)
      for (long y = 0; y < HO; ++y)
        for (long x = 0; x < WO; ++x) {
          double acc = 0;
          for (long c = 0; c < C; ++c)
            for (long kh = 0; kh < KH; ++kh)
              for (long kw = 0; kw < KW; ++kw) {
                const long iy = y + kh - pad, ix = x + kw - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += in.at(n, c, iy, ix) * w.at(o, c, kh, kw);
              }
          if (bias) acc += (*bias)[o];
          out.at(n, o, y, x) = acc;
        }
  return out;
}

// Half-pixel bilinear sampling with edge replication, evaluated per output
// pixel from src = (o + 0.5) / 2 - 0.5.
inline Tensor<double> bilinear2x(const Tensor<double>& in) {
  const long N = long(in.dim(0)), C = long(in.dim(1)), H = long(in.dim(2)),
             W = long(in.dim(3));
  Tensor<double> out(Shape{in.dim(0), in.dim(1), 2 * in.dim(2),
                           2 * in.dim(3)});
  auto sample = [&](long n, long c, double sy, double sx) {
    sy = std::clamp(sy, 0.0, double(H - 1));
    sx = std::clamp(sx, 0.0, double(W - 1));
    const long y0 = long(std::floor(sy)), x0 = long(std::floor(sx));
    const long y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = sy - double(y0), fx = sx - double(x0);
    return (1 - fy) * (1 - fx) * in.at(n, c, y0, x0) +
           (1 - fy) * fx * in.at(n, c, y0, x1) +
           fy * (1 - fx) * in.at(n, c, y1, x0) + fy * fx * in.at(n, c, y1, x1);
  };
  for (long n = 0; n < N; ++n)
    for (long c = 0; c < C; ++c)
      for (long y = 0; y < 2 * H; ++y)
        for (long x = 0; x < 2 * W; ++x)
          out.at(n, c, y, x) =
              sample(n, c, (y + 0.5) / 2 - 0.5, (x + 0.5) / 2 - 0.5);
  return out;
}

inline Tensor<double> nearest2x(const Tensor<double>& in) {
  Tensor<double> out(Shape{in.dim(0), in.dim(1), 2 * in.dim(2),
                           2 * in.dim(3)});
  for (std::size_t n = 0; n < in.dim(0); ++n)
    for (std::size_t c = 0; c < in.dim(1); ++c)
      for (std::size_t y = 0; y < 2 * in.dim(2); ++y)
        for (std::size_t x = 0; x < 2 * in.dim(3); ++x)
          out.at(n, c, y, x) = in.at(n, c, y / 2, x / 2);
  return out;
}

// y = lrelu(W x + b) on a plain vector.
inline std::vector<double> dense_lrelu(const Tensor<double>& weight,
                                       const Tensor<double>& bias,
                                       const std::vector<double>& x) {
  const std::size_t M = weight.dim(0), K = weight.dim(1);
  std::vector<double> y(M);
  for (std::size_t m = 0; m < M; ++m) {
    double acc = bias[m];
    for (std::size_t k = 0; k < K; ++k) acc += weight[m * K + k] * x[k];
    y[m] = acc > 0 ? acc : 0.2 * acc;
  }
  return y;
}

inline double max_abs(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
