#include "sqzgan/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace sqzgan {

const char* to_string(UpsampleMode mode) {
  return mode == UpsampleMode::Nearest ? "nearest" : "bilinear";
}

UpsampleMode parse_upsample_mode(const std::string& text) {
  if (text == "nearest") return UpsampleMode::Nearest;
  if (text == "bilinear") return UpsampleMode::Bilinear;
  throw ConfigError("unknown upsample mode '" + text + "'");
}

namespace kernels {
namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " +
                      std::to_string(rank) + ", got " + shape_str(a.shape()));
  }
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// One output index of a 2x upsample reads two source taps.
struct Taps {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Taps> upsample_taps(std::size_t n, UpsampleMode mode) {
  std::vector<Taps> taps(2 * n);
  for (std::size_t o = 0; o < 2 * n; ++o) {
    if (mode == UpsampleMode::Nearest) {
      taps[o] = {o / 2, o / 2, 1.0, 0.0};
      continue;
    }
    // Half-pixel centres, edge replicate: src = (o + 0.5) / 2 - 0.5.
    const std::size_t i = o / 2;
    const std::size_t last = n - 1;
    if (o % 2 == 0) {
      taps[o] = {i == 0 ? 0 : i - 1, i, 0.25, 0.75};
    } else {
      taps[o] = {i, std::min(i + 1, last), 0.75, 0.25};
    }
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
  return map(a, [c](T v) { return v * c; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  return map(a, [c](T v) { return v + c; });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return map(x, [slope](T v) { return v > T(0) ? v : v * slope; });
}

template <typename T>
Tensor<T> leaky_relu_slope(const Tensor<T>& x, T slope) {
  return map(x, [slope](T v) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return map(x, [](T v) { return v * v; });
}

template <typename T>
Tensor<T> sqrt_eps(const Tensor<T>& x, T eps) {
  return map(x, [eps](T v) { return std::sqrt(v + eps); });
}

template <typename T>
Tensor<T> rsqrt_eps(const Tensor<T>& x, T eps) {
  return map(x, [eps](T v) { return T(1) / std::sqrt(v + eps); });
}

template <typename T>
Tensor<T> reciprocal(const Tensor<T>& x) {
  return map(x, [](T v) { return T(1) / v; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return map(x, [](T v) { return std::log(v); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return map(x, [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return map(x, [](T v) {
    return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
  });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return map(x, [lo, hi](T v) { return std::clamp(v, lo, hi); });
}

template <typename T>
Tensor<T> clamp_mask(const Tensor<T>& x, T lo, T hi) {
  return map(x, [lo, hi](T v) { return (v > lo && v < hi) ? T(1) : T(0); });
}

template <typename T>
T sum_all(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return s;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape_numel(shape) != x.size()) {
    throw ConfigError("reshape " + shape_str(x.shape()) + " -> " +
                      shape_str(shape));
  }
  return Tensor<T>(shape, x.vec());
}

namespace {

void check_broadcast(const Shape& small, const Shape& big, const char* op) {
  bool ok = small.size() == big.size();
  for (std::size_t d = 0; ok && d < small.size(); ++d) {
    ok = small[d] == big[d] || small[d] == 1;
  }
  if (!ok) {
    throw ConfigError(std::string(op) + ": cannot broadcast " +
                      shape_str(small) + " to " + shape_str(big));
  }
}

// Visits every index of `big` in row-major order together with the flat
// index into the size-1-collapsed `small`.
template <typename F>
void for_each_broadcast(const Shape& small, const Shape& big, F f) {
  const std::size_t rank = big.size();
  std::vector<std::size_t> small_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = rank; d-- > 0;) {
    small_stride[d] = small[d] == 1 ? 0 : s;
    s *= small[d];
  }
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t n = shape_numel(big);
  std::size_t small_flat = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    f(flat, small_flat);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      small_flat += small_stride[d];
      if (idx[d] < big[d]) break;
      small_flat -= small_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  check_broadcast(x.shape(), shape, "broadcast_to");
  Tensor<T> out(shape);
  auto dst = out.data();
  auto src = x.data();
  for_each_broadcast(x.shape(), shape, [&](std::size_t big, std::size_t small) {
    dst[big] = src[small];
  });
  return out;
}

template <typename T>
Tensor<T> reduce_to(const Tensor<T>& x, const Shape& shape) {
  check_broadcast(shape, x.shape(), "reduce_to");
  Tensor<T> out(shape);
  auto dst = out.data();
  auto src = x.data();
  for_each_broadcast(shape, x.shape(), [&](std::size_t big, std::size_t small) {
    dst[small] += src[big];
  });
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw ConfigError("concat_channels: no inputs");
  const Shape& first = parts[0]->shape();
  if (first.size() != 4) throw ConfigError("concat_channels: rank-4 inputs");
  std::size_t total = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] ||
        s[3] != first[3]) {
      throw ConfigError("concat_channels: shape mismatch " + shape_str(first) +
                        " vs " + shape_str(s));
    }
    total += s[1];
  }
  const std::size_t n = first[0], plane = first[2] * first[3];
  Tensor<T> out(Shape{n, total, first[2], first[3]});
  auto dst = out.data();
  std::size_t offset = 0;
  for (const auto* p : parts) {
    const std::size_t c = p->dim(1);
    auto src = p->data();
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(src.begin() + b * c * plane, c * plane,
                  dst.begin() + (b * total + offset) * plane);
    }
    offset += c;
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Tensor<T>* parts[] = {&a, &b};
  return concat_channels<T>(std::span<const Tensor<T>* const>(parts));
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin,
                         std::size_t count) {
  require_rank(x, 4, "slice_channels");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (count == 0 || begin + count > c) {
    throw ConfigError("slice_channels: range out of bounds");
  }
  Tensor<T> out(Shape{n, count, x.dim(2), x.dim(3)});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(src.begin() + (b * c + begin) * plane, count * plane,
                dst.begin() + b * count * plane);
  }
  return out;
}

template <typename T>
Tensor<T> embed_channels(const Tensor<T>& x, std::size_t begin,
                         std::size_t total) {
  require_rank(x, 4, "embed_channels");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (begin + c > total) throw ConfigError("embed_channels: out of bounds");
  Tensor<T> out(Shape{n, total, x.dim(2), x.dim(3)});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(src.begin() + b * c * plane, c * plane,
                dst.begin() + (b * total + begin) * plane);
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a,
                 bool trans_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = trans_a ? a.dim(1) : a.dim(0);
  const std::size_t k = trans_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
  const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ConfigError("matmul: inner dimension mismatch " +
                      shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t lda = a.dim(1), ldb = b.dim(1);
  auto A = a.data();
  auto B = b.data();
  Tensor<T> out(Shape{m, n});
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? A[p * lda + i] : A[i * lda + p];
      T* row = &C[i * n];
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) row[j] += av * B[j * ldb + p];
      } else {
        const T* brow = &B[p * ldb];
        for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
      }
    }
  }
  return out;
}

namespace {

// Rows indexed by (c, kh, kw), columns by (n, oh, ow); zero outside the input.
template <typename T>
std::vector<T> im2col(const Tensor<T>& input, std::size_t KH, std::size_t KW,
                      int pad, long HO, long WO) {
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t P = std::size_t(HO * WO), NP = N * P;
  std::vector<T> col(C * KH * KW * NP, T(0));
  auto x = input.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t kh = 0; kh < KH; ++kh) {
      for (std::size_t kw = 0; kw < KW; ++kw) {
        T* row = col.data() + ((c * KH + kh) * KW + kw) * NP;
        const long dx = static_cast<long>(kw) - pad;
        const long ow_lo = std::max(0L, -dx);
        const long ow_hi = std::min(WO, static_cast<long>(W) - dx);
        for (std::size_t n = 0; n < N; ++n) {
          const T* xp = x.data() + (n * C + c) * H * W;
          for (long oh = 0; oh < HO; ++oh) {
            const long ih = oh + static_cast<long>(kh) - pad;
            if (ih < 0 || ih >= static_cast<long>(H)) continue;
            const T* xrow = xp + ih * W;
            T* crow = row + n * P + oh * WO;
            for (long ow = ow_lo; ow < ow_hi; ++ow) crow[ow] = xrow[ow + dx];
          }
        }
      }
    }
  }
  return col;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>* bias, int pad) {
  require_rank(input, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t O = weight.dim(0), KH = weight.dim(2), KW = weight.dim(3);
  if (weight.dim(1) != C) {
    throw ConfigError("conv2d: input channels " + std::to_string(C) +
                      " != weight in-channels " +
                      std::to_string(weight.dim(1)));
  }
  if (pad < 0) throw ConfigError("conv2d: negative padding");
  if (bias && (bias->rank() != 1 || bias->dim(0) != O)) {
    throw ConfigError("conv2d: bias shape " + shape_str(bias->shape()));
  }
  const long HO = static_cast<long>(H) + 2 * pad - static_cast<long>(KH) + 1;
  const long WO = static_cast<long>(W) + 2 * pad - static_cast<long>(KW) + 1;
  if (HO < 1 || WO < 1) throw ConfigError("conv2d: kernel larger than input");
  if (!input.all_finite()) throw NumericError("conv2d: non-finite input");

  const std::size_t P = std::size_t(HO * WO), NP = N * P;
  const std::size_t K = C * KH * KW;
  const std::vector<T> col = im2col(input, KH, KW, pad, HO, WO);

  // acc[o][n*P + p] = sum over (c, kh, kw) in that order, then bias.
  std::vector<T> acc(O * NP, T(0));
  auto w = weight.data();
  constexpr std::size_t kTile = 512;
  std::size_t o = 0;
  for (; o + 4 <= O; o += 4) {
    T* a0 = acc.data() + o * NP;
    T* a1 = a0 + NP;
    T* a2 = a1 + NP;
    T* a3 = a2 + NP;
    for (std::size_t i0 = 0; i0 < NP; i0 += kTile) {
      const std::size_t i1 = std::min(NP, i0 + kTile);
      for (std::size_t k = 0; k < K; ++k) {
        const T w0 = w[o * K + k], w1 = w[(o + 1) * K + k],
                w2 = w[(o + 2) * K + k], w3 = w[(o + 3) * K + k];
        const T* cp = col.data() + k * NP;
        for (std::size_t i = i0; i < i1; ++i) {
          const T cv = cp[i];
          a0[i] += w0 * cv;
          a1[i] += w1 * cv;
          a2[i] += w2 * cv;
          a3[i] += w3 * cv;
        }
      }
    }
  }
  for (; o < O; ++o) {
    T* ap = acc.data() + o * NP;
    for (std::size_t k = 0; k < K; ++k) {
      const T wv = w[o * K + k];
      const T* cp = col.data() + k * NP;
      for (std::size_t i = 0; i < NP; ++i) ap[i] += wv * cp[i];
    }
  }
  for (o = 0; o < O; ++o) {
    T* ap = acc.data() + o * NP;
    if (bias) {
      const T b = (*bias)[o];
      for (std::size_t i = 0; i < NP; ++i) ap[i] += b;
    }
  }
  Tensor<T> out(Shape{N, O, std::size_t(HO), std::size_t(WO)});
  auto y = out.data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      std::copy_n(acc.data() + o * NP + n * P, P, y.data() + (n * O + o) * P);
  return out;
}

template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& input, const Tensor<T>& grad_out,
                             std::size_t KH, std::size_t KW, int pad) {
  require_rank(input, 4, "conv2d_weight_grad");
  require_rank(grad_out, 4, "conv2d_weight_grad");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const std::size_t O = grad_out.dim(1);
  const long HO = static_cast<long>(grad_out.dim(2));
  const long WO = static_cast<long>(grad_out.dim(3));
  if (grad_out.dim(0) != N ||
      HO != static_cast<long>(H) + 2 * pad - static_cast<long>(KH) + 1 ||
      WO != static_cast<long>(W) + 2 * pad - static_cast<long>(KW) + 1) {
    throw ConfigError("conv2d_weight_grad: shape mismatch " +
                      shape_str(input.shape()) + " vs " +
                      shape_str(grad_out.shape()));
  }
  const std::size_t P = std::size_t(HO * WO), NP = N * P;
  const std::size_t K = C * KH * KW;
  const std::vector<T> col = im2col(input, KH, KW, pad, HO, WO);
  std::vector<T> colT(NP * K);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < NP; ++i) colT[i * K + k] = col[k * NP + i];

  // dw[o][k] accumulates over (n, oh, ow) in that order.
  Tensor<T> out(Shape{O, C, KH, KW});
  auto g = grad_out.data();
  auto dw = out.data();
  for (std::size_t o = 0; o < O; ++o) {
    T* dp = dw.data() + o * K;
    for (std::size_t n = 0; n < N; ++n) {
      const T* gp = g.data() + (n * O + o) * P;
      const T* cn = colT.data() + n * P * K;
      std::size_t p = 0;
      for (; p + 4 <= P; p += 4) {
        const T g0 = gp[p], g1 = gp[p + 1], g2 = gp[p + 2], g3 = gp[p + 3];
        const T* c0 = cn + p * K;
        const T* c1 = c0 + K;
        const T* c2 = c1 + K;
        const T* c3 = c2 + K;
        for (std::size_t k = 0; k < K; ++k) {
          dp[k] = (((dp[k] + g0 * c0[k]) + g1 * c1[k]) + g2 * c2[k]) +
                  g3 * c3[k];
        }
      }
      for (; p < P; ++p) {
        const T gv = gp[p];
        const T* cp = cn + p * K;
        for (std::size_t k = 0; k < K; ++k) dp[k] += gv * cp[k];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> flip_transpose(const Tensor<T>& weight) {
  require_rank(weight, 4, "flip_transpose");
  const std::size_t O = weight.dim(0), I = weight.dim(1), KH = weight.dim(2),
                    KW = weight.dim(3);
  Tensor<T> out(Shape{I, O, KH, KW});
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t kh = 0; kh < KH; ++kh)
        for (std::size_t kw = 0; kw < KW; ++kw)
          out.at(i, o, KH - 1 - kh, KW - 1 - kw) = weight.at(o, i, kh, kw);
  return out;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x, UpsampleMode mode) {
  require_rank(x, 4, "upsample2x");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto th = upsample_taps(H, mode);
  const auto tw = upsample_taps(W, mode);
  Tensor<T> out(Shape{N, C, 2 * H, 2 * W});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < N * C; ++p) {
    const T* s = &src[p * H * W];
    T* d = &dst[p * 4 * H * W];
    for (std::size_t oh = 0; oh < 2 * H; ++oh) {
      const Taps& a = th[oh];
      for (std::size_t ow = 0; ow < 2 * W; ++ow) {
        const Taps& b = tw[ow];
        if (mode == UpsampleMode::Nearest) {
          d[oh * 2 * W + ow] = s[a.i0 * W + b.i0];
          continue;
        }
        const T v = T(a.w0 * b.w0) * s[a.i0 * W + b.i0] +
                    T(a.w0 * b.w1) * s[a.i0 * W + b.i1] +
                    T(a.w1 * b.w0) * s[a.i1 * W + b.i0] +
                    T(a.w1 * b.w1) * s[a.i1 * W + b.i1];
        d[oh * 2 * W + ow] = v;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample2x_adjoint(const Tensor<T>& g, UpsampleMode mode) {
  require_rank(g, 4, "upsample2x_adjoint");
  const std::size_t N = g.dim(0), C = g.dim(1);
  if (g.dim(2) % 2 || g.dim(3) % 2) {
    throw ConfigError("upsample2x_adjoint: odd spatial extent " +
                      shape_str(g.shape()));
  }
  const std::size_t H = g.dim(2) / 2, W = g.dim(3) / 2;
  const auto th = upsample_taps(H, mode);
  const auto tw = upsample_taps(W, mode);
  Tensor<T> out(Shape{N, C, H, W});
  auto src = g.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < N * C; ++p) {
    const T* s = &src[p * 4 * H * W];
    T* d = &dst[p * H * W];
    for (std::size_t oh = 0; oh < 2 * H; ++oh) {
      const Taps& a = th[oh];
      for (std::size_t ow = 0; ow < 2 * W; ++ow) {
        const Taps& b = tw[ow];
        const T v = s[oh * 2 * W + ow];
        if (mode == UpsampleMode::Nearest) {
          d[a.i0 * W + b.i0] += v;
          continue;
        }
        d[a.i0 * W + b.i0] += T(a.w0 * b.w0) * v;
        d[a.i0 * W + b.i1] += T(a.w0 * b.w1) * v;
        d[a.i1 * W + b.i0] += T(a.w1 * b.w0) * v;
        d[a.i1 * W + b.i1] += T(a.w1 * b.w1) * v;
      }
    }
  }
  return out;
}

#define SQZGAN_INSTANTIATE(T)                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                        \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                        \
  template Tensor<T> leaky_relu_slope(const Tensor<T>&, T);                  \
  template Tensor<T> square(const Tensor<T>&);                               \
  template Tensor<T> sqrt_eps(const Tensor<T>&, T);                          \
  template Tensor<T> rsqrt_eps(const Tensor<T>&, T);                         \
  template Tensor<T> reciprocal(const Tensor<T>&);                           \
  template Tensor<T> log(const Tensor<T>&);                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                              \
  template Tensor<T> softplus(const Tensor<T>&);                             \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                          \
  template Tensor<T> clamp_mask(const Tensor<T>&, T, T);                     \
  template T sum_all(const Tensor<T>&);                                      \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);           \
  template Tensor<T> reduce_to(const Tensor<T>&, const Shape&);              \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);     \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t,           \
                                    std::size_t);                            \
  template Tensor<T> embed_channels(const Tensor<T>&, std::size_t,           \
                                    std::size_t);                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool); \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,              \
                            const Tensor<T>*, int);                          \
  template Tensor<T> conv2d_weight_grad(const Tensor<T>&, const Tensor<T>&,  \
                                        std::size_t, std::size_t, int);      \
  template Tensor<T> flip_transpose(const Tensor<T>&);                       \
  template Tensor<T> upsample2x(const Tensor<T>&, UpsampleMode);             \
  template Tensor<T> upsample2x_adjoint(const Tensor<T>&, UpsampleMode);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace kernels
}  // namespace sqzgan
