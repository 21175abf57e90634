#pragma once

// Forward kernels on plain tensors. Every kernel is single-threaded and
// accumulates in a fixed row-major order, so results are bitwise
// reproducible. The autodiff layer composes these.

#include <optional>
#include <span>
#include <vector>

#include "sqzgan/tensor.hpp"

namespace sqzgan {

enum class UpsampleMode { Nearest, Bilinear };

const char* to_string(UpsampleMode mode);
UpsampleMode parse_upsample_mode(const std::string& text);

namespace kernels {

inline constexpr double kLeakySlope = 0.2;

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(kLeakySlope));
// 1 where x > 0, slope elsewhere.
template <typename T>
Tensor<T> leaky_relu_slope(const Tensor<T>& x, T slope = T(kLeakySlope));

template <typename T>
Tensor<T> square(const Tensor<T>& x);
// sqrt(x + eps)
template <typename T>
Tensor<T> sqrt_eps(const Tensor<T>& x, T eps);
// 1 / sqrt(x + eps)
template <typename T>
Tensor<T> rsqrt_eps(const Tensor<T>& x, T eps);
template <typename T>
Tensor<T> reciprocal(const Tensor<T>& x);
template <typename T>
Tensor<T> log(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
// log(1 + exp(x)), overflow-free.
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
// 1 where lo < x < hi, 0 elsewhere.
template <typename T>
Tensor<T> clamp_mask(const Tensor<T>& x, T lo, T hi);

template <typename T>
T sum_all(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

/// Expands size-1 axes of `x` to `shape` (equal rank required).
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
/// Sums `x` over the axes where `shape` has extent 1. Adjoint of
/// broadcast_to.
template <typename T>
Tensor<T> reduce_to(const Tensor<T>& x, const Shape& shape);

/// Stacks rank-4 tensors along the channel axis, in argument order.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin,
                         std::size_t count);
/// Places `x` at channel offset `begin` inside a zero tensor with `total`
/// channels. Adjoint of slice_channels.
template <typename T>
Tensor<T> embed_channels(const Tensor<T>& x, std::size_t begin,
                         std::size_t total);

/// 2-D matrix product with optional transposes: op(a) * op(b).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a,
                 bool trans_b);

/// Direct cross-correlation, stride 1, zero padding. input NCHW, weight
/// OIHW, optional bias O. Output H' = H + 2*pad - kH + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>* bias, int pad);
/// d(conv2d)/d(weight) contracted with `grad_out`.
template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& input, const Tensor<T>& grad_out,
                             std::size_t kh, std::size_t kw, int pad);
/// OIHW -> IOHW with both spatial axes reversed.
template <typename T>
Tensor<T> flip_transpose(const Tensor<T>& weight);

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x, UpsampleMode mode);
/// Transpose of upsample2x: maps a 2H x 2W gradient back to H x W.
template <typename T>
Tensor<T> upsample2x_adjoint(const Tensor<T>& g, UpsampleMode mode);

}  // namespace kernels
}  // namespace sqzgan
