#pragma once

// Tape-based reverse-mode differentiation.
//
// A Tape records every operation applied to its Vars. Backward passes are
// themselves expressed with the same recorded operations, so on a
// second-order tape the gradients returned by `gradients(..., true)` can be
// differentiated again (used for the R1 penalty).

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "sqzgan/kernels.hpp"
#include "sqzgan/tensor.hpp"

namespace sqzgan {

enum class TapeOrder { First, Second };

enum class OpKind {
  Leaf,
  Add,
  Mul,
  MulScalar,
  AddScalar,
  LeakyRelu,
  Square,
  SqrtEps,
  RsqrtEps,
  Reciprocal,
  Log,
  Sigmoid,
  Softplus,
  Clamp,
  SumAll,
  Reshape,
  BroadcastTo,
  ReduceTo,
  Concat,
  Slice,
  Embed,
  Matmul,
  Conv2d,
  ConvWeightGrad,
  FlipTranspose,
  Upsample,
  UpsampleAdjoint,
};

const char* to_string(OpKind kind);

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as its
/// tape is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct OpAttrs {
  double scalar = 0;
  double scalar2 = 0;
  int pad = 0;
  std::size_t kh = 0, kw = 0;
  std::size_t begin = 0, count = 0;
  bool trans_a = false, trans_b = false;
  UpsampleMode mode = UpsampleMode::Nearest;
  Shape shape;
};

template <typename T>
class Tape {
 public:
  struct Node {
    OpKind kind;
    Tensor<T> value;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    bool requires_grad;
  };

  explicit Tape(TapeOrder order = TapeOrder::First) : order_(order) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  TapeOrder order() const { return order_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// d(output)/d(wrt[i]) for each i. `output` must hold a single element.
  /// With create_graph the results are differentiable tape values; this
  /// needs a second-order tape.
  std::vector<Var<T>> gradients(const Var<T>& output,
                                std::span<const Var<T>> wrt,
                                bool create_graph = false);
  Var<T> gradient(const Var<T>& output, const Var<T>& wrt,
                  bool create_graph = false);

  // Used by the op functions.
  Var<T> record(OpKind kind, Tensor<T> value,
                std::vector<std::size_t> inputs, OpAttrs attrs = {});
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  Var<T> handle(std::size_t id) { return Var<T>(this, id); }

 private:
  std::vector<Var<T>> backward_node(std::size_t id, const Var<T>& grad);

  TapeOrder order_;
  bool recording_ = true;
  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->node(id_).value;
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

namespace ad {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul_scalar(const Var<T>& a, double c);
template <typename T>
Var<T> add_scalar(const Var<T>& a, double c);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope = kernels::kLeakySlope);
template <typename T>
Var<T> square(const Var<T>& x);
template <typename T>
Var<T> sqrt_eps(const Var<T>& x, double eps);
template <typename T>
Var<T> rsqrt_eps(const Var<T>& x, double eps);
template <typename T>
Var<T> reciprocal(const Var<T>& x);
template <typename T>
Var<T> log(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> softplus(const Var<T>& x);
template <typename T>
Var<T> clamp(const Var<T>& x, double lo, double hi);

template <typename T>
Var<T> sum_all(const Var<T>& x);
template <typename T>
Var<T> mean_all(const Var<T>& x);
template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape);
template <typename T>
Var<T> broadcast_to(const Var<T>& x, const Shape& shape);
template <typename T>
Var<T> reduce_to(const Var<T>& x, const Shape& shape);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T>
Var<T> embed_channels(const Var<T>& x, std::size_t begin, std::size_t total);

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_a = false,
              bool trans_b = false);

/// Stride-1 cross-correlation; kernel sizes 1x1 and 3x3, pad 0 or 1 for
/// user calls (the backward pass uses the general form internally).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int pad);
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int pad);
template <typename T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& grad_out,
                          std::size_t kh, std::size_t kw, int pad);
template <typename T>
Var<T> flip_transpose(const Var<T>& w);

template <typename T>
Var<T> upsample2x(const Var<T>& x, UpsampleMode mode);
template <typename T>
Var<T> upsample2x_adjoint(const Var<T>& g, UpsampleMode mode);
template <typename T>
Var<T> avg_pool2x(const Var<T>& x);

// Adds a per-channel bias (axis 1) to x.
template <typename T>
Var<T> bias_add(const Var<T>& x, const Var<T>& bias);
// x: N x K, weight: M x K, bias: M.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight);
// x: N x C x H x W scaled by s: N x C.
template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s);

/// ||d(d_out)/dx||^2 as a differentiable scalar. Needs a second-order tape.
template <typename T>
Var<T> grad_norm_sq(const Var<T>& d_out, const Var<T>& x);

}  // namespace ad
}  // namespace sqzgan
