#include "sqzgan/autodiff.hpp"

#include <optional>

namespace sqzgan {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::MulScalar: return "mul_scalar";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Square: return "square";
    case OpKind::SqrtEps: return "sqrt_eps";
    case OpKind::RsqrtEps: return "rsqrt_eps";
    case OpKind::Reciprocal: return "reciprocal";
    case OpKind::Log: return "log";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softplus: return "softplus";
    case OpKind::Clamp: return "clamp";
    case OpKind::SumAll: return "sum_all";
    case OpKind::Reshape: return "reshape";
    case OpKind::BroadcastTo: return "broadcast_to";
    case OpKind::ReduceTo: return "reduce_to";
    case OpKind::Concat: return "concat_channels";
    case OpKind::Slice: return "slice_channels";
    case OpKind::Embed: return "embed_channels";
    case OpKind::Matmul: return "matmul";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ConvWeightGrad: return "conv2d_weight_grad";
    case OpKind::FlipTranspose: return "flip_transpose";
    case OpKind::Upsample: return "upsample2x";
    case OpKind::UpsampleAdjoint: return "upsample2x_adjoint";
  }
  return "?";
}

namespace {

class RecordingGuard {
 public:
  RecordingGuard(bool& flag, bool value) : flag_(flag), saved_(flag) {
    flag_ = value;
  }
  ~RecordingGuard() { flag_ = saved_; }
  RecordingGuard(const RecordingGuard&) = delete;
  RecordingGuard& operator=(const RecordingGuard&) = delete;

 private:
  bool& flag_;
  bool saved_;
};

}  // namespace

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::Leaf, std::move(value), {}, {}, requires_grad});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(OpKind kind, Tensor<T> value,
                       std::vector<std::size_t> inputs, OpAttrs attrs) {
  bool requires_grad = false;
  if (recording_) {
    for (auto id : inputs) requires_grad = requires_grad || nodes_[id].requires_grad;
  }
  if (!requires_grad) inputs.clear();
  nodes_.push_back(
      Node{kind, std::move(value), std::move(inputs), std::move(attrs),
           requires_grad});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::gradient(const Var<T>& output, const Var<T>& wrt,
                         bool create_graph) {
  return gradients(output, std::span<const Var<T>>(&wrt, 1), create_graph)[0];
}

template <typename T>
std::vector<Var<T>> Tape<T>::gradients(const Var<T>& output,
                                       std::span<const Var<T>> wrt,
                                       bool create_graph) {
  if (output.tape() != this) {
    throw ConfigError("backward: output belongs to a different tape");
  }
  if (output.value().size() != 1) {
    throw ConfigError("backward: output must be scalar, got shape " +
                      shape_str(output.shape()));
  }
  if (!output.requires_grad()) {
    throw ConfigError("backward: output is detached from every leaf");
  }
  if (create_graph && order_ != TapeOrder::Second) {
    throw ConfigError("backward: create_graph needs a second-order tape");
  }
  for (const auto& v : wrt) {
    if (v.tape() != this) {
      throw ConfigError("backward: gradient target on a different tape");
    }
  }

  RecordingGuard guard(recording_, create_graph);
  const std::size_t top = output.id();
  std::vector<std::optional<Var<T>>> grads(top + 1);
  grads[top] = constant(Tensor<T>(output.shape(), T(1)));

  for (std::size_t k = top + 1; k-- > 0;) {
    if (!grads[k] || !nodes_[k].requires_grad || nodes_[k].inputs.empty()) {
      continue;
    }
    const std::vector<std::size_t> inputs = nodes_[k].inputs;
    std::vector<Var<T>> in_grads = backward_node(k, *grads[k]);
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const std::size_t in = inputs[j];
      if (!nodes_[in].requires_grad || !in_grads[j].valid()) continue;
      grads[in] = grads[in] ? ad::add(*grads[in], in_grads[j]) : in_grads[j];
    }
  }

  std::vector<Var<T>> out;
  out.reserve(wrt.size());
  for (const auto& v : wrt) {
    if (v.id() <= top && grads[v.id()]) {
      out.push_back(*grads[v.id()]);
    } else {
      out.push_back(constant(Tensor<T>(v.shape(), T(0))));
    }
  }
  return out;
}

// Input gradients for node `id` given its output gradient. Every rule is
// written with recorded ops so the result stays differentiable.
template <typename T>
std::vector<Var<T>> Tape<T>::backward_node(std::size_t id, const Var<T>& g) {
  // Copy what we need: recording new nodes may grow the deque.
  const OpKind kind = nodes_[id].kind;
  const OpAttrs attrs = nodes_[id].attrs;
  const std::vector<std::size_t> ins = nodes_[id].inputs;
  auto in = [&](std::size_t j) { return Var<T>(this, ins[j]); };
  const Var<T> self(this, id);
  auto needs = [&](std::size_t j) { return nodes_[ins[j]].requires_grad; };

  std::vector<Var<T>> r(ins.size());
  switch (kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
      r[0] = g;
      r[1] = g;
      break;
    case OpKind::Mul:
      if (needs(0)) r[0] = ad::mul(g, in(1));
      if (needs(1)) r[1] = ad::mul(g, in(0));
      break;
    case OpKind::MulScalar:
      r[0] = ad::mul_scalar(g, attrs.scalar);
      break;
    case OpKind::AddScalar:
      r[0] = g;
      break;
    case OpKind::LeakyRelu:
      // Second derivative is zero almost everywhere: the slope mask is a
      // constant.
      r[0] = ad::mul(g, constant(kernels::leaky_relu_slope(
                            in(0).value(), T(attrs.scalar))));
      break;
    case OpKind::Square:
      r[0] = ad::mul(g, ad::mul_scalar(in(0), 2.0));
      break;
    case OpKind::SqrtEps:
      r[0] = ad::mul(g, ad::mul_scalar(ad::rsqrt_eps(in(0), attrs.scalar), 0.5));
      break;
    case OpKind::RsqrtEps:
      r[0] = ad::mul(g, ad::mul_scalar(ad::mul(self, ad::square(self)), -0.5));
      break;
    case OpKind::Reciprocal:
      r[0] = ad::mul(g, ad::mul_scalar(ad::square(self), -1.0));
      break;
    case OpKind::Log:
      r[0] = ad::mul(g, ad::reciprocal(in(0)));
      break;
    case OpKind::Sigmoid:
      r[0] = ad::mul(
          g, ad::mul(self, ad::add_scalar(ad::mul_scalar(self, -1.0), 1.0)));
      break;
    case OpKind::Softplus:
      r[0] = ad::mul(g, ad::sigmoid(in(0)));
      break;
    case OpKind::Clamp:
      r[0] = ad::mul(g, constant(kernels::clamp_mask(
                            in(0).value(), T(attrs.scalar), T(attrs.scalar2))));
      break;
    case OpKind::SumAll: {
      const Shape& xs = in(0).shape();
      r[0] = ad::broadcast_to(ad::reshape(g, Shape(xs.size(), 1)), xs);
      break;
    }
    case OpKind::Reshape:
      r[0] = ad::reshape(g, in(0).shape());
      break;
    case OpKind::BroadcastTo:
      r[0] = ad::reduce_to(g, in(0).shape());
      break;
    case OpKind::ReduceTo:
      r[0] = ad::broadcast_to(g, in(0).shape());
      break;
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t j = 0; j < ins.size(); ++j) {
        const std::size_t c = in(j).shape()[1];
        if (needs(j)) r[j] = ad::slice_channels(g, offset, c);
        offset += c;
      }
      break;
    }
    case OpKind::Slice:
      r[0] = ad::embed_channels(g, attrs.begin, in(0).shape()[1]);
      break;
    case OpKind::Embed:
      r[0] = ad::slice_channels(g, attrs.begin, in(0).shape()[1]);
      break;
    case OpKind::Matmul: {
      const bool ta = attrs.trans_a, tb = attrs.trans_b;
      if (needs(0)) {
        r[0] = ta ? ad::matmul(in(1), g, tb, true)
                  : ad::matmul(g, in(1), false, !tb);
      }
      if (needs(1)) {
        r[1] = tb ? ad::matmul(g, in(0), true, ta)
                  : ad::matmul(in(0), g, !ta, false);
      }
      break;
    }
    case OpKind::Conv2d: {
      const Var<T> x = in(0), w = in(1);
      const int back_pad = static_cast<int>(attrs.kh) - 1 - attrs.pad;
      if (needs(0)) r[0] = ad::conv2d(g, ad::flip_transpose(w), back_pad);
      if (needs(1)) {
        r[1] = ad::conv2d_weight_grad(x, g, attrs.kh, attrs.kw, attrs.pad);
      }
      break;
    }
    case OpKind::ConvWeightGrad: {
      // Output is bilinear in (x, grad_out); g has the weight's shape.
      const Var<T> x = in(0), go = in(1);
      const int back_pad = static_cast<int>(attrs.kh) - 1 - attrs.pad;
      if (needs(0)) r[0] = ad::conv2d(go, ad::flip_transpose(g), back_pad);
      if (needs(1)) r[1] = ad::conv2d(x, g, attrs.pad);
      break;
    }
    case OpKind::FlipTranspose:
      r[0] = ad::flip_transpose(g);
      break;
    case OpKind::Upsample:
      r[0] = ad::upsample2x_adjoint(g, attrs.mode);
      break;
    case OpKind::UpsampleAdjoint:
      r[0] = ad::upsample2x(g, attrs.mode);
      break;
  }
  return r;
}

template class Tape<float>;
template class Tape<double>;

namespace ad {
namespace {

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ConfigError(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

template <typename T>
Tape<T>& tape_of(const Var<T>& a, const char* op) {
  if (!a.valid()) throw ConfigError(std::string(op) + ": invalid Var");
  return *a.tape();
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto& t = same_tape(a, b, "add");
  return t.record(OpKind::Add, kernels::add(a.value(), b.value()),
                  {a.id(), b.id()});
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return add(a, mul_scalar(b, -1.0));
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto& t = same_tape(a, b, "mul");
  return t.record(OpKind::Mul, kernels::mul(a.value(), b.value()),
                  {a.id(), b.id()});
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, double c) {
  OpAttrs at;
  at.scalar = c;
  return tape_of(a, "mul_scalar")
      .record(OpKind::MulScalar, kernels::mul_scalar(a.value(), T(c)),
              {a.id()}, at);
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, double c) {
  OpAttrs at;
  at.scalar = c;
  return tape_of(a, "add_scalar")
      .record(OpKind::AddScalar, kernels::add_scalar(a.value(), T(c)),
              {a.id()}, at);
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
  OpAttrs at;
  at.scalar = slope;
  return tape_of(x, "leaky_relu")
      .record(OpKind::LeakyRelu, kernels::leaky_relu(x.value(), T(slope)),
              {x.id()}, at);
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return tape_of(x, "square")
      .record(OpKind::Square, kernels::square(x.value()), {x.id()});
}

template <typename T>
Var<T> sqrt_eps(const Var<T>& x, double eps) {
  OpAttrs at;
  at.scalar = eps;
  return tape_of(x, "sqrt_eps")
      .record(OpKind::SqrtEps, kernels::sqrt_eps(x.value(), T(eps)), {x.id()},
              at);
}

template <typename T>
Var<T> rsqrt_eps(const Var<T>& x, double eps) {
  OpAttrs at;
  at.scalar = eps;
  return tape_of(x, "rsqrt_eps")
      .record(OpKind::RsqrtEps, kernels::rsqrt_eps(x.value(), T(eps)),
              {x.id()}, at);
}

template <typename T>
Var<T> reciprocal(const Var<T>& x) {
  return tape_of(x, "reciprocal")
      .record(OpKind::Reciprocal, kernels::reciprocal(x.value()), {x.id()});
}

template <typename T>
Var<T> log(const Var<T>& x) {
  return tape_of(x, "log").record(OpKind::Log, kernels::log(x.value()),
                                  {x.id()});
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return tape_of(x, "sigmoid")
      .record(OpKind::Sigmoid, kernels::sigmoid(x.value()), {x.id()});
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  return tape_of(x, "softplus")
      .record(OpKind::Softplus, kernels::softplus(x.value()), {x.id()});
}

template <typename T>
Var<T> clamp(const Var<T>& x, double lo, double hi) {
  OpAttrs at;
  at.scalar = lo;
  at.scalar2 = hi;
  return tape_of(x, "clamp").record(
      OpKind::Clamp, kernels::clamp(x.value(), T(lo), T(hi)), {x.id()}, at);
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  return tape_of(x, "sum_all")
      .record(OpKind::SumAll, Tensor<T>::scalar(kernels::sum_all(x.value())),
              {x.id()});
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return tape_of(x, "reshape")
      .record(OpKind::Reshape, kernels::reshape(x.value(), shape), {x.id()},
              at);
}

template <typename T>
Var<T> broadcast_to(const Var<T>& x, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return tape_of(x, "broadcast_to")
      .record(OpKind::BroadcastTo, kernels::broadcast_to(x.value(), shape),
              {x.id()}, at);
}

template <typename T>
Var<T> reduce_to(const Var<T>& x, const Shape& shape) {
  OpAttrs at;
  at.shape = shape;
  return tape_of(x, "reduce_to")
      .record(OpKind::ReduceTo, kernels::reduce_to(x.value(), shape), {x.id()},
              at);
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ConfigError("concat_channels: no inputs");
  std::vector<const Tensor<T>*> values;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p, "concat_channels");
    values.push_back(&p.value());
    ids.push_back(p.id());
  }
  auto out = kernels::concat_channels<T>(
      std::span<const Tensor<T>* const>(values.data(), values.size()));
  return parts[0].tape()->record(OpKind::Concat, std::move(out), ids);
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Var<T> parts[] = {a, b};
  return concat_channels<T>(std::span<const Var<T>>(parts));
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count) {
  OpAttrs at;
  at.begin = begin;
  at.count = count;
  return tape_of(x, "slice_channels")
      .record(OpKind::Slice, kernels::slice_channels(x.value(), begin, count),
              {x.id()}, at);
}

template <typename T>
Var<T> embed_channels(const Var<T>& x, std::size_t begin, std::size_t total) {
  OpAttrs at;
  at.begin = begin;
  at.count = total;
  return tape_of(x, "embed_channels")
      .record(OpKind::Embed, kernels::embed_channels(x.value(), begin, total),
              {x.id()}, at);
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_a, bool trans_b) {
  auto& t = same_tape(a, b, "matmul");
  OpAttrs at;
  at.trans_a = trans_a;
  at.trans_b = trans_b;
  return t.record(OpKind::Matmul,
                  kernels::matmul(a.value(), b.value(), trans_a, trans_b),
                  {a.id(), b.id()}, at);
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int pad) {
  auto& t = same_tape(x, w, "conv2d");
  if (w.value().rank() != 4) throw ConfigError("conv2d: weight must be OIHW");
  OpAttrs at;
  at.pad = pad;
  at.kh = w.shape()[2];
  at.kw = w.shape()[3];
  if (pad < 0 || pad > static_cast<int>(at.kh) - 1 ||
      pad > static_cast<int>(at.kw) - 1) {
    throw ConfigError("conv2d: padding " + std::to_string(pad) +
                      " unsupported for kernel " + shape_str(w.shape()));
  }
  return t.record(OpKind::Conv2d,
                  kernels::conv2d<T>(x.value(), w.value(), nullptr, pad),
                  {x.id(), w.id()}, at);
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int pad) {
  return bias_add(conv2d(x, w, pad), bias);
}

template <typename T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& grad_out,
                          std::size_t kh, std::size_t kw, int pad) {
  auto& t = same_tape(x, grad_out, "conv2d_weight_grad");
  OpAttrs at;
  at.pad = pad;
  at.kh = kh;
  at.kw = kw;
  return t.record(
      OpKind::ConvWeightGrad,
      kernels::conv2d_weight_grad(x.value(), grad_out.value(), kh, kw, pad),
      {x.id(), grad_out.id()}, at);
}

template <typename T>
Var<T> flip_transpose(const Var<T>& w) {
  return tape_of(w, "flip_transpose")
      .record(OpKind::FlipTranspose, kernels::flip_transpose(w.value()),
              {w.id()});
}

template <typename T>
Var<T> upsample2x(const Var<T>& x, UpsampleMode mode) {
  OpAttrs at;
  at.mode = mode;
  return tape_of(x, "upsample2x")
      .record(OpKind::Upsample, kernels::upsample2x(x.value(), mode), {x.id()},
              at);
}

template <typename T>
Var<T> upsample2x_adjoint(const Var<T>& g, UpsampleMode mode) {
  OpAttrs at;
  at.mode = mode;
  return tape_of(g, "upsample2x_adjoint")
      .record(OpKind::UpsampleAdjoint,
              kernels::upsample2x_adjoint(g.value(), mode), {g.id()}, at);
}

template <typename T>
Var<T> avg_pool2x(const Var<T>& x) {
  return mul_scalar(upsample2x_adjoint(x, UpsampleMode::Nearest), 0.25);
}

template <typename T>
Var<T> bias_add(const Var<T>& x, const Var<T>& bias) {
  const Shape& xs = x.shape();
  if (xs.size() < 2 || bias.value().rank() != 1 || bias.shape()[0] != xs[1]) {
    throw ConfigError("bias_add: bias " + shape_str(bias.shape()) +
                      " does not match " + shape_str(xs));
  }
  Shape bs(xs.size(), 1);
  bs[1] = xs[1];
  return add(x, broadcast_to(reshape(bias, bs), xs));
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return bias_add(linear(x, weight), bias);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight) {
  return matmul(x, weight, false, true);
}

template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || s.value().rank() != 2 || s.shape()[0] != xs[0] ||
      s.shape()[1] != xs[1]) {
    throw ConfigError("scale_channels: scales " + shape_str(s.shape()) +
                      " do not match " + shape_str(xs));
  }
  return mul(x, broadcast_to(reshape(s, Shape{xs[0], xs[1], 1, 1}), xs));
}

template <typename T>
Var<T> grad_norm_sq(const Var<T>& d_out, const Var<T>& x) {
  Tape<T>& t = tape_of(d_out, "grad_norm_sq");
  if (t.order() != TapeOrder::Second) {
    throw ConfigError("grad_norm_sq: tape is not second-order capable");
  }
  return sum_all(square(t.gradient(d_out, x, /*create_graph=*/true)));
}

#define SQZGAN_INSTANTIATE(T)                                                 \
  template Var<T> add(const Var<T>&, const Var<T>&);                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                          \
  template Var<T> mul_scalar(const Var<T>&, double);                          \
  template Var<T> add_scalar(const Var<T>&, double);                          \
  template Var<T> leaky_relu(const Var<T>&, double);                          \
  template Var<T> square(const Var<T>&);                                      \
  template Var<T> sqrt_eps(const Var<T>&, double);                            \
  template Var<T> rsqrt_eps(const Var<T>&, double);                           \
  template Var<T> reciprocal(const Var<T>&);                                  \
  template Var<T> log(const Var<T>&);                                         \
  template Var<T> sigmoid(const Var<T>&);                                     \
  template Var<T> softplus(const Var<T>&);                                    \
  template Var<T> clamp(const Var<T>&, double, double);                       \
  template Var<T> sum_all(const Var<T>&);                                     \
  template Var<T> mean_all(const Var<T>&);                                    \
  template Var<T> reshape(const Var<T>&, const Shape&);                       \
  template Var<T> broadcast_to(const Var<T>&, const Shape&);                  \
  template Var<T> reduce_to(const Var<T>&, const Shape&);                     \
  template Var<T> concat_channels(std::span<const Var<T>>);                   \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);              \
  template Var<T> slice_channels(const Var<T>&, std::size_t, std::size_t);    \
  template Var<T> embed_channels(const Var<T>&, std::size_t, std::size_t);    \
  template Var<T> matmul(const Var<T>&, const Var<T>&, bool, bool);           \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, int);                  \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int);   \
  template Var<T> conv2d_weight_grad(const Var<T>&, const Var<T>&,            \
                                     std::size_t, std::size_t, int);          \
  template Var<T> flip_transpose(const Var<T>&);                              \
  template Var<T> upsample2x(const Var<T>&, UpsampleMode);                    \
  template Var<T> upsample2x_adjoint(const Var<T>&, UpsampleMode);            \
  template Var<T> avg_pool2x(const Var<T>&);                                  \
  template Var<T> bias_add(const Var<T>&, const Var<T>&);                     \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);        \
  template Var<T> linear(const Var<T>&, const Var<T>&);                       \
  template Var<T> scale_channels(const Var<T>&, const Var<T>&);               \
  template Var<T> grad_norm_sq(const Var<T>&, const Var<T>&);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace ad
}  // namespace sqzgan
