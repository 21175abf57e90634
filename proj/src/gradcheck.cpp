#include "sqzgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sqzgan/errors.hpp"
#include "sqzgan/rng.hpp"
#include "sqzgan/training.hpp"

namespace sqzgan {

double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("relative_error: shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  }
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor<double>>& inputs,
                TapeOrder order) {
  Tape<double> tape(order);
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
  const Var<double> out = f(tape, leaves);
  return out.value().item();
}

}  // namespace

double gradient_rel_error(const ScalarFn& f,
                          const std::vector<Tensor<double>>& inputs,
                          const std::vector<std::size_t>& wrt, double step,
                          TapeOrder order) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape(order);
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    const Var<double> out = f(tape, leaves);
    std::vector<Var<double>> targets;
    for (std::size_t k : wrt) targets.push_back(leaves.at(k));
    for (const auto& g : tape.gradients(out, targets)) {
      analytic.push_back(g.value());
    }
  }
  double worst = 0;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t j = 0; j < wrt.size(); ++j) {
    Tensor<double>& t = probe[wrt[j]];
    Tensor<double> fd(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + step;
      const double up = evaluate(f, probe, order);
      t[i] = orig - step;
      const double down = evaluate(f, probe, order);
      t[i] = orig;
      fd[i] = (up - down) / (2 * step);
    }
    worst = std::max(worst, relative_error(analytic[j], fd));
  }
  return worst;
}

namespace {

Tensor<double> randn(Shape shape, std::uint64_t stream, double scale = 1.0) {
  CounterRng rng(0x6A09E667ULL, (stream << 8) | streams::kVerify);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

Tensor<double> uniform(Shape shape, std::uint64_t stream, double lo,
                       double hi) {
  CounterRng rng(0xBB67AE85ULL, (stream << 8) | streams::kVerify);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

struct Case {
  std::string name;
  ScalarFn f;
  std::vector<Tensor<double>> inputs;
  std::vector<std::size_t> wrt;
  TapeOrder order = TapeOrder::First;
  double tolerance = 1e-4;
};

// Weighted sum so that every output element contributes a distinct amount.
Var<double> probe_sum(const Var<double>& y, std::uint64_t stream) {
  Tape<double>& tape = *y.tape();
  return ad::sum_all(ad::mul(y, tape.constant(randn(y.shape(), stream))));
}

std::vector<Case> core_cases() {
  using V = std::vector<Var<double>>;
  std::vector<Case> cases;
  cases.push_back({"conv2d_3x3_pad1",
                   [](Tape<double>&, const V& in) {
                     return probe_sum(ad::conv2d(in[0], in[1], in[2], 1), 10);
                   },
                   {randn({2, 3, 5, 5}, 1), randn({4, 3, 3, 3}, 2),
                    randn({4}, 3)},
                   {0, 1, 2}});
  cases.push_back({"conv2d_1x1",
                   [](Tape<double>&, const V& in) {
                     return probe_sum(ad::conv2d(in[0], in[1], 0), 11);
                   },
                   {randn({2, 4, 3, 3}, 4), randn({3, 4, 1, 1}, 5)},
                   {0, 1}});
  cases.push_back({"matmul_linear_lrelu",
                   [](Tape<double>&, const V& in) {
                     return probe_sum(
                         ad::leaky_relu(ad::linear(in[0], in[1], in[2])), 12);
                   },
                   {randn({3, 5}, 6), randn({4, 5}, 7), randn({4}, 8)},
                   {0, 1, 2}});
  for (UpsampleMode mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear}) {
    cases.push_back({std::string("upsample2x_") + to_string(mode),
                     [mode](Tape<double>&, const V& in) {
                       return probe_sum(ad::upsample2x(in[0], mode), 13);
                     },
                     {randn({1, 2, 3, 4}, 9)},
                     {0}});
  }
  cases.push_back({"avg_pool2x",
                   [](Tape<double>&, const V& in) {
                     return probe_sum(ad::avg_pool2x(in[0]), 14);
                   },
                   {randn({2, 2, 4, 6}, 15)},
                   {0}});
  cases.push_back({"demodulation",
                   [](Tape<double>&, const V& in) {
                     // x * s -> conv -> * rsqrt(s^2 @ sum_k w^2 + eps)
                     const Var<double>& x = in[0];
                     const Var<double>& w = in[1];
                     const Var<double>& s = in[2];
                     const Var<double> y =
                         ad::conv2d(ad::scale_channels(x, s), w, 1);
                     const Shape ws = w.shape();
                     const Var<double> w2 = ad::reduce_to(
                         ad::square(w), Shape{ws[0], ws[1], 1, 1});
                     const Var<double> w2m =
                         ad::reshape(w2, Shape{ws[0], ws[1]});
                     const Var<double> d = ad::rsqrt_eps(
                         ad::matmul(ad::square(s), w2m, false, true), 1e-8);
                     return probe_sum(ad::scale_channels(y, d), 16);
                   },
                   {randn({2, 3, 4, 4}, 17), randn({2, 3, 3, 3}, 18),
                    uniform({2, 3}, 19, 0.5, 1.5)},
                   {0, 1, 2}});
  cases.push_back({"concat_slice_embed",
                   [](Tape<double>&, const V& in) {
                     const Var<double> c = ad::concat_channels(in[0], in[1]);
                     const Var<double> s = ad::slice_channels(c, 1, 3);
                     return probe_sum(ad::embed_channels(s, 2, 6), 20);
                   },
                   {randn({2, 2, 2, 2}, 21), randn({2, 3, 2, 2}, 22)},
                   {0, 1}});
  cases.push_back({"pointwise",
                   [](Tape<double>&, const V& in) {
                     const Var<double> a = ad::sigmoid(in[0]);
                     const Var<double> b = ad::softplus(in[0]);
                     const Var<double> c = ad::log(ad::add_scalar(a, 0.5));
                     const Var<double> d =
                         ad::sqrt_eps(ad::mul(b, ad::reciprocal(in[1])), 1e-3);
                     return probe_sum(ad::add(ad::sub(c, d), ad::mul(a, b)),
                                      23);
                   },
                   {randn({3, 4}, 24), uniform({3, 4}, 25, 0.5, 2.0)},
                   {0, 1}});
  return cases;
}

std::vector<Case> loss_cases() {
  using V = std::vector<Var<double>>;
  std::vector<Case> cases;
  const Tensor<double> real = randn({6, 1}, 30, 2.0);
  const Tensor<double> fake = randn({6, 1}, 31, 2.0);
  cases.push_back({"g_loss_nonsat",
                   [](Tape<double>&, const V& in) {
                     return g_loss_nonsat(in[0]);
                   },
                   {fake},
                   {0}});
  cases.push_back({"d_loss_nonsat",
                   [](Tape<double>&, const V& in) {
                     return d_loss_nonsat_r1(in[0], in[1], in[0], 0.0).total;
                   },
                   {real, fake},
                   {0, 1}});
  cases.push_back({"g_loss_classic",
                   [](Tape<double>&, const V& in) {
                     return g_loss_classic(in[0]);
                   },
                   {fake},
                   {0}});
  cases.push_back({"d_loss_classic",
                   [](Tape<double>&, const V& in) {
                     return d_loss_classic(in[0], in[1]).total;
                   },
                   {real, fake},
                   {0, 1}});
  return cases;
}

DiscriminatorConfig tiny_discriminator() {
  DiscriminatorConfig c;
  c.resolution = 8;
  c.channel_map = {{4, 3}, {8, 2}};
  return c;
}

std::vector<Case> r1_cases() {
  using V = std::vector<Var<double>>;
  std::vector<Case> cases;
  // Small conv net: gradient of the penalty w.r.t. weights and input.
  cases.push_back({"r1_conv_net",
                   [](Tape<double>&, const V& in) {
                     Var<double> h =
                         ad::leaky_relu(ad::conv2d(in[0], in[1], in[2], 1));
                     h = ad::avg_pool2x(h);
                     const Shape s = h.shape();
                     h = ad::reshape(h, Shape{s[0], s[1] * s[2] * s[3]});
                     const Var<double> d = ad::linear(h, in[3]);
                     return ad::grad_norm_sq(ad::sum_all(d), in[0]);
                   },
                   {randn({2, 3, 4, 4}, 40), randn({2, 3, 3, 3}, 41),
                    randn({2}, 42), randn({1, 8}, 43)},
                   {0, 1, 2, 3},
                   TapeOrder::Second,
                   1e-3});

  // Full discriminator and the R1-regularized loss.
  const DiscriminatorConfig dcfg = tiny_discriminator();
  const auto layout = discriminator_layout(dcfg);
  const ParameterSet<double> init = ParameterSet<double>::initialize(layout, 7);
  Case full;
  full.name = "r1_discriminator_loss";
  full.order = TapeOrder::Second;
  full.tolerance = 1e-3;
  // Streams picked so no leaky-relu input sits within the FD step of 0.
  full.inputs.push_back(randn({2, 3, 8, 8}, 46, 0.5));
  full.inputs.push_back(randn({2, 3, 8, 8}, 47, 0.5));
  for (std::size_t i = 0; i < init.size(); ++i) {
    full.inputs.push_back(init.at(i));
  }
  for (std::size_t k = 0; k < full.inputs.size(); ++k) full.wrt.push_back(k);
  const auto names = init.names();
  full.f = [dcfg, names](Tape<double>&, const V& in) {
    BoundParams<double> params = BoundParams<double>::from(
        names, std::vector<Var<double>>(in.begin() + 2, in.end()));
    const Var<double> d_real = discriminator_forward(params, dcfg, in[0]);
    const Var<double> d_fake = discriminator_forward(params, dcfg, in[1]);
    return d_loss_nonsat_r1(d_real, d_fake, in[0], 10.0).total;
  };
  cases.push_back(std::move(full));
  return cases;
}

std::vector<Case> suite_cases(const std::string& name) {
  if (name == "core") return core_cases();
  if (name == "losses") return loss_cases();
  if (name == "r1") return r1_cases();
  throw ConfigError("unknown gradcheck suite '" + name +
                    "' (expected core, losses or r1)");
}

}  // namespace

bool is_gradcheck_suite(const std::string& name) {
  return name == "core" || name == "losses" || name == "r1";
}

std::vector<GradCheckResult> run_gradcheck_suite(const std::string& name) {
  std::vector<GradCheckResult> out;
  for (const Case& c : suite_cases(name)) {
    GradCheckResult r;
    r.name = c.name;
    r.tolerance = c.tolerance;
    r.rel_error = gradient_rel_error(c.f, c.inputs, c.wrt, 1e-5, c.order);
    out.push_back(r);
  }
  return out;
}

}  // namespace sqzgan
