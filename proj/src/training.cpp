#include "sqzgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sqzgan/rng.hpp"

namespace sqzgan {

const char* to_string(LossKind kind) {
  return kind == LossKind::Classic ? "classic" : "nonsat_r1";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "classic") return LossKind::Classic;
  if (text == "nonsat_r1") return LossKind::NonSatR1;
  throw ConfigError("unknown loss kind '" + text +
                    "' (expected classic or nonsat_r1)");
}

// ---------------------------------------------------------------- losses

template <typename T>
Var<T> g_loss_nonsat(const Var<T>& d_fake) {
  return ad::mean_all(ad::softplus(ad::mul_scalar(d_fake, -1.0)));
}

template <typename T>
DiscriminatorLoss<T> d_loss_nonsat_r1(const Var<T>& d_real,
                                      const Var<T>& d_fake,
                                      const Var<T>& x_real, double gamma) {
  if (gamma < 0) throw ConfigError("R1 gamma must be >= 0");
  DiscriminatorLoss<T> out;
  out.real_term = ad::mean_all(ad::softplus(ad::mul_scalar(d_real, -1.0)));
  out.fake_term = ad::mean_all(ad::softplus(d_fake));
  out.total = ad::add(out.real_term, out.fake_term);
  if (gamma > 0) {
    if (d_real.tape()->order() != TapeOrder::Second) {
      throw ConfigError("R1 penalty with gamma > 0 needs a second-order tape");
    }
    const double n = static_cast<double>(x_real.shape()[0]);
    out.r1 = ad::mul_scalar(ad::grad_norm_sq(ad::sum_all(d_real), x_real),
                            1.0 / n);
    out.total = ad::add(out.total, ad::mul_scalar(out.r1, gamma / 2.0));
  }
  return out;
}

namespace {

template <typename T>
Var<T> clamped_prob(const Var<T>& logits) {
  return ad::clamp(ad::sigmoid(logits), kProbClamp, 1.0 - kProbClamp);
}

template <typename T>
Var<T> neg_mean_log(const Var<T>& p) {
  return ad::mul_scalar(ad::mean_all(ad::log(p)), -1.0);
}

}  // namespace

template <typename T>
Var<T> g_loss_classic(const Var<T>& d_fake) {
  return neg_mean_log(clamped_prob(d_fake));
}

template <typename T>
DiscriminatorLoss<T> d_loss_classic(const Var<T>& d_real,
                                    const Var<T>& d_fake) {
  DiscriminatorLoss<T> out;
  out.real_term = neg_mean_log(clamped_prob(d_real));
  const Var<T> p_fake = clamped_prob(d_fake);
  out.fake_term =
      neg_mean_log(ad::add_scalar(ad::mul_scalar(p_fake, -1.0), 1.0));
  out.total = ad::add(out.real_term, out.fake_term);
  return out;
}

// --------------------------------------------------------- discriminator

void DiscriminatorConfig::validate() const {
  if (resolution < 8 || resolution > 256 ||
      (resolution & (resolution - 1)) != 0) {
    throw ConfigError("discriminator resolution must be a power of two in "
                      "[8, 256], got " + std::to_string(resolution));
  }
  for (int res = 4; res <= resolution; res *= 2) {
    if (!channel_map.count(res) || channel_map.at(res) < 1) {
      throw ConfigError("discriminator channel_map missing resolution " +
                        std::to_string(res));
    }
  }
}

int DiscriminatorConfig::num_blocks() const {
  int n = 0;
  for (int res = resolution; res >= 4; res /= 2) ++n;
  return n;
}

namespace {

int d_out_channels(const DiscriminatorConfig& c, int res) {
  return c.channel_map.at(std::max(res / 2, 4));
}

}  // namespace

std::vector<ParamSpec> discriminator_layout(const DiscriminatorConfig& config) {
  config.validate();
  std::vector<ParamSpec> out;
  auto conv = [&](const std::string& name, int in, int o, int k, bool bias) {
    const auto I = std::size_t(in), O = std::size_t(o), K = std::size_t(k);
    out.push_back({name + ".weight", {O, I, K, K}, ParamRole::Discriminator,
                   InitKind::Normal, 1.0 / std::sqrt(double(I * K * K))});
    if (bias) {
      out.push_back({name + ".bias", {O}, ParamRole::Discriminator,
                     InitKind::Constant, 0});
    }
  };
  conv("fromrgb", 3, config.channel_map.at(config.resolution), 1, true);
  for (int res = config.resolution; res >= 4; res /= 2) {
    const std::string p = "b" + std::to_string(res);
    const int c = config.channel_map.at(res);
    const int co = d_out_channels(config, res);
    conv(p + ".conv0", c, c, 3, true);
    conv(p + ".conv1", c, co, 3, true);
    conv(p + ".skip", c, co, 1, false);
  }
  const std::size_t flat = std::size_t(config.channel_map.at(4)) * 2 * 2;
  out.push_back({"out.weight", {1, flat}, ParamRole::Discriminator,
                 InitKind::Normal, 1.0 / std::sqrt(double(flat))});
  out.push_back({"out.bias", {1}, ParamRole::Discriminator, InitKind::Constant,
                 0});
  return out;
}

template <typename T>
Var<T> discriminator_block_main(const BoundParams<T>& params, int res,
                                const Var<T>& x) {
  const std::string p = "b" + std::to_string(res);
  Var<T> y = ad::leaky_relu(
      ad::conv2d(x, params[p + ".conv0.weight"], params[p + ".conv0.bias"], 1));
  y = ad::leaky_relu(
      ad::conv2d(y, params[p + ".conv1.weight"], params[p + ".conv1.bias"], 1));
  return ad::avg_pool2x(y);
}

template <typename T>
Var<T> discriminator_block_skip(const BoundParams<T>& params, int res,
                                const Var<T>& x) {
  const std::string p = "b" + std::to_string(res);
  return ad::conv2d(ad::avg_pool2x(x), params[p + ".skip.weight"], 0);
}

template <typename T>
Var<T> discriminator_forward(const BoundParams<T>& params,
                             const DiscriminatorConfig& config,
                             const Var<T>& images) {
  const Shape& s = images.shape();
  const auto r = static_cast<std::size_t>(config.resolution);
  if (s.size() != 4 || s[1] != 3 || s[2] != r || s[3] != r) {
    throw ConfigError("discriminator expects N x 3 x " + std::to_string(r) +
                      " x " + std::to_string(r) + " images, got " +
                      shape_str(s));
  }
  Var<T> x = ad::leaky_relu(ad::conv2d(images, params["fromrgb.weight"],
                                       params["fromrgb.bias"], 0));
  for (int res = config.resolution; res >= 4; res /= 2) {
    x = ad::add(discriminator_block_main(params, res, x),
                discriminator_block_skip(params, res, x));
  }
  const std::size_t n = s[0];
  const Var<T> flat = ad::reshape(x, Shape{n, x.value().size() / n});
  return ad::linear(flat, params["out.weight"], params["out.bias"]);
}

// ----------------------------------------------------------------- data

template <typename T>
ToyDataset<T>::ToyDataset(ToyDatasetSpec spec) : spec_(spec) {
  if (spec_.resolution < 4) throw ConfigError("toy resolution must be >= 4");
}

template <typename T>
Tensor<T> ToyDataset<T>::sample(std::uint64_t index) const {
  const int R = spec_.resolution;
  CounterRng rng(spec_.seed, (index << 8) | streams::kData);
  Tensor<T> img(Shape{3, std::size_t(R), std::size_t(R)});
  const double bg = rng.uniform(-1.0, -0.6);
  for (auto& v : img.data()) v = T(bg);
  for (int blob = 0; blob < 2; ++blob) {
    const double cx = rng.uniform(0.2, 0.8) * R;
    const double cy = rng.uniform(0.2, 0.8) * R;
    const double radius = rng.uniform(0.12, 0.3) * R;
    double color[3];
    for (double& c : color) c = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < R; ++y) {
      for (int x = 0; x < R; ++x) {
        const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        const double alpha = std::clamp(radius - d + 0.5, 0.0, 1.0);
        if (alpha == 0.0) continue;
        for (int ch = 0; ch < 3; ++ch) {
          T& p = img[(std::size_t(ch) * R + y) * R + x];
          p = T((1.0 - alpha) * double(p) + alpha * color[ch]);
        }
      }
    }
  }
  return img;
}

template <typename T>
Tensor<T> ToyDataset<T>::batch(std::uint64_t first_index,
                               std::size_t n) const {
  const std::size_t R = std::size_t(spec_.resolution);
  Tensor<T> out(Shape{n, 3, R, R});
  const std::size_t per = 3 * R * R;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor<T> s = sample(first_index + i);
    std::copy(s.data().begin(), s.data().end(), out.data().begin() + i * per);
  }
  return out;
}

// ------------------------------------------------------------- training

void LossConfig::validate() const {
  if (!(gamma >= 0)) throw ConfigError("gamma must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (!(ema_halflife > 0)) throw ConfigError("ema half-life must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

std::string TrainHistory::to_csv() const {
  std::string out = "step,d_loss,g_loss,r1,g_grad_norm,d_grad_norm\n";
  char line[256];
  for (const auto& s : steps) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  s.step, s.d_loss, s.g_loss, s.r1, s.g_grad_norm,
                  s.d_grad_norm);
    out += line;
  }
  return out;
}

DiscriminatorConfig discriminator_for(const GeneratorConfig& g) {
  DiscriminatorConfig d;
  d.resolution = g.resolution;
  d.channel_map = g.channel_map;
  return d;
}

template <typename T>
Optimizer<T>::Optimizer(const ParameterSet<T>& params,
                        const LossConfig& config)
    : config_(config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.at(i).shape());
    v_.emplace_back(params.at(i).shape());
  }
}

template <typename T>
void Optimizer<T>::step(ParameterSet<T>& params,
                        const std::vector<Tensor<T>>& grads) {
  ++t_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params.at(k).data();
    auto g = grads[k].data();
    if (!config_.adam) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= T(lr) * g[i];
      continue;
    }
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = T(b1) * m[i] + T(1 - b1) * g[i];
      v[i] = T(b2) * v[i] + T(1 - b2) * g[i] * g[i];
      const T mhat = m[i] / T(c1);
      const T vhat = v[i] / T(c2);
      p[i] -= T(lr) * mhat / (std::sqrt(vhat) + T(config_.adam_eps));
    }
  }
}

namespace {

template <typename T>
std::vector<Tensor<T>> values_of(const std::vector<Var<T>>& vars) {
  std::vector<Tensor<T>> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

template <typename T>
double global_norm(const std::vector<Tensor<T>>& grads) {
  double s = 0;
  for (const auto& g : grads) {
    for (T v : g.data()) s += double(v) * double(v);
  }
  return std::sqrt(s);
}

void require_finite(double v, int step, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericError("step " + std::to_string(step) + ": non-finite " +
                       term + " (" + std::to_string(v) + ")");
  }
}

}  // namespace

template <typename T>
TrainResult<T> train(const GeneratorConfig& config, const LossConfig& loss,
                     const ToyDatasetSpec& data, const TrainOptions& options) {
  config.validate();
  loss.validate();
  if (options.steps < 1) throw ConfigError("steps must be >= 1");
  if (options.batch < 1) throw ConfigError("batch size must be >= 1");
  if (data.resolution != config.resolution) {
    throw ConfigError("dataset resolution " + std::to_string(data.resolution) +
                      " != generator resolution " +
                      std::to_string(config.resolution));
  }

  Generator<T> gen(config, options.seed);
  Generator<T> ema = gen;
  const DiscriminatorConfig dcfg = discriminator_for(config);
  ParameterSet<T> disc = ParameterSet<T>::initialize(
      discriminator_layout(dcfg), splitmix64(options.seed ^ 0xD15C0ULL));
  Optimizer<T> g_opt(gen.params(), loss);
  Optimizer<T> d_opt(disc, loss);
  const ToyDataset<T> dataset(data);
  const std::size_t batch = std::size_t(options.batch);
  const double ema_beta = std::pow(0.5, 1.0 / loss.ema_halflife);
  const bool use_r1 = loss.kind == LossKind::NonSatR1 && loss.gamma > 0;

  TrainHistory history;
  for (int step = 0; step < options.steps; ++step) {
    StepRecord rec;
    rec.step = step;
    const char* phase = "discriminator step";
    try {
      // Discriminator step.
      {
        const Tensor<T> z = sample_latents<T>(batch, config.style_dim,
                                              options.seed, 2 * step);
        const Tensor<T> fake = gen.generate(z);
        Tape<T> tape(use_r1 ? TapeOrder::Second : TapeOrder::First);
        const auto dp = disc.bind(tape, true);
        const Var<T> x_real = tape.leaf(
            dataset.batch(std::uint64_t(step) * batch, batch), use_r1);
        const Var<T> d_real = discriminator_forward(dp, dcfg, x_real);
        const Var<T> d_fake =
            discriminator_forward(dp, dcfg, tape.constant(fake));
        const DiscriminatorLoss<T> dl =
            loss.kind == LossKind::NonSatR1
                ? d_loss_nonsat_r1(d_real, d_fake, x_real, loss.gamma)
                : d_loss_classic(d_real, d_fake);
        require_finite(dl.real_term.value().item(), step, "d_loss real term");
        require_finite(dl.fake_term.value().item(), step, "d_loss fake term");
        if (dl.r1.valid()) {
          rec.r1 = dl.r1.value().item();
          require_finite(rec.r1, step, "r1 penalty");
        }
        rec.d_loss = dl.total.value().item();
        require_finite(rec.d_loss, step, "d_loss");
        const auto grads = values_of(tape.gradients(dl.total, dp.vars()));
        rec.d_grad_norm = global_norm(grads);
        require_finite(rec.d_grad_norm, step, "discriminator gradient");
        d_opt.step(disc, grads);
      }

      // Generator step.
      phase = "generator step";
      {
        const Tensor<T> z = sample_latents<T>(batch, config.style_dim,
                                              options.seed, 2 * step + 1);
        Tape<T> tape;
        const auto gp = gen.params().bind(tape, true);
        const auto dp = disc.bind(tape, false);
        const auto out = gen.forward(gp, tape.constant(z));
        const Var<T> d_fake = discriminator_forward(dp, dcfg, out.image);
        const Var<T> gl = loss.kind == LossKind::NonSatR1
                              ? g_loss_nonsat(d_fake)
                              : g_loss_classic(d_fake);
        rec.g_loss = gl.value().item();
        require_finite(rec.g_loss, step, "g_loss");
        const auto grads = values_of(tape.gradients(gl, gp.vars()));
        rec.g_grad_norm = global_norm(grads);
        require_finite(rec.g_grad_norm, step, "generator gradient");
        g_opt.step(gen.params(), grads);
      }
    } catch (const NumericError& e) {
      const std::string what = e.what();
      if (what.rfind("step ", 0) == 0) throw;
      throw NumericError("step " + std::to_string(step) + ", " + phase + ": " +
                         what);
    }

    for (std::size_t k = 0; k < gen.params().size(); ++k) {
      auto e = ema.params().at(k).data();
      auto p = gen.params().at(k).data();
      for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = T(ema_beta) * e[i] + T(1 - ema_beta) * p[i];
      }
    }

    history.steps.push_back(rec);
    if (options.on_step && !options.on_step(rec)) break;
  }

  return TrainResult<T>{std::move(gen), std::move(ema), dcfg, std::move(disc),
                        std::move(history)};
}

#define SQZGAN_INSTANTIATE(T)                                                 \
  template Var<T> g_loss_nonsat(const Var<T>&);                               \
  template DiscriminatorLoss<T> d_loss_nonsat_r1(                             \
      const Var<T>&, const Var<T>&, const Var<T>&, double);                   \
  template Var<T> g_loss_classic(const Var<T>&);                              \
  template DiscriminatorLoss<T> d_loss_classic(const Var<T>&, const Var<T>&); \
  template Var<T> discriminator_block_main(const BoundParams<T>&, int,        \
                                           const Var<T>&);                    \
  template Var<T> discriminator_block_skip(const BoundParams<T>&, int,        \
                                           const Var<T>&);                    \
  template Var<T> discriminator_forward(const BoundParams<T>&,                \
                                        const DiscriminatorConfig&,           \
                                        const Var<T>&);                       \
  template class ToyDataset<T>;                                               \
  template class Optimizer<T>;                                                \
  template TrainResult<T> train(const GeneratorConfig&, const LossConfig&,    \
                                const ToyDatasetSpec&, const TrainOptions&);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace sqzgan
