#include "sqzgan/synthesis.hpp"

#include <cmath>

#include "sqzgan/rng.hpp"

namespace sqzgan {

const char* to_string(BlockVariant v) {
  switch (v) {
    case BlockVariant::SkipConnection: return "skip";
    case BlockVariant::Squeeze: return "squeeze";
    case BlockVariant::SqueezeNoFBP: return "squeeze_no_fbp";
    case BlockVariant::SqueezeRgbBeforeSqueeze: return "squeeze_rgb_before";
    case BlockVariant::SqueezeRgbAfterExcite: return "squeeze_rgb_after";
  }
  return "?";
}

BlockVariant parse_block_variant(const std::string& text) {
  for (BlockVariant v : kAllVariants) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown block variant '" + text +
                    "' (expected skip, squeeze, squeeze_no_fbp, "
                    "squeeze_rgb_before or squeeze_rgb_after)");
}

bool is_squeeze(BlockVariant v) { return v != BlockVariant::SkipConnection; }

void GeneratorConfig::validate() const {
  if (resolution < 4 || resolution > 256 ||
      (resolution & (resolution - 1)) != 0) {
    throw ConfigError("resolution must be a power of two in [4, 256], got " +
                      std::to_string(resolution));
  }
  if (style_dim < 1) throw ConfigError("style_dim must be >= 1");
  if (mapping_depth < 1) throw ConfigError("mapping_depth must be >= 1");
  if (squeeze_ratio < 1) throw ConfigError("squeeze ratio r must be >= 1");
  for (int res = 4; res <= resolution; res *= 2) {
    auto it = channel_map.find(res);
    if (it == channel_map.end()) {
      throw ConfigError("channel_map has no entry for resolution " +
                        std::to_string(res));
    }
    if (it->second < 1) {
      throw ConfigError("channel_map[" + std::to_string(res) + "] must be >= 1");
    }
    if (res >= 8 && is_squeeze(variant) && it->second % squeeze_ratio != 0) {
      throw ConfigError("squeeze ratio " + std::to_string(squeeze_ratio) +
                        " does not divide " + std::to_string(it->second) +
                        " channels at resolution " + std::to_string(res));
    }
  }
}

std::vector<int> GeneratorConfig::resolutions() const {
  std::vector<int> out;
  for (int res = 4; res <= resolution; res *= 2) out.push_back(res);
  return out;
}

int GeneratorConfig::channels(int res) const {
  auto it = channel_map.find(res);
  if (it == channel_map.end()) {
    throw ConfigError("no channel count for resolution " + std::to_string(res));
  }
  return it->second;
}

int GeneratorConfig::rgb_channels(int res) const {
  const int c = channels(res);
  if (res == 4) return c;
  switch (variant) {
    case BlockVariant::Squeeze:
    case BlockVariant::SqueezeNoFBP:
      return c / squeeze_ratio;
    default:
      return c;
  }
}

GeneratorConfig GeneratorConfig::nominal256(BlockVariant variant, int r) {
  GeneratorConfig c;
  c.resolution = 256;
  c.channel_map = {{4, 512},  {8, 512},   {16, 512}, {32, 512},
                   {64, 256}, {128, 128}, {256, 64}};
  c.variant = variant;
  c.squeeze_ratio = r;
  c.style_dim = 512;
  c.mapping_depth = 8;
  return c;
}

GeneratorConfig GeneratorConfig::desk(int resolution, BlockVariant variant,
                                      int r) {
  GeneratorConfig c;
  c.resolution = resolution;
  c.channel_map = {{4, 32}, {8, 16}, {16, 16}, {32, 16}, {64, 16}};
  c.variant = variant;
  c.squeeze_ratio = r;
  c.style_dim = 32;
  c.mapping_depth = 2;
  return c;
}

bool operator==(const GeneratorConfig& a, const GeneratorConfig& b) {
  return a.resolution == b.resolution && a.channel_map == b.channel_map &&
         a.variant == b.variant && a.squeeze_ratio == b.squeeze_ratio &&
         a.style_dim == b.style_dim && a.mapping_depth == b.mapping_depth &&
         a.upsample == b.upsample;
}

template <typename T>
Tensor<T> ModulatedConv<T>::style_scales(const Tensor<T>& w) const {
  const std::size_t in = affine_weight.dim(0), sd = affine_weight.dim(1);
  if (w.size() != sd) {
    throw ConfigError("style vector has " + std::to_string(w.size()) +
                      " entries, affine expects " + std::to_string(sd));
  }
  if (in != weight.dim(1)) {
    throw ConfigError("style affine output " + std::to_string(in) +
                      " != conv input channels " +
                      std::to_string(weight.dim(1)));
  }
  Tensor<T> s(Shape{in});
  for (std::size_t i = 0; i < in; ++i) {
    T acc = 0;
    for (std::size_t k = 0; k < sd; ++k) acc += affine_weight[i * sd + k] * w[k];
    s[i] = acc + affine_bias[i];
  }
  return s;
}

template <typename T>
Tensor<T> modulate_demodulate(const Tensor<T>& weight, const Tensor<T>& scales,
                              bool demodulate, double eps) {
  if (weight.rank() != 4 || scales.size() != weight.dim(1)) {
    throw ConfigError("modulate_demodulate: " + std::to_string(scales.size()) +
                      " scales for weight " + shape_str(weight.shape()));
  }
  if (!scales.all_finite()) {
    throw NumericError("modulate_demodulate: non-finite style scales");
  }
  const std::size_t O = weight.dim(0), I = weight.dim(1),
                    K = weight.dim(2) * weight.dim(3);
  Tensor<T> out(weight.shape());
  for (std::size_t o = 0; o < O; ++o) {
    T sumsq = 0;
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t idx = (o * I + i) * K + k;
        out[idx] = scales[i] * weight[idx];
        sumsq += out[idx] * out[idx];
      }
    }
    if (!demodulate) continue;
    const T d = T(1) / std::sqrt(sumsq + T(eps));
    for (std::size_t j = o * I * K; j < (o + 1) * I * K; ++j) out[j] *= d;
  }
  return out;
}

template <typename T>
Tensor<T> modulate_demodulate(const ModulatedConv<T>& conv,
                              const Tensor<T>& w) {
  return modulate_demodulate(conv.weight, conv.style_scales(w), conv.demodulate,
                             conv.eps);
}

namespace {

void add_modconv(std::vector<ParamSpec>& out, const std::string& prefix,
                 int in, int o, int k, int style_dim, ParamRole kernel_role) {
  const auto I = static_cast<std::size_t>(in);
  const auto O = static_cast<std::size_t>(o);
  const auto K = static_cast<std::size_t>(k);
  const auto S = static_cast<std::size_t>(style_dim);
  out.push_back({prefix + ".affine.weight", {I, S}, ParamRole::StyleAffine,
                 InitKind::Normal, 1.0 / std::sqrt(double(S))});
  // Scales start near 1 so early styles act close to an unmodulated conv.
  out.push_back({prefix + ".affine.bias", {I}, ParamRole::StyleAffine,
                 InitKind::Constant, 1.0});
  out.push_back({prefix + ".weight", {O, I, K, K}, kernel_role,
                 InitKind::Normal, 1.0 / std::sqrt(double(I * K * K))});
  out.push_back({prefix + ".bias", {O}, ParamRole::Bias, InitKind::Constant, 0});
}

}  // namespace

std::vector<ParamSpec> block_layout(BlockVariant variant, int r, int style_dim,
                                    int c_in, int c,
                                    const std::string& prefix) {
  std::vector<ParamSpec> out;
  if (variant == BlockVariant::SkipConnection) {
    add_modconv(out, prefix + ".conv0", c_in, c, 3, style_dim,
                ParamRole::ConvKernel);
    add_modconv(out, prefix + ".conv1", c, c, 3, style_dim,
                ParamRole::ConvKernel);
    add_modconv(out, prefix + ".torgb", c, 3, 1, style_dim,
                ParamRole::RgbKernel);
    return out;
  }
  if (r < 1 || c % r != 0) {
    throw ConfigError("squeeze ratio " + std::to_string(r) +
                      " does not divide " + std::to_string(c));
  }
  const int cs = c / r;
  add_modconv(out, prefix + ".conv_up", c_in, c, 3, style_dim,
              ParamRole::ConvKernel);
  add_modconv(out, prefix + ".squeeze", c, cs, 3, style_dim,
              ParamRole::ConvKernel);
  add_modconv(out, prefix + ".excite", cs, c, 3, style_dim,
              ParamRole::ConvKernel);
  if (variant != BlockVariant::SqueezeNoFBP) {
    add_modconv(out, prefix + ".blend", 2 * c, c, 1, style_dim,
                ParamRole::ConvKernel);
  }
  const bool low_dim_rgb = variant == BlockVariant::Squeeze ||
                           variant == BlockVariant::SqueezeNoFBP;
  add_modconv(out, prefix + ".torgb", low_dim_rgb ? cs : c, 3, 1, style_dim,
              ParamRole::RgbKernel);
  return out;
}

std::vector<ParamSpec> generator_layout(const GeneratorConfig& config) {
  config.validate();
  std::vector<ParamSpec> out;
  const auto S = static_cast<std::size_t>(config.style_dim);
  for (int l = 0; l < config.mapping_depth; ++l) {
    const std::string p = "mapping." + std::to_string(l);
    out.push_back({p + ".weight", {S, S}, ParamRole::Mapping, InitKind::Normal,
                   1.0 / std::sqrt(double(S))});
    out.push_back({p + ".bias", {S}, ParamRole::Mapping, InitKind::Constant, 0});
  }
  const int c4 = config.channels(4);
  out.push_back({"const", {1, std::size_t(c4), 4, 4}, ParamRole::ConstInput,
                 InitKind::Constant, 0.1});
  add_modconv(out, "b4.conv", c4, c4, 3, config.style_dim,
              ParamRole::ConvKernel);
  add_modconv(out, "b4.torgb", c4, 3, 1, config.style_dim,
              ParamRole::RgbKernel);
  for (int res = 8; res <= config.resolution; res *= 2) {
    auto block = block_layout(config.variant, config.squeeze_ratio,
                              config.style_dim, config.channels(res / 2),
                              config.channels(res), "b" + std::to_string(res));
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

template <typename T>
Var<T> mapping_network(const BoundParams<T>& params, const Var<T>& z,
                       int depth) {
  if (depth < 1) throw ConfigError("mapping depth must be >= 1");
  Var<T> x = z;
  for (int l = 0; l < depth; ++l) {
    const std::string p = "mapping." + std::to_string(l);
    const Var<T>& weight = params[p + ".weight"];
    if (z.value().rank() != 2 || x.shape()[1] != weight.shape()[1]) {
      throw ConfigError("mapping network: latent shape " +
                        shape_str(x.shape()) + " does not match layer " + p);
    }
    x = ad::leaky_relu(ad::linear(x, weight, params[p + ".bias"]));
  }
  return x;
}

template <typename T>
Var<T> modulated_conv(const BoundParams<T>& params, const std::string& prefix,
                      const Var<T>& x, const Var<T>& w, bool demodulate,
                      bool activate, Var<T>* modulated_out) {
  const Var<T>& weight = params[prefix + ".weight"];
  const Shape& ws = weight.shape();
  const Var<T> s =
      ad::linear(w, params[prefix + ".affine.weight"],
                 params[prefix + ".affine.bias"]);  // N x I
  const Var<T> xm = ad::scale_channels(x, s);
  if (modulated_out) *modulated_out = xm;
  const int pad = static_cast<int>(ws[2] / 2);
  Var<T> y = ad::conv2d(xm, weight, pad);
  if (demodulate) {
    // d[n,o] = 1 / sqrt(sum_i s[n,i]^2 * sum_k weight[o,i,k]^2 + eps)
    const Var<T> wsq = ad::reshape(
        ad::reduce_to(ad::square(weight), Shape{ws[0], ws[1], 1, 1}),
        Shape{ws[0], ws[1]});
    const Var<T> d = ad::rsqrt_eps(
        ad::matmul(ad::square(s), wsq, false, true), kDemodEps);
    y = ad::scale_channels(y, d);
  }
  y = ad::bias_add(y, params[prefix + ".bias"]);
  return activate ? ad::leaky_relu(y) : y;
}

template <typename T>
RgbOutput<T> to_rgb(const BoundParams<T>& params, const std::string& prefix,
                    const Var<T>& f, const Var<T>& w) {
  const Shape& ws = params[prefix + ".weight"].shape();
  if (ws[0] != 3 || ws[2] != 1 || ws[3] != 1) {
    throw ConfigError("toRGB '" + prefix + "' must be a 1x1 kernel with 3 "
                      "outputs, got " + shape_str(ws));
  }
  RgbOutput<T> out;
  out.image = modulated_conv(params, prefix, f, w, /*demodulate=*/false,
                             /*activate=*/false, &out.modulated);
  return out;
}

namespace {

template <typename T>
void attach_rgb(LevelTrace<T>& t, const BoundParams<T>& params,
                const std::string& prefix, const Var<T>& source,
                const Var<T>& w) {
  auto rgb = to_rgb(params, prefix + ".torgb", source, w);
  t.image = rgb.image;
  t.modulated = rgb.modulated;
  t.rgb_weight = params[prefix + ".torgb.weight"];
  t.rgb_bias = params[prefix + ".torgb.bias"];
}

}  // namespace

template <typename T>
LevelTrace<T> skip_block_forward(const BoundParams<T>& params,
                                 const GeneratorConfig& config, int res,
                                 const Var<T>& f_prev, const Var<T>& w) {
  const std::string p = "b" + std::to_string(res);
  LevelTrace<T> t;
  t.resolution = res;
  Var<T> x = ad::upsample2x(f_prev, config.upsample);
  x = modulated_conv(params, p + ".conv0", x, w, true, true);
  x = modulated_conv(params, p + ".conv1", x, w, true, true);
  t.features = x;
  attach_rgb(t, params, p, x, w);
  return t;
}

template <typename T>
LevelTrace<T> squeeze_block_forward(const BoundParams<T>& params,
                                    const GeneratorConfig& config, int res,
                                    const Var<T>& f_prev, const Var<T>& w) {
  const int c = config.channels(res);
  if (config.squeeze_ratio < 1 || c % config.squeeze_ratio != 0) {
    throw ConfigError("squeeze ratio " + std::to_string(config.squeeze_ratio) +
                      " does not divide " + std::to_string(c) + " channels");
  }
  const std::string p = "b" + std::to_string(res);
  LevelTrace<T> t;
  t.resolution = res;
  const Var<T> up = ad::upsample2x(f_prev, config.upsample);
  t.f_i = modulated_conv(params, p + ".conv_up", up, w, true, true);
  t.f_s = modulated_conv(params, p + ".squeeze", t.f_i, w, true, true);
  t.f_e = modulated_conv(params, p + ".excite", t.f_s, w, true, true);
  if (config.variant == BlockVariant::SqueezeNoFBP) {
    t.features = t.f_e;
  } else {
    // Blend is linear: modulated and demodulated, no activation.
    t.features = modulated_conv(params, p + ".blend",
                                ad::concat_channels(t.f_i, t.f_e), w, true,
                                false);
  }
  switch (config.variant) {
    case BlockVariant::SqueezeRgbBeforeSqueeze:
      attach_rgb(t, params, p, t.f_i, w);
      break;
    case BlockVariant::SqueezeRgbAfterExcite:
      attach_rgb(t, params, p, t.f_e, w);
      break;
    default:
      attach_rgb(t, params, p, t.f_s, w);
      break;
  }
  return t;
}

template <typename T>
Generator<T>::Generator(GeneratorConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      params_(ParameterSet<T>::initialize(generator_layout(config_), seed)) {}

template <typename T>
Generator<T>::Generator(GeneratorConfig config, ParameterSet<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  params_.check_layout(generator_layout(config_));
}

template <typename T>
GeneratorOutput<T> Generator<T>::forward(const BoundParams<T>& params,
                                         const Var<T>& z) const {
  if (z.value().rank() != 2 ||
      z.shape()[1] != static_cast<std::size_t>(config_.style_dim)) {
    throw ConfigError("latent must be N x " +
                      std::to_string(config_.style_dim) + ", got " +
                      shape_str(z.shape()));
  }
  const std::size_t n = z.shape()[0];
  GeneratorOutput<T> out;
  out.w = mapping_network(params, z, config_.mapping_depth);

  const Var<T>& c = params["const"];
  Var<T> x = ad::broadcast_to(c, Shape{n, c.shape()[1], 4, 4});

  LevelTrace<T> first;
  first.resolution = 4;
  x = modulated_conv(params, "b4.conv", x, out.w, true, true);
  first.features = x;
  attach_rgb(first, params, "b4", x, out.w);
  out.levels.push_back(first);
  Var<T> image = first.image;

  for (int res = 8; res <= config_.resolution; res *= 2) {
    LevelTrace<T> t =
        config_.variant == BlockVariant::SkipConnection
            ? skip_block_forward(params, config_, res, x, out.w)
            : squeeze_block_forward(params, config_, res, x, out.w);
    x = t.features;
    image = ad::add(ad::upsample2x(image, config_.upsample), t.image);
    out.levels.push_back(t);
  }
  out.image = image;
  return out;
}

template <typename T>
GeneratorOutput<T> Generator<T>::forward(Tape<T>& tape, const Var<T>& z) const {
  return forward(params_.bind(tape, true), z);
}

template <typename T>
Tensor<T> Generator<T>::generate(const Tensor<T>& z) const {
  Tape<T> tape;
  auto bound = params_.bind(tape, false);
  return forward(bound, tape.constant(z)).image.value();
}

template <typename T>
Tensor<T> sample_latents(std::size_t n, int dim, std::uint64_t seed,
                         std::uint64_t counter_offset) {
  CounterRng rng(seed, streams::kLatent ^ (counter_offset * 0x100000001B3ULL));
  Tensor<T> z(Shape{n, static_cast<std::size_t>(dim)});
  for (auto& v : z.data()) v = T(rng.normal());
  return z;
}

#define SQZGAN_INSTANTIATE(T)                                                 \
  template struct ModulatedConv<T>;                                           \
  template Tensor<T> modulate_demodulate(const Tensor<T>&, const Tensor<T>&,  \
                                         bool, double);                       \
  template Tensor<T> modulate_demodulate(const ModulatedConv<T>&,             \
                                         const Tensor<T>&);                   \
  template Var<T> mapping_network(const BoundParams<T>&, const Var<T>&, int); \
  template Var<T> modulated_conv(const BoundParams<T>&, const std::string&,   \
                                 const Var<T>&, const Var<T>&, bool, bool,    \
                                 Var<T>*);                                    \
  template RgbOutput<T> to_rgb(const BoundParams<T>&, const std::string&,     \
                               const Var<T>&, const Var<T>&);                 \
  template LevelTrace<T> skip_block_forward(                                  \
      const BoundParams<T>&, const GeneratorConfig&, int, const Var<T>&,      \
      const Var<T>&);                                                         \
  template LevelTrace<T> squeeze_block_forward(                               \
      const BoundParams<T>&, const GeneratorConfig&, int, const Var<T>&,      \
      const Var<T>&);                                                         \
  template class Generator<T>;                                                \
  template Tensor<T> sample_latents(std::size_t, int, std::uint64_t,          \
                                    std::uint64_t);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace sqzgan
