#include "sqzgan/arch_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sqzgan/errors.hpp"
#include "sqzgan/kernels.hpp"
#include "sqzgan/rng.hpp"

namespace sqzgan {

const char* to_string(Precision p) {
  return p == Precision::F32 ? "f32" : "f64";
}

Precision parse_precision(const std::string& text) {
  if (text == "f32") return Precision::F32;
  if (text == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + text + "' (expected f32 or f64)");
}

template <typename T>
Tensor<T> aggregate_direct(const std::vector<Tensor<T>>& images,
                           UpsampleMode mode) {
  if (images.empty()) throw ConfigError("aggregate_direct: no images");
  Tensor<T> acc = images[0];
  for (std::size_t j = 1; j < images.size(); ++j) {
    const Tensor<T> up = kernels::upsample2x(acc, mode);
    if (up.shape() != images[j].shape()) {
      throw ConfigError("aggregate_direct: level " + std::to_string(j) +
                        " has shape " + shape_str(images[j].shape()) +
                        ", expected " + shape_str(up.shape()));
    }
    acc = kernels::add(up, images[j]);
  }
  return acc;
}

template <typename T>
AggregatedProjection<T> build_projection(
    const std::vector<Tensor<T>>& features,
    const std::vector<Tensor<T>>& rgb_weights,
    const std::vector<Tensor<T>>& rgb_biases, UpsampleMode mode) {
  const std::size_t J = features.size();
  if (J == 0 || rgb_weights.size() != J ||
      (!rgb_biases.empty() && rgb_biases.size() != J)) {
    throw ConfigError("build_projection: need one weight (and bias) per level");
  }
  std::size_t total = 0;
  for (std::size_t j = 0; j < J; ++j) {
    const Shape& ws = rgb_weights[j].shape();
    if (ws.size() != 4 || ws[0] != 3 || ws[2] != 1 || ws[3] != 1 ||
        features[j].rank() != 4 || ws[1] != features[j].dim(1)) {
      throw ConfigError("build_projection: level " + std::to_string(j) +
                        " weight " + shape_str(ws) + " does not match feature " +
                        shape_str(features[j].shape()));
    }
    total += ws[1];
  }

  AggregatedProjection<T> proj;
  proj.W_a = Tensor<T>(Shape{total, 3});
  std::size_t row = 0;
  for (const auto& w : rgb_weights) {
    const std::size_t c = w.dim(1);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t o = 0; o < 3; ++o) {
        proj.W_a[(row + i) * 3 + o] = w[o * c + i];
      }
    }
    row += c;
  }

  std::vector<Tensor<T>> lifted;
  for (std::size_t j = 0; j < J; ++j) {
    Tensor<T> f = features[j];
    for (std::size_t k = j + 1; k < J; ++k) f = kernels::upsample2x(f, mode);
    lifted.push_back(std::move(f));
  }
  for (std::size_t j = 1; j < J; ++j) {
    const Shape& a = lifted[0].shape();
    const Shape& b = lifted[j].shape();
    if (a[0] != b[0] || a[2] != b[2] || a[3] != b[3]) {
      throw ConfigError("build_projection: level " + std::to_string(j) +
                        " does not reach the final resolution");
    }
  }
  std::vector<const Tensor<T>*> parts;
  for (const auto& f : lifted) parts.push_back(&f);
  proj.f_a = kernels::concat_channels(
      std::span<const Tensor<T>* const>(parts.data(), parts.size()));

  proj.bias = Tensor<T>(Shape{3});
  for (const auto& b : rgb_biases) {
    if (b.size() != 3) throw ConfigError("build_projection: bias must have 3");
    for (std::size_t o = 0; o < 3; ++o) proj.bias[o] += b[o];
  }
  return proj;
}

template <typename T>
Tensor<T> apply_projection(const AggregatedProjection<T>& proj) {
  const std::size_t N = proj.f_a.dim(0), R = proj.f_a.dim(1),
                    P = proj.f_a.dim(2) * proj.f_a.dim(3);
  if (proj.W_a.dim(0) != R) {
    throw ConfigError("apply_projection: W_a has " +
                      std::to_string(proj.W_a.dim(0)) + " rows, f_a' has " +
                      std::to_string(R) + " channels");
  }
  Tensor<T> out(Shape{N, 3, proj.f_a.dim(2), proj.f_a.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < 3; ++o) {
      for (std::size_t p = 0; p < P; ++p) {
        T acc = 0;
        for (std::size_t r = 0; r < R; ++r) {
          acc += proj.W_a[r * 3 + o] * proj.f_a[(n * R + r) * P + p];
        }
        out[(n * 3 + o) * P + p] = acc + proj.bias[o];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> aggregate_concat(const std::vector<Tensor<T>>& features,
                           const std::vector<Tensor<T>>& rgb_weights,
                           const std::vector<Tensor<T>>& rgb_biases,
                           UpsampleMode mode) {
  return apply_projection(
      build_projection(features, rgb_weights, rgb_biases, mode));
}

int concat_dimension(const GeneratorConfig& config) {
  config.validate();
  int total = 0;
  for (int res : config.resolutions()) total += config.channels(res);
  return total;
}

// --------------------------------------------------------- equivalence

namespace {

template <typename T>
void run_equivalence(EquivalenceReport& report, std::uint64_t seed) {
  const GeneratorConfig& config = report.config;
  const Generator<T> gen(config, seed);
  const Tensor<T> z = sample_latents<T>(std::size_t(report.trials),
                                        config.style_dim, seed,
                                        streams::kVerify);
  // Batches keep im2col buffers small at 64x64.
  const std::size_t chunk = 10, S = std::size_t(config.style_dim);
  for (std::size_t first = 0; first < std::size_t(report.trials);
       first += chunk) {
    const std::size_t n = std::min(chunk, std::size_t(report.trials) - first);
    std::vector<T> zs(z.data().begin() + first * S,
                      z.data().begin() + (first + n) * S);
    Tape<T> tape;
    const auto params = gen.params().bind(tape, false);
    const auto out =
        gen.forward(params, tape.constant(Tensor<T>(Shape{n, S}, zs)));
    std::vector<Tensor<T>> images, features, weights, biases;
    for (const auto& level : out.levels) {
      images.push_back(level.image.value());
      features.push_back(level.modulated.value());
      weights.push_back(level.rgb_weight.value());
      biases.push_back(level.rgb_bias.value());
    }
    const Tensor<T> direct = aggregate_direct(images, config.upsample);
    const Tensor<T> concat =
        aggregate_concat(features, weights, biases, config.upsample);
    const std::size_t per = direct.size() / n;
    for (std::size_t i = 0; i < n; ++i) {
      double dev = 0;
      for (std::size_t k = i * per; k < (i + 1) * per; ++k) {
        dev = std::max(dev, std::fabs(double(direct[k]) - double(concat[k])));
      }
      report.deviations.push_back(dev);
      report.max_deviation = std::max(report.max_deviation, dev);
    }
  }
}

}  // namespace

EquivalenceReport verify_equivalence(const GeneratorConfig& config, int trials,
                                     double tol, Precision precision,
                                     std::uint64_t seed) {
  config.validate();
  if (config.variant != BlockVariant::SkipConnection) {
    throw ConfigError(std::string("equivalence applies to the skip variant "
                                  "only, config uses '") +
                      to_string(config.variant) + "'");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!(tol >= 0)) throw ConfigError("tolerance must be >= 0");
  EquivalenceReport report;
  report.config = config;
  report.precision = precision;
  report.trials = trials;
  report.tolerance = tol;
  report.concat_channels = concat_dimension(config);
  if (precision == Precision::F64) {
    run_equivalence<double>(report, seed);
  } else {
    run_equivalence<float>(report, seed);
  }
  return report;
}

std::string EquivalenceReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", max_deviation);
  os << "skip-connection equivalence\n"
     << "  resolution       " << config.resolution << "\n"
     << "  upsample         " << to_string(config.upsample) << "\n"
     << "  precision        " << to_string(precision) << "\n"
     << "  concat channels  " << concat_channels << "\n"
     << "  trials           " << trials << "\n"
     << "  max deviation    " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.3e", tolerance);
  os << "  tolerance        " << buf << "\n"
     << "  result           " << (passed() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

std::string EquivalenceReport::to_keyvalue() const {
  char buf[64];
  std::ostringstream os;
  os << "resolution=" << config.resolution << "\n"
     << "upsample=" << to_string(config.upsample) << "\n"
     << "precision=" << to_string(precision) << "\n"
     << "concat_channels=" << concat_channels << "\n"
     << "trials=" << trials << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", max_deviation);
  os << "max_deviation=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", tolerance);
  os << "tolerance=" << buf << "\n"
     << "passed=" << (passed() ? "true" : "false") << "\n";
  return os.str();
}

// ----------------------------------------------------------- accounting

std::uint64_t enumerated_block_kernels(BlockVariant variant, std::uint64_t c,
                                       int r) {
  std::uint64_t n = 0;
  for (const auto& spec :
       block_layout(variant, r, 1, int(c), int(c), "block")) {
    if (spec.role == ParamRole::ConvKernel) n += shape_numel(spec.shape);
  }
  return n;
}

std::optional<double> published_block_formula(BlockVariant variant,
                                          std::uint64_t c, int r) {
  const double c2 = double(c) * double(c);
  switch (variant) {
    case BlockVariant::SkipConnection:
      return 18.0 * c2;
    case BlockVariant::Squeeze:
      return (10.0 + 18.0 / r) * c2;
    default:
      return std::nullopt;
  }
}

std::string enumerated_formula_text(BlockVariant variant) {
  switch (variant) {
    case BlockVariant::SkipConnection:
      return "18c²";
    case BlockVariant::SqueezeNoFBP:
      return "9c²+18c²/r";
    default:
      return "11c²+18c²/r";
  }
}

double BlockParamEntry::deviation() const {
  return published_formula ? double(conv_kernel) - *published_formula : 0.0;
}

namespace {

void tally(BlockParamEntry& e, const std::vector<ParamSpec>& layout) {
  for (const auto& spec : layout) {
    const std::uint64_t n = shape_numel(spec.shape);
    switch (spec.role) {
      case ParamRole::ConvKernel: e.conv_kernel += n; break;
      case ParamRole::RgbKernel: e.rgb_kernel += n; break;
      case ParamRole::Bias: e.bias += n; break;
      case ParamRole::StyleAffine: e.style_affine += n; break;
      default: break;
    }
  }
}

}  // namespace

BlockParamEntry count_block_params(BlockVariant variant, std::uint64_t c,
                                   int r, int style_dim) {
  BlockParamEntry e;
  e.variant = variant;
  e.c_in = e.c = c;
  e.r = r;
  tally(e, block_layout(variant, r, style_dim, int(c), int(c), "block"));
  e.published_formula = published_block_formula(variant, c, r);
  return e;
}

std::uint64_t ParamReport::role(ParamRole r) const {
  auto it = by_role.find(r);
  return it == by_role.end() ? 0 : it->second;
}

ParamReport count_generator_params(const GeneratorConfig& config) {
  config.validate();
  ParamReport report;
  report.config = config;
  for (const auto& spec : generator_layout(config)) {
    const std::uint64_t n = shape_numel(spec.shape);
    report.by_role[spec.role] += n;
    report.total += n;
  }
  for (int res = 8; res <= config.resolution; res *= 2) {
    BlockParamEntry e;
    e.resolution = res;
    e.variant = config.variant;
    e.c_in = std::uint64_t(config.channels(res / 2));
    e.c = std::uint64_t(config.channels(res));
    e.r = config.squeeze_ratio;
    tally(e, block_layout(config.variant, config.squeeze_ratio,
                          config.style_dim, int(e.c_in), int(e.c),
                          "b" + std::to_string(res)));
    // The closed forms assume c_in == c.
    if (e.c_in == e.c) e.published_formula = published_block_formula(e.variant, e.c, e.r);
    report.blocks.push_back(e);
  }
  return report;
}

double reduction_percent(std::uint64_t baseline, std::uint64_t variant) {
  if (baseline == 0) throw ConfigError("reduction_percent: zero baseline");
  return 100.0 * (1.0 - double(variant) / double(baseline));
}

std::string ParamReport::to_text() const {
  std::ostringstream os;
  char buf[256];
  os << "generator parameters (" << to_string(config.variant);
  if (is_squeeze(config.variant)) os << ", r=" << config.squeeze_ratio;
  os << ", resolution " << config.resolution << ")\n";
  for (ParamRole r :
       {ParamRole::Mapping, ParamRole::ConstInput, ParamRole::StyleAffine,
        ParamRole::ConvKernel, ParamRole::RgbKernel, ParamRole::Bias}) {
    std::snprintf(buf, sizeof buf, "  %-14s %12llu\n", to_string(r),
                  static_cast<unsigned long long>(role(r)));
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  %-14s %12llu  (%.2fM)\n", "total",
                static_cast<unsigned long long>(total), total / 1e6);
  os << buf;
  os << "per-block conv kernels (toRGB excluded)\n";
  for (const auto& b : blocks) {
    std::snprintf(buf, sizeof buf, "  b%-4d c=%-4llu enumerated %s = %llu",
                  b.resolution, static_cast<unsigned long long>(b.c),
                  enumerated_formula_text(b.variant).c_str(),
                  static_cast<unsigned long long>(b.conv_kernel));
    os << buf;
    if (b.c_in != b.c) {
      std::snprintf(buf, sizeof buf, "  (c_in=%llu, closed forms n/a)",
                    static_cast<unsigned long long>(b.c_in));
      os << buf;
    } else if (b.published_formula) {
      std::snprintf(buf, sizeof buf, "  published %s = %.0f",
                    b.variant == BlockVariant::SkipConnection
                        ? "18c²"
                        : "(10+18/r)c²",
                    *b.published_formula);
      os << buf;
      if (b.deviation() != 0) {
        std::snprintf(buf, sizeof buf, "  MISMATCH %+.0f (%+.3gc²)",
                      b.deviation(), b.deviation() / double(b.c * b.c));
        os << buf;
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string ParamReport::to_keyvalue() const {
  std::ostringstream os;
  os << "variant=" << to_string(config.variant) << "\n"
     << "r=" << config.squeeze_ratio << "\n"
     << "resolution=" << config.resolution << "\n";
  for (const auto& [r, n] : by_role) os << "role." << to_string(r) << "=" << n << "\n";
  os << "total=" << total << "\n";
  char buf[64];
  for (const auto& b : blocks) {
    const std::string p = "block." + std::to_string(b.resolution) + ".";
    os << p << "c=" << b.c << "\n" << p << "conv_kernel=" << b.conv_kernel << "\n";
    if (b.published_formula) {
      std::snprintf(buf, sizeof buf, "%.0f", *b.published_formula);
      os << p << "published_formula=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.0f", b.deviation());
      os << p << "deviation=" << buf << "\n";
    }
  }
  return os.str();
}

#define SQZGAN_INSTANTIATE(T)                                                \
  template Tensor<T> aggregate_direct(const std::vector<Tensor<T>>&,         \
                                      UpsampleMode);                         \
  template AggregatedProjection<T> build_projection(                         \
      const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&,          \
      const std::vector<Tensor<T>>&, UpsampleMode);                          \
  template Tensor<T> apply_projection(const AggregatedProjection<T>&);       \
  template Tensor<T> aggregate_concat(                                       \
      const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&,          \
      const std::vector<Tensor<T>>&, UpsampleMode);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace sqzgan
