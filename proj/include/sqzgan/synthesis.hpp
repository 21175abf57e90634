#pragma once

// StyleGAN2-style synthesis network with selectable per-resolution blocks:
// the image skip connection baseline, the image squeeze connection, and
// three ablations of the squeeze block.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqzgan/autodiff.hpp"
#include "sqzgan/params.hpp"

namespace sqzgan {

enum class BlockVariant {
  SkipConnection,
  Squeeze,
  SqueezeNoFBP,             // no concat + 1x1 blend; f_o = f_e
  SqueezeRgbBeforeSqueeze,  // toRGB reads f_i
  SqueezeRgbAfterExcite,    // toRGB reads f_e
};

inline constexpr BlockVariant kAllVariants[] = {
    BlockVariant::SkipConnection, BlockVariant::Squeeze,
    BlockVariant::SqueezeNoFBP, BlockVariant::SqueezeRgbBeforeSqueeze,
    BlockVariant::SqueezeRgbAfterExcite};

const char* to_string(BlockVariant v);
BlockVariant parse_block_variant(const std::string& text);
bool is_squeeze(BlockVariant v);

inline constexpr double kDemodEps = 1e-8;

struct GeneratorConfig {
  int resolution = 16;
  std::map<int, int> channel_map;  // resolution -> channels
  BlockVariant variant = BlockVariant::SkipConnection;
  int squeeze_ratio = 8;
  int style_dim = 512;
  int mapping_depth = 8;
  UpsampleMode upsample = UpsampleMode::Nearest;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  std::vector<int> resolutions() const;  // 4, 8, ..., resolution
  int channels(int res) const;
  /// Channels fed to toRGB at block `res`.
  int rgb_channels(int res) const;

  /// 256x256 generator with the halving map {4..32: 512, 64: 256,
  /// 128: 128, 256: 64}.
  static GeneratorConfig nominal256(BlockVariant variant, int r = 8);
  /// Small generator for tests and training at the given resolution.
  static GeneratorConfig desk(int resolution, BlockVariant variant,
                              int r = 4);
};

bool operator==(const GeneratorConfig& a, const GeneratorConfig& b);

/// Modulated convolution parameters for a single style vector.
template <typename T>
struct ModulatedConv {
  Tensor<T> weight;         // O x I x kH x kW
  Tensor<T> bias;           // O
  Tensor<T> affine_weight;  // I x style_dim
  Tensor<T> affine_bias;    // I
  bool demodulate = true;
  double eps = kDemodEps;

  /// Per-input-channel scales s = A w + b.
  Tensor<T> style_scales(const Tensor<T>& w) const;
};

/// w'_{o,i,h,k} = s_i weight_{o,i,h,k}; when demodulating, each output
/// channel is divided by sqrt(sum w'^2 + eps).
template <typename T>
Tensor<T> modulate_demodulate(const Tensor<T>& weight, const Tensor<T>& scales,
                              bool demodulate, double eps = kDemodEps);
template <typename T>
Tensor<T> modulate_demodulate(const ModulatedConv<T>& conv,
                              const Tensor<T>& w);

/// Layout of every generator parameter, in allocation order.
std::vector<ParamSpec> generator_layout(const GeneratorConfig& config);

/// Layout of one upsampling block (resolution >= 8) mapping c_in channels
/// to c channels. Parameter names start with `prefix`.
std::vector<ParamSpec> block_layout(BlockVariant variant, int r, int style_dim,
                                    int c_in, int c,
                                    const std::string& prefix);

/// Per-level record of a forward pass. For squeeze variants the block
/// internals are filled in as well.
template <typename T>
struct LevelTrace {
  int resolution = 0;
  Var<T> features;   // block output (f_next / f_o)
  Var<T> modulated;  // feature after style modulation, entering toRGB
  Var<T> image;      // I_j
  Var<T> rgb_weight; // 3 x c x 1 x 1
  Var<T> rgb_bias;   // 3
  Var<T> f_i, f_s, f_e;
};

template <typename T>
struct GeneratorOutput {
  Var<T> image;
  Var<T> w;
  std::vector<LevelTrace<T>> levels;
};

template <typename T>
Var<T> mapping_network(const BoundParams<T>& params, const Var<T>& z,
                       int depth);

/// Modulated convolution with batched styles: x * s, conv, then scale output
/// channels by the demodulation coefficients. Returns the conv output and
/// writes the modulated input to `modulated_out` when given.
template <typename T>
Var<T> modulated_conv(const BoundParams<T>& params, const std::string& prefix,
                      const Var<T>& x, const Var<T>& w, bool demodulate,
                      bool activate, Var<T>* modulated_out = nullptr);

template <typename T>
struct RgbOutput {
  Var<T> image;
  Var<T> modulated;
};

/// Modulation + 1x1 conv, no demodulation, no activation.
template <typename T>
RgbOutput<T> to_rgb(const BoundParams<T>& params, const std::string& prefix,
                    const Var<T>& f, const Var<T>& w);

template <typename T>
LevelTrace<T> skip_block_forward(const BoundParams<T>& params,
                                 const GeneratorConfig& config, int res,
                                 const Var<T>& f_prev, const Var<T>& w);

template <typename T>
LevelTrace<T> squeeze_block_forward(const BoundParams<T>& params,
                                    const GeneratorConfig& config, int res,
                                    const Var<T>& f_prev, const Var<T>& w);

template <typename T>
class Generator {
 public:
  Generator(GeneratorConfig config, std::uint64_t seed);
  Generator(GeneratorConfig config, ParameterSet<T> params);

  const GeneratorConfig& config() const { return config_; }
  const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& params() { return params_; }

  /// z: N x style_dim.
  GeneratorOutput<T> forward(const BoundParams<T>& params,
                             const Var<T>& z) const;
  GeneratorOutput<T> forward(Tape<T>& tape, const Var<T>& z) const;

  /// Images for the given latents without recording gradients.
  Tensor<T> generate(const Tensor<T>& z) const;

 private:
  GeneratorConfig config_;
  ParameterSet<T> params_;
};

/// N x dim unit normals from the latent stream.
template <typename T>
Tensor<T> sample_latents(std::size_t n, int dim, std::uint64_t seed,
                         std::uint64_t counter_offset = 0);

}  // namespace sqzgan
