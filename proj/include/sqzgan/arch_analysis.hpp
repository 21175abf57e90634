#pragma once

// Skip-connection algebra (per-level toRGB images summed after upsampling
// equal one 1x1 projection of the concatenated, upsampled modulated
// features) and exact parameter accounting.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqzgan/synthesis.hpp"
#include "sqzgan/tensor.hpp"

namespace sqzgan {

enum class Precision { F32, F64 };

const char* to_string(Precision p);
Precision parse_precision(const std::string& text);

/// image = Up(...Up(Up(I_1) + I_2)...) + I_J. Each image is N x 3 x h x w
/// with h doubling from one level to the next.
template <typename T>
Tensor<T> aggregate_direct(const std::vector<Tensor<T>>& images,
                           UpsampleMode mode);

template <typename T>
struct AggregatedProjection {
  Tensor<T> W_a;   // (sum_j c_j) x 3, blocks in level order
  Tensor<T> f_a;   // N x (sum_j c_j) x H x W, same order
  Tensor<T> bias;  // 3, sum of the per-level toRGB biases

  std::size_t concat_channels() const { return W_a.dim(0); }
};

/// Upsamples every modulated feature f_j' to the final size and stacks the
/// toRGB kernels (3 x c_j x 1 x 1) into W_a.
template <typename T>
AggregatedProjection<T> build_projection(
    const std::vector<Tensor<T>>& features,
    const std::vector<Tensor<T>>& rgb_weights,
    const std::vector<Tensor<T>>& rgb_biases, UpsampleMode mode);

/// out[n, o, y, x] = sum_r W_a[r, o] f_a[n, r, y, x] + bias[o].
template <typename T>
Tensor<T> apply_projection(const AggregatedProjection<T>& proj);

template <typename T>
Tensor<T> aggregate_concat(const std::vector<Tensor<T>>& features,
                           const std::vector<Tensor<T>>& rgb_weights,
                           const std::vector<Tensor<T>>& rgb_biases,
                           UpsampleMode mode);

/// Sum of the channel map over 4 .. resolution.
int concat_dimension(const GeneratorConfig& config);

struct EquivalenceReport {
  GeneratorConfig config;
  Precision precision = Precision::F64;
  int trials = 0;
  double tolerance = 0;
  int concat_channels = 0;
  std::vector<double> deviations;  // per trial, max |direct - concat|
  double max_deviation = 0;

  bool passed() const { return max_deviation <= tolerance; }
  std::string to_text() const;
  std::string to_keyvalue() const;
};

/// Runs a SkipConnection generator on `trials` latents and compares both
/// aggregation paths. Throws ConfigError for other variants or trials < 1.
EquivalenceReport verify_equivalence(const GeneratorConfig& config, int trials,
                                     double tol, Precision precision,
                                     std::uint64_t seed = 0);

// ------------------------------------------------------------ accounting

/// Scalars in the conv kernels of one block, toRGB excluded.
std::uint64_t enumerated_block_kernels(BlockVariant variant, std::uint64_t c,
                                       int r);
/// Published closed forms: 18c^2 for the skip block, (10 + 18/r)c^2 for
/// the squeeze block. Empty for the ablations, which have none.
std::optional<double> published_block_formula(BlockVariant variant,
                                              std::uint64_t c, int r);
/// Human-readable closed form of the enumerated count, e.g. "11c^2+18c^2/r".
std::string enumerated_formula_text(BlockVariant variant);

/// Smallest r for which the closed form beats 18c^2: 18/8 for the published
/// formula, 18/7 for the enumerated squeeze block.
inline constexpr double kPublishedRThreshold = 18.0 / 8.0;
inline constexpr double kEnumeratedRThreshold = 18.0 / 7.0;

struct BlockParamEntry {
  int resolution = 0;  // 0 for a stand-alone block
  BlockVariant variant = BlockVariant::SkipConnection;
  std::uint64_t c_in = 0, c = 0;
  int r = 0;
  std::uint64_t conv_kernel = 0;
  std::uint64_t rgb_kernel = 0;
  std::uint64_t bias = 0;
  std::uint64_t style_affine = 0;
  std::optional<double> published_formula;  // of the kernel count
  double deviation() const;  // enumerated - published, in scalars
  std::uint64_t total() const {
    return conv_kernel + rgb_kernel + bias + style_affine;
  }
};

/// One block with c_in == c, as in the published per-resolution count.
BlockParamEntry count_block_params(BlockVariant variant, std::uint64_t c,
                                   int r, int style_dim = 512);

struct ParamReport {
  GeneratorConfig config;
  std::map<ParamRole, std::uint64_t> by_role;
  std::vector<BlockParamEntry> blocks;  // resolutions 8 .. R
  std::uint64_t total = 0;

  std::uint64_t role(ParamRole r) const;
  std::string to_text() const;
  std::string to_keyvalue() const;
};

ParamReport count_generator_params(const GeneratorConfig& config);

/// 100 * (1 - variant / baseline).
double reduction_percent(std::uint64_t baseline, std::uint64_t variant);

}  // namespace sqzgan
