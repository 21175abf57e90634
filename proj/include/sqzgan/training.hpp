#pragma once

// Adversarial losses, a small residual discriminator, a procedural toy
// dataset and a deterministic alternating training loop.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sqzgan/autodiff.hpp"
#include "sqzgan/params.hpp"
#include "sqzgan/synthesis.hpp"

namespace sqzgan {

// ---------------------------------------------------------------- losses

enum class LossKind { Classic, NonSatR1 };

const char* to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

inline constexpr double kProbClamp = 1e-7;

/// mean softplus(-d_fake)
template <typename T>
Var<T> g_loss_nonsat(const Var<T>& d_fake);

template <typename T>
struct DiscriminatorLoss {
  Var<T> total;
  Var<T> real_term;  // mean softplus(-d_real), or -mean log D(x)
  Var<T> fake_term;  // mean softplus(d_fake), or -mean log(1 - D(G(z)))
  Var<T> r1;         // mean ||grad_x D(x)||^2 (invalid when gamma == 0)
};

/// mean softplus(-d_real) + mean softplus(d_fake)
///   + gamma / 2 * mean_n ||d D(x_n) / d x_n||^2.
///
/// `x_real` must be the leaf that produced `d_real` (N x 1 logits). The
/// discriminator treats batch items independently, so the per-sample input
/// gradients are the gradient of sum(d_real) w.r.t. x_real.
template <typename T>
DiscriminatorLoss<T> d_loss_nonsat_r1(const Var<T>& d_real,
                                      const Var<T>& d_fake,
                                      const Var<T>& x_real, double gamma);

/// -mean log(sigmoid(d_fake)), probabilities clamped to [1e-7, 1 - 1e-7].
template <typename T>
Var<T> g_loss_classic(const Var<T>& d_fake);

/// -mean log(sigmoid(d_real)) - mean log(1 - sigmoid(d_fake)), clamped.
template <typename T>
DiscriminatorLoss<T> d_loss_classic(const Var<T>& d_real,
                                    const Var<T>& d_fake);

// --------------------------------------------------------- discriminator

struct DiscriminatorConfig {
  int resolution = 16;
  std::map<int, int> channel_map;  // must cover 4 .. resolution

  void validate() const;
  int num_blocks() const;
};

/// fromRGB 1x1 conv, residual blocks at resolution, resolution/2, ..., 4
/// (each halving the spatial size), then a dense layer to one logit.
std::vector<ParamSpec> discriminator_layout(const DiscriminatorConfig& config);

/// Main path of block `res`: conv3x3 + lrelu, conv3x3 + lrelu, avg-pool.
template <typename T>
Var<T> discriminator_block_main(const BoundParams<T>& params, int res,
                                const Var<T>& x);
/// Skip path of block `res`: avg-pool then 1x1 projection without bias.
template <typename T>
Var<T> discriminator_block_skip(const BoundParams<T>& params, int res,
                                const Var<T>& x);

/// images N x 3 x R x R -> logits N x 1.
template <typename T>
Var<T> discriminator_forward(const BoundParams<T>& params,
                             const DiscriminatorConfig& config,
                             const Var<T>& images);

// ----------------------------------------------------------------- data

struct ToyDatasetSpec {
  int resolution = 16;
  std::uint64_t seed = 0;
};

/// Procedural RGB images: two soft discs with random centres, radii and
/// colours over a dark background. Sample k is a pure function of
/// (seed, k); pixel values lie in [-1, 1].
template <typename T>
class ToyDataset {
 public:
  explicit ToyDataset(ToyDatasetSpec spec);

  Tensor<T> sample(std::uint64_t index) const;  // 3 x R x R
  Tensor<T> batch(std::uint64_t first_index, std::size_t n) const;

 private:
  ToyDatasetSpec spec_;
};

// ------------------------------------------------------------- training

struct LossConfig {
  LossKind kind = LossKind::NonSatR1;
  double gamma = 0.1;
  double learning_rate = 2.5e-3;
  double ema_halflife = 50;  // steps
  bool adam = true;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double adam_eps = 1e-8;

  void validate() const;
};

struct StepRecord {
  int step = 0;
  double d_loss = 0;
  double g_loss = 0;
  double r1 = 0;
  double g_grad_norm = 0;
  double d_grad_norm = 0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;

  /// Header: step,d_loss,g_loss,r1,g_grad_norm,d_grad_norm
  std::string to_csv() const;
};

struct TrainOptions {
  int steps = 500;
  int batch = 16;
  std::uint64_t seed = 0;
  /// Called after every step; return false to stop early.
  std::function<bool(const StepRecord&)> on_step;
};

template <typename T>
struct TrainResult {
  Generator<T> generator;
  Generator<T> generator_ema;
  DiscriminatorConfig d_config;
  ParameterSet<T> discriminator;
  TrainHistory history;
};

/// Discriminator config matching a generator config.
DiscriminatorConfig discriminator_for(const GeneratorConfig& g);

/// Alternating D-step / G-step training on the toy dataset. Throws
/// NumericError naming the step and loss term on any non-finite value.
template <typename T>
TrainResult<T> train(const GeneratorConfig& config, const LossConfig& loss,
                     const ToyDatasetSpec& data, const TrainOptions& options);

/// Adam with optional first moment (beta1 = 0 disables it) and bias
/// correction; plain SGD when `adam` is false.
template <typename T>
class Optimizer {
 public:
  Optimizer(const ParameterSet<T>& params, const LossConfig& config);
  void step(ParameterSet<T>& params, const std::vector<Tensor<T>>& grads);

 private:
  LossConfig config_;
  std::vector<Tensor<T>> m_, v_;
  long t_ = 0;
};

}  // namespace sqzgan
