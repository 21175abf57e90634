#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sqzgan/autodiff.hpp"
#include "sqzgan/tensor.hpp"

namespace sqzgan {

/// What a parameter array is, for accounting purposes.
enum class ParamRole {
  Mapping,      // mapping-network weights and biases
  ConstInput,   // learned 4x4 input
  ConvKernel,   // 3x3 synthesis kernels and the 1x1 blend kernel
  RgbKernel,    // toRGB 1x1 kernels
  Bias,         // conv / toRGB biases
  StyleAffine,  // style affine weights and biases
  Discriminator,
};

const char* to_string(ParamRole role);

enum class InitKind { Normal, Constant };

/// Declarative description of one parameter array. Layout functions return
/// these so that parameter counting and allocation share one source.
struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role;
  InitKind init = InitKind::Constant;
  double value = 0;  // std-dev for Normal, fill value for Constant
};

std::size_t count_scalars(const std::vector<ParamSpec>& layout);

template <typename T>
class BoundParams;

/// Ordered collection of named tensors.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;

  /// Allocates every array in `layout`, drawing normals from a counter RNG
  /// keyed by `seed` in layout order.
  static ParameterSet initialize(const std::vector<ParamSpec>& layout,
                                 std::uint64_t seed);

  void add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const;
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const Tensor<T>& at(std::size_t i) const { return values_[i]; }
  Tensor<T>& at(std::size_t i) { return values_[i]; }
  std::size_t total_scalars() const;

  /// Throws ConfigError unless names and shapes equal `layout`'s.
  void check_layout(const std::vector<ParamSpec>& layout) const;

  BoundParams<T> bind(Tape<T>& tape, bool requires_grad) const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], values_[i].template cast<U>());
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::map<std::string, std::size_t> index_;
};

/// Parameters recorded as leaves on a tape.
template <typename T>
class BoundParams {
 public:
  const Var<T>& operator[](const std::string& name) const;
  const std::vector<Var<T>>& vars() const { return vars_; }
  const std::vector<std::string>& names() const { return names_; }

  /// View over leaves created elsewhere, e.g. by a gradient checker.
  static BoundParams from(std::vector<std::string> names,
                          std::vector<Var<T>> vars);

 private:
  friend class ParameterSet<T>;
  std::vector<std::string> names_;
  std::vector<Var<T>> vars_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace sqzgan
