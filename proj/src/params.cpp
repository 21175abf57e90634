#include "sqzgan/params.hpp"

#include "sqzgan/rng.hpp"

namespace sqzgan {

const char* to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Mapping: return "mapping";
    case ParamRole::ConstInput: return "const_input";
    case ParamRole::ConvKernel: return "conv_kernel";
    case ParamRole::RgbKernel: return "rgb_kernel";
    case ParamRole::Bias: return "bias";
    case ParamRole::StyleAffine: return "style_affine";
    case ParamRole::Discriminator: return "discriminator";
  }
  return "?";
}

std::size_t count_scalars(const std::vector<ParamSpec>& layout) {
  std::size_t n = 0;
  for (const auto& p : layout) n += shape_numel(p.shape);
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::initialize(
    const std::vector<ParamSpec>& layout, std::uint64_t seed) {
  ParameterSet<T> out;
  CounterRng rng(seed, streams::kInit);
  for (const auto& spec : layout) {
    Tensor<T> t(spec.shape, T(spec.value));
    if (spec.init == InitKind::Normal) {
      for (auto& v : t.data()) v = T(spec.value * rng.normal());
    }
    out.add(spec.name, std::move(t));
  }
  return out;
}

template <typename T>
void ParameterSet<T>::add(const std::string& name, Tensor<T> value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return values_[it->second];
}

template <typename T>
Tensor<T>& ParameterSet<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return values_[it->second];
}

template <typename T>
std::size_t ParameterSet<T>::total_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
void ParameterSet<T>::check_layout(const std::vector<ParamSpec>& layout) const {
  if (layout.size() != size()) {
    throw ConfigError("parameter count " + std::to_string(size()) +
                      " does not match expected " +
                      std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (names_[i] != layout[i].name) {
      throw ConfigError("parameter #" + std::to_string(i) + " is '" +
                        names_[i] + "', expected '" + layout[i].name + "'");
    }
    if (values_[i].shape() != layout[i].shape) {
      throw ConfigError("parameter '" + names_[i] + "' has shape " +
                        shape_str(values_[i].shape()) + ", expected " +
                        shape_str(layout[i].shape));
    }
  }
}

template <typename T>
BoundParams<T> ParameterSet<T>::bind(Tape<T>& tape, bool requires_grad) const {
  BoundParams<T> out;
  out.names_ = names_;
  out.index_ = index_;
  out.vars_.reserve(size());
  for (const auto& v : values_) out.vars_.push_back(tape.leaf(v, requires_grad));
  return out;
}

template <typename T>
const Var<T>& BoundParams<T>::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unbound parameter " + name);
  return vars_[it->second];
}

template <typename T>
BoundParams<T> BoundParams<T>::from(std::vector<std::string> names,
                                    std::vector<Var<T>> vars) {
  if (names.size() != vars.size()) {
    throw ConfigError("BoundParams: " + std::to_string(names.size()) +
                      " names for " + std::to_string(vars.size()) + " values");
  }
  BoundParams<T> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.index_[names[i]] = i;
  out.names_ = std::move(names);
  out.vars_ = std::move(vars);
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class BoundParams<float>;
template class BoundParams<double>;

}  // namespace sqzgan
