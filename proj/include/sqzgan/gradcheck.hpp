#pragma once

// Central finite-difference checks against the tape's backward pass.

#include <functional>
#include <string>
#include <vector>

#include "sqzgan/autodiff.hpp"

namespace sqzgan {

/// Builds a scalar from leaves already placed on `tape`.
using ScalarFn =
    std::function<Var<double>(Tape<double>& tape,
                              const std::vector<Var<double>>& inputs)>;

struct GradCheckResult {
  std::string name;
  double rel_error = 0;  // ||analytic - fd|| / max(||analytic||, ||fd||)
  double tolerance = 0;
  bool passed() const { return rel_error <= tolerance; }
};

/// Compares d f / d inputs[k] for each k in `wrt` against central
/// differences with step `step`. Returns the worst relative error.
double gradient_rel_error(const ScalarFn& f,
                          const std::vector<Tensor<double>>& inputs,
                          const std::vector<std::size_t>& wrt,
                          double step = 1e-5,
                          TapeOrder order = TapeOrder::First);

double relative_error(const Tensor<double>& a, const Tensor<double>& b);

/// Named suites: "core" (tensor ops), "losses" (adversarial losses), "r1"
/// (gradient of the R1 penalty through a double backward pass).
bool is_gradcheck_suite(const std::string& name);
std::vector<GradCheckResult> run_gradcheck_suite(const std::string& name);

}  // namespace sqzgan
