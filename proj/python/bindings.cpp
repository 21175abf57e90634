#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sqzgan/arch_analysis.hpp"
#include "sqzgan/cli.hpp"
#include "sqzgan/errors.hpp"
#include "sqzgan/io.hpp"
#include "sqzgan/metrics.hpp"

namespace py = pybind11;
using namespace sqzgan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<std::vector<double>> rows_of(const Array& a, const char* what) {
  if (a.ndim() != 2) {
    throw ConfigError(std::string(what) + " must be a 2-D array");
  }
  auto r = a.unchecked<2>();
  std::vector<std::vector<double>> out(std::size_t(r.shape(0)),
                                       std::vector<double>(std::size_t(r.shape(1))));
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j) out[i][j] = r(i, j);
  return out;
}

template <typename T>
Array to_numpy(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  double* dst = out.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] = double(t[i]);
  return out;
}

py::dict params_dict(const ParamReport& r) {
  py::dict roles;
  for (const auto& [role, n] : r.by_role) roles[to_string(role)] = n;
  py::list blocks;
  for (const auto& b : r.blocks) {
    py::dict d;
    d["resolution"] = b.resolution;
    d["c_in"] = b.c_in;
    d["c"] = b.c;
    d["conv_kernel"] = b.conv_kernel;
    d["rgb_kernel"] = b.rgb_kernel;
    d["published_formula"] = b.published_formula
                                 ? py::object(py::float_(*b.published_formula))
                                 : py::object(py::none());
    blocks.append(d);
  }
  py::dict out;
  out["total"] = r.total;
  out["roles"] = roles;
  out["blocks"] = blocks;
  out["text"] = r.to_text();
  return out;
}

}  // namespace

PYBIND11_MODULE(_sqzgan, m) {
  m.doc() = "Skip/squeeze generator toolkit";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError",
                                       PyExc_ArithmeticError);

  m.def(
      "verify_equivalence",
      [](const std::string& config, int trials, std::optional<double> tol,
         std::optional<std::string> precision) {
        const RunConfig rc = parse_run_config(config);
        const Precision p = precision            ? parse_precision(*precision)
                            : rc.precision_given ? rc.precision
                                                 : Precision::F64;
        const double t = tol.value_or(p == Precision::F64 ? 1e-12 : 1e-4);
        const auto rep = verify_equivalence(rc.generator, trials, t, p, rc.seed);
        py::dict d;
        d["passed"] = rep.passed();
        d["max_deviation"] = rep.max_deviation;
        d["deviations"] = rep.deviations;
        d["concat_channels"] = rep.concat_channels;
        d["tolerance"] = rep.tolerance;
        return d;
      },
      py::arg("config") = "", py::arg("trials") = 100,
      py::arg("tol") = py::none(), py::arg("precision") = py::none(),
      "Compare progressive image summation against one projection of the "
      "concatenated features. `config` uses the key=value file format.");

  m.def(
      "count_params",
      [](const std::string& config) {
        return params_dict(count_generator_params(parse_run_config(config).generator));
      },
      py::arg("config") = "");

  m.def(
      "concat_dimension",
      [](const std::string& config) {
        return concat_dimension(parse_run_config(config).generator);
      },
      py::arg("config") = "");

  m.def(
      "block_kernels",
      [](const std::string& variant, std::uint64_t c, int r) {
        return enumerated_block_kernels(parse_block_variant(variant), c, r);
      },
      py::arg("variant"), py::arg("c"), py::arg("r") = 8);

  m.def(
      "published_block_formula",
      [](const std::string& variant, std::uint64_t c, int r) {
        return published_block_formula(parse_block_variant(variant), c, r);
      },
      py::arg("variant"), py::arg("c"), py::arg("r") = 8);

  m.def(
      "frechet_distance",
      [](const Array& a, const Array& b) {
        return frechet_distance(fit_gaussian(rows_of(a, "a")),
                                fit_gaussian(rows_of(b, "b")));
      },
      py::arg("a"), py::arg("b"),
      "Frechet distance between Gaussian fits of two N x d feature arrays.");

  m.def(
      "inception_score",
      [](const Array& probs) {
        ClassProbTable t;
        t.rows = rows_of(probs, "probs");
        return inception_score(t);
      },
      py::arg("probs"));

  m.def("pixel_byte", &pixel_byte, py::arg("value"));

  m.def(
      "generate",
      [](const std::string& checkpoint, std::size_t count, std::uint64_t seed,
         bool ema) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        const LoadedModel lm = inspect_checkpoint(ckpt);
        const int dim = lm.config.generator.style_dim;
        if (lm.dtype == DType::F64) {
          const auto g = load_generator<double>(ckpt, ema);
          return to_numpy(g.generate(sample_latents<double>(count, dim, seed)));
        }
        const auto g = load_generator<float>(ckpt, ema);
        return to_numpy(g.generate(sample_latents<float>(count, dim, seed)));
      },
      py::arg("checkpoint"), py::arg("count") = 16, py::arg("seed") = 0,
      py::arg("ema") = true, "N x 3 x H x W images in [-1, 1] (unclamped).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Returns (exit_code, stdout, stderr).");
}
