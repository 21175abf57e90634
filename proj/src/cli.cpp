#include "sqzgan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>

#include "sqzgan/arch_analysis.hpp"
#include "sqzgan/errors.hpp"
#include "sqzgan/gradcheck.hpp"
#include "sqzgan/io.hpp"
#include "sqzgan/metrics.hpp"
#include "sqzgan/training.hpp"

namespace sqzgan {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string config;
  int trials = 100;
  std::optional<double> tol;
  std::optional<std::string> precision;
  std::string report;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  const Precision p = a.precision         ? parse_precision(*a.precision)
                      : rc.precision_given ? rc.precision
                                           : Precision::F64;
  const double tol = a.tol.value_or(p == Precision::F64 ? 1e-12 : 1e-4);
  const EquivalenceReport report =
      verify_equivalence(rc.generator, a.trials, tol, p, rc.seed);
  out << report.to_text();
  if (!a.report.empty()) write_file_atomic(a.report, report.to_keyvalue());
  return report.passed() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- params

int cmd_params(const std::string& path, std::ostream& out) {
  const RunConfig rc = load_run_config(path);
  const GeneratorConfig& g = rc.generator;
  const ParamReport report = count_generator_params(g);
  out << report.to_text();
  if (is_squeeze(g.variant)) {
    GeneratorConfig base = g;
    base.variant = BlockVariant::SkipConnection;
    const ParamReport b = count_generator_params(base);
    out << "baseline (skip) total " << b.total << " ("
        << fmt("%.2f", b.total / 1e6) << "M)\n"
        << "reduction vs baseline "
        << fmt("%.2f", reduction_percent(b.total, report.total)) << "%\n";
    const int r = g.squeeze_ratio;
    const auto published = published_block_formula(BlockVariant::Squeeze, 1, r);
    const double enumerated =
        double(enumerated_block_kernels(g.variant, std::uint64_t(r), r)) /
        double(r * r);
    out << "per-block kernel reduction at r=" << r << ": published (10+18/r)c² "
        << fmt("%.2f", 100 * (1 - *published / 18)) << "%, enumerated "
        << enumerated_formula_text(g.variant) << " "
        << fmt("%.2f", 100 * (1 - enumerated / 18)) << "%\n";
  }
  out << "break-even r: published formula r > " << fmt("%.4g", kPublishedRThreshold)
      << ", enumerated squeeze block r > " << fmt("%.4g", kEnumeratedRThreshold)
      << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out_dir;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
};

template <typename T>
int train_as(const RunConfig& rc, const fs::path& dir, std::ostream& out) {
  ToyDatasetSpec data;
  data.resolution = rc.generator.resolution;
  data.seed = rc.seed;
  TrainOptions opt;
  opt.steps = rc.steps;
  opt.batch = rc.batch;
  opt.seed = rc.seed;
  opt.on_step = [&](const StepRecord& s) {
    if (s.step % 50 == 0 || s.step + 1 == rc.steps) {
      out << "step " << s.step << " d_loss " << fmt("%.5f", s.d_loss)
          << " g_loss " << fmt("%.5f", s.g_loss) << " r1 "
          << fmt("%.5f", s.r1) << "\n";
    }
    return true;
  };
  const TrainResult<T> run = train<T>(rc.generator, rc.loss, data, opt);
  save_checkpoint(dir / "checkpoint.sqzg", make_checkpoint(rc, run));
  write_file_atomic(dir / "history.csv", run.history.to_csv());
  const Tensor<T> z = sample_latents<T>(16, rc.generator.style_dim, rc.seed);
  const Tensor<T> grid = tile_images(run.generator_ema.generate(z), 4, 4);
  write_file_atomic(dir / "samples.ppm", encode_ppm(grid));
  out << "wrote " << (dir / "checkpoint.sqzg").string() << ", history.csv, "
      << "samples.ppm\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  if (a.steps) {
    if (*a.steps < 1) throw ConfigError("--steps must be >= 1");
    rc.steps = *a.steps;
  }
  if (a.seed) rc.seed = *a.seed;
  make_dir(a.out_dir);
  return rc.precision == Precision::F64 ? train_as<double>(rc, a.out_dir, out)
                                        : train_as<float>(rc, a.out_dir, out);
}

// -------------------------------------------------------------- generate

struct GenerateArgs {
  std::string checkpoint;
  int count = 16;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool raw = false;
};

template <typename T>
int generate_as(const Checkpoint& ckpt, const GenerateArgs& a,
                std::ostream& out) {
  const Generator<T> gen = load_generator<T>(ckpt, !a.raw);
  if (a.count == 0) {
    out << "wrote 0 image(s) to " << a.out_dir << "\n";
    return kExitOk;
  }
  const Tensor<T> z =
      sample_latents<T>(std::size_t(a.count), gen.config().style_dim, a.seed);
  const std::size_t S = std::size_t(gen.config().style_dim);
  constexpr std::size_t kChunk = 16;
  for (std::size_t first = 0; first < std::size_t(a.count); first += kChunk) {
    const std::size_t n = std::min(kChunk, std::size_t(a.count) - first);
    std::vector<T> zs(z.data().begin() + first * S,
                      z.data().begin() + (first + n) * S);
    const Tensor<T> images = gen.generate(Tensor<T>(Shape{n, S}, zs));
    for (std::size_t i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%04zu.ppm", first + i);
      write_file_atomic(fs::path(a.out_dir) / name,
                        encode_ppm(batch_item(images, i)));
    }
  }
  out << "wrote " << a.count << " image(s) to " << a.out_dir << "\n";
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.count < 0) throw ConfigError("--count must be >= 0");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const LoadedModel m = inspect_checkpoint(ckpt);
  make_dir(a.out_dir);
  return m.dtype == DType::F64 ? generate_as<double>(ckpt, a, out)
                               : generate_as<float>(ckpt, a, out);
}

// ------------------------------------------------------------- gradcheck

int cmd_gradcheck(const std::string& suite, std::ostream& out,
                  std::ostream& err) {
  if (!is_gradcheck_suite(suite)) {
    throw ConfigError("unknown gradcheck suite '" + suite +
                      "' (expected core, losses or r1)");
  }
  const auto results = run_gradcheck_suite(suite);
  const GradCheckResult* worst = nullptr;
  bool ok = true;
  for (const auto& r : results) {
    out << r.name << " rel_error=" << fmt("%.3e", r.rel_error)
        << " tol=" << fmt("%.0e", r.tolerance) << " "
        << (r.passed() ? "PASS" : "FAIL") << "\n";
    ok = ok && r.passed();
    if (!worst || r.rel_error / r.tolerance > worst->rel_error / worst->tolerance) {
      worst = &r;
    }
  }
  if (!ok) {
    err << "gradcheck " << suite << " failed; worst op " << worst->name
        << " rel_error " << fmt("%.3e", worst->rel_error) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

// --------------------------------------------------------------- metrics

std::vector<std::vector<double>> load_csv(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_numeric_csv(std::string(bytes.begin(), bytes.end()));
}

int cmd_fid(const std::string& a, const std::string& b, std::ostream& out) {
  const GaussianFit p = fit_gaussian(load_csv(a));
  const GaussianFit q = fit_gaussian(load_csv(b));
  out << "fid=" << fmt("%.17g", frechet_distance(p, q)) << "\n";
  return kExitOk;
}

int cmd_is(const std::string& path, std::ostream& out) {
  ClassProbTable t;
  t.rows = load_csv(path);
  out << "is=" << fmt("%.17g", inception_score(t)) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Skip/squeeze generator toolkit"};
  app.require_subcommand(1);

  VerifyArgs va;
  auto* verify = app.add_subcommand(
      "verify", "Check that skip-connection aggregation equals one 1x1 "
                "projection of concatenated features");
  verify->add_option("config", va.config, "run config file")->required();
  verify->add_option("--trials", va.trials, "number of latents");
  verify->add_option("--tol", va.tol, "max allowed deviation");
  verify->add_option("--precision", va.precision, "f32 or f64");
  verify->add_option("--report", va.report, "write a key=value report here");

  std::string params_config;
  auto* params = app.add_subcommand("params", "Parameter accounting report");
  params->add_option("config", params_config, "run config file")->required();

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train on the toy dataset");
  trainc->add_option("config", ta.config, "run config file")->required();
  trainc->add_option("--out", ta.out_dir, "output directory")->required();
  trainc->add_option("--steps", ta.steps, "override steps");
  trainc->add_option("--seed", ta.seed, "override seed");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write PPM samples");
  gen->add_option("checkpoint", ga.checkpoint, "checkpoint file")->required();
  gen->add_option("--count", ga.count, "number of images");
  gen->add_option("--seed", ga.seed, "latent seed");
  gen->add_option("--out", ga.out_dir, "output directory")->required();
  gen->add_flag("--raw", ga.raw, "use the raw generator instead of the EMA");

  std::string suite;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks");
  gc->add_option("--suite", suite, "core, losses or r1")->required();

  auto* metrics = app.add_subcommand("metrics", "FID and IS on CSV files");
  metrics->require_subcommand(1);
  std::string fid_a, fid_b, is_path;
  auto* fid = metrics->add_subcommand("fid", "Frechet distance of two "
                                             "feature CSVs (rows = samples)");
  fid->add_option("real", fid_a)->required();
  fid->add_option("fake", fid_b)->required();
  auto* is = metrics->add_subcommand("is", "Inception score of a class "
                                           "probability CSV");
  is->add_option("probs", is_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n"
        << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va, out);
    if (*params) return cmd_params(params_config, out);
    if (*trainc) return cmd_train(ta, out);
    if (*gen) return cmd_generate(ga, out);
    if (*gc) return cmd_gradcheck(suite, out, err);
    if (*fid) return cmd_fid(fid_a, fid_b, out);
    if (*is) return cmd_is(is_path, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitFailure;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace sqzgan
