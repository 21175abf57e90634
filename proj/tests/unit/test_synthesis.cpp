#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sqzgan/errors.hpp"
#include "sqzgan/synthesis.hpp"

using namespace sqzgan;

namespace {

GeneratorConfig tiny(int res, BlockVariant v, int c = 4, int r = 2) {
  GeneratorConfig g;
  g.resolution = res;
  for (int q = 4; q <= res; q *= 2) g.channel_map[q] = c;
  g.variant = v;
  g.squeeze_ratio = r;
  g.style_dim = 6;
  g.mapping_depth = 2;
  return g;
}

// Row n of an N x D tensor as its own 1 x D tensor.
Tensor<double> row(const Tensor<double>& t, std::size_t n) {
  const std::size_t D = t.dim(1);
  return Tensor<double>(
      Shape{D}, std::vector<double>(t.vec().begin() + n * D,
                                    t.vec().begin() + (n + 1) * D));
}

Tensor<double> item(const Tensor<double>& t, std::size_t n) {
  const std::size_t per = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = 1;
  return Tensor<double>(s, std::vector<double>(t.vec().begin() + n * per,
                                               t.vec().begin() + (n + 1) * per));
}

// Modulated conv for one batch item via the effective weight of
// modulate_demodulate and the reference convolution.
Tensor<double> modconv_oracle(const ParameterSet<double>& p,
                              const std::string& prefix,
                              const Tensor<double>& x, const Tensor<double>& w,
                              bool demod) {
  ModulatedConv<double> mc{p.get(prefix + ".weight"), p.get(prefix + ".bias"),
                           p.get(prefix + ".affine.weight"),
                           p.get(prefix + ".affine.bias"), demod};
  const auto eff = modulate_demodulate(mc, w);
  const auto& b = p.get(prefix + ".bias");
  return oracle::conv2d(x, eff, &b, int(eff.dim(2) / 2));
}

Tensor<double> lrelu(Tensor<double> t) {
  for (auto& v : t.data()) v = v > 0 ? v : 0.2 * v;
  return t;
}

}  // namespace

TEST_CASE("mapping network identity and dense oracle") {
  const std::size_t S = 5;
  Tensor<double> eye(Shape{S, S});
  for (std::size_t i = 0; i < S; ++i) eye[i * S + i] = 1;
  ParameterSet<double> p;
  p.add("mapping.0.weight", eye);
  p.add("mapping.0.bias", Tensor<double>(Shape{S}));
  Tape<double> tape;
  const auto bound = p.bind(tape, false);
  Tensor<double> z(Shape{2, S}, std::vector<double>{0, 1, 2, 3, 4,
                                                    .5, .25, 9, 0, 1});
  CHECK(mapping_network(bound, tape.constant(z), 1).value() == z);

  ParameterSet<double> q;
  q.add("mapping.0.weight", oracle::random_tensor({S, S}, 1, 0.5));
  q.add("mapping.0.bias", oracle::random_tensor({S}, 2, 0.1));
  q.add("mapping.1.weight", oracle::random_tensor({S, S}, 3, 0.5));
  q.add("mapping.1.bias", oracle::random_tensor({S}, 4, 0.1));
  Tape<double> t2;
  const auto zr = oracle::random_tensor({3, S}, 5);
  const auto w = mapping_network(q.bind(t2, false), t2.constant(zr), 2);
  const auto w2 = mapping_network(q.bind(t2, false), t2.constant(zr), 2);
  CHECK(w.value() == w2.value());
  for (std::size_t n = 0; n < 3; ++n) {
    auto h = oracle::dense_lrelu(q.get("mapping.0.weight"),
                                 q.get("mapping.0.bias"), row(zr, n).vec());
    h = oracle::dense_lrelu(q.get("mapping.1.weight"), q.get("mapping.1.bias"),
                            h);
    for (std::size_t i = 0; i < S; ++i)
      CHECK(w.value()[n * S + i] == doctest::Approx(h[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(mapping_network(q.bind(t2, false),
                                  t2.constant(Tensor<double>(Shape{1, 4})), 2),
                  ConfigError);
}

TEST_CASE("modulate_demodulate") {
  const auto weight = oracle::random_tensor({5, 4, 3, 3}, 10);
  CHECK(modulate_demodulate(weight, Tensor<double>(Shape{4}, 1.0), false) ==
        weight);

  const auto s = oracle::random_tensor({4}, 11);
  const auto d = modulate_demodulate(weight, s, true);
  for (std::size_t o = 0; o < 5; ++o) {
    double ss = 0;
    for (std::size_t j = 0; j < 36; ++j) ss += d[o * 36 + j] * d[o * 36 + j];
    CHECK(std::abs(ss - 1) <= 1e-6);
  }
  for (double alpha : {0.1, 1.0, 7.0}) {
    Tensor<double> sa = s;
    for (auto& v : sa.data()) v *= alpha;
    CHECK(oracle::max_abs(modulate_demodulate(weight, sa, true), d) <= 1e-6);
  }
  Tensor<double> bad = s;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(modulate_demodulate(weight, bad, true), NumericError);
  CHECK_THROWS_AS(modulate_demodulate(weight, Tensor<double>(Shape{3}), true),
                  ConfigError);
}

TEST_CASE("batched modulated conv equals per-item effective weights") {
  const auto cfg = tiny(8, BlockVariant::SkipConnection);
  Generator<double> gen(cfg, 3);
  Tape<double> tape;
  const auto bound = gen.params().bind(tape, false);
  const auto x = oracle::random_tensor({3, 4, 8, 8}, 12);
  const auto w = oracle::random_tensor({3, 6}, 13);
  const auto y = modulated_conv(bound, "b8.conv0", tape.constant(x),
                                tape.constant(w), true, false);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto want =
        modconv_oracle(gen.params(), "b8.conv0", item(x, n), row(w, n), true);
    CHECK(oracle::max_abs(item(y.value(), n), want) <= 1e-12);
  }
}

TEST_CASE("toRGB is linear and a per-pixel matrix product") {
  const auto cfg = tiny(8, BlockVariant::SkipConnection);
  Generator<double> gen(cfg, 4);
  gen.params().get("b8.torgb.bias") = Tensor<double>(Shape{3});
  Tape<double> tape;
  const auto bound = gen.params().bind(tape, false);
  const auto w = tape.constant(oracle::random_tensor({1, 6}, 14));
  const auto f1 = oracle::random_tensor({1, 4, 2, 2}, 15);
  const auto f2 = oracle::random_tensor({1, 4, 2, 2}, 16);

  const auto zero = to_rgb(bound, "b8.torgb",
                           tape.constant(Tensor<double>(Shape{1, 4, 2, 2})), w);
  for (double v : zero.image.value().data()) CHECK(v == 0.0);

  const double a = 1.7, b = -0.4;
  Tensor<double> mix(f1.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f1[i] + b * f2[i];
  const auto r1 = to_rgb(bound, "b8.torgb", tape.constant(f1), w);
  const auto r2 = to_rgb(bound, "b8.torgb", tape.constant(f2), w);
  const auto rm = to_rgb(bound, "b8.torgb", tape.constant(mix), w);
  for (std::size_t i = 0; i < rm.image.value().size(); ++i)
    CHECK(std::abs(rm.image.value()[i] -
                   (a * r1.image.value()[i] + b * r2.image.value()[i])) <=
          1e-12);

  // I(x, y) = W^T f'(x, y) with f' = s * f.
  const auto& W = gen.params().get("b8.torgb.weight");  // 3 x 4 x 1 x 1
  const auto& fm = r1.modulated.value();
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) {
        double s = 0;
        for (std::size_t k = 0; k < 6; ++k)
          s += gen.params().get("b8.torgb.affine.weight")[c * 6 + k] *
               w.value()[k];
        s += gen.params().get("b8.torgb.affine.bias")[c];
        CHECK(fm.at(0, c, y, x) == doctest::Approx(s * f1.at(0, c, y, x)));
      }
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) {
        double acc = 0;
        for (std::size_t c = 0; c < 4; ++c) acc += W[o * 4 + c] * fm.at(0, c, y, x);
        CHECK(r1.image.value().at(0, o, y, x) ==
              doctest::Approx(acc).epsilon(1e-14));
      }

  auto bad = gen.params();
  bad.get("b8.torgb.weight") = Tensor<double>(Shape{3, 4, 3, 3});
  Tape<double> t2;
  CHECK_THROWS_AS(to_rgb(bad.bind(t2, false), "b8.torgb",
                         t2.constant(f1), t2.constant(w.value())),
                  ConfigError);
}

TEST_CASE("skip block shapes and zero case") {
  const auto cfg = tiny(8, BlockVariant::SkipConnection);
  Generator<double> gen(cfg, 5);
  Tape<double> tape;
  const auto bound = gen.params().bind(tape, false);
  const auto f = tape.constant(oracle::random_tensor({1, 4, 4, 4}, 17));
  const auto w = tape.constant(oracle::random_tensor({1, 6}, 18));
  const auto t = skip_block_forward(bound, cfg, 8, f, w);
  CHECK(t.features.shape() == Shape{1, 4, 8, 8});
  CHECK(t.image.shape() == Shape{1, 3, 8, 8});

  auto zeroed = gen.params();
  for (std::size_t i = 0; i < zeroed.size(); ++i) {
    for (auto& v : zeroed.at(i).data()) v = 0;
  }
  Tape<double> t2;
  const auto z = skip_block_forward(zeroed.bind(t2, false), cfg, 8,
                                    t2.constant(f.value()),
                                    t2.constant(w.value()));
  for (double v : z.image.value().data()) CHECK(v == 0.0);
}

TEST_CASE("generator output is the progressive sum of level images") {
  SUBCASE("two levels") {
    Generator<double> gen(tiny(8, BlockVariant::SkipConnection), 6);
    Tape<double> tape;
    const auto out =
        gen.forward(tape, tape.constant(oracle::random_tensor({2, 6}, 19)));
    REQUIRE(out.levels.size() == 2);
    auto want = oracle::nearest2x(out.levels[0].image.value());
    for (std::size_t i = 0; i < want.size(); ++i)
      want[i] += out.levels[1].image.value()[i];
    CHECK(out.image.value() == want);
  }
  SUBCASE("four levels, explicit sum") {
    for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear}) {
      auto cfg = tiny(32, BlockVariant::SkipConnection);
      cfg.upsample = mode;
      Generator<double> gen(cfg, 7);
      Tape<double> tape;
      const auto out =
          gen.forward(tape, tape.constant(oracle::random_tensor({1, 6}, 20)));
      REQUIRE(out.levels.size() == 4);
      Tensor<double> sum(out.image.shape());
      for (std::size_t j = 0; j < 4; ++j) {
        auto img = out.levels[j].image.value();
        for (std::size_t u = j; u < 3; ++u)
          img = mode == UpsampleMode::Nearest ? oracle::nearest2x(img)
                                              : oracle::bilinear2x(img);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += img[i];
      }
      CHECK(oracle::max_abs(sum, out.image.value()) <= 1e-12);
    }
  }
  SUBCASE("zero toRGB kernels") {
    Generator<double> gen(tiny(8, BlockVariant::SkipConnection), 8);
    for (const char* n : {"b4.torgb.weight", "b8.torgb.weight"})
      for (auto& v : gen.params().get(n).data()) v = 0;
    const auto img = gen.generate(oracle::random_tensor({2, 6}, 21));
    for (double v : img.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("squeeze block shapes") {
  SUBCASE("c=8, r=4") {
    const auto cfg = tiny(8, BlockVariant::Squeeze, 8, 4);
    Generator<double> gen(cfg, 9);
    Tape<double> tape;
    const auto t = squeeze_block_forward(
        gen.params().bind(tape, false), cfg, 8,
        tape.constant(oracle::random_tensor({1, 8, 4, 4}, 22)),
        tape.constant(oracle::random_tensor({1, 6}, 23)));
    CHECK(t.f_s.shape() == Shape{1, 2, 8, 8});
    CHECK(t.f_e.shape() == Shape{1, 8, 8, 8});
    CHECK(t.features.shape() == Shape{1, 8, 8, 8});
    CHECK(t.image.shape() == Shape{1, 3, 8, 8});
  }
  SUBCASE("r=1 keeps every channel") {
    const auto cfg = tiny(8, BlockVariant::Squeeze, 4, 1);
    Generator<double> gen(cfg, 10);
    Tape<double> tape;
    const auto out =
        gen.forward(tape, tape.constant(oracle::random_tensor({1, 6}, 24)));
    CHECK(out.levels[1].f_s.shape() == Shape{1, 4, 8, 8});
  }
  SUBCASE("r must divide c") {
    auto cfg = tiny(8, BlockVariant::Squeeze, 6, 4);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("squeeze intermediates recompose") {
  const auto cfg = tiny(8, BlockVariant::Squeeze, 4, 2);
  Generator<double> gen(cfg, 11);
  Tape<double> tape;
  const auto bound = gen.params().bind(tape, false);
  const auto w = oracle::random_tensor({1, 6}, 25);
  const auto f = oracle::random_tensor({1, 4, 4, 4}, 26);
  const auto t = squeeze_block_forward(bound, cfg, 8, tape.constant(f),
                                       tape.constant(w));
  const auto wv = row(w, 0);
  const auto& P = gen.params();

  const auto fi = lrelu(modconv_oracle(P, "b8.conv_up", oracle::nearest2x(f),
                                       wv, true));
  CHECK(oracle::max_abs(fi, t.f_i.value()) <= 1e-12);
  const auto fs = lrelu(modconv_oracle(P, "b8.squeeze", fi, wv, true));
  CHECK(oracle::max_abs(fs, t.f_s.value()) <= 1e-12);
  const auto fe = lrelu(modconv_oracle(P, "b8.excite", fs, wv, true));
  CHECK(oracle::max_abs(fe, t.f_e.value()) <= 1e-12);

  Tensor<double> cat(Shape{1, 8, 8, 8});
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x)
        cat.at(0, c, y, x) = c < 4 ? t.f_i.value().at(0, c, y, x)
                                   : t.f_e.value().at(0, c - 4, y, x);
  const auto fo = modconv_oracle(P, "b8.blend", cat, wv, true);
  CHECK(oracle::max_abs(fo, t.features.value()) <= 1e-12);
}

TEST_CASE("ablation variants route toRGB as documented") {
  const auto f = oracle::random_tensor({1, 4, 4, 4}, 27);
  const auto w = oracle::random_tensor({1, 6}, 28);
  for (auto v : {BlockVariant::Squeeze, BlockVariant::SqueezeNoFBP,
                 BlockVariant::SqueezeRgbBeforeSqueeze,
                 BlockVariant::SqueezeRgbAfterExcite}) {
    const auto cfg = tiny(8, v, 4, 2);
    Generator<double> gen(cfg, 12);
    Tape<double> tape;
    const auto t = squeeze_block_forward(gen.params().bind(tape, false), cfg,
                                         8, tape.constant(f),
                                         tape.constant(w));
    const Var<double>& src = v == BlockVariant::SqueezeRgbBeforeSqueeze ? t.f_i
                             : v == BlockVariant::SqueezeRgbAfterExcite ? t.f_e
                                                                        : t.f_s;
    CHECK(t.modulated.shape()[1] == src.shape()[1]);
    CHECK(gen.params().get("b8.torgb.weight").dim(1) == src.shape()[1]);
    CHECK(cfg.rgb_channels(8) == int(src.shape()[1]));
    if (v == BlockVariant::SqueezeNoFBP) {
      CHECK(t.features.value() == t.f_e.value());
      CHECK_FALSE(gen.params().contains("b8.blend.weight"));
    }
  }
}

TEST_CASE("blend can pass f_i through") {
  const auto cfg = tiny(8, BlockVariant::Squeeze, 4, 2);
  Generator<double> gen(cfg, 13);
  auto& bw = gen.params().get("b8.blend.weight");  // 4 x 8 x 1 x 1
  for (auto& v : bw.data()) v = 0;
  for (std::size_t o = 0; o < 4; ++o) bw[o * 8 + o] = 1;
  for (auto& v : gen.params().get("b8.blend.affine.weight").data()) v = 0;
  for (auto& v : gen.params().get("b8.blend.affine.bias").data()) v = 1;
  for (auto& v : gen.params().get("b8.blend.bias").data()) v = 0;
  Tape<double> tape;
  const auto t = squeeze_block_forward(
      gen.params().bind(tape, false), cfg, 8,
      tape.constant(oracle::random_tensor({2, 4, 4, 4}, 29)),
      tape.constant(oracle::random_tensor({2, 6}, 30)));
  // With unit styles the demodulated kernel is e_o / sqrt(1 + eps).
  const double k = 1 / std::sqrt(1 + kDemodEps);
  for (std::size_t i = 0; i < t.f_i.value().size(); ++i)
    CHECK(t.features.value()[i] == t.f_i.value()[i] * k);
}

TEST_CASE("every variant stays finite over 1000 latents") {
  for (auto v : kAllVariants) {
    const auto cfg = GeneratorConfig::desk(16, v);
    Generator<float> gen(cfg, 14);
    for (std::uint64_t chunk = 0; chunk < 4; ++chunk) {
      const auto z = sample_latents<float>(250, cfg.style_dim, 15, chunk);
      INFO(to_string(v) << " chunk " << chunk);
      CHECK(gen.generate(z).all_finite());
    }
  }
}

TEST_CASE("config validation") {
  auto g = tiny(8, BlockVariant::SkipConnection);
  g.resolution = 12;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = tiny(8, BlockVariant::SkipConnection);
  g.channel_map.erase(8);
  CHECK_THROWS_AS(g.validate(), ConfigError);
  CHECK_THROWS_AS(parse_block_variant("residual"), ConfigError);
  for (auto v : kAllVariants) CHECK(parse_block_variant(to_string(v)) == v);
  CHECK_NOTHROW(GeneratorConfig::nominal256(BlockVariant::Squeeze).validate());
}

TEST_CASE("latents are deterministic") {
  CHECK(sample_latents<double>(3, 8, 1) == sample_latents<double>(3, 8, 1));
  CHECK_FALSE(sample_latents<double>(3, 8, 1) ==
              sample_latents<double>(3, 8, 2));
}
