#include "doctest.h"
#include "oracles.hpp"
#include "sqzgan/arch_analysis.hpp"
#include "sqzgan/errors.hpp"

using namespace sqzgan;

TEST_CASE("aggregate_direct") {
  const auto one = oracle::random_tensor({1, 3, 4, 4}, 1);
  CHECK(aggregate_direct<double>({one}, UpsampleMode::Nearest) == one);

  const Tensor<double> a(Shape{1, 3, 4, 4}, 1.0), b(Shape{1, 3, 8, 8}, 2.0);
  for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear})
    for (double v : aggregate_direct<double>({a, b}, mode).data())
      CHECK(v == 3.0);

  // Explicit sum over levels, each lifted to the final size on its own.
  for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear}) {
    std::vector<Tensor<double>> imgs;
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t h = 4u << j;
      imgs.push_back(oracle::random_tensor({2, 3, h, h}, 10 + j));
    }
    Tensor<double> sum(Shape{2, 3, 32, 32});
    for (std::size_t j = 0; j < 4; ++j) {
      auto img = imgs[j];
      for (std::size_t u = j; u < 3; ++u)
        img = mode == UpsampleMode::Nearest ? oracle::nearest2x(img)
                                            : oracle::bilinear2x(img);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += img[i];
    }
    CHECK(oracle::max_abs(aggregate_direct(imgs, mode), sum) <= 1e-12);
  }

  CHECK_THROWS_AS(aggregate_direct<double>({a, a}, UpsampleMode::Nearest),
                  ConfigError);
}

TEST_CASE("aggregate_concat") {
  SUBCASE("zero features give a zero image") {
    std::vector<Tensor<double>> f = {Tensor<double>(Shape{1, 2, 4, 4}),
                                     Tensor<double>(Shape{1, 2, 8, 8})};
    std::vector<Tensor<double>> w = {oracle::random_tensor({3, 2, 1, 1}, 1),
                                     oracle::random_tensor({3, 2, 1, 1}, 2)};
    for (double v :
         aggregate_concat<double>(f, w, {}, UpsampleMode::Nearest).data())
      CHECK(v == 0.0);
  }
  SUBCASE("two levels equal the per-level toRGB sum") {
    for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear}) {
      std::vector<Tensor<double>> f = {oracle::random_tensor({2, 2, 4, 4}, 3),
                                       oracle::random_tensor({2, 2, 8, 8}, 4)};
      std::vector<Tensor<double>> w = {oracle::random_tensor({3, 2, 1, 1}, 5),
                                       oracle::random_tensor({3, 2, 1, 1}, 6)};
      std::vector<Tensor<double>> b = {oracle::random_tensor({3}, 7),
                                       oracle::random_tensor({3}, 8)};
      std::vector<Tensor<double>> imgs = {
          oracle::conv2d(f[0], w[0], &b[0], 0),
          oracle::conv2d(f[1], w[1], &b[1], 0)};
      CHECK(oracle::max_abs(aggregate_concat(f, w, b, mode),
                            aggregate_direct(imgs, mode)) <= 1e-12);

      const auto proj = build_projection(f, w, b, mode);
      CHECK(proj.concat_channels() == 4);
      CHECK(proj.f_a.dim(1) == proj.W_a.dim(0));
      // Block order follows level order.
      CHECK(proj.W_a[0 * 3 + 1] == w[0][1 * 2 + 0]);
      CHECK(proj.W_a[3 * 3 + 2] == w[1][2 * 2 + 1]);
    }
  }
  SUBCASE("channel mismatch") {
    std::vector<Tensor<double>> f = {oracle::random_tensor({1, 2, 4, 4}, 9)};
    std::vector<Tensor<double>> w = {oracle::random_tensor({3, 5, 1, 1}, 10)};
    CHECK_THROWS_AS(aggregate_concat<double>(f, w, {}, UpsampleMode::Nearest),
                    ConfigError);
  }
}

TEST_CASE("concat dimension of the nominal map is 2496") {
  CHECK(concat_dimension(GeneratorConfig::nominal256(
            BlockVariant::SkipConnection)) == 2496);
  const auto g = GeneratorConfig::nominal256(BlockVariant::SkipConnection);
  const std::map<int, int> want = {{4, 512},  {8, 512},   {16, 512}, {32, 512},
                                   {64, 256}, {128, 128}, {256, 64}};
  CHECK(g.channel_map == want);
}

TEST_CASE("verify_equivalence") {
  auto g = GeneratorConfig::desk(8, BlockVariant::SkipConnection);
  const auto rep = verify_equivalence(g, 20, 1e-12, Precision::F64);
  CHECK(rep.passed());
  CHECK(rep.deviations.size() == 20);
  CHECK(rep.concat_channels == concat_dimension(g));
  CHECK(rep.to_keyvalue().find("passed=true") != std::string::npos);

  g.upsample = UpsampleMode::Bilinear;
  CHECK(verify_equivalence(g, 5, 1e-12, Precision::F64).passed());

  const auto f32 =
      verify_equivalence(GeneratorConfig::desk(64, BlockVariant::SkipConnection),
                         7, 1e-4, Precision::F32);
  CHECK(f32.passed());

  // One level: both paths are the single toRGB output.
  const auto single = verify_equivalence(
      GeneratorConfig::desk(4, BlockVariant::SkipConnection), 3, 0.0,
      Precision::F64);
  CHECK(single.max_deviation == 0.0);

  CHECK_THROWS_AS(verify_equivalence(
                      GeneratorConfig::desk(8, BlockVariant::Squeeze), 2, 1e-12,
                      Precision::F64),
                  ConfigError);
  CHECK_THROWS_AS(verify_equivalence(g, 0, 1e-12, Precision::F64),
                  ConfigError);

  const auto a = verify_equivalence(g, 3, 1e-12, Precision::F64, 9);
  const auto b = verify_equivalence(g, 3, 1e-12, Precision::F64, 9);
  CHECK(a.deviations == b.deviations);
}

TEST_CASE("block kernel enumeration") {
  CHECK(enumerated_block_kernels(BlockVariant::SkipConnection, 512, 8) ==
        4718592);
  CHECK(*published_block_formula(BlockVariant::SkipConnection, 512, 8) ==
        4718592.0);
  CHECK(enumerated_block_kernels(BlockVariant::Squeeze, 512, 8) == 3473408);
  CHECK(*published_block_formula(BlockVariant::Squeeze, 512, 8) == 3211264.0);
  CHECK(enumerated_block_kernels(BlockVariant::Squeeze, 8, 4) == 992);
  CHECK_FALSE(published_block_formula(BlockVariant::SqueezeNoFBP, 8, 4));

  for (std::uint64_t c : {8u, 16u, 64u, 256u, 512u}) {
    for (int r : {1, 2, 4, 8}) {
      if (c % std::uint64_t(r)) continue;
      const std::uint64_t c2 = c * c;
      CHECK(enumerated_block_kernels(BlockVariant::Squeeze, c, r) ==
            11 * c2 + 18 * c2 / std::uint64_t(r));
      CHECK(enumerated_block_kernels(BlockVariant::SqueezeNoFBP, c, r) ==
            9 * c2 + 18 * c2 / std::uint64_t(r));
      CHECK(enumerated_block_kernels(BlockVariant::SkipConnection, c, r) ==
            18 * c2);
      const auto e = count_block_params(BlockVariant::Squeeze, c, r);
      CHECK(e.deviation() == doctest::Approx(double(c2)));
    }
  }
  // Strictly decreasing in r for squeeze variants, constant for skip.
  for (auto v : kAllVariants) {
    std::uint64_t prev = enumerated_block_kernels(v, 64, 1);
    for (int r : {2, 4, 8, 16}) {
      const auto n = enumerated_block_kernels(v, 64, r);
      if (is_squeeze(v)) {
        CHECK(n < prev);
      } else {
        CHECK(n == prev);
      }
      prev = n;
    }
  }
}

TEST_CASE("break-even ratios") {
  CHECK(kPublishedRThreshold == 2.25);
  CHECK(kEnumeratedRThreshold == doctest::Approx(18.0 / 7.0));
  const double c2 = 1.0;
  for (double r : {2.3, 3.0, 8.0}) CHECK((10 + 18 / r) * c2 < 18 * c2);
  for (double r : {1.0, 2.0, 2.25}) CHECK_FALSE((10 + 18 / r) * c2 < 18 * c2);
  CHECK(11 + 18 / 2.6 < 18);
  CHECK_FALSE(11 + 18 / 2.5 < 18);
}

TEST_CASE("nominal generator totals") {
  const auto base =
      count_generator_params(GeneratorConfig::nominal256(BlockVariant::SkipConnection));
  const auto sq =
      count_generator_params(GeneratorConfig::nominal256(BlockVariant::Squeeze, 8));
  CHECK(std::abs(double(base.total) / 24.80e6 - 1) <= 0.05);
  CHECK(std::abs(double(sq.total) / 21.80e6 - 1) <= 0.05);
  const double red = reduction_percent(base.total, sq.total);
  CHECK(std::abs(red - 12.1) <= 3.0);

  std::uint64_t sum = 0;
  for (const auto& [role, n] : base.by_role) sum += n;
  CHECK(sum == base.total);
  CHECK(base.total == count_scalars(generator_layout(base.config)));

  const std::string text = sq.to_text();
  CHECK(text.find("MISMATCH") != std::string::npos);
  CHECK(text.find("(10+18/r)c² = 3211264") != std::string::npos);
  CHECK(base.to_text().find("18c² = 4718592") != std::string::npos);
  CHECK(base.to_text().find("MISMATCH") == std::string::npos);
}

TEST_CASE("per-block reduction at r=8") {
  const double pub = *published_block_formula(BlockVariant::Squeeze, 512, 8);
  const double base = *published_block_formula(BlockVariant::SkipConnection,
                                               512, 8);
  CHECK(100 * (1 - pub / base) == doctest::Approx(31.944).epsilon(1e-4));
}
