#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "sqzgan/errors.hpp"
#include "sqzgan/io.hpp"

using namespace sqzgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sqzgan_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig small_run() {
  RunConfig c = parse_run_config("resolution=8\nvariant=squeeze\nbatch=2\n");
  c.steps = 2;
  return c;
}

TrainResult<float> small_train(const RunConfig& c) {
  TrainOptions opt;
  opt.steps = c.steps;
  opt.batch = c.batch;
  opt.seed = c.seed;
  return train<float>(c.generator, c.loss, {c.generator.resolution, c.seed},
                      opt);
}

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig def;
  CHECK(def.generator.resolution == 16);
  CHECK(def.loss.learning_rate == 2.5e-3);
  CHECK(def.steps == 500);
  CHECK(def.batch == 16);
  CHECK(parse_run_config(def.to_text()).to_text() == def.to_text());

  const auto c = parse_run_config(
      "# comment\n\n resolution = 32 \nvariant=squeeze_rgb_after # trailing\n"
      "r=2\nchannel_map=4:8,8:8,16:4,32:4\nupsample=bilinear\ngamma=0.5\n"
      "precision=f64\nseed=7\n");
  CHECK(c.generator.resolution == 32);
  CHECK(c.generator.variant == BlockVariant::SqueezeRgbAfterExcite);
  CHECK(c.generator.squeeze_ratio == 2);
  CHECK(c.generator.channel_map.at(16) == 4);
  CHECK(c.generator.upsample == UpsampleMode::Bilinear);
  CHECK(c.loss.gamma == 0.5);
  CHECK(c.precision == Precision::F64);
  CHECK(c.seed == 7);
  CHECK(parse_run_config(c.to_text()).to_text() == c.to_text());

  CHECK_THROWS_AS(parse_run_config("resolution=8\nlearning_rate=1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("resolution=8\nresolution=16\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("resolution\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("resolution=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("steps=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("gamma=-1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("variant=squeeze\nr=3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("precision=f16\n"), ConfigError);

  CHECK(parse_channel_map("nominal256").at(256) == 64);
  CHECK(format_channel_map(parse_channel_map("4:32,8:16")) == "4:32,8:16");
  CHECK_THROWS_AS(parse_channel_map("4:32,4:16"), ConfigError);
  CHECK_THROWS_AS(parse_channel_map("4-32"), ConfigError);
  CHECK(run_config_keys().size() == 15);
}

TEST_CASE("checkpoint container") {
  Checkpoint c;
  c.sections.push_back(text_section("config", "a=1\n"));
  c.sections.push_back(tensor_section(
      "x", oracle::random_tensor({2, 3}, 1)));
  c.sections.push_back(tensor_section(
      "y", oracle::random_tensor({4}, 2).cast<float>()));
  const auto bytes = c.serialize();
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "SQZG1");
  // u32 version 1, little-endian.
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 0);

  const auto back = Checkpoint::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(section_text(back.get("config")) == "a=1\n");
  CHECK(section_tensor<double>(back.get("x")) == oracle::random_tensor({2, 3}, 1));
  CHECK_THROWS_AS(section_tensor<double>(back.get("y")), ConfigError);
  CHECK_THROWS_AS(back.get("z"), ConfigError);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad), ConfigError);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(Checkpoint::deserialize(cut), ConfigError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(Checkpoint::deserialize(extra), ConfigError);
}

TEST_CASE("trained checkpoint round trip") {
  const auto cfg = small_run();
  const auto run = small_train(cfg);
  const auto ckpt = make_checkpoint(cfg, run);
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "a.sqzg", ckpt);
  const auto loaded = load_checkpoint(dir / "a.sqzg");
  save_checkpoint(dir / "b.sqzg", loaded);
  CHECK(read_file(dir / "a.sqzg") == read_file(dir / "b.sqzg"));
  CHECK_FALSE(fs::exists(dir / "a.sqzg.tmp"));

  const auto m = inspect_checkpoint(loaded);
  CHECK(m.dtype == DType::F32);
  CHECK(m.config.to_text() == cfg.to_text());
  const auto gen = load_generator<float>(loaded, true);
  const auto z = sample_latents<float>(2, gen.config().style_dim, 3);
  CHECK(gen.generate(z) == run.generator_ema.generate(z));
  CHECK(load_generator<float>(loaded, false).generate(z) ==
        run.generator.generate(z));
  CHECK_THROWS_AS(load_generator<double>(loaded), ConfigError);

  // A config that disagrees with the stored arrays is rejected on load.
  Checkpoint mismatched = loaded;
  for (auto& s : mismatched.sections)
    if (s.name == "config") {
      RunConfig other = cfg;
      other.generator.squeeze_ratio = 2;
      s = text_section("config", other.to_text());
    }
  CHECK_THROWS_AS(inspect_checkpoint(mismatched), ConfigError);

  Checkpoint missing = loaded;
  missing.sections.pop_back();
  CHECK_THROWS_AS(inspect_checkpoint(missing), ConfigError);

  CHECK_THROWS_AS(load_checkpoint(dir / "nope.sqzg"), ConfigError);
}

TEST_CASE("PPM export") {
  CHECK(pixel_byte(-1.0) == 0);
  CHECK(pixel_byte(0.0) == 128);
  CHECK(pixel_byte(1.0) == 255);
  CHECK(pixel_byte(-5.0) == 0);
  CHECK(pixel_byte(5.0) == 255);
  CHECK_THROWS_AS(pixel_byte(std::nan("")), NumericError);

  Tensor<double> img(Shape{3, 1, 2}, std::vector<double>{-1, 0, 1, 0.5, 0, -1});
  const auto ppm = encode_ppm(img);
  const std::string header = "P6\n2 1\n255\n";
  REQUIRE(ppm.size() == header.size() + 6);
  CHECK(std::string(ppm.begin(), ppm.begin() + long(header.size())) == header);
  const std::vector<std::uint8_t> px(ppm.begin() + long(header.size()), ppm.end());
  // Interleaved RGB per pixel.
  CHECK(px == std::vector<std::uint8_t>{0, 255, 128, 128, 191, 0});
  CHECK_THROWS_AS(encode_ppm(Tensor<double>(Shape{1, 2, 2})), ConfigError);

  const auto batch = oracle::random_tensor({4, 3, 2, 2}, 3);
  const auto grid = tile_images(batch, 2, 2);
  CHECK(grid.shape() == Shape{3, 4, 4});
  CHECK(grid[(1 * 4 + 2) * 4 + 3] == batch.at(3, 1, 0, 1));
  CHECK(batch_item(batch, 2)[5] == batch.at(2, 1, 0, 1));
}

TEST_CASE("numeric CSV") {
  const auto rows = parse_numeric_csv("a,b\n1,2\n3.5,-4e-3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == -4e-3);
  CHECK(parse_numeric_csv("1,2\n").size() == 1);
  CHECK_THROWS_AS(parse_numeric_csv("1,2\n3\n"), ConfigError);
  CHECK_THROWS_AS(parse_numeric_csv("1,2\nx,3\n"), ConfigError);
}
