#pragma once

// Run configuration files, the SQZG1 checkpoint container, PPM export and
// small CSV helpers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqzgan/arch_analysis.hpp"
#include "sqzgan/params.hpp"
#include "sqzgan/synthesis.hpp"
#include "sqzgan/training.hpp"

namespace sqzgan {

// ---------------------------------------------------------------- config

/// key=value run configuration. Blank lines and '#' comments are ignored;
/// unknown or repeated keys are errors.
struct RunConfig {
  GeneratorConfig generator;
  LossConfig loss;
  int steps = 500;
  int batch = 16;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;  // training
  bool precision_given = false;  // verify defaults to f64 otherwise

  /// Defaults: 16x16 skip generator on the desk channel map.
  RunConfig();

  /// Canonical text form; parse_run_config(to_text()) == *this.
  std::string to_text() const;
};

/// Keys accepted by parse_run_config, in canonical order.
const std::vector<std::string>& run_config_keys();

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// "4:32,8:16,16:16", or the presets "desk" and "nominal256".
std::map<int, int> parse_channel_map(const std::string& text);
std::string format_channel_map(const std::map<int, int>& map);

// ------------------------------------------------------------ checkpoint

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U8 = 3 };

struct Section {
  std::string name;
  DType dtype = DType::F32;
  Shape shape;
  std::vector<std::uint8_t> payload;  // little-endian scalars
};

/// "SQZG1", u32 version, u32 section count, then per section: u32 name
/// length, name, u8 dtype, u32 rank, u64 extents, payload. All integers
/// little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::uint32_t version = kVersion;
  std::vector<Section> sections;

  const Section& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
};

template <typename T>
Section tensor_section(const std::string& name, const Tensor<T>& t);
template <typename T>
Tensor<T> section_tensor(const Section& s);
Section text_section(const std::string& name, const std::string& text);
std::string section_text(const Section& s);

/// Appends every parameter as "<prefix><name>".
template <typename T>
void add_parameters(Checkpoint& ckpt, const std::string& prefix,
                    const ParameterSet<T>& params);
/// Reads the sections for `layout` under `prefix`; throws ConfigError on a
/// missing section, a dtype other than T, or a shape mismatch.
template <typename T>
ParameterSet<T> read_parameters(const Checkpoint& ckpt,
                                const std::string& prefix,
                                const std::vector<ParamSpec>& layout);

/// Sections: "config", then "G/", "G_ema/" and "D/" parameters.
template <typename T>
Checkpoint make_checkpoint(const RunConfig& config, const TrainResult<T>& run);

struct LoadedModel {
  RunConfig config;
  DType dtype = DType::F32;
};
/// Parses the embedded config and checks every parameter section against
/// it before returning.
LoadedModel inspect_checkpoint(const Checkpoint& ckpt);
template <typename T>
Generator<T> load_generator(const Checkpoint& ckpt, bool ema = true);

// ------------------------------------------------------------- files

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ------------------------------------------------------------------ PPM

/// round_half_up(clamp((v + 1) / 2, 0, 1) * 255)
std::uint8_t pixel_byte(double v);

/// image: 3 x H x W. Binary P6, maxval 255.
template <typename T>
std::vector<std::uint8_t> encode_ppm(const Tensor<T>& image);

/// images: N x 3 x H x W with N = rows * cols, tiled row-major.
template <typename T>
Tensor<T> tile_images(const Tensor<T>& images, std::size_t rows,
                      std::size_t cols);

/// Image n of an N x 3 x H x W batch.
template <typename T>
Tensor<T> batch_item(const Tensor<T>& images, std::size_t n);

// ------------------------------------------------------------------ CSV

/// Numeric rows; a first line that does not parse as numbers is a header.
std::vector<std::vector<double>> parse_numeric_csv(const std::string& text);

}  // namespace sqzgan
