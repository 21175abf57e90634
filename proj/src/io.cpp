#include "sqzgan/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sqzgan/errors.hpp"

namespace sqzgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename I>
I parse_int(const std::string& key, const std::string& v) {
  I out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  // strtod accepts hex floats and inf; only plain decimal numbers are wanted.
  if (v.empty() || v.find_first_not_of("0123456789.eE+-") != std::string::npos) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

}  // namespace

RunConfig::RunConfig() {
  generator = GeneratorConfig::desk(16, BlockVariant::SkipConnection, 4);
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "resolution", "channel_map", "variant", "r",     "style_dim",
      "mapping_depth", "upsample", "loss",    "gamma", "lr",
      "ema_halflife", "steps",     "batch",   "seed",  "precision"};
  return keys;
}

std::map<int, int> parse_channel_map(const std::string& text) {
  if (text == "desk") return GeneratorConfig::desk(4, {}).channel_map;
  if (text == "nominal256") return GeneratorConfig::nominal256({}).channel_map;
  std::map<int, int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("channel_map entry '" + item + "' is not res:channels");
    }
    const int res = parse_int<int>("channel_map", trim(item.substr(0, colon)));
    const int ch = parse_int<int>("channel_map", trim(item.substr(colon + 1)));
    if (ch < 1) throw ConfigError("channel_map: channels must be >= 1");
    if (!out.emplace(res, ch).second) {
      throw ConfigError("channel_map lists resolution " + std::to_string(res) +
                        " twice");
    }
  }
  if (out.empty()) throw ConfigError("channel_map is empty");
  return out;
}

std::string format_channel_map(const std::map<int, int>& map) {
  std::string out;
  for (const auto& [res, ch] : map) {
    if (!out.empty()) out += ",";
    out += std::to_string(res) + ":" + std::to_string(ch);
  }
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "resolution=" << generator.resolution << "\n"
     << "channel_map=" << format_channel_map(generator.channel_map) << "\n"
     << "variant=" << to_string(generator.variant) << "\n"
     << "r=" << generator.squeeze_ratio << "\n"
     << "style_dim=" << generator.style_dim << "\n"
     << "mapping_depth=" << generator.mapping_depth << "\n"
     << "upsample=" << to_string(generator.upsample) << "\n"
     << "loss=" << to_string(loss.kind) << "\n"
     << "gamma=" << fmt_double(loss.gamma) << "\n"
     << "lr=" << fmt_double(loss.learning_rate) << "\n"
     << "ema_halflife=" << fmt_double(loss.ema_halflife) << "\n"
     << "steps=" << steps << "\n"
     << "batch=" << batch << "\n"
     << "seed=" << seed << "\n"
     << "precision=" << to_string(precision) << "\n";
  return os.str();
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    const auto& keys = run_config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' given twice");
    }
    if (key == "resolution") c.generator.resolution = parse_int<int>(key, v);
    else if (key == "channel_map") c.generator.channel_map = parse_channel_map(v);
    else if (key == "variant") c.generator.variant = parse_block_variant(v);
    else if (key == "r") c.generator.squeeze_ratio = parse_int<int>(key, v);
    else if (key == "style_dim") c.generator.style_dim = parse_int<int>(key, v);
    else if (key == "mapping_depth") c.generator.mapping_depth = parse_int<int>(key, v);
    else if (key == "upsample") c.generator.upsample = parse_upsample_mode(v);
    else if (key == "loss") c.loss.kind = parse_loss_kind(v);
    else if (key == "gamma") c.loss.gamma = parse_double(key, v);
    else if (key == "lr") c.loss.learning_rate = parse_double(key, v);
    else if (key == "ema_halflife") c.loss.ema_halflife = parse_double(key, v);
    else if (key == "steps") c.steps = parse_int<int>(key, v);
    else if (key == "batch") c.batch = parse_int<int>(key, v);
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "precision") {
      c.precision = parse_precision(v);
      c.precision_given = true;
    }
  }
  c.generator.validate();
  c.loss.validate();
  if (c.steps < 1) throw ConfigError("steps must be >= 1");
  if (c.batch < 1) throw ConfigError("batch must be >= 1");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------ checkpoint

namespace {

constexpr char kMagic[5] = {'S', 'Q', 'Z', 'G', '1'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(b_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw ConfigError("checkpoint is truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  throw ConfigError("unknown dtype tag " + std::to_string(int(t)));
}

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::F32 : DType::F64;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

const Section& Checkpoint::get(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return s;
  }
  throw ConfigError("checkpoint has no section '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(sections.begin(), sections.end(),
                     [&](const Section& s) { return s.name == name; });
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 5);
  put_le<std::uint32_t>(out, version);
  put_le<std::uint32_t>(out, std::uint32_t(sections.size()));
  for (const auto& s : sections) {
    if (s.payload.size() != shape_numel(s.shape) * dtype_size(s.dtype)) {
      throw ConfigError("section '" + s.name + "' payload does not match shape");
    }
    put_le<std::uint32_t>(out, std::uint32_t(s.name.size()));
    out.insert(out.end(), s.name.begin(), s.name.end());
    out.push_back(static_cast<std::uint8_t>(s.dtype));
    put_le<std::uint32_t>(out, std::uint32_t(s.shape.size()));
    for (std::size_t d : s.shape) put_le<std::uint64_t>(out, d);
    out.insert(out.end(), s.payload.begin(), s.payload.end());
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw ConfigError("not a SQZG1 checkpoint (bad magic)");
  }
  std::vector<std::uint8_t> rest(bytes.begin() + 5, bytes.end());
  Reader r(rest);
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kVersion) {
    throw ConfigError("unsupported checkpoint version " +
                      std::to_string(c.version));
  }
  const std::uint32_t count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    const auto name = r.bytes(r.get<std::uint32_t>());
    s.name.assign(name.begin(), name.end());
    s.dtype = static_cast<DType>(r.get<std::uint8_t>());
    const std::size_t width = dtype_size(s.dtype);
    const std::uint32_t rank = r.get<std::uint32_t>();
    if (rank > 8) throw ConfigError("section '" + s.name + "' has rank " +
                                    std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) {
      s.shape.push_back(std::size_t(r.get<std::uint64_t>()));
    }
    s.payload = r.bytes(shape_numel(s.shape) * width);
    c.sections.push_back(std::move(s));
  }
  if (!r.done()) throw ConfigError("trailing bytes after checkpoint sections");
  return c;
}

template <typename T>
Section tensor_section(const std::string& name, const Tensor<T>& t) {
  Section s;
  s.name = name;
  s.dtype = dtype_of<T>();
  s.shape = t.shape();
  s.payload.reserve(t.size() * sizeof(T));
  for (T v : t.data()) put_le<Bits<T>>(s.payload, std::bit_cast<Bits<T>>(v));
  return s;
}

template <typename T>
Tensor<T> section_tensor(const Section& s) {
  if (s.dtype != dtype_of<T>()) {
    throw ConfigError("section '" + s.name + "' has dtype tag " +
                      std::to_string(int(s.dtype)) + ", expected " +
                      std::to_string(int(dtype_of<T>())));
  }
  Reader r(s.payload);
  std::vector<T> values(shape_numel(s.shape));
  for (T& v : values) v = std::bit_cast<T>(r.get<Bits<T>>());
  return Tensor<T>(s.shape, std::move(values));
}

Section text_section(const std::string& name, const std::string& text) {
  Section s;
  s.name = name;
  s.dtype = DType::U8;
  s.shape = {std::max<std::size_t>(text.size(), 1)};
  s.payload.assign(text.begin(), text.end());
  if (text.empty()) s.payload.push_back(0);
  return s;
}

std::string section_text(const Section& s) {
  if (s.dtype != DType::U8) {
    throw ConfigError("section '" + s.name + "' is not text");
  }
  std::string out(s.payload.begin(), s.payload.end());
  if (out == std::string(1, '\0')) out.clear();
  return out;
}

template <typename T>
void add_parameters(Checkpoint& ckpt, const std::string& prefix,
                    const ParameterSet<T>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.sections.push_back(
        tensor_section(prefix + params.names()[i], params.at(i)));
  }
}

template <typename T>
ParameterSet<T> read_parameters(const Checkpoint& ckpt,
                                const std::string& prefix,
                                const std::vector<ParamSpec>& layout) {
  ParameterSet<T> out;
  for (const auto& spec : layout) {
    const Section& s = ckpt.get(prefix + spec.name);
    if (s.shape != spec.shape) {
      throw ConfigError("section '" + s.name + "' has shape " +
                        shape_str(s.shape) + ", config expects " +
                        shape_str(spec.shape));
    }
    out.add(spec.name, section_tensor<T>(s));
  }
  return out;
}

template <typename T>
Checkpoint make_checkpoint(const RunConfig& config, const TrainResult<T>& run) {
  Checkpoint c;
  c.sections.push_back(text_section("config", config.to_text()));
  add_parameters(c, "G/", run.generator.params());
  add_parameters(c, "G_ema/", run.generator_ema.params());
  add_parameters(c, "D/", run.discriminator);
  return c;
}

LoadedModel inspect_checkpoint(const Checkpoint& ckpt) {
  LoadedModel m;
  m.config = parse_run_config(section_text(ckpt.get("config")));
  const auto g_layout = generator_layout(m.config.generator);
  m.dtype = ckpt.get("G/" + g_layout.front().name).dtype;
  if (m.dtype != DType::F32 && m.dtype != DType::F64) {
    throw ConfigError("generator parameters must be f32 or f64");
  }
  auto check = [&](const std::string& prefix,
                   const std::vector<ParamSpec>& layout) {
    for (const auto& spec : layout) {
      const Section& s = ckpt.get(prefix + spec.name);
      if (s.shape != spec.shape || s.dtype != m.dtype) {
        throw ConfigError("section '" + s.name + "' (" + shape_str(s.shape) +
                          ") does not match the embedded config (" +
                          shape_str(spec.shape) + ")");
      }
    }
  };
  check("G/", g_layout);
  check("G_ema/", g_layout);
  check("D/", discriminator_layout(discriminator_for(m.config.generator)));
  return m;
}

template <typename T>
Generator<T> load_generator(const Checkpoint& ckpt, bool ema) {
  const LoadedModel m = inspect_checkpoint(ckpt);
  return Generator<T>(m.config.generator,
                      read_parameters<T>(ckpt, ema ? "G_ema/" : "G/",
                                         generator_layout(m.config.generator)));
}

// ------------------------------------------------------------- files

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const fs::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ConfigError("cannot rename into " + path.string() + ": " +
                      ec.message());
  }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
  write_file_atomic(path, c.serialize());
}

Checkpoint load_checkpoint(const fs::path& path) {
  try {
    return Checkpoint::deserialize(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------ PPM

std::uint8_t pixel_byte(double v) {
  if (std::isnan(v)) throw NumericError("pixel value is NaN");
  const double u = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(u * 255.0 + 0.5));
}

template <typename T>
std::vector<std::uint8_t> encode_ppm(const Tensor<T>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ConfigError("PPM export expects a 3 x H x W image, got " +
                      shape_str(image.shape()));
  }
  const std::size_t H = image.dim(1), W = image.dim(2);
  const std::string header =
      "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.push_back(pixel_byte(double(image[(c * H + y) * W + x])));
  return out;
}

template <typename T>
Tensor<T> tile_images(const Tensor<T>& images, std::size_t rows,
                      std::size_t cols) {
  if (images.rank() != 4 || images.dim(1) != 3 ||
      images.dim(0) != rows * cols) {
    throw ConfigError("tile_images: need " + std::to_string(rows * cols) +
                      " x 3 x H x W images, got " + shape_str(images.shape()));
  }
  const std::size_t H = images.dim(2), W = images.dim(3);
  Tensor<T> out(Shape{3, rows * H, cols * W});
  for (std::size_t n = 0; n < rows * cols; ++n) {
    const std::size_t oy = (n / cols) * H, ox = (n % cols) * W;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          out[(c * rows * H + oy + y) * cols * W + ox + x] =
              images.at(n, c, y, x);
  }
  return out;
}

template <typename T>
Tensor<T> batch_item(const Tensor<T>& images, std::size_t n) {
  const std::size_t per = images.size() / images.dim(0);
  std::vector<T> v(images.data().begin() + n * per,
                   images.data().begin() + (n + 1) * per);
  return Tensor<T>(Shape(images.shape().begin() + 1, images.shape().end()),
                   std::move(v));
}

// ------------------------------------------------------------------ CSV

std::vector<std::vector<double>> parse_numeric_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      cell = trim(cell);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError("CSV line " + std::to_string(lineno) +
                        " is not numeric");
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw ConfigError("CSV line " + std::to_string(lineno) + " has " +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows[0].size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

#define SQZGAN_INSTANTIATE(T)                                                \
  template Section tensor_section(const std::string&, const Tensor<T>&);     \
  template Tensor<T> section_tensor(const Section&);                         \
  template void add_parameters(Checkpoint&, const std::string&,              \
                               const ParameterSet<T>&);                      \
  template ParameterSet<T> read_parameters(const Checkpoint&,                \
                                           const std::string&,               \
                                           const std::vector<ParamSpec>&);   \
  template Checkpoint make_checkpoint(const RunConfig&,                      \
                                      const TrainResult<T>&);                \
  template Generator<T> load_generator(const Checkpoint&, bool);             \
  template std::vector<std::uint8_t> encode_ppm(const Tensor<T>&);           \
  template Tensor<T> tile_images(const Tensor<T>&, std::size_t,              \
                                 std::size_t);                               \
  template Tensor<T> batch_item(const Tensor<T>&, std::size_t);

SQZGAN_INSTANTIATE(float)
SQZGAN_INSTANTIATE(double)
#undef SQZGAN_INSTANTIATE

}  // namespace sqzgan
