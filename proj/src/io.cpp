#include "tvnet/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace tvnet {
namespace {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

constexpr char kFloMagic[4] = {'P', 'I', 'E', 'H'};
constexpr char kParamsTag[8] = {'T', 'V', 'N', 'E', 'T', 'P', 'R', 'M'};
constexpr std::size_t kMaxPixels = std::size_t{1} << 28;

template <typename T>
void put_le(Bytes& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const auto bits = std::bit_cast<U>(value);
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<U>(bytes[offset + k]) << (8 * k);
  return std::bit_cast<T>(bits);
}

// Sequential little-endian reader that reports the offset of any overrun.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  template <typename T>
  T read(const char* field) {
    need(sizeof(T), field);
    const T v = get_le<T>(bytes_, pos_);
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string(what_) + ": truncated " + field + ", expected " +
                            std::to_string(n) + " bytes, got " +
                            std::to_string(bytes_.size() - pos_),
                        bytes_.size());
    }
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// --- .flo --------------------------------------------------------------------

Bytes encode_flo(const FlowField& flow) {
  Bytes out(kFloMagic, kFloMagic + 4);
  out.reserve(12 + 8 * flow.size());
  put_le<std::int32_t>(out, flow.width());
  put_le<std::int32_t>(out, flow.height());
  for (std::size_t k = 0; k < flow.size(); ++k) {
    put_le<float>(out, static_cast<float>(flow.u1[k]));
    put_le<float>(out, static_cast<float>(flow.u2[k]));
  }
  return out;
}

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError(".flo: truncated magic", bytes.size());
  if (!std::equal(kFloMagic, kFloMagic + 4, bytes.begin())) {
    throw FormatError(".flo: bad magic, expected PIEH", 0);
  }
  Reader r(bytes, ".flo");
  r.read<std::uint32_t>("magic");
  const auto w = r.read<std::int32_t>("width");
  const auto h = r.read<std::int32_t>("height");
  if (w <= 0 || h <= 0 ||
      static_cast<std::size_t>(w) * static_cast<std::size_t>(h) > kMaxPixels) {
    throw FormatError(".flo: invalid dimensions " + std::to_string(w) + "x" + std::to_string(h), 4);
  }
  const std::size_t px = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  r.need(8 * px, "payload");
  if (r.remaining() != 8 * px) {
    throw FormatError(".flo: " + std::to_string(r.remaining() - 8 * px) + " trailing bytes",
                      12 + 8 * px);
  }
  FlowField flow(h, w);
  for (std::size_t k = 0; k < px; ++k) {
    flow.u1[k] = r.read<float>("payload");
    flow.u2[k] = r.read<float>("payload");
  }
  return flow;
}

FlowField read_flo(const std::filesystem::path& path) { return decode_flo(read_file(path)); }

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  write_file(path, encode_flo(flow));
}

// --- PNM ---------------------------------------------------------------------

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) {
    skip_space();
    const std::size_t start = pos;
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > std::numeric_limits<std::int32_t>::max()) {
        throw FormatError(std::string("pnm: ") + field + " out of range", start);
      }
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pnm: malformed ") + field, start);
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("pnm: expected P5 or P6 magic", 0);
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const int w = read_uint("width");
  const int h = read_uint("height");
  const int maxval = read_uint("maxval");
  if (w <= 0 || h <= 0 || static_cast<std::size_t>(w) * static_cast<std::size_t>(h) > kMaxPixels) {
    throw FormatError("pnm: invalid dimensions", 2);
  }
  if (maxval <= 0 || maxval > 65535) throw FormatError("pnm: maxval must be in 1..65535", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("pnm: missing whitespace after header", pos);
  }
  ++pos;

  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t px = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t expected = px * channels * sample_bytes;
  const std::size_t available = bytes.size() - pos;
  if (available < expected) {
    throw FormatError("pnm: truncated payload, expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(available),
                      bytes.size());
  }
  auto sample = [&](std::size_t idx) -> std::uint32_t {
    const std::size_t at = pos + idx * sample_bytes;
    if (sample_bytes == 1) return bytes[at];
    return (static_cast<std::uint32_t>(bytes[at]) << 8) | bytes[at + 1];
  };

  Image img(h, w);
  for (std::size_t k = 0; k < px; ++k) {
    if (channels == 1) {
      img[k] = static_cast<double>(sample(k)) / maxval;
    } else {
      // integer luma weights keep white exactly at 1.0
      const std::uint64_t luma = 299ull * sample(3 * k) + 587ull * sample(3 * k + 1) +
                                 114ull * sample(3 * k + 2);
      img[k] = static_cast<double>(luma) / (1000.0 * maxval);
    }
  }
  return img;
}

Image read_image(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

Bytes encode_pgm(const Image& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
  Bytes out(header.begin(), header.end());
  out.reserve(header.size() + 2 * img.size());
  for (double v : img.values()) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  write_file(path, encode_pgm(img));
}

Bytes encode_ppm(const ColorImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

void write_color_image(const std::filesystem::path& path, const ColorImage& img) {
  write_file(path, encode_ppm(img));
}

// --- params ------------------------------------------------------------------

namespace {

std::vector<Kernel1D*> kernels_in_order(DifferenceKernels& k) {
  return {&k.image_x, &k.image_y, &k.flow_x, &k.flow_y, &k.div_x, &k.div_y};
}

void put_array(Bytes& out, std::span<const double> values) {
  put_le<std::uint64_t>(out, values.size());
  for (double v : values) put_le<double>(out, v);
}

std::vector<double> get_array(Reader& r, std::size_t max_len) {
  const std::size_t at = r.pos();
  const auto n = r.read<std::uint64_t>("array length");
  if (n > max_len) {
    throw FormatError("params: array length " + std::to_string(n) + " exceeds limit", at);
  }
  r.need(8 * n, "array payload");
  std::vector<double> v(n);
  for (auto& x : v) x = r.read<double>("array payload");
  return v;
}

}  // namespace

Bytes encode_params(const TVNetParams& params) {
  Bytes out(kParamsTag, kParamsTag + 8);
  put_le<std::uint32_t>(out, kParamsVersion);
  const double h = params.u0_mode == InitMode::full_field ? params.u0_field.height() : 0;
  const double w = params.u0_mode == InitMode::full_field ? params.u0_field.width() : 0;
  const double shape[3] = {static_cast<double>(params.u0_mode), h, w};
  put_array(out, shape);
  const auto flat = params.flatten();
  put_array(out, std::span(flat).first(params.u0_count()));
  auto copy = params.kernels;
  for (const Kernel1D* k : kernels_in_order(copy)) put_array(out, k->taps);
  return out;
}

TVNetParams decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kParamsTag, kParamsTag + 8, bytes.begin())) {
    throw FormatError("params: bad tag, expected TVNETPRM", 0);
  }
  Reader r(bytes.subspan(0), "params");
  r.read<std::uint64_t>("tag");
  const auto version = r.read<std::uint32_t>("version");
  if (version != kParamsVersion) {
    throw FormatError("params: unsupported version " + std::to_string(version), 8);
  }

  TVNetParams p;
  const std::size_t shape_at = r.pos();
  const auto shape = get_array(r, 3);
  if (shape.size() != 3) throw FormatError("params: u0 shape must have 3 entries", shape_at);
  const int mode = static_cast<int>(shape[0]);
  if (mode < 0 || mode > 2 || shape[0] != mode) {
    throw FormatError("params: unknown u0 mode", shape_at);
  }
  p.u0_mode = static_cast<InitMode>(mode);
  if (p.u0_mode == InitMode::full_field) {
    const double h = shape[1];
    const double w = shape[2];
    if (!(h >= 1 && w >= 1 && h * w <= static_cast<double>(kMaxPixels)) || h != std::floor(h) ||
        w != std::floor(w)) {
      throw FormatError("params: invalid u0 field shape", shape_at);
    }
    p.u0_field = FlowField(static_cast<int>(h), static_cast<int>(w));
  }
  const std::size_t u0_at = r.pos();
  const auto u0 = get_array(r, 2 * kMaxPixels);
  if (u0.size() != p.u0_count()) {
    throw FormatError("params: u0 has " + std::to_string(u0.size()) + " values, expected " +
                          std::to_string(p.u0_count()),
                      u0_at);
  }
  std::vector<double> flat = u0;
  for (Kernel1D* k : kernels_in_order(p.kernels)) {
    const std::size_t at = r.pos();
    const auto taps = get_array(r, 3);
    if (taps.size() != k->taps.size()) {
      throw FormatError("params: kernel has " + std::to_string(taps.size()) + " taps, expected " +
                            std::to_string(k->taps.size()),
                        at);
    }
    flat.insert(flat.end(), taps.begin(), taps.end());
  }
  if (r.remaining() != 0) throw FormatError("params: trailing bytes", r.pos());
  p.assign(flat);
  return p;
}

TVNetParams read_params(const std::filesystem::path& path) {
  return decode_params(read_file(path));
}

void write_params(const std::filesystem::path& path, const TVNetParams& params) {
  write_file(path, encode_params(params));
}

// --- config ------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: value '" + v + "' for " + key + " is not a number");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: value '" + v + "' for " + key + " is not an integer");
  }
  return out;
}

}  // namespace

void set_config_value(SolverConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "lambda") cfg.lambda = parse_double(key, value);
  else if (key == "theta") cfg.theta = parse_double(key, value);
  else if (key == "tau") cfg.tau = parse_double(key, value);
  else if (key == "eps_stop") cfg.eps_stop = parse_double(key, value);
  else if (key == "eps_div") cfg.eps_div = parse_double(key, value);
  else if (key == "scale_factor") cfg.scale_factor = parse_double(key, value);
  else if (key == "n_scales") cfg.n_scales = parse_int(key, value);
  else if (key == "n_warps") cfg.n_warps = parse_int(key, value);
  else if (key == "n_iters") cfg.n_iters = parse_int(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

SolverConfig parse_config(const std::string& text, SolverConfig base) {
  std::size_t offset = 0;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value",
                        line_offset);
    }
    try {
      set_config_value(base, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw FormatError("config line " + std::to_string(line_no) + ": " + e.what(), line_offset);
    }
  }
  return base;
}

SolverConfig read_config(const std::filesystem::path& path, SolverConfig base) {
  const Bytes raw = read_file(path);
  return parse_config(std::string(raw.begin(), raw.end()), base);
}

// --- pair lists ----------------------------------------------------------------

std::vector<PairEntry> read_pair_list(const std::filesystem::path& path) {
  const Bytes raw = read_file(path);
  std::istringstream in(std::string(raw.begin(), raw.end()));
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : dir / fp;
  };
  std::vector<PairEntry> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    std::istringstream fields(body);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.size() < 2 || parts.size() > 3) {
      throw FormatError("pair list: expected 'img0 img1 [flow]'", line_offset);
    }
    PairEntry e{resolve(parts[0]), resolve(parts[1]), {}, {}};
    if (parts.size() == 3) e.flow = resolve(parts[2]);
    e.name = e.image0.parent_path().filename().string();
    if (e.name.empty() || e.name == ".") e.name = e.image0.stem().string();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw FormatError("pair list is empty", 0);
  return out;
}

}  // namespace tvnet
