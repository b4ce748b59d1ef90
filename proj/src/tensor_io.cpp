#include "binseg/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <unordered_map>

#include "binseg/errors.hpp"
#include "byte_codec.hpp"

namespace binseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::unsupported_version: return "unsupported-version";
    case ErrorCode::unsupported_dtype: return "unsupported-dtype";
    case ErrorCode::bad_header: return "bad-header";
    case ErrorCode::size_mismatch: return "size-mismatch";
    case ErrorCode::non_finite: return "non-finite";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::trailing_bytes: return "trailing-bytes";
    case ErrorCode::malformed_netpbm: return "malformed-netpbm";
    case ErrorCode::label_overflow: return "label-overflow";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::geometry_mismatch: return "geometry-mismatch";
    case ErrorCode::rank_deficient: return "rank-deficient";
    case ErrorCode::degenerate_input: return "degenerate-input";
    case ErrorCode::undefined_input: return "undefined-input";
    case ErrorCode::empty_input: return "empty-input";
  }
  return "unknown";
}

FormatError::FormatError(ErrorCode code, std::size_t offset, const std::string& what)
    : Error(code, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::uint32_t kMaxDim = static_cast<std::uint32_t>(std::numeric_limits<int>::max());

void check_magic(const ByteReader& in, std::string_view magic) {
  if (in.tag_matches(magic)) return;
  // A short prefix of the right magic is a truncation, anything else is wrong.
  if (in.remaining() < magic.size()) {
    throw FormatError(ErrorCode::truncated, 0, "file too short for magic");
  }
  throw FormatError(ErrorCode::bad_magic, 0, "expected magic \"" + std::string(magic) + "\"");
}

int read_dim(ByteReader& in, const char* name) {
  const std::size_t at = in.offset();
  const std::uint32_t v = in.u32();
  if (v == 0 || v > kMaxDim) {
    throw FormatError(ErrorCode::bad_header, at,
                      std::string(name) + " must be in [1, 2^31)");
  }
  return static_cast<int>(v);
}

// Checks that exactly `count` float32 values remain, guarding the product
// against overflow.
void expect_payload(const ByteReader& in, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 4;
  bool overflow = (a != 0 && b > limit / a);
  std::uint64_t ab = overflow ? 0 : a * b;
  overflow = overflow || (ab != 0 && c > limit / ab);
  const std::uint64_t expected = overflow ? 0 : ab * c * 4;
  if (overflow || in.remaining() != expected) {
    throw FormatError(ErrorCode::size_mismatch, in.offset(),
                      "payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                          (overflow ? std::string("an overflowing size") : std::to_string(expected)));
  }
}

std::vector<float> read_finite_floats(ByteReader& in, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = in.offset();
    out[i] = in.f32();
    if (!std::isfinite(out[i])) {
      throw FormatError(ErrorCode::non_finite, at, "non-finite value at element " + std::to_string(i));
    }
  }
  return out;
}

// --- Netpbm ---------------------------------------------------------------

class NetpbmHeader {
 public:
  explicit NetpbmHeader(ByteView bytes) : bytes_(bytes) {}

  void magic(char kind) {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != static_cast<std::uint8_t>(kind)) {
      throw FormatError(ErrorCode::bad_magic, 0,
                        std::string("expected magic P") + kind);
    }
    pos_ = 2;
  }

  std::uint32_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > kMaxDim) throw FormatError(ErrorCode::malformed_netpbm, start, std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) throw FormatError(ErrorCode::malformed_netpbm, start, std::string("expected ") + what);
    return static_cast<std::uint32_t>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t end_of_header() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      throw FormatError(ErrorCode::malformed_netpbm, pos_, "expected whitespace before raster");
    }
    return pos_ + 1;
  }

  std::size_t offset() const { return pos_; }

 private:
  static bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

struct NetpbmLayout {
  int width = 0;
  int height = 0;
  std::uint32_t maxval = 0;
  std::size_t raster_offset = 0;
};

NetpbmLayout parse_netpbm(ByteView bytes, char kind, std::size_t channels) {
  NetpbmHeader header(bytes);
  header.magic(kind);
  NetpbmLayout layout;
  const std::size_t dims_at = header.offset();
  layout.width = static_cast<int>(header.number("width"));
  layout.height = static_cast<int>(header.number("height"));
  if (layout.width == 0 || layout.height == 0) {
    throw FormatError(ErrorCode::malformed_netpbm, dims_at, "image dimensions must be positive");
  }
  const std::size_t maxval_at = header.offset();
  layout.maxval = header.number("maxval");
  if (layout.maxval == 0 || layout.maxval > 65535) {
    throw FormatError(ErrorCode::malformed_netpbm, maxval_at, "maxval must be in [1, 65535]");
  }
  layout.raster_offset = header.end_of_header();

  const std::uint64_t sample_bytes = layout.maxval > 255 ? 2 : 1;
  const std::uint64_t expected = static_cast<std::uint64_t>(layout.width) * layout.height *
                                 channels * sample_bytes;
  const std::uint64_t available = bytes.size() - layout.raster_offset;
  if (available < expected) {
    throw FormatError(ErrorCode::truncated, bytes.size(),
                      "raster needs " + std::to_string(expected) + " bytes, found " +
                          std::to_string(available));
  }
  if (available > expected) {
    throw FormatError(ErrorCode::trailing_bytes, layout.raster_offset + expected,
                      "trailing bytes after raster");
  }
  return layout;
}

Bytes netpbm_header(char kind, int width, int height, int maxval) {
  const std::string text = std::string("P") + kind + "\n" + std::to_string(width) + " " +
                           std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
  return Bytes(text.begin(), text.end());
}

}  // namespace

// --- FeatureMap -----------------------------------------------------------

std::vector<float> FeatureMap::vector_at(int y, int x) const {
  std::vector<float> v(static_cast<std::size_t>(channels));
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t base = static_cast<std::size_t>(y) * width + x;
  for (int c = 0; c < channels; ++c) v[c] = data[c * plane + base];
  return v;
}

void FeatureMap::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw Error(ErrorCode::invalid_argument, "feature map dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(channels) * height * width) {
    throw Error(ErrorCode::invalid_argument, "feature map payload does not match C*H*W");
  }
  if (source_height < height || source_width < width) {
    throw Error(ErrorCode::invalid_argument, "feature grid is finer than the source image");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::invalid_argument,
                  "feature map holds a non-finite value at element " + std::to_string(i));
    }
  }
}

Bytes encode_feature_map(const FeatureMap& fmap) {
  fmap.validate();
  ByteWriter out(kFmapHeaderSize + fmap.data.size() * 4);
  out.tag("FMAP");
  out.u8(0x01);
  out.u8(0x00);
  out.u8(0x03);
  out.u8(0x00);
  out.u32(static_cast<std::uint32_t>(fmap.channels));
  out.u32(static_cast<std::uint32_t>(fmap.height));
  out.u32(static_cast<std::uint32_t>(fmap.width));
  out.u32(static_cast<std::uint32_t>(fmap.source_height));
  out.u32(static_cast<std::uint32_t>(fmap.source_width));
  for (float v : fmap.data) out.f32(v);
  return std::move(out).take();
}

FeatureMap decode_feature_map(ByteView bytes) {
  ByteReader in(bytes);
  check_magic(in, "FMAP");
  in.skip(4);
  if (const auto version = in.u8(); version != 0x01) {
    throw FormatError(ErrorCode::unsupported_version, 4, "unsupported FMAP version " + std::to_string(version));
  }
  if (const auto dtype = in.u8(); dtype != 0x00) {
    throw FormatError(ErrorCode::unsupported_dtype, 5, "unsupported FMAP dtype " + std::to_string(dtype));
  }
  if (in.u8() != 0x03) throw FormatError(ErrorCode::bad_header, 6, "FMAP ndim must be 3");
  if (in.u8() != 0x00) throw FormatError(ErrorCode::bad_header, 7, "FMAP reserved byte must be 0");

  FeatureMap fmap;
  fmap.channels = read_dim(in, "channels");
  fmap.height = read_dim(in, "height");
  fmap.width = read_dim(in, "width");
  const std::size_t source_at = in.offset();
  fmap.source_height = read_dim(in, "source height");
  fmap.source_width = read_dim(in, "source width");
  if (fmap.source_height < fmap.height || fmap.source_width < fmap.width) {
    throw FormatError(ErrorCode::bad_header, source_at, "feature grid is finer than the source image");
  }
  expect_payload(in, fmap.channels, fmap.height, fmap.width);
  fmap.data = read_finite_floats(in, static_cast<std::size_t>(fmap.channels) * fmap.height * fmap.width);
  in.expect_end();
  return fmap;
}

void write_feature_map(const FeatureMap& fmap, const std::filesystem::path& path) {
  write_file(path, encode_feature_map(fmap));
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  return decode_feature_map(read_file(path));
}

// --- FeatureMatrix --------------------------------------------------------

Bytes encode_feature_matrix(const FeatureMatrix& matrix) {
  if (matrix.rows <= 0 || matrix.cols <= 0 ||
      matrix.data.size() != static_cast<std::size_t>(matrix.rows) * matrix.cols) {
    throw Error(ErrorCode::invalid_argument, "feature matrix shape does not match its payload");
  }
  ByteWriter out(kFvecHeaderSize + matrix.data.size() * 4);
  out.tag("FVEC");
  out.u32(static_cast<std::uint32_t>(matrix.rows));
  out.u32(static_cast<std::uint32_t>(matrix.cols));
  out.u32(0);
  for (float v : matrix.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "feature matrix holds a non-finite value");
    out.f32(v);
  }
  return std::move(out).take();
}

FeatureMatrix decode_feature_matrix(ByteView bytes) {
  ByteReader in(bytes);
  check_magic(in, "FVEC");
  in.skip(4);
  FeatureMatrix m;
  m.rows = read_dim(in, "rows");
  m.cols = read_dim(in, "cols");
  if (in.u32() != 0) throw FormatError(ErrorCode::bad_header, 12, "FVEC reserved word must be 0");
  expect_payload(in, m.rows, m.cols, 1);
  m.data = read_finite_floats(in, static_cast<std::size_t>(m.rows) * m.cols);
  in.expect_end();
  return m;
}

void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  write_file(path, encode_feature_matrix(matrix));
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  return decode_feature_matrix(read_file(path));
}

// --- Images and label maps ------------------------------------------------

Bytes encode_image(const RasterImage& image) {
  if (image.height <= 0 || image.width <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.height) * image.width) {
    throw Error(ErrorCode::invalid_argument, "image shape does not match its pixel count");
  }
  Bytes out = netpbm_header('6', image.width, image.height, 255);
  out.reserve(out.size() + image.pixels.size() * 3);
  for (const Rgb& p : image.pixels) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

RasterImage decode_image(ByteView bytes) {
  const NetpbmLayout layout = parse_netpbm(bytes, '6', 3);
  if (layout.maxval != 255) {
    throw FormatError(ErrorCode::malformed_netpbm, 0, "only maxval 255 PPM images are supported");
  }
  RasterImage image(layout.height, layout.width);
  const std::uint8_t* src = bytes.data() + layout.raster_offset;
  for (auto& p : image.pixels) {
    p = Rgb{src[0], src[1], src[2]};
    src += 3;
  }
  return image;
}

void write_image(const RasterImage& image, const std::filesystem::path& path) {
  write_file(path, encode_image(image));
}

RasterImage read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

Bytes encode_label_map(const LabelMap& labels) {
  if (labels.num_labels > 65536) {
    throw Error(ErrorCode::label_overflow,
                std::to_string(labels.num_labels) + " labels exceed the 16-bit PGM capacity");
  }
  labels.validate();
  Bytes out = netpbm_header('5', labels.width, labels.height, 65535);
  out.reserve(out.size() + labels.labels.size() * 2);
  for (std::int32_t l : labels.labels) {
    out.push_back(static_cast<std::uint8_t>(l >> 8));
    out.push_back(static_cast<std::uint8_t>(l & 0xff));
  }
  return out;
}

RawLabelImage decode_pgm_samples(ByteView bytes) {
  const NetpbmLayout layout = parse_netpbm(bytes, '5', 1);
  RawLabelImage raw{layout.height, layout.width, {}};
  raw.samples.resize(static_cast<std::size_t>(layout.height) * layout.width);
  const bool wide = layout.maxval > 255;
  std::size_t pos = layout.raster_offset;
  for (auto& s : raw.samples) {
    const std::size_t at = pos;
    if (wide) {
      s = static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]);
      pos += 2;
    } else {
      s = bytes[pos++];
    }
    if (s > layout.maxval) {
      throw FormatError(ErrorCode::malformed_netpbm, at, "sample exceeds maxval");
    }
  }
  return raw;
}

void write_label_map(const LabelMap& labels, const std::filesystem::path& path) {
  write_file(path, encode_label_map(labels));
}

RawLabelImage read_pgm_samples(const std::filesystem::path& path) {
  return decode_pgm_samples(read_file(path));
}

LabelMap read_label_map(const std::filesystem::path& path) {
  const RawLabelImage raw = read_pgm_samples(path);
  std::vector<std::int32_t> ids(raw.samples.begin(), raw.samples.end());
  return LabelMap::from_raw(raw.height, raw.width, ids);
}

// --- LabelMap -------------------------------------------------------------

LabelMap LabelMap::from_raw(int height, int width, std::span<const std::int32_t> raw) {
  if (height <= 0 || width <= 0 || raw.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::invalid_argument, "label raster shape does not match its size");
  }
  std::vector<std::int32_t> distinct(raw.begin(), raw.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.front() < 0) throw Error(ErrorCode::invalid_argument, "negative label id");

  LabelMap out{height, width, static_cast<int>(distinct.size()), {}};
  out.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.labels[i] = static_cast<std::int32_t>(
        std::lower_bound(distinct.begin(), distinct.end(), raw[i]) - distinct.begin());
  }
  return out;
}

LabelMap LabelMap::from_raster_order(int height, int width, std::span<const std::int32_t> raw) {
  if (height <= 0 || width <= 0 || raw.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::invalid_argument, "label raster shape does not match its size");
  }
  std::unordered_map<std::int32_t, std::int32_t> remap;
  LabelMap out{height, width, 0, {}};
  out.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) throw Error(ErrorCode::invalid_argument, "negative label id");
    auto [it, inserted] = remap.try_emplace(raw[i], out.num_labels);
    if (inserted) ++out.num_labels;
    out.labels[i] = it->second;
  }
  return out;
}

void LabelMap::validate() const {
  if (height <= 0 || width <= 0 || labels.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::invalid_argument, "label map shape does not match its size");
  }
  if (num_labels <= 0) throw Error(ErrorCode::invalid_argument, "label map has no labels");
  std::vector<char> seen(static_cast<std::size_t>(num_labels), 0);
  for (std::int32_t l : labels) {
    if (l < 0 || l >= num_labels) throw Error(ErrorCode::invalid_argument, "label out of range");
    seen[l] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorCode::invalid_argument, "label map is not dense");
  }
}

// --- Files ----------------------------------------------------------------

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io, "read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace binseg
