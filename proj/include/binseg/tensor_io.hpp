#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace binseg {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// FMAP container: 8-byte preamble ("FMAP", version 1, dtype 0 = f32le,
// ndim 3, reserved 0), u32le C, H', W', source height, source width, then
// C*H'*W' little-endian float32 values in channel-major order.
inline constexpr std::size_t kFmapHeaderSize = 28;

// FVEC container: "FVEC", u32le N, u32le D, u32le reserved, then N*D
// little-endian float32 values, row-major.
inline constexpr std::size_t kFvecHeaderSize = 16;

/// Spatial grid of feature vectors. Element (c, y, x) lives at
/// c*height*width + y*width + x, so one location's vector is a strided slice.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  int source_height = 0;
  int source_width = 0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  /// Copies the feature vector at grid cell (y, x).
  std::vector<float> vector_at(int y, int x) const;

  /// Throws Error(invalid_argument) when an invariant does not hold.
  void validate() const;

  bool operator==(const FeatureMap&) const = default;
};

/// Flat corpus of N feature vectors of length D, row-major.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  std::span<const float> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }
  bool operator==(const FeatureMatrix&) const = default;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct RasterImage {
  int height = 0;
  int width = 0;
  std::vector<Rgb> pixels;

  RasterImage() = default;
  RasterImage(int h, int w, Rgb fill = {})
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  Rgb& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  const Rgb& at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t size() const { return pixels.size(); }
  bool operator==(const RasterImage&) const = default;
};

/// Dense per-pixel region assignment: labels cover [0, num_labels) and every
/// label occurs at least once.
struct LabelMap {
  int height = 0;
  int width = 0;
  int num_labels = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int r, int c) const {
    return labels[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t size() const { return labels.size(); }

  /// Renumbers arbitrary non-negative ids to their rank among the distinct
  /// values, which keeps distinct ids distinct and ordered.
  static LabelMap from_raw(int height, int width, std::span<const std::int32_t> raw);

  /// Renumbers ids by order of first appearance in raster order.
  static LabelMap from_raster_order(int height, int width,
                                    std::span<const std::int32_t> raw);

  void validate() const;

  bool operator==(const LabelMap&) const = default;
};

/// Undecoded 16-bit Netpbm samples; used where raw values carry meaning
/// (for example a reserved void id in ground truth).
struct RawLabelImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> samples;
};

// Feature maps.
Bytes encode_feature_map(const FeatureMap& fmap);
FeatureMap decode_feature_map(ByteView bytes);
void write_feature_map(const FeatureMap& fmap, const std::filesystem::path& path);
FeatureMap read_feature_map(const std::filesystem::path& path);

// Feature corpora.
Bytes encode_feature_matrix(const FeatureMatrix& matrix);
FeatureMatrix decode_feature_matrix(ByteView bytes);
void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255).
Bytes encode_image(const RasterImage& image);
RasterImage decode_image(ByteView bytes);
void write_image(const RasterImage& image, const std::filesystem::path& path);
RasterImage read_image(const std::filesystem::path& path);

// Binary PGM (P5). Written with maxval 65535; any maxval is accepted on read.
Bytes encode_label_map(const LabelMap& labels);
RawLabelImage decode_pgm_samples(ByteView bytes);
void write_label_map(const LabelMap& labels, const std::filesystem::path& path);
RawLabelImage read_pgm_samples(const std::filesystem::path& path);
LabelMap read_label_map(const std::filesystem::path& path);

// Whole-file helpers.
Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView bytes);

}  // namespace binseg
