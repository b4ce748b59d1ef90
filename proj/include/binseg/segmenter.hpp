#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "binseg/itq.hpp"
#include "binseg/tensor_io.hpp"

namespace binseg {

inline constexpr int kDefaultKMeansK = 256;

/// Regions and their 4-adjacency. Edges are stored once as (a, b) with
/// a < b, sorted.
struct RegionAdjacencyGraph {
  int num_regions = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;

  bool operator==(const RegionAdjacencyGraph&) const = default;
};

RegionAdjacencyGraph build_rag(const LabelMap& regions);

/// One code per image pixel, raster order.
struct PixelCodes {
  int height = 0;
  int width = 0;
  std::vector<std::uint64_t> codes;

  std::uint64_t at(int r, int c) const { return codes[static_cast<std::size_t>(r) * width + c]; }
};

/// Nearest-neighbour expansion: pixel (r, c) takes the code of cell
/// (floor(r * H' / H), floor(c * W' / W)). The target size must equal the
/// map's recorded source geometry.
PixelCodes upsample_codes(const BinaryCodeMap& binmap, int height, int width);

/// Per-bit majority vote over each superpixel's pixels; a tied bit is 0.
std::vector<std::uint64_t> assign_superpixel_codes(const LabelMap& superpixels, const PixelCodes& pixel_codes,
                                                   int code_len);

enum class MergeMode {
  adjacency,  // connected components of equal-code RAG edges
  global,     // every superpixel sharing a code, adjacent or not
};

MergeMode parse_merge_mode(const std::string& name);
std::string to_string(MergeMode mode);

struct SegmentationResult {
  LabelMap labels;
  /// The merge key of each input superpixel (a binary code, or a cluster id
  /// for the k-means baseline).
  std::vector<std::uint64_t> superpixel_codes;
  /// Sorted superpixel ids of each final segment.
  std::vector<std::vector<std::int32_t>> merged_from;
};

/// Merges superpixels whose codes are identical (Hamming distance zero).
/// Final segments are numbered by first appearance in raster order.
SegmentationResult merge_equal_codes(const LabelMap& superpixels, std::span<const std::uint64_t> sp_codes,
                                     const RegionAdjacencyGraph& adjacency,
                                     MergeMode mode = MergeMode::adjacency);

/// The code shared by the members of each final segment.
std::vector<std::uint64_t> segment_codes(const SegmentationResult& result);

/// upsample -> per-superpixel vote -> RAG -> merge.
SegmentationResult segment_with_binary_map(const LabelMap& superpixels, const BinaryCodeMap& binmap,
                                           MergeMode mode = MergeMode::adjacency);

/// Mean feature vector per superpixel; `pixel_features` is
/// (pixel count x D) in raster order.
Eigen::MatrixXd superpixel_mean_features(const LabelMap& superpixels, const Eigen::MatrixXd& pixel_features);

/// Same, for a feature map expanded to pixels by nearest-neighbour lookup
/// (the mapping of upsample_codes). Avoids materialising per-pixel vectors.
Eigen::MatrixXd superpixel_mean_features(const LabelMap& superpixels, const FeatureMap& fmap);

struct KMeansResult {
  std::vector<std::int32_t> assignment;
  Eigen::MatrixXd centroids;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until every centroid
/// moves less than `tolerance`, or `max_iterations`.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iterations = 300,
                    double tolerance = 1e-6);

/// Clusters superpixel features, then merges adjacent superpixels that land
/// in the same cluster.
SegmentationResult kmeans_merge(const LabelMap& superpixels, const Eigen::MatrixXd& sp_features, int k,
                                std::uint64_t seed, const RegionAdjacencyGraph& adjacency,
                                MergeMode mode = MergeMode::adjacency);

/// Text sidecar: one line per final segment,
/// "<segment>\t<code as zero-padded hex>\t<superpixel ids separated by spaces>".
std::string format_segment_sidecar(const SegmentationResult& result, int code_len);
void write_segment_sidecar(const SegmentationResult& result, int code_len, const std::filesystem::path& path);

}  // namespace binseg
