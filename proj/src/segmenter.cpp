#include "binseg/segmenter.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "binseg/disjoint_sets.hpp"
#include "binseg/errors.hpp"

namespace binseg {

namespace {

void require_same_geometry(const LabelMap& labels, int height, int width, const char* what) {
  if (labels.height != height || labels.width != width) {
    throw Error(ErrorCode::geometry_mismatch, std::string(what) + " does not match the superpixel map geometry");
  }
}

SegmentationResult merge_by_key(const LabelMap& superpixels, std::span<const std::uint64_t> keys,
                                const RegionAdjacencyGraph& adjacency, MergeMode mode) {
  superpixels.validate();
  const auto n = static_cast<std::size_t>(superpixels.num_labels);
  if (keys.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "expected one code per superpixel (" + std::to_string(n) + "), got " +
                                                   std::to_string(keys.size()));
  }
  if (adjacency.num_regions != superpixels.num_labels) {
    throw Error(ErrorCode::dimension_mismatch, "adjacency graph does not match the superpixel count");
  }

  DisjointSets sets(n);
  if (mode == MergeMode::adjacency) {
    for (const auto& [a, b] : adjacency.edges) {
      if (keys[a] == keys[b]) sets.join(a, b);
    }
  } else {
    std::map<std::uint64_t, std::size_t> first_with_key;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = first_with_key.try_emplace(keys[i], i);
      if (!inserted) sets.join(it->second, i);
    }
  }

  std::vector<std::int32_t> raw(superpixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<std::int32_t>(sets.find(static_cast<std::size_t>(superpixels.labels[i])));
  }
  SegmentationResult result;
  result.labels = LabelMap::from_raster_order(superpixels.height, superpixels.width, raw);
  result.superpixel_codes.assign(keys.begin(), keys.end());
  result.merged_from.resize(static_cast<std::size_t>(result.labels.num_labels));

  // Each superpixel's final segment, read off any one of its pixels.
  std::vector<std::int32_t> segment_of(n, -1);
  for (std::size_t i = 0; i < raw.size(); ++i) segment_of[superpixels.labels[i]] = result.labels.labels[i];
  for (std::size_t sp = 0; sp < n; ++sp) result.merged_from[segment_of[sp]].push_back(static_cast<std::int32_t>(sp));
  return result;
}

}  // namespace

RegionAdjacencyGraph build_rag(const LabelMap& regions) {
  regions.validate();
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  auto add = [&](std::int32_t a, std::int32_t b) {
    if (a != b) edges.emplace_back(std::min(a, b), std::max(a, b));
  };
  for (int y = 0; y < regions.height; ++y) {
    for (int x = 0; x < regions.width; ++x) {
      if (x + 1 < regions.width) add(regions.at(y, x), regions.at(y, x + 1));
      if (y + 1 < regions.height) add(regions.at(y, x), regions.at(y + 1, x));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return {regions.num_labels, std::move(edges)};
}

PixelCodes upsample_codes(const BinaryCodeMap& binmap, int height, int width) {
  binmap.validate();
  if (height != binmap.source_height || width != binmap.source_width) {
    throw Error(ErrorCode::geometry_mismatch,
                "requested " + std::to_string(height) + "x" + std::to_string(width) + " but the code map came from a " +
                    std::to_string(binmap.source_height) + "x" + std::to_string(binmap.source_width) + " image");
  }
  PixelCodes out{height, width, std::vector<std::uint64_t>(static_cast<std::size_t>(height) * width)};
  for (int r = 0; r < height; ++r) {
    const int cy = static_cast<int>(std::int64_t{r} * binmap.height / height);
    for (int c = 0; c < width; ++c) {
      const int cx = static_cast<int>(std::int64_t{c} * binmap.width / width);
      out.codes[static_cast<std::size_t>(r) * width + c] = binmap.at(cy, cx);
    }
  }
  return out;
}

std::vector<std::uint64_t> assign_superpixel_codes(const LabelMap& superpixels, const PixelCodes& pixel_codes,
                                                   int code_len) {
  superpixels.validate();
  require_same_geometry(superpixels, pixel_codes.height, pixel_codes.width, "pixel code map");
  if (code_len < 1 || code_len > kMaxCodeLength) throw Error(ErrorCode::invalid_argument, "code length out of range");

  const auto n = static_cast<std::size_t>(superpixels.num_labels);
  std::vector<std::size_t> members(n, 0);
  std::vector<std::size_t> ones(n * code_len, 0);
  for (std::size_t i = 0; i < superpixels.size(); ++i) {
    const auto sp = static_cast<std::size_t>(superpixels.labels[i]);
    ++members[sp];
    const std::uint64_t code = pixel_codes.codes[i];
    for (int bit = 0; bit < code_len; ++bit) ones[sp * code_len + bit] += (code >> bit) & 1u;
  }
  std::vector<std::uint64_t> codes(n, 0);
  for (std::size_t sp = 0; sp < n; ++sp) {
    for (int bit = 0; bit < code_len; ++bit) {
      // Strict majority; a tie keeps the bit at 0.
      if (2 * ones[sp * code_len + bit] > members[sp]) codes[sp] |= std::uint64_t{1} << bit;
    }
  }
  return codes;
}

MergeMode parse_merge_mode(const std::string& name) {
  if (name == "adjacency") return MergeMode::adjacency;
  if (name == "global") return MergeMode::global;
  throw Error(ErrorCode::invalid_argument, "unknown merge mode '" + name + "' (expected adjacency or global)");
}

std::string to_string(MergeMode mode) { return mode == MergeMode::adjacency ? "adjacency" : "global"; }

SegmentationResult merge_equal_codes(const LabelMap& superpixels, std::span<const std::uint64_t> sp_codes,
                                     const RegionAdjacencyGraph& adjacency, MergeMode mode) {
  return merge_by_key(superpixels, sp_codes, adjacency, mode);
}

std::vector<std::uint64_t> segment_codes(const SegmentationResult& result) {
  std::vector<std::uint64_t> out;
  out.reserve(result.merged_from.size());
  for (const auto& members : result.merged_from) out.push_back(result.superpixel_codes[members.front()]);
  return out;
}

SegmentationResult segment_with_binary_map(const LabelMap& superpixels, const BinaryCodeMap& binmap, MergeMode mode) {
  const PixelCodes pixel_codes = upsample_codes(binmap, superpixels.height, superpixels.width);
  const std::vector<std::uint64_t> codes = assign_superpixel_codes(superpixels, pixel_codes, binmap.code_len);
  return merge_equal_codes(superpixels, codes, build_rag(superpixels), mode);
}

Eigen::MatrixXd superpixel_mean_features(const LabelMap& superpixels, const Eigen::MatrixXd& pixel_features) {
  superpixels.validate();
  if (static_cast<std::size_t>(pixel_features.rows()) != superpixels.size()) {
    throw Error(ErrorCode::geometry_mismatch, "expected one feature row per pixel");
  }
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(superpixels.num_labels, pixel_features.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(superpixels.num_labels);
  for (std::size_t i = 0; i < superpixels.size(); ++i) {
    const auto sp = superpixels.labels[i];
    sums.row(sp) += pixel_features.row(static_cast<Eigen::Index>(i));
    counts[sp] += 1.0;
  }
  return sums.array().colwise() / counts.array();
}

Eigen::MatrixXd superpixel_mean_features(const LabelMap& superpixels, const FeatureMap& fmap) {
  superpixels.validate();
  if (superpixels.height != fmap.source_height || superpixels.width != fmap.source_width) {
    throw Error(ErrorCode::geometry_mismatch, "feature map source geometry does not match the superpixel map");
  }
  const int h = superpixels.height, w = superpixels.width;
  const std::size_t cells = static_cast<std::size_t>(fmap.height) * fmap.width;
  // Pixel counts per (superpixel, cell); a superpixel touches few cells.
  std::vector<std::map<std::size_t, std::size_t>> hist(static_cast<std::size_t>(superpixels.num_labels));
  for (int r = 0; r < h; ++r) {
    const std::size_t cy = static_cast<std::size_t>(std::int64_t{r} * fmap.height / h);
    for (int c = 0; c < w; ++c) {
      const std::size_t cx = static_cast<std::size_t>(std::int64_t{c} * fmap.width / w);
      ++hist[superpixels.at(r, c)][cy * fmap.width + cx];
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(superpixels.num_labels, fmap.channels);
  for (std::size_t sp = 0; sp < hist.size(); ++sp) {
    std::size_t total = 0;
    for (const auto& [cell, count] : hist[sp]) {
      total += count;
      for (int ch = 0; ch < fmap.channels; ++ch) {
        out(static_cast<Eigen::Index>(sp), ch) += double(count) * fmap.data[ch * cells + cell];
      }
    }
    out.row(static_cast<Eigen::Index>(sp)) /= double(total);
  }
  return out;
}

SegmentationResult kmeans_merge(const LabelMap& superpixels, const Eigen::MatrixXd& sp_features, int k,
                                std::uint64_t seed, const RegionAdjacencyGraph& adjacency, MergeMode mode) {
  superpixels.validate();
  if (sp_features.rows() != superpixels.num_labels) {
    throw Error(ErrorCode::dimension_mismatch, "expected one feature row per superpixel");
  }
  const KMeansResult clusters = kmeans(sp_features, k, seed);
  std::vector<std::uint64_t> keys(clusters.assignment.begin(), clusters.assignment.end());
  return merge_by_key(superpixels, keys, adjacency, mode);
}

std::string format_segment_sidecar(const SegmentationResult& result, int code_len) {
  const int digits = std::max(1, (code_len + 3) / 4);
  std::ostringstream out;
  out << "# segment\tcode\tsuperpixels\n";
  const std::vector<std::uint64_t> codes = segment_codes(result);
  for (std::size_t s = 0; s < result.merged_from.size(); ++s) {
    char hex[32];
    std::snprintf(hex, sizeof hex, "%0*llx", digits, static_cast<unsigned long long>(codes[s]));
    out << s << '\t' << hex << '\t';
    const auto& members = result.merged_from[s];
    for (std::size_t i = 0; i < members.size(); ++i) out << (i ? " " : "") << members[i];
    out << '\n';
  }
  return out.str();
}

void write_segment_sidecar(const SegmentationResult& result, int code_len, const std::filesystem::path& path) {
  const std::string text = format_segment_sidecar(result, code_len);
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace binseg
