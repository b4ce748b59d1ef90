#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "binseg/egs.hpp"
#include "binseg/eval.hpp"
#include "binseg/itq.hpp"
#include "binseg/segmenter.hpp"
#include "binseg/superpixel.hpp"

namespace binseg {

enum class Method { proposed, slic, egs, kmeans };

/// Canonical method order: proposed, slic, egs, kmeans.
inline constexpr Method kAllMethods[] = {Method::proposed, Method::slic, Method::egs, Method::kmeans};

std::string to_string(Method method);
Method parse_method(const std::string& name);

/// One manifest record: image, feature map, and zero or more ground-truth
/// annotations.
struct DatasetEntry {
  std::filesystem::path image;
  std::filesystem::path fmap;
  std::vector<std::filesystem::path> ground_truth;
};

/// Tab-separated manifest, one `image<TAB>fmap<TAB>gt[<TAB>gt...]` record per
/// line. Blank lines and lines starting with '#' are ignored. Relative paths
/// are resolved against the manifest's directory.
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& manifest);

/// A loaded dataset image. `fmap` may be absent when no method needs it.
struct DatasetImage {
  std::string name;
  RasterImage image;
  std::optional<FeatureMap> fmap;
  std::vector<GroundTruth> ground_truth;
  /// Annotations that could not be loaded.
  std::vector<std::string> missing_ground_truth;
};

struct SweepConfig {
  std::vector<int> counts{100, 200, 300, 400, 500};
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  SlicParams slic;  // num_superpixels is replaced by each swept count
  EgsParams egs;
  int kmeans_k = kDefaultKMeansK;
  MergeMode merge_mode = MergeMode::adjacency;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct SweepRow {
  int count = 0;
  Method method = Method::proposed;
  double mean_iou_percent = 0.0;
  std::size_t num_gt_segments = 0;
};

struct ImageDetail {
  std::string image;
  Method method = Method::proposed;
  int count = 0;
  std::vector<double> segment_ious;
};

/// An image that was skipped, or evaluated with some annotations missing.
struct SweepNotice {
  std::string image;
  std::string message;
  bool skipped = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;        // by count, then method
  std::vector<ImageDetail> details;  // by count, then method, then image
  std::vector<SweepNotice> notices;  // in dataset order
};

/// Runs every (count, method) cell over the dataset and aggregates each
/// with dataset_iou. Images without usable ground truth are skipped and
/// listed in the notices. `load(i)` is called exactly once per image,
/// possibly from worker threads. Output does not depend on config.jobs.
SweepResult sweep_superpixels(std::size_t num_images, const std::function<DatasetImage(std::size_t)>& load,
                              const HashModel* model, const SweepConfig& config);

/// Manifest-driven convenience wrapper: images and feature maps are read
/// from disk; missing ground-truth files are reported, not fatal.
SweepResult sweep_superpixels(const std::vector<DatasetEntry>& dataset, const HashModel* model,
                              const SweepConfig& config);

/// Best row per method, in canonical method order.
std::vector<SweepRow> best_rows(const SweepResult& result);

/// `count,method,mean_iou_percent` with two decimals.
std::string format_sweep_csv(const SweepResult& result);

/// One JSON object per line: per-image detail rows, then notices.
std::string format_sweep_details(const SweepResult& result);

}  // namespace binseg
