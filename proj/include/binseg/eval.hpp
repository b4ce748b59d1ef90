#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "binseg/tensor_io.hpp"

namespace binseg {

/// Raw ground-truth sample value marking pixels excluded from scoring.
inline constexpr std::uint16_t kVoidLabel = 65535;

/// Intersection and union pixel counts; the IoU is their ratio.
struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_size = 0;

  double value() const { return double(intersection) / double(union_size); }
  /// Exact comparison by cross-multiplication.
  bool greater_than(const IouCounts& other) const {
    return intersection * other.union_size > other.intersection * union_size;
  }
  bool operator==(const IouCounts&) const = default;
};

/// |pred & gt| / |pred | gt| over two equally sized masks (non-zero = member).
/// Throws Error(undefined_input) when both masks are empty.
IouCounts iou_counts(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask);
double iou(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask);

/// Ground truth with optional void pixels (label -1), which are left out of
/// every intersection and union.
struct GroundTruth {
  int height = 0;
  int width = 0;
  int num_segments = 0;
  std::vector<std::int32_t> labels;
};

/// Raw value kVoidLabel becomes void; other values are renumbered densely in
/// ascending order.
GroundTruth ground_truth_from_raw(const RawLabelImage& raw);
GroundTruth ground_truth_from_labels(const LabelMap& labels);
GroundTruth read_ground_truth(const std::filesystem::path& path);

struct SegmentMatch {
  std::int32_t gt_id = 0;
  std::int32_t pred_id = 0;
  IouCounts counts;
  double iou = 0.0;
};

struct IoUReport {
  std::vector<SegmentMatch> per_gt_segment;
  double mean_iou = 0.0;
  int num_gt_segments = 0;
};

/// For every ground-truth segment, the predicted segment of maximum IoU
/// (lowest predicted id on ties).
IoUReport match_segments(const LabelMap& pred, const GroundTruth& gt);
IoUReport match_segments(const LabelMap& pred, const LabelMap& gt);

/// Mean over all ground-truth segments of all reports, each segment weighted
/// equally. Summation runs in report order, then segment order.
double dataset_iou(std::span<const IoUReport> reports);

}  // namespace binseg
