#include "binseg/eval.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "binseg/errors.hpp"

namespace binseg {

IouCounts iou_counts(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask) {
  if (pred_mask.size() != gt_mask.size()) {
    throw Error(ErrorCode::geometry_mismatch, "masks differ in size");
  }
  IouCounts counts;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool p = pred_mask[i] != 0, g = gt_mask[i] != 0;
    counts.intersection += (p && g) ? 1 : 0;
    counts.union_size += (p || g) ? 1 : 0;
  }
  if (counts.union_size == 0) throw Error(ErrorCode::undefined_input, "IoU of two empty masks is undefined");
  return counts;
}

double iou(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask) {
  return iou_counts(pred_mask, gt_mask).value();
}

GroundTruth ground_truth_from_raw(const RawLabelImage& raw) {
  if (raw.height <= 0 || raw.width <= 0 || raw.samples.size() != static_cast<std::size_t>(raw.height) * raw.width) {
    throw Error(ErrorCode::invalid_argument, "ground-truth raster shape does not match its size");
  }
  std::vector<std::int32_t> rank(65536, -1);
  for (std::uint16_t s : raw.samples) {
    if (s != kVoidLabel) rank[s] = 0;
  }
  GroundTruth gt{raw.height, raw.width, 0, {}};
  for (std::int32_t& r : rank) {
    if (r == 0) r = gt.num_segments++;
  }
  gt.labels.resize(raw.samples.size());
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    gt.labels[i] = raw.samples[i] == kVoidLabel ? -1 : rank[raw.samples[i]];
  }
  return gt;
}

GroundTruth ground_truth_from_labels(const LabelMap& labels) {
  labels.validate();
  return {labels.height, labels.width, labels.num_labels, labels.labels};
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  return ground_truth_from_raw(read_pgm_samples(path));
}

IoUReport match_segments(const LabelMap& pred, const GroundTruth& gt) {
  pred.validate();
  if (pred.height != gt.height || pred.width != gt.width || gt.labels.size() != pred.size()) {
    throw Error(ErrorCode::geometry_mismatch, "prediction and ground truth differ in geometry");
  }
  const auto num_pred = static_cast<std::size_t>(pred.num_labels);
  const auto num_gt = static_cast<std::size_t>(gt.num_segments);
  std::vector<std::uint64_t> pred_size(num_pred, 0), gt_size(num_gt, 0);
  std::vector<std::map<std::int32_t, std::uint64_t>> overlap(num_gt);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::int32_t g = gt.labels[i];
    if (g < 0) continue;
    if (static_cast<std::size_t>(g) >= num_gt) throw Error(ErrorCode::invalid_argument, "ground-truth label out of range");
    const std::int32_t p = pred.labels[i];
    ++pred_size[p];
    ++gt_size[g];
    ++overlap[g][p];
  }

  IoUReport report;
  report.num_gt_segments = static_cast<int>(num_gt);
  report.per_gt_segment.reserve(num_gt);
  double sum = 0.0;
  for (std::size_t g = 0; g < num_gt; ++g) {
    SegmentMatch best{static_cast<std::int32_t>(g), 0, {0, 1}, 0.0};
    bool have = false;
    // Ascending predicted id, so a strict improvement test keeps the lowest id on ties.
    for (const auto& [p, inter] : overlap[g]) {
      const IouCounts counts{inter, gt_size[g] + pred_size[p] - inter};
      if (!have || counts.greater_than(best.counts)) {
        best.pred_id = p;
        best.counts = counts;
        have = true;
      }
    }
    if (!have) {
      throw Error(ErrorCode::invalid_argument, "ground-truth segment " + std::to_string(g) + " has no pixels");
    }
    best.iou = best.counts.value();
    sum += best.iou;
    report.per_gt_segment.push_back(best);
  }
  report.mean_iou = num_gt ? sum / double(num_gt) : 0.0;
  return report;
}

IoUReport match_segments(const LabelMap& pred, const LabelMap& gt) {
  return match_segments(pred, ground_truth_from_labels(gt));
}

double dataset_iou(std::span<const IoUReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::empty_input, "no reports to aggregate");
  double sum = 0.0;
  std::size_t count = 0;
  for (const IoUReport& r : reports) {
    for (const SegmentMatch& m : r.per_gt_segment) {
      sum += m.iou;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::empty_input, "reports contain no ground-truth segments");
  return sum / double(count);
}

}  // namespace binseg
