#include "binseg/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binseg/errors.hpp"
#include "binseg/parallel.hpp"
#include "json.hpp"

namespace binseg {

namespace {

bool needs_features(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(),
                     [](Method m) { return m == Method::proposed || m == Method::kmeans; });
}

bool needs_superpixels(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::egs; });
}

// reports[count index][method index] for one image.
using ImageReports = std::vector<std::vector<std::vector<IoUReport>>>;

std::vector<IoUReport> evaluate(const LabelMap& pred, const DatasetImage& item) {
  std::vector<IoUReport> out;
  out.reserve(item.ground_truth.size());
  for (const GroundTruth& gt : item.ground_truth) out.push_back(match_segments(pred, gt));
  return out;
}

ImageReports run_image(const DatasetImage& item, std::size_t index, const HashModel* model,
                       const std::vector<int>& counts, const std::vector<Method>& methods,
                       const SweepConfig& config) {
  ImageReports reports(counts.size(), std::vector<std::vector<IoUReport>>(methods.size()));
  for (const GroundTruth& gt : item.ground_truth) {
    if (gt.height != item.image.height || gt.width != item.image.width) {
      throw Error(ErrorCode::geometry_mismatch, item.name + ": ground truth and image differ in size");
    }
  }

  std::optional<BinaryCodeMap> codes;
  if (std::find(methods.begin(), methods.end(), Method::proposed) != methods.end()) {
    codes = encode_feature_map(*model, *item.fmap);
  }
  std::optional<std::vector<IoUReport>> egs_reports;

  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    std::optional<LabelMap> superpixels;
    if (needs_superpixels(methods)) {
      SlicParams params = config.slic;
      params.num_superpixels = counts[ci];
      superpixels = slic(item.image, params);
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      switch (methods[mi]) {
        case Method::proposed:
          reports[ci][mi] = evaluate(segment_with_binary_map(*superpixels, *codes, config.merge_mode).labels, item);
          break;
        case Method::slic:
          reports[ci][mi] = evaluate(*superpixels, item);
          break;
        case Method::egs:
          // Count-independent: the baseline runs once with its own parameters.
          if (!egs_reports) egs_reports = evaluate(egs_segment(item.image, config.egs), item);
          reports[ci][mi] = *egs_reports;
          break;
        case Method::kmeans: {
          const Eigen::MatrixXd features = superpixel_mean_features(*superpixels, *item.fmap);
          const int k = std::min(config.kmeans_k, superpixels->num_labels);
          const SegmentationResult merged =
              kmeans_merge(*superpixels, features, k, config.seed + index, build_rag(*superpixels), config.merge_mode);
          reports[ci][mi] = evaluate(merged.labels, item);
          break;
        }
      }
    }
  }
  return reports;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::proposed: return "proposed";
    case Method::slic: return "slic";
    case Method::egs: return "egs";
    case Method::kmeans: return "kmeans";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_argument, "unknown method '" + name + "' (expected proposed, slic, egs or kmeans)");
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::io, "cannot open manifest " + manifest.string());
  const std::filesystem::path base = manifest.parent_path();
  auto resolve = [&](const std::string& field) {
    const std::filesystem::path p(field);
    return p.is_absolute() ? p : base / p;
  };
  std::vector<DatasetEntry> entries;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream split(line);
    for (std::string field; std::getline(split, field, '\t');) fields.push_back(field);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::invalid_argument,
                  manifest.string() + ":" + std::to_string(number) + ": expected image<TAB>fmap[<TAB>gt...]");
    }
    DatasetEntry entry{resolve(fields[0]), resolve(fields[1]), {}};
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (!fields[i].empty()) entry.ground_truth.push_back(resolve(fields[i]));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

SweepResult sweep_superpixels(std::size_t num_images, const std::function<DatasetImage(std::size_t)>& load,
                              const HashModel* model, const SweepConfig& config) {
  if (num_images == 0) throw Error(ErrorCode::empty_input, "dataset is empty");
  if (config.counts.empty()) throw Error(ErrorCode::empty_input, "no superpixel counts to sweep");
  if (config.methods.empty()) throw Error(ErrorCode::empty_input, "no methods to sweep");

  std::vector<int> counts = config.counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  std::vector<Method> methods;
  for (Method m : kAllMethods) {
    if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end()) methods.push_back(m);
  }
  if (std::find(methods.begin(), methods.end(), Method::proposed) != methods.end() && model == nullptr) {
    throw Error(ErrorCode::invalid_argument, "the proposed method needs a hash model");
  }

  struct Outcome {
    std::string name;
    std::optional<ImageReports> reports;
    std::vector<SweepNotice> notices;
  };
  std::vector<Outcome> outcomes(num_images);
  parallel_for(num_images, config.jobs, [&](std::size_t i) {
    DatasetImage item = load(i);
    Outcome& out = outcomes[i];
    out.name = item.name;
    for (const std::string& missing : item.missing_ground_truth) {
      out.notices.push_back({item.name, "missing ground truth " + missing, item.ground_truth.empty()});
    }
    if (item.ground_truth.empty()) {
      if (item.missing_ground_truth.empty()) out.notices.push_back({item.name, "no ground truth listed", true});
      return;
    }
    if (needs_features(methods) && !item.fmap) {
      throw Error(ErrorCode::invalid_argument, item.name + ": a feature map is required");
    }
    out.reports = run_image(item, i, model, counts, methods, config);
  });

  SweepResult result;
  for (const Outcome& o : outcomes) result.notices.insert(result.notices.end(), o.notices.begin(), o.notices.end());
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<IoUReport> all;
      for (const Outcome& o : outcomes) {
        if (!o.reports) continue;
        const auto& cell = (*o.reports)[ci][mi];
        ImageDetail detail{o.name, methods[mi], counts[ci], {}};
        for (const IoUReport& r : cell) {
          for (const SegmentMatch& m : r.per_gt_segment) detail.segment_ious.push_back(m.iou);
        }
        result.details.push_back(std::move(detail));
        all.insert(all.end(), cell.begin(), cell.end());
      }
      if (all.empty()) throw Error(ErrorCode::empty_input, "no image in the dataset has usable ground truth");
      std::size_t segments = 0;
      for (const IoUReport& r : all) segments += r.per_gt_segment.size();
      result.rows.push_back({counts[ci], methods[mi], 100.0 * dataset_iou(all), segments});
    }
  }
  return result;
}

SweepResult sweep_superpixels(const std::vector<DatasetEntry>& dataset, const HashModel* model,
                              const SweepConfig& config) {
  const bool features = needs_features(config.methods);
  auto load = [&](std::size_t i) {
    const DatasetEntry& entry = dataset[i];
    DatasetImage item;
    item.name = entry.image.string();
    item.image = read_image(entry.image);
    if (features) item.fmap = read_feature_map(entry.fmap);
    for (const auto& gt : entry.ground_truth) {
      if (!std::filesystem::exists(gt)) {
        item.missing_ground_truth.push_back(gt.string());
        continue;
      }
      item.ground_truth.push_back(read_ground_truth(gt));
    }
    return item;
  };
  return sweep_superpixels(dataset.size(), load, model, config);
}

std::vector<SweepRow> best_rows(const SweepResult& result) {
  std::vector<SweepRow> best;
  for (Method m : kAllMethods) {
    const SweepRow* top = nullptr;
    for (const SweepRow& row : result.rows) {
      if (row.method == m && (!top || row.mean_iou_percent > top->mean_iou_percent)) top = &row;
    }
    if (top) best.push_back(*top);
  }
  return best;
}

std::string format_sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "count,method,mean_iou_percent\n";
  for (const SweepRow& row : result.rows) {
    char value[32];
    std::snprintf(value, sizeof value, "%.2f", row.mean_iou_percent);
    out << row.count << ',' << to_string(row.method) << ',' << value << '\n';
  }
  return out.str();
}

std::string format_sweep_details(const SweepResult& result) {
  std::ostringstream out;
  for (const ImageDetail& d : result.details) {
    nlohmann::json line = {{"image", d.image},
                           {"method", to_string(d.method)},
                           {"count", d.count},
                           {"segment_ious", d.segment_ious}};
    out << line.dump() << '\n';
  }
  for (const SweepNotice& n : result.notices) {
    nlohmann::json line = {{"image", n.image}, {"skipped", n.skipped}, {"message", n.message}};
    out << line.dump() << '\n';
  }
  return out.str();
}

}  // namespace binseg
