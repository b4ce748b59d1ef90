#include "binseg/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "binseg/egs.hpp"
#include "binseg/errors.hpp"
#include "binseg/eval.hpp"
#include "binseg/itq.hpp"
#include "binseg/segmenter.hpp"
#include "binseg/superpixel.hpp"
#include "binseg/sweep.hpp"
#include "json.hpp"

namespace binseg::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a subcommand may be configured with.
struct RunConfig {
  std::vector<std::string> inputs;
  std::string image, fmap, codes, model, superpixel_map, manifest, pred, out, sidecar, details;
  std::vector<std::string> ground_truth;
  SlicParams slic;
  EgsParams egs;
  int code_len = 0;  // 0: take it from the model
  int iters = kDefaultItqIterations;
  int kmeans_k = kDefaultKMeansK;
  std::vector<int> counts{100, 200, 300, 400, 500};
  std::vector<std::string> methods{"proposed", "slic", "egs", "kmeans"};
  std::uint64_t seed = 0;
  std::string merge_mode = "adjacency";
  int jobs = 1;
};

constexpr const char* kFormats =
    "File formats:\n"
    "  FMAP  feature map: \"FMAP\", version 0x01, dtype 0x00 (float32 LE), ndim 0x03, reserved 0x00,\n"
    "        u32 LE C, H', W', source height, source width, then C*H'*W' float32 LE (channel-major).\n"
    "  FVEC  feature corpus: \"FVEC\", u32 LE N, D, reserved 0, then N*D float32 LE (row-major).\n"
    "  ITQ1  hash model: \"ITQ1\", u32 LE D, c, reserved 0, then float32 LE mean (D),\n"
    "        projection (D x c, row-major), rotation (c x c, row-major).\n"
    "  BMAP  code map: \"BMAP\", version 0x01, u8 code length, 2 reserved bytes, u32 LE H', W',\n"
    "        source height, source width, then H'*W' u64 LE codes (bit i = hash bit i).\n"
    "  Images are binary PPM (P6, maxval 255). Label maps are binary PGM (P5, maxval 65535,\n"
    "  big-endian). In ground truth, the value 65535 marks void pixels.\n"
    "  Segment sidecar: '# segment<TAB>code<TAB>superpixels' header, then one line per segment:\n"
    "  id, code in zero-padded hex, space-separated superpixel ids.\n"
    "  Manifest: one 'image<TAB>fmap<TAB>gt[<TAB>gt...]' record per line; '#' starts a comment;\n"
    "  relative paths are resolved against the manifest's directory.\n"
    "Environment: BINSEG_LOG = error|warn|info|debug (default warn).";

void configure_logging(std::ostream& err) {
  auto logger = spdlog::get("binseg");
  if (!logger) {
    logger = spdlog::stderr_color_mt("binseg");
    logger->set_pattern("[%l] %v");
  }
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("BINSEG_LOG")) {
    const std::string value = env;
    if (value == "error") level = spdlog::level::err;
    else if (value == "warn") level = spdlog::level::warn;
    else if (value == "info") level = spdlog::level::info;
    else if (value == "debug") level = spdlog::level::debug;
    else err << "warning: ignoring BINSEG_LOG=" << value << " (expected error, warn, info or debug)\n";
  }
  logger->set_level(level);
}

spdlog::logger& log() { return *spdlog::get("binseg"); }

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sidecar_path(const RunConfig& cfg) { return cfg.sidecar.empty() ? cfg.out + ".segments.txt" : cfg.sidecar; }

HashModel load_consistent_model(const RunConfig& cfg) {
  HashModel model = load_model(cfg.model);
  if (cfg.code_len != 0 && cfg.code_len != model.code_len()) {
    throw UsageError("--code-len " + std::to_string(cfg.code_len) + " does not match the model's code length " +
                     std::to_string(model.code_len()));
  }
  return model;
}

// Stacks every input (FVEC corpus or FMAP locations) into one sample matrix.
Eigen::MatrixXd load_corpus(const std::vector<std::string>& inputs) {
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index rows = 0;
  for (const auto& path : inputs) {
    const Bytes bytes = read_file(path);
    const bool is_fmap = bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "FMAP");
    parts.push_back(is_fmap ? samples_from(decode_feature_map(bytes)) : samples_from(decode_feature_matrix(bytes)));
    if (parts.back().cols() != parts.front().cols()) {
      throw Error(ErrorCode::dimension_mismatch, path + " has dimension " + std::to_string(parts.back().cols()) +
                                                     ", expected " + std::to_string(parts.front().cols()));
    }
    rows += parts.back().rows();
  }
  Eigen::MatrixXd samples(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    samples.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return samples;
}

int cmd_train_itq(const RunConfig& cfg, std::ostream& out) {
  const Eigen::MatrixXd samples = load_corpus(cfg.inputs);
  HashTrainOptions options;
  options.code_len = cfg.code_len == 0 ? kDefaultCodeLength : cfg.code_len;
  options.iterations = cfg.iters;
  options.seed = cfg.seed;
  log().info("training a {}-bit hash on {} samples of dimension {}", options.code_len, samples.rows(), samples.cols());
  const HashTrainResult trained = train_hash_model(samples, options);
  save_model(trained.model, cfg.out);
  char line[160];
  std::snprintf(line, sizeof line, "samples=%lld dim=%lld code_len=%d iterations=%d initial_loss=%.6f final_loss=%.6f\n",
                static_cast<long long>(samples.rows()), static_cast<long long>(samples.cols()), options.code_len,
                trained.report.iterations, trained.report.loss_per_iter.front(), trained.report.final_loss);
  out << line;
  return kExitOk;
}

int cmd_encode(const RunConfig& cfg, std::ostream& out) {
  const HashModel model = load_consistent_model(cfg);
  const BinaryCodeMap codes = encode_feature_map(model, read_feature_map(cfg.fmap), cfg.jobs);
  write_code_map(codes, cfg.out);
  out << "grid=" << codes.height << "x" << codes.width << " code_len=" << codes.code_len << "\n";
  return kExitOk;
}

int cmd_slic(const RunConfig& cfg, std::ostream& out) {
  const LabelMap labels = slic(read_image(cfg.image), cfg.slic);
  write_label_map(labels, cfg.out);
  out << "superpixels=" << labels.num_labels << "\n";
  return kExitOk;
}

int cmd_egs(const RunConfig& cfg, std::ostream& out) {
  const LabelMap labels = egs_segment(read_image(cfg.image), cfg.egs);
  write_label_map(labels, cfg.out);
  out << "segments=" << labels.num_labels << "\n";
  return kExitOk;
}

LabelMap superpixels_for(const RunConfig& cfg, const RasterImage& image) {
  if (!cfg.superpixel_map.empty()) {
    LabelMap labels = read_label_map(cfg.superpixel_map);
    if (labels.height != image.height || labels.width != image.width) {
      throw Error(ErrorCode::geometry_mismatch, "superpixel map and image differ in size");
    }
    return labels;
  }
  return slic(image, cfg.slic);
}

int cmd_segment(const RunConfig& cfg, std::ostream& out) {
  if (cfg.codes.empty() == cfg.fmap.empty()) throw UsageError("segment needs exactly one of --fmap or --codes");
  if (!cfg.fmap.empty() && cfg.model.empty()) throw UsageError("--fmap needs --model");
  const MergeMode mode = parse_merge_mode(cfg.merge_mode);
  const RasterImage image = read_image(cfg.image);
  const BinaryCodeMap codes = cfg.codes.empty()
                                  ? encode_feature_map(load_consistent_model(cfg), read_feature_map(cfg.fmap), cfg.jobs)
                                  : read_code_map(cfg.codes);
  const LabelMap superpixels = superpixels_for(cfg, image);
  const SegmentationResult result = segment_with_binary_map(superpixels, codes, mode);
  write_label_map(result.labels, cfg.out);
  write_segment_sidecar(result, codes.code_len, sidecar_path(cfg));
  out << "superpixels=" << superpixels.num_labels << " segments=" << result.labels.num_labels << "\n";
  return kExitOk;
}

int cmd_kmeans(const RunConfig& cfg, std::ostream& out) {
  const MergeMode mode = parse_merge_mode(cfg.merge_mode);
  const RasterImage image = read_image(cfg.image);
  const FeatureMap fmap = read_feature_map(cfg.fmap);
  const LabelMap superpixels = superpixels_for(cfg, image);
  int k = cfg.kmeans_k;
  if (k > superpixels.num_labels) {
    log().warn("--kmeans-k {} exceeds the {} superpixels; using {}", k, superpixels.num_labels, superpixels.num_labels);
    k = superpixels.num_labels;
  }
  const SegmentationResult result = kmeans_merge(superpixels, superpixel_mean_features(superpixels, fmap), k,
                                                 cfg.seed, build_rag(superpixels), mode);
  write_label_map(result.labels, cfg.out);
  int bits = 1;
  while (bits < 64 && (std::uint64_t{1} << bits) < static_cast<std::uint64_t>(k)) ++bits;
  write_segment_sidecar(result, bits, sidecar_path(cfg));
  out << "superpixels=" << superpixels.num_labels << " clusters=" << k << " segments=" << result.labels.num_labels
      << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const LabelMap pred = read_label_map(cfg.pred);
  std::vector<IoUReport> reports;
  for (const auto& path : cfg.ground_truth) reports.push_back(match_segments(pred, read_ground_truth(path)));
  const double mean = dataset_iou(reports);
  std::size_t segments = 0;
  for (const auto& r : reports) segments += r.per_gt_segment.size();
  char line[64];
  std::snprintf(line, sizeof line, "mean_iou=%.4f\n", mean);
  out << line << "num_gt_segments=" << segments << "\n";
  if (!cfg.out.empty()) {
    nlohmann::json doc = {{"prediction", cfg.pred}, {"mean_iou", mean}, {"annotations", nlohmann::json::array()}};
    for (std::size_t i = 0; i < reports.size(); ++i) {
      nlohmann::json segs = nlohmann::json::array();
      for (const SegmentMatch& m : reports[i].per_gt_segment) {
        segs.push_back({{"gt", m.gt_id},
                        {"pred", m.pred_id},
                        {"intersection", m.counts.intersection},
                        {"union", m.counts.union_size},
                        {"iou", m.iou}});
      }
      doc["annotations"].push_back({{"ground_truth", cfg.ground_truth[i]},
                                    {"mean_iou", reports[i].mean_iou},
                                    {"segments", segs}});
    }
    write_text(cfg.out, doc.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  SweepConfig sweep;
  sweep.counts = cfg.counts;
  sweep.methods.clear();
  for (const auto& m : cfg.methods) sweep.methods.push_back(parse_method(m));
  sweep.slic = cfg.slic;
  sweep.egs = cfg.egs;
  sweep.kmeans_k = cfg.kmeans_k;
  sweep.merge_mode = parse_merge_mode(cfg.merge_mode);
  sweep.seed = cfg.seed;
  sweep.jobs = cfg.jobs;

  std::optional<HashModel> model;
  const bool wants_model = std::find(sweep.methods.begin(), sweep.methods.end(), Method::proposed) != sweep.methods.end();
  if (wants_model) {
    if (cfg.model.empty()) throw UsageError("the proposed method needs --model");
    model = load_consistent_model(cfg);
  }
  const SweepResult result = sweep_superpixels(read_manifest(cfg.manifest), model ? &*model : nullptr, sweep);
  for (const SweepNotice& n : result.notices) {
    log().warn("{}: {}{}", n.image, n.message, n.skipped ? " (skipped)" : "");
  }
  const std::string csv = format_sweep_csv(result);
  if (cfg.out.empty()) {
    out << csv;
  } else {
    write_text(cfg.out, csv);
  }
  if (!cfg.details.empty()) write_text(cfg.details, format_sweep_details(result));
  for (const SweepRow& best : best_rows(result)) {
    char line[128];
    std::snprintf(line, sizeof line, "best method=%s count=%d mean_iou_percent=%.2f\n", to_string(best.method).c_str(),
                  best.count, best.mean_iou_percent);
    out << line;
  }
  return kExitOk;
}

void add_slic_options(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--superpixels", cfg.slic.num_superpixels, "SLIC superpixel count K")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--compactness", cfg.slic.compactness, "SLIC compactness m")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--slic-iters", cfg.slic.iterations, "SLIC k-means iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--min-region-frac", cfg.slic.min_region_frac,
                 "absorb superpixel fragments below this fraction of the nominal area")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();
}

void add_egs_options(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--sigma", cfg.egs.sigma, "Gaussian pre-smoothing sigma")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub.add_option("--k", cfg.egs.k, "scale parameter k")->check(CLI::PositiveNumber)->capture_default_str();
  sub.add_option("--min-size", cfg.egs.min_size, "minimum segment size in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_merge_mode(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--merge-mode", cfg.merge_mode, "merge adjacent equal-code superpixels, or all equal-code ones")
      ->check(CLI::IsMember({"adjacency", "global"}))
      ->capture_default_str();
}

void add_jobs(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--jobs", cfg.jobs, "worker threads (output does not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_seed(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging(err);
  RunConfig cfg;
  CLI::App app{"Binary-code superpixel merging segmentation toolkit", "binseg"};
  app.require_subcommand(1);
  app.footer(kFormats);

  auto* train = app.add_subcommand("train-itq", "learn an ITQ hash model from FVEC corpora or FMAP files");
  train->add_option("inputs", cfg.inputs, "FVEC or FMAP files")->required()->check(CLI::ExistingFile);
  train->add_option("--code-len", cfg.code_len, "bits per code (default 8)")->check(CLI::Range(1, kMaxCodeLength));
  train->add_option("--iters", cfg.iters, "ITQ iterations")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(*train, cfg);
  train->add_option("--out", cfg.out, "output ITQ1 model")->required();

  auto* encode = app.add_subcommand("encode", "encode an FMAP feature map into a BMAP code map");
  encode->add_option("--model", cfg.model, "ITQ1 model")->required()->check(CLI::ExistingFile);
  encode->add_option("--fmap", cfg.fmap, "FMAP feature map")->required()->check(CLI::ExistingFile);
  encode->add_option("--code-len", cfg.code_len, "expected code length (must match the model)");
  encode->add_option("--out", cfg.out, "output BMAP code map")->required();
  add_jobs(*encode, cfg);

  auto* slic_cmd = app.add_subcommand("slic", "SLIC superpixels of a PPM image");
  slic_cmd->add_option("--image", cfg.image, "PPM image")->required()->check(CLI::ExistingFile);
  add_slic_options(*slic_cmd, cfg);
  slic_cmd->add_option("--out", cfg.out, "output PGM label map")->required();

  auto* egs = app.add_subcommand("egs", "graph-based segmentation of a PPM image");
  egs->add_option("--image", cfg.image, "PPM image")->required()->check(CLI::ExistingFile);
  add_egs_options(*egs, cfg);
  egs->add_option("--out", cfg.out, "output PGM label map")->required();

  auto* segment = app.add_subcommand("segment", "superpixels, binary codes, equal-code merging");
  segment->add_option("--image", cfg.image, "PPM image")->required()->check(CLI::ExistingFile);
  segment->add_option("--fmap", cfg.fmap, "FMAP feature map (encoded with --model)")->check(CLI::ExistingFile);
  segment->add_option("--model", cfg.model, "ITQ1 model")->check(CLI::ExistingFile);
  segment->add_option("--codes", cfg.codes, "precomputed BMAP code map instead of --fmap")->check(CLI::ExistingFile);
  segment->add_option("--code-len", cfg.code_len, "expected code length (must match the model)");
  segment->add_option("--superpixel-map", cfg.superpixel_map, "precomputed PGM superpixels instead of SLIC")
      ->check(CLI::ExistingFile);
  add_slic_options(*segment, cfg);
  add_merge_mode(*segment, cfg);
  add_jobs(*segment, cfg);
  segment->add_option("--out", cfg.out, "output PGM label map")->required();
  segment->add_option("--sidecar", cfg.sidecar, "segment sidecar path (default <out>.segments.txt)");

  auto* kmeans_cmd = app.add_subcommand("kmeans-baseline", "k-means over superpixel mean features, then merging");
  kmeans_cmd->add_option("--image", cfg.image, "PPM image")->required()->check(CLI::ExistingFile);
  kmeans_cmd->add_option("--fmap", cfg.fmap, "FMAP feature map")->required()->check(CLI::ExistingFile);
  kmeans_cmd->add_option("--superpixel-map", cfg.superpixel_map, "precomputed PGM superpixels instead of SLIC")
      ->check(CLI::ExistingFile);
  add_slic_options(*kmeans_cmd, cfg);
  kmeans_cmd->add_option("--kmeans-k", cfg.kmeans_k, "clusters (clamped to the superpixel count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed(*kmeans_cmd, cfg);
  add_merge_mode(*kmeans_cmd, cfg);
  kmeans_cmd->add_option("--out", cfg.out, "output PGM label map")->required();
  kmeans_cmd->add_option("--sidecar", cfg.sidecar, "segment sidecar path (default <out>.segments.txt)");

  auto* eval = app.add_subcommand("eval", "segmentation IoU of a predicted label map");
  eval->add_option("--pred", cfg.pred, "predicted PGM label map")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", cfg.ground_truth, "ground-truth PGM (repeatable, one per annotation)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", cfg.out, "optional JSON report");

  auto* sweep = app.add_subcommand("sweep", "IoU over a dataset for each superpixel count and method");
  sweep->add_option("--manifest", cfg.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  sweep->add_option("--model", cfg.model, "ITQ1 model (needed by the proposed method)")->check(CLI::ExistingFile);
  sweep->add_option("--code-len", cfg.code_len, "expected code length (must match the model)");
  sweep->add_option("--counts", cfg.counts, "superpixel counts, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--methods", cfg.methods, "methods, comma separated")
      ->delimiter(',')
      ->check(CLI::IsMember({"proposed", "slic", "egs", "kmeans"}))
      ->capture_default_str();
  add_slic_options(*sweep, cfg);
  add_egs_options(*sweep, cfg);
  sweep->add_option("--kmeans-k", cfg.kmeans_k, "k-means clusters (clamped to the superpixel count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_merge_mode(*sweep, cfg);
  add_seed(*sweep, cfg);
  add_jobs(*sweep, cfg);
  sweep->add_option("--out", cfg.out, "CSV output (default: standard output)");
  sweep->add_option("--details", cfg.details, "JSON-lines per-image detail log");

  for (CLI::App* sub : app.get_subcommands({})) sub->footer(kFormats);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train_itq(cfg, out);
    if (encode->parsed()) return cmd_encode(cfg, out);
    if (slic_cmd->parsed()) return cmd_slic(cfg, out);
    if (egs->parsed()) return cmd_egs(cfg, out);
    if (segment->parsed()) return cmd_segment(cfg, out);
    if (kmeans_cmd->parsed()) return cmd_kmeans(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    if (sweep->parsed()) return cmd_sweep(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace binseg::cli
