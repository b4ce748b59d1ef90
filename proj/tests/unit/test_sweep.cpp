#include <fstream>

#include "binseg/errors.hpp"
#include "binseg/sweep.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace binseg;

namespace {

HashModel flat_model() {
  return HashModel(Eigen::VectorXf::Zero(testing::kPseudoFeatureDim),
                   Eigen::MatrixXf::Identity(testing::kPseudoFeatureDim, 8), Eigen::MatrixXf::Identity(8, 8));
}

DatasetImage uniform_item() {
  DatasetImage item;
  item.name = "uniform";
  item.image = RasterImage(32, 32, Rgb{90, 40, 10});
  item.fmap = testing::pseudo_features(item.image);
  item.ground_truth.push_back(ground_truth_from_labels(LabelMap{32, 32, 1, std::vector<std::int32_t>(1024, 0)}));
  return item;
}

}  // namespace

TEST_CASE("uniform image with matching ground truth scores 100 everywhere") {
  const HashModel model = flat_model();
  SweepConfig config;
  config.counts = {1};
  const SweepResult r = sweep_superpixels(1, [](std::size_t) { return uniform_item(); }, &model, config);
  REQUIRE(r.rows.size() == 4);
  for (const SweepRow& row : r.rows) CHECK(row.mean_iou_percent == 100.0);

  config.counts = {16};
  config.methods = {Method::proposed, Method::egs, Method::kmeans};
  for (const SweepRow& row : sweep_superpixels(1, [](std::size_t) { return uniform_item(); }, &model, config).rows) {
    CHECK(row.mean_iou_percent == 100.0);
  }
}

TEST_CASE("sweep over a small dataset") {
  const auto dir = testing::scratch_dir("sweep_dataset");
  const auto data = testing::write_shape_dataset(dir, 3, 40, 48, 64);
  const HashModel model = load_model(data.model);
  const auto entries = read_manifest(data.manifest);
  REQUIRE(entries.size() == 3);
  CHECK(entries[1].image == dir / "img1.ppm");

  SweepConfig config;
  config.counts = {50, 20, 30, 40, 10};
  const SweepResult r = sweep_superpixels(entries, &model, config);
  REQUIRE(r.rows.size() == 20);
  CHECK(r.rows.front().count == 10);
  CHECK(r.rows.front().method == Method::proposed);
  CHECK(r.rows[1].method == Method::slic);
  for (const SweepRow& row : r.rows) {
    CHECK(row.mean_iou_percent >= 0.0);
    CHECK(row.mean_iou_percent <= 100.0);
  }
  // EGS does not depend on the superpixel count.
  CHECK(r.rows[2].mean_iou_percent == r.rows[6].mean_iou_percent);
  CHECK(r.details.size() == 60);

  config.jobs = 3;
  const SweepResult parallel = sweep_superpixels(entries, &model, config);
  CHECK(format_sweep_csv(parallel) == format_sweep_csv(r));
  CHECK(format_sweep_details(parallel) == format_sweep_details(r));

  const std::string csv = format_sweep_csv(r);
  CHECK(csv.rfind("count,method,mean_iou_percent\n10,proposed,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);

  const auto best = best_rows(r);
  REQUIRE(best.size() == 4);
  for (const SweepRow& b : best) {
    for (const SweepRow& row : r.rows) {
      if (row.method == b.method) CHECK(row.mean_iou_percent <= b.mean_iou_percent);
    }
  }
}

TEST_CASE("missing ground truth skips the image") {
  const auto dir = testing::scratch_dir("sweep_missing");
  const auto data = testing::write_shape_dataset(dir, 2, 3, 32, 48);
  std::ofstream(data.manifest, std::ios::app) << "img0.ppm\timg0.fmap\tnowhere.pgm\n";
  const HashModel model = load_model(data.model);
  SweepConfig config;
  config.counts = {20};
  config.methods = {Method::slic};
  const SweepResult r = sweep_superpixels(read_manifest(data.manifest), &model, config);
  REQUIRE(r.notices.size() == 1);
  CHECK(r.notices[0].skipped);
  CHECK(r.notices[0].message.find("nowhere.pgm") != std::string::npos);
  CHECK(r.details.size() == 2);
  CHECK(format_sweep_details(r).find("\"skipped\":true") != std::string::npos);

  std::ofstream(dir / "lonely.tsv") << "img0.ppm\timg0.fmap\tnowhere.pgm\n";
  CHECK_THROWS_AS(sweep_superpixels(read_manifest(dir / "lonely.tsv"), &model, config), Error);
}

TEST_CASE("sweep preconditions") {
  const HashModel model = flat_model();
  SweepConfig config;
  auto load = [](std::size_t) { return uniform_item(); };
  CHECK_THROWS_AS(sweep_superpixels(0, load, &model, config), Error);
  config.counts.clear();
  CHECK_THROWS_AS(sweep_superpixels(1, load, &model, config), Error);
  config = {};
  CHECK_THROWS_AS(sweep_superpixels(1, load, nullptr, config), Error);

  const auto dir = testing::scratch_dir("sweep_manifest");
  std::ofstream(dir / "bad.tsv") << "# header\n\nonly-one-field\n";
  CHECK_THROWS_AS(read_manifest(dir / "bad.tsv"), Error);
  CHECK(parse_method("kmeans") == Method::kmeans);
  CHECK_THROWS_AS(parse_method("watershed"), Error);
}
