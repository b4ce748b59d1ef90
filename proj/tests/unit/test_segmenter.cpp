#include <algorithm>
#include <random>
#include <set>

#include "binseg/errors.hpp"
#include "binseg/segmenter.hpp"
#include "doctest.h"
#include "partition.hpp"
#include "synthetic.hpp"

using namespace binseg;
using binseg::testing::same_partition;

namespace {

LabelMap row_of(int n) {
  std::vector<std::int32_t> raw(n);
  for (int i = 0; i < n; ++i) raw[i] = i;
  return LabelMap::from_raw(1, n, raw);
}

std::set<std::pair<std::int32_t, std::int32_t>> brute_force_edges(const LabelMap& m) {
  std::set<std::pair<std::int32_t, std::int32_t>> edges;
  for (int r1 = 0; r1 < m.height; ++r1) {
    for (int c1 = 0; c1 < m.width; ++c1) {
      for (int r2 = 0; r2 < m.height; ++r2) {
        for (int c2 = 0; c2 < m.width; ++c2) {
          if (std::abs(r1 - r2) + std::abs(c1 - c2) != 1) continue;
          const auto a = m.at(r1, c1), b = m.at(r2, c2);
          if (a != b) edges.emplace(std::min(a, b), std::max(a, b));
        }
      }
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("region adjacency") {
  const std::vector<std::int32_t> stripes{0, 0, 1, 1, 0, 0, 1, 1};
  const RegionAdjacencyGraph two = build_rag(LabelMap::from_raw(2, 4, stripes));
  CHECK(two.edges == std::vector<std::pair<std::int32_t, std::int32_t>>{{0, 1}});

  const std::vector<std::int32_t> blocks{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3};
  const RegionAdjacencyGraph grid = build_rag(LabelMap::from_raw(4, 4, blocks));
  CHECK(grid.edges.size() == 4);
  CHECK(std::find(grid.edges.begin(), grid.edges.end(), std::make_pair(0, 3)) == grid.edges.end());

  std::mt19937_64 rng(1);
  for (int labels : {3, 40}) {
    const LabelMap m = testing::random_labels(rng, 50, 50, labels);
    const RegionAdjacencyGraph g = build_rag(m);
    const auto oracle = brute_force_edges(m);
    CHECK(std::vector<std::pair<std::int32_t, std::int32_t>>(oracle.begin(), oracle.end()) == g.edges);
    CHECK(g.num_regions == m.num_labels);
  }
}

TEST_CASE("code upsampling") {
  SUBCASE("exact 2x scaling") {
    const BinaryCodeMap b{2, 2, 4, 4, 4, {1, 2, 3, 4}};
    const PixelCodes p = upsample_codes(b, 4, 4);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) CHECK(p.at(r, c) == b.at(r / 2, c / 2));
    }
  }
  SUBCASE("single cell") {
    const PixelCodes p = upsample_codes(BinaryCodeMap{1, 1, 3, 5, 7, {6}}, 5, 7);
    CHECK(std::all_of(p.codes.begin(), p.codes.end(), [](auto c) { return c == 6; }));
  }
  SUBCASE("3x3 onto 10x10 follows the floor formula") {
    BinaryCodeMap b{3, 3, 4, 10, 10, {}};
    for (int i = 0; i < 9; ++i) b.codes.push_back(i);
    const PixelCodes p = upsample_codes(b, 10, 10);
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) CHECK(p.at(r, c) == std::uint64_t((r * 3 / 10) * 3 + c * 3 / 10));
    }
    CHECK(p.at(3, 0) == 0);
    CHECK(p.at(4, 0) == 3);
  }
  CHECK_THROWS_AS(upsample_codes(BinaryCodeMap{1, 1, 3, 5, 7, {6}}, 6, 7), Error);
}

TEST_CASE("per-bit majority vote") {
  const LabelMap one = LabelMap::from_raw(1, 3, std::vector<std::int32_t>{0, 0, 0});
  CHECK(assign_superpixel_codes(one, PixelCodes{1, 3, {5, 5, 5}}, 3) == std::vector<std::uint64_t>{5});
  CHECK(assign_superpixel_codes(one, PixelCodes{1, 3, {1, 1, 0}}, 1) == std::vector<std::uint64_t>{1});
  const LabelMap two = LabelMap::from_raw(1, 2, std::vector<std::int32_t>{0, 0});
  CHECK(assign_superpixel_codes(two, PixelCodes{1, 2, {1, 0}}, 1) == std::vector<std::uint64_t>{0});
  // Bitwise, not modal: {011, 101, 110} votes 111 although no pixel has it.
  CHECK(assign_superpixel_codes(one, PixelCodes{1, 3, {3, 5, 6}}, 3) == std::vector<std::uint64_t>{7});
}

TEST_CASE("merging equal codes") {
  const LabelMap sp = row_of(4);
  const RegionAdjacencyGraph rag = build_rag(sp);
  SUBCASE("one code, connected graph") {
    const auto r = merge_equal_codes(sp, std::vector<std::uint64_t>(4, 9), rag);
    CHECK(r.labels.num_labels == 1);
  }
  SUBCASE("distinct codes") {
    const auto r = merge_equal_codes(sp, std::vector<std::uint64_t>{0, 1, 2, 3}, rag);
    CHECK(r.labels == sp);
  }
  SUBCASE("A,A,B,A") {
    const std::vector<std::uint64_t> codes{7, 7, 2, 7};
    const auto r = merge_equal_codes(sp, codes, rag);
    CHECK(r.labels.labels == std::vector<std::int32_t>{0, 0, 1, 2});
    CHECK(r.merged_from == std::vector<std::vector<std::int32_t>>{{0, 1}, {2}, {3}});
    CHECK(segment_codes(r) == std::vector<std::uint64_t>{7, 2, 7});
    const auto g = merge_equal_codes(sp, codes, rag, MergeMode::global);
    CHECK(g.labels.labels == std::vector<std::int32_t>{0, 0, 1, 0});
  }
  CHECK_THROWS_AS(merge_equal_codes(sp, std::vector<std::uint64_t>{1, 2}, rag), Error);
}

TEST_CASE("merge properties on random instances") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 40; ++t) {
    const LabelMap sp = testing::random_block_labels(rng, 20, 24, 12);
    std::vector<std::uint64_t> codes(sp.num_labels);
    for (auto& c : codes) c = rng() % 3;
    const RegionAdjacencyGraph rag = build_rag(sp);
    const auto r = merge_equal_codes(sp, codes, rag);
    r.labels.validate();
    CHECK(r.labels.num_labels <= sp.num_labels);

    // Soundness: members share a code and are chained by same-code edges.
    for (const auto& members : r.merged_from) {
      std::set<std::int32_t> reached{members.front()};
      bool grew = true;
      while (grew) {
        grew = false;
        for (const auto& [a, b] : rag.edges) {
          if (codes[a] != codes[b]) continue;
          if (reached.count(a) != reached.count(b)) {
            reached.insert(a);
            reached.insert(b);
            grew = true;
          }
        }
      }
      for (auto m : members) {
        CHECK(codes[m] == codes[members.front()]);
        CHECK(reached.count(m) == 1);
      }
    }

    // Idempotence.
    const auto again = merge_equal_codes(r.labels, segment_codes(r), build_rag(r.labels));
    CHECK(again.labels == r.labels);

    // Label permutation invariance.
    std::vector<std::int32_t> perm(sp.num_labels);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LabelMap permuted = sp;
    std::vector<std::uint64_t> permuted_codes(codes.size());
    for (auto& l : permuted.labels) l = perm[l];
    for (std::size_t i = 0; i < codes.size(); ++i) permuted_codes[perm[i]] = codes[i];
    const auto p = merge_equal_codes(permuted, permuted_codes, build_rag(permuted));
    CHECK(same_partition(p.labels, r.labels));
  }
}

TEST_CASE("mean features") {
  const LabelMap sp = LabelMap::from_raw(1, 2, std::vector<std::int32_t>{0, 0});
  Eigen::MatrixXd px(2, 1);
  px << 0.0, 2.0;
  CHECK(superpixel_mean_features(sp, px)(0, 0) == 1.0);

  const LabelMap three = LabelMap::from_raw(2, 3, std::vector<std::int32_t>{0, 0, 1, 2, 2, 1});
  Eigen::MatrixXd f(6, 2);
  f << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50, 6, 60;
  const Eigen::MatrixXd m = superpixel_mean_features(three, f);
  // Manual accumulation: {1,2}, {3,6}, {4,5}.
  CHECK(m(0, 0) == 1.5);
  CHECK(m(1, 1) == 45.0);
  CHECK(m(2, 0) == 4.5);

  const Eigen::MatrixXd constant = superpixel_mean_features(three, Eigen::MatrixXd::Constant(6, 2, 3.25));
  CHECK((constant.array() == 3.25).all());

  // The feature-map overload equals expanding the map to pixels first.
  const auto scene = testing::shape_scene(5, 48, 64);
  const FeatureMap fmap = testing::pseudo_features(scene.image);
  std::mt19937_64 rng(2);
  const LabelMap regions = testing::random_block_labels(rng, 48, 64, 9);
  Eigen::MatrixXd per_pixel(48 * 64, fmap.channels);
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 64; ++c) {
      const auto v = fmap.vector_at(r * fmap.height / 48, c * fmap.width / 64);
      for (int d = 0; d < fmap.channels; ++d) per_pixel(r * 64 + c, d) = v[d];
    }
  }
  CHECK((superpixel_mean_features(regions, fmap) - superpixel_mean_features(regions, per_pixel)).cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("k-means") {
  Eigen::MatrixXd pts(4, 1);
  pts << 0.0, 0.1, 10.0, 10.1;
  const KMeansResult r = kmeans(pts, 2, 7);
  CHECK(r.assignment[0] == r.assignment[1]);
  CHECK(r.assignment[2] == r.assignment[3]);
  CHECK(r.assignment[0] != r.assignment[2]);

  // Exhaustive 2-partition oracle on the same points.
  double best = 1e300;
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < 15; ++mask) {
    double cost = 0;
    for (int side = 0; side < 2; ++side) {
      double sum = 0, n = 0;
      for (int i = 0; i < 4; ++i) {
        if (((mask >> i) & 1u) == unsigned(side)) sum += pts(i), n += 1;
      }
      for (int i = 0; i < 4; ++i) {
        if (((mask >> i) & 1u) == unsigned(side)) cost += (pts(i) - sum / n) * (pts(i) - sum / n);
      }
    }
    if (cost < best) best = cost, best_mask = mask;
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK((r.assignment[i] == r.assignment[j]) == (((best_mask >> i) & 1u) == ((best_mask >> j) & 1u)));
    }
  }

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd cloud(300, 3);
  for (int i = 0; i < cloud.size(); ++i) cloud.data()[i] = n(rng);
  const KMeansResult a = kmeans(cloud, 8, 99), b = kmeans(cloud, 8, 99);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  CHECK_THROWS_AS(kmeans(pts, 5, 1), Error);
  CHECK(kmeans(Eigen::MatrixXd::Zero(5, 2), 3, 1).assignment.size() == 5);
}

TEST_CASE("k-means merge") {
  const LabelMap sp = row_of(4);
  const RegionAdjacencyGraph rag = build_rag(sp);
  Eigen::MatrixXd feats(4, 1);
  feats << 0.0, 0.1, 10.0, 10.1;
  CHECK(kmeans_merge(sp, feats, 4, 0, rag).labels == sp);
  CHECK(kmeans_merge(sp, feats, 1, 0, rag).labels.num_labels == 1);
  const auto two = kmeans_merge(sp, feats, 2, 0, rag);
  CHECK(two.labels.labels == std::vector<std::int32_t>{0, 0, 1, 1});
}

TEST_CASE("segmenting with a binary map composes the individual steps") {
  const auto scene = testing::shape_scene(8, 48, 64);
  const FeatureMap fmap = testing::pseudo_features(scene.image);
  const HashModel model = train_hash_model(samples_from(fmap), {6, 30, 0}).model;
  const BinaryCodeMap codes = encode_feature_map(model, fmap);
  std::mt19937_64 rng(3);
  const LabelMap sp = testing::random_block_labels(rng, 48, 64, 30);
  const auto codes_per_sp = assign_superpixel_codes(sp, upsample_codes(codes, 48, 64), 6);
  const auto manual = merge_equal_codes(sp, codes_per_sp, build_rag(sp));
  const auto chained = segment_with_binary_map(sp, codes);
  CHECK(chained.labels == manual.labels);
  CHECK(chained.superpixel_codes == manual.superpixel_codes);
  CHECK(chained.merged_from == manual.merged_from);
}

TEST_CASE("segment sidecar") {
  const LabelMap sp = row_of(4);
  const auto r = merge_equal_codes(sp, std::vector<std::uint64_t>{0xa, 0xa, 0x3, 0xa}, build_rag(sp));
  CHECK(format_segment_sidecar(r, 8) == "# segment\tcode\tsuperpixels\n0\t0a\t0 1\n1\t03\t2\n2\t0a\t3\n");
  CHECK(format_segment_sidecar(r, 5).find("0\t0a\t") != std::string::npos);
}

TEST_CASE("merge mode names") {
  CHECK(parse_merge_mode("adjacency") == MergeMode::adjacency);
  CHECK(parse_merge_mode("global") == MergeMode::global);
  CHECK(to_string(MergeMode::global) == "global");
  CHECK_THROWS_AS(parse_merge_mode("nearby"), Error);
}
