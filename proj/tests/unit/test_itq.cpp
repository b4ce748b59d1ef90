#include <cmath>
#include <random>

#include "binseg/errors.hpp"
#include "binseg/itq.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace binseg;

namespace {

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed, const Eigen::VectorXd& stddev = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = normal(rng) * (stddev.size() ? stddev(j) : 1.0);
  }
  return m;
}

HashModel identity_model(int d) {
  return HashModel(Eigen::VectorXf::Zero(d), Eigen::MatrixXf::Identity(d, d), Eigen::MatrixXf::Identity(d, d));
}

}  // namespace

TEST_CASE("pca on scaled identity rows gives one unit direction") {
  Eigen::MatrixXd x = 3.0 * Eigen::MatrixXd::Identity(2, 2);
  x(0, 0) = 5.0;
  const PcaResult pca = fit_pca(x, 1);
  REQUIRE(pca.projection.rows() == 2);
  REQUIRE(pca.projection.cols() == 1);
  CHECK((pca.projection.transpose() * pca.projection)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pca finds the dominant axis of an anisotropic Gaussian") {
  const Eigen::MatrixXd x = gaussian(2000, 2, 5, Eigen::Vector2d(2.0, 1.0));
  // Oracle: closed-form eigenvector of the explicit 2x2 covariance.
  const Eigen::RowVector2d mu = x.colwise().mean();
  double sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < x.rows(); ++i) {
    const double dx = x(i, 0) - mu(0), dy = x(i, 1) - mu(1);
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double lambda = 0.5 * (sxx + syy) + std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  Eigen::Vector2d oracle(sxy, lambda - sxx);
  if (std::abs(sxy) < 1e-12) oracle = Eigen::Vector2d(1, 0);
  oracle.normalize();

  const PcaResult pca = fit_pca(x, 1);
  CHECK(std::abs(pca.projection(0, 0)) > 0.99);
  CHECK(std::abs(pca.projection.col(0).dot(oracle)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pca.eigenvalues(0) == doctest::Approx(lambda / x.rows()).epsilon(1e-9));
}

TEST_CASE("covariance and Gram routes agree") {
  const Eigen::MatrixXd x = gaussian(40, 12, 9, Eigen::VectorXd::LinSpaced(12, 3.0, 0.5));
  const PcaResult cov = fit_pca(x, 5, PcaMethod::covariance);
  const PcaResult gram = fit_pca(x, 5, PcaMethod::gram);
  CHECK((cov.projection - gram.projection).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((cov.eigenvalues - gram.eigenvalues).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((cov.mean - gram.mean).norm() < 1e-12);
}

TEST_CASE("4096-dimensional features to 8 bits") {
  const Eigen::MatrixXd x = gaussian(24, 4096, 1);
  const PcaResult pca = fit_pca(x, 8);
  CHECK(pca.mean.size() == 4096);
  CHECK(pca.projection.rows() == 4096);
  CHECK(pca.projection.cols() == 8);
  CHECK((pca.projection.transpose() * pca.projection - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pca preconditions") {
  CHECK_THROWS_AS(fit_pca(gaussian(3, 6, 1), 4), Error);
  Eigen::MatrixXd flat = gaussian(50, 4, 2);
  flat.col(2) = flat.col(0);
  flat.col(3) = 2.0 * flat.col(1);
  try {
    fit_pca(flat, 3);
    FAIL("expected rank deficiency");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank_deficient);
  }
}

TEST_CASE("random rotations are orthogonal and seeded") {
  const Eigen::MatrixXd r = random_rotation(8, 17);
  CHECK((r.transpose() * r - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(random_rotation(8, 17) == r);
  CHECK(random_rotation(8, 18) != r);
}

TEST_CASE("hypercube vertices are an ITQ fixed point") {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd v(64, 5);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = (rng() & 1) ? 1.0 : -1.0;
  ItqOptions opts;
  opts.initial_rotation = Eigen::MatrixXd::Identity(5, 5);
  const ItqResult res = train_itq(v, opts);
  CHECK(res.report.loss_per_iter.front() == 0.0);
  CHECK(res.report.final_loss < 1e-20);
  for (double e : res.report.orthogonality_error) CHECK(e <= 1e-6);
}

TEST_CASE("ITQ loss is monotone") {
  const Eigen::MatrixXd v = gaussian(1000, 4, 21);
  const ItqResult res = train_itq(v, {});
  const auto& loss = res.report.loss_per_iter;
  REQUIRE(loss.size() == 50);
  const double tol = 1e-9 * 1000 * 4;
  for (std::size_t i = 1; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1] + tol);
  for (std::size_t i = 0; i < loss.size(); ++i) CHECK(res.report.loss_after_rotation[i] <= loss[i] + tol);
  CHECK(res.report.final_loss <= loss.front());
  CHECK(res.report.final_loss == doctest::Approx(quantization_loss(v, res.rotation)).epsilon(1e-12));
}

TEST_CASE("all-zero input is degenerate") {
  try {
    train_itq(Eigen::MatrixXd::Zero(10, 3), {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_input);
  }
}

TEST_CASE("sign of zero is +1 in the training loss") {
  const Eigen::MatrixXd v = Eigen::MatrixXd::Zero(1, 2);
  CHECK(quantization_loss(v, Eigen::MatrixXd::Identity(2, 2)) == 2.0);
}

TEST_CASE("encoding at the mean gives code zero") {
  const Eigen::MatrixXd x = gaussian(100, 6, 8);
  const HashModel model = train_hash_model(x, {4, 20, 3}).model;
  std::vector<float> mu(model.mean().data(), model.mean().data() + 6);
  CHECK(encode_vector(model, mu) == 0u);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(threshold_bit(0.5) == 0);
}

TEST_CASE("hand-evaluated two-bit code") {
  const HashModel model = identity_model(2);
  CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(sigmoid(-2.0) == doctest::Approx(0.1192029220).epsilon(1e-9));
  const std::vector<float> x{1.0f, -2.0f};
  CHECK(encode_vector(model, x) == 1u);
  CHECK_THROWS_AS(encode_vector(model, std::vector<float>{1.0f}), Error);
}

TEST_CASE("feature-map encoding") {
  const HashModel model = identity_model(3);
  SUBCASE("single cell") {
    const FeatureMap f{3, 1, 1, 4, 4, {0.5f, -1.0f, 2.0f}};
    const BinaryCodeMap codes = encode_feature_map(model, f);
    CHECK(codes.codes == std::vector<std::uint64_t>{encode_vector(model, f.vector_at(0, 0))});
    CHECK(codes.codes[0] == 0b101u);
    CHECK(codes.source_height == 4);
  }
  SUBCASE("constant map") {
    const FeatureMap f{3, 4, 5, 4, 5, std::vector<float>(60, 0.3f)};
    const BinaryCodeMap codes = encode_feature_map(model, f);
    CHECK(std::all_of(codes.codes.begin(), codes.codes.end(), [&](auto c) { return c == codes.codes[0]; }));
  }
  SUBCASE("3x3 sign pattern") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<float> value(-1.0f, 1.0f);
    FeatureMap f{3, 3, 3, 9, 9, std::vector<float>(27)};
    for (float& v : f.data) v = value(rng);
    const BinaryCodeMap codes = encode_feature_map(model, f);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        std::uint64_t expected = 0;
        for (int c = 0; c < 3; ++c) expected |= std::uint64_t(f.at(c, y, x) > 0.0f) << c;
        CHECK(codes.at(y, x) == expected);
      }
    }
  }
}

TEST_CASE("encoding does not depend on the thread count") {
  const auto scene = testing::shape_scene(2);
  const FeatureMap f = testing::pseudo_features(scene.image);
  const HashModel model = train_hash_model(samples_from(f), {8, 50, 1}).model;
  CHECK(encode_feature_map(model, f, 1) == encode_feature_map(model, f, 4));
  CHECK_THROWS_AS(encode_feature_map(identity_model(3), f), Error);
}

TEST_CASE("hash model validation") {
  Eigen::MatrixXf p = Eigen::MatrixXf::Identity(3, 2);
  p(0, 0) = 2.0f;
  CHECK_THROWS_AS(HashModel(Eigen::VectorXf::Zero(3), p, Eigen::MatrixXf::Identity(2, 2)), Error);
  CHECK_THROWS_AS(HashModel(Eigen::VectorXf::Zero(3), Eigen::MatrixXf::Identity(3, 2), Eigen::MatrixXf::Identity(3, 3)),
                  Error);
}

TEST_CASE("model file round trip and size") {
  const HashModel model = train_hash_model(gaussian(60, 10, 3), {4, 10, 2}).model;
  const Bytes b = encode_model(model);
  CHECK(b.size() == 16 + 4 * (10 + 10 * 4 + 16));
  CHECK(decode_model(b) == model);
  const auto dir = testing::scratch_dir("model_roundtrip");
  save_model(model, dir / "m.itq");
  CHECK(load_model(dir / "m.itq") == model);

  CHECK_THROWS_AS(decode_model(Bytes(b.begin(), b.end() - 3)), FormatError);
  CHECK_THROWS_AS(decode_model(Bytes(b.begin(), b.begin() + 10)), FormatError);
  Bytes bad = b;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_model(bad), FormatError);

  // 4096-dimensional features, 8-bit codes.
  const std::size_t d = 4096, c = 8;
  const Eigen::MatrixXf p = Eigen::MatrixXf::Identity(d, c);
  const HashModel big(Eigen::VectorXf::Zero(d), p, Eigen::MatrixXf::Identity(c, c));
  CHECK(encode_model(big).size() == 16 + 4 * (4096 + 4096 * 8 + 64));
}

TEST_CASE("code map round trip") {
  BinaryCodeMap m{2, 3, 8, 16, 24, {1, 2, 255, 0, 7, 9}};
  CHECK(decode_code_map(encode_code_map(m)) == m);
  CHECK(encode_code_map(m).size() == kCodeMapHeaderSize + 6 * 8);
  m.codes[2] = 256;
  CHECK_THROWS_AS(encode_code_map(m), Error);
}

TEST_CASE("samples from containers") {
  const FeatureMap f{2, 1, 2, 2, 2, {1, 2, 3, 4}};
  const Eigen::MatrixXd s = samples_from(f);
  CHECK(s.rows() == 2);
  CHECK(s(1, 0) == 2.0);
  CHECK(s(1, 1) == 4.0);
  const Eigen::MatrixXd m = samples_from(FeatureMatrix{2, 2, {1, 2, 3, 4}});
  CHECK(m(1, 0) == 3.0);
}
