#include "binseg/itq.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "binseg/errors.hpp"
#include "binseg/parallel.hpp"
#include "byte_codec.hpp"

namespace binseg {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr double kOrthogonalityTolerance = 1e-6;
constexpr double kRankTolerance = 1e-10;

double orthogonality_error(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

bool code_fits(std::uint64_t code, int code_len) {
  return code_len >= 64 || code < (std::uint64_t{1} << code_len);
}

void fix_column_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index argmax = 0;
    columns.col(j).cwiseAbs().maxCoeff(&argmax);
    if (columns(argmax, j) < 0) columns.col(j) *= -1.0;
  }
}

Eigen::MatrixXd sign_of(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace

// --- BinaryCodeMap --------------------------------------------------------

void BinaryCodeMap::validate() const {
  if (height <= 0 || width <= 0 || code_len < 1 || code_len > kMaxCodeLength) {
    throw Error(ErrorCode::invalid_argument, "code map dimensions out of range");
  }
  if (source_height < height || source_width < width) {
    throw Error(ErrorCode::invalid_argument, "code grid is finer than the source image");
  }
  if (codes.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::invalid_argument, "code map size does not match its grid");
  }
  for (std::uint64_t c : codes) {
    if (!code_fits(c, code_len)) throw Error(ErrorCode::invalid_argument, "code exceeds code length");
  }
}

// --- HashModel ------------------------------------------------------------

HashModel::HashModel(Eigen::VectorXf mean, Eigen::MatrixXf projection, Eigen::MatrixXf rotation)
    : mean_(std::move(mean)), projection_(std::move(projection)), rotation_(std::move(rotation)) {
  const Eigen::Index d = mean_.size();
  const Eigen::Index c = rotation_.rows();
  if (d < 1 || c < 1 || c > kMaxCodeLength || c > d) {
    throw Error(ErrorCode::invalid_argument, "hash model needs 1 <= code_len <= min(64, input_dim)");
  }
  if (projection_.rows() != d || projection_.cols() != c || rotation_.cols() != c) {
    throw Error(ErrorCode::dimension_mismatch, "hash model matrices have inconsistent shapes");
  }
  if (!mean_.allFinite() || !projection_.allFinite() || !rotation_.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "hash model holds non-finite weights");
  }
  const Eigen::MatrixXd p = projection_.cast<double>();
  const Eigen::MatrixXd r = rotation_.cast<double>();
  if (orthogonality_error(p) > kOrthogonalityTolerance) {
    throw Error(ErrorCode::invalid_argument, "projection columns are not orthonormal");
  }
  if (orthogonality_error(r) > kOrthogonalityTolerance) {
    throw Error(ErrorCode::invalid_argument, "rotation is not orthogonal");
  }
  weights_ = p * r;
  mean_d_ = mean_.cast<double>();
}

Eigen::VectorXd HashModel::preactivations(std::span<const float> x) const {
  if (static_cast<Eigen::Index>(x.size()) != mean_d_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "feature vector has length " + std::to_string(x.size()) +
                                                   ", model expects " + std::to_string(input_dim()));
  }
  Eigen::VectorXd centered(mean_d_.size());
  for (Eigen::Index i = 0; i < centered.size(); ++i) centered[i] = static_cast<double>(x[i]) - mean_d_[i];
  return weights_.transpose() * centered;
}

bool HashModel::operator==(const HashModel& other) const {
  return mean_.size() == other.mean_.size() && rotation_.rows() == other.rotation_.rows() &&
         mean_ == other.mean_ && projection_ == other.projection_ && rotation_ == other.rotation_;
}

// --- Training -------------------------------------------------------------

PcaResult fit_pca(const Eigen::MatrixXd& samples, int code_len, PcaMethod method) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (code_len < 1 || code_len > d) {
    throw Error(ErrorCode::invalid_argument, "code length must be in [1, D]");
  }
  if (n < code_len) {
    throw Error(ErrorCode::invalid_argument,
                "need at least code_len samples (" + std::to_string(n) + " < " + std::to_string(code_len) + ")");
  }
  if (!samples.allFinite()) throw Error(ErrorCode::invalid_argument, "samples hold non-finite values");

  PcaResult out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();

  if (method == PcaMethod::automatic) method = n > d ? PcaMethod::covariance : PcaMethod::gram;

  const Eigen::MatrixXd scatter = method == PcaMethod::covariance
                                      ? Eigen::MatrixXd(centered.transpose() * centered / double(n))
                                      : Eigen::MatrixXd(centered * centered.transpose() / double(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::degenerate_input, "eigendecomposition did not converge");
  }
  // Eigen returns ascending eigenvalues.
  const Eigen::Index m = scatter.rows();
  out.eigenvalues.resize(code_len);
  Eigen::MatrixXd top(m, code_len);
  for (int j = 0; j < code_len; ++j) {
    out.eigenvalues[j] = eig.eigenvalues()[m - 1 - j];
    top.col(j) = eig.eigenvectors().col(m - 1 - j);
  }
  const double largest = out.eigenvalues[0];
  if (!(largest > 0.0) || out.eigenvalues[code_len - 1] <= kRankTolerance * largest) {
    throw Error(ErrorCode::rank_deficient,
                "centered samples have rank below the code length " + std::to_string(code_len));
  }

  if (method == PcaMethod::covariance) {
    out.projection = std::move(top);
  } else {
    // Xc^T u / sqrt(n * lambda) maps a Gram eigenvector to the matching
    // unit covariance eigenvector.
    out.projection = centered.transpose() * top;
    for (int j = 0; j < code_len; ++j) {
      out.projection.col(j) /= std::sqrt(double(n) * out.eigenvalues[j]);
    }
  }
  fix_column_signs(out.projection);
  return out;
}

Eigen::MatrixXd random_rotation(int code_len, std::uint64_t seed) {
  if (code_len < 1) throw Error(ErrorCode::invalid_argument, "code length must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(code_len, code_len);
  for (int r = 0; r < code_len; ++r) {
    for (int c = 0; c < code_len; ++c) g(r, c) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(code_len, code_len);
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (int j = 0; j < code_len; ++j) {
    if (packed(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

double quantization_loss(const Eigen::MatrixXd& projected, const Eigen::MatrixXd& rotation) {
  const Eigen::MatrixXd z = projected * rotation;
  return (sign_of(z) - z).squaredNorm();
}

ItqResult train_itq(const Eigen::MatrixXd& projected, const ItqOptions& options) {
  const Eigen::Index c = projected.cols();
  if (c < 1 || projected.rows() < 1) throw Error(ErrorCode::invalid_argument, "empty projected data");
  if (options.iterations < 1) throw Error(ErrorCode::invalid_argument, "ITQ needs at least one iteration");
  if (!projected.allFinite()) throw Error(ErrorCode::invalid_argument, "projected data hold non-finite values");
  if (projected.isZero(0.0)) {
    throw Error(ErrorCode::degenerate_input, "projected data are all zero; the Procrustes SVD is degenerate");
  }

  Eigen::MatrixXd rotation;
  if (options.initial_rotation) {
    rotation = *options.initial_rotation;
    if (rotation.rows() != c || rotation.cols() != c || orthogonality_error(rotation) > kOrthogonalityTolerance) {
      throw Error(ErrorCode::invalid_argument, "initial rotation must be an orthogonal c x c matrix");
    }
  } else {
    rotation = random_rotation(static_cast<int>(c), options.seed);
  }

  ItqResult result;
  ItqTrainReport& report = result.report;
  report.iterations = options.iterations;
  report.loss_per_iter.reserve(options.iterations);
  report.loss_after_rotation.reserve(options.iterations);
  report.orthogonality_error.reserve(options.iterations);

  for (int it = 0; it < options.iterations; ++it) {
    const Eigen::MatrixXd z = projected * rotation;
    const Eigen::MatrixXd codes = sign_of(z);
    report.loss_per_iter.push_back((codes - z).squaredNorm());

    // Orthogonal Procrustes: B^T V = S W S'^T, R = S' S^T.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(codes.transpose() * projected,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixV() * svd.matrixU().transpose();

    report.loss_after_rotation.push_back((codes - projected * rotation).squaredNorm());
    report.orthogonality_error.push_back(orthogonality_error(rotation));
  }
  report.final_loss = quantization_loss(projected, rotation);
  result.rotation = std::move(rotation);
  return result;
}

HashTrainResult train_hash_model(const Eigen::MatrixXd& samples, const HashTrainOptions& options) {
  if (options.code_len > kMaxCodeLength) {
    throw Error(ErrorCode::invalid_argument, "code length above 64 bits");
  }
  PcaResult pca = fit_pca(samples, options.code_len, options.pca_method);
  const Eigen::MatrixXd projected = (samples.rowwise() - pca.mean.transpose()) * pca.projection;
  ItqOptions itq;
  itq.iterations = options.iterations;
  itq.seed = options.seed;
  ItqResult trained = train_itq(projected, itq);
  return {HashModel(pca.mean.cast<float>(), pca.projection.cast<float>(), trained.rotation.cast<float>()),
          std::move(trained.report)};
}

Eigen::MatrixXd samples_from(const FeatureMatrix& corpus) {
  Eigen::MatrixXd out(corpus.rows, corpus.cols);
  for (int r = 0; r < corpus.rows; ++r) {
    const auto row = corpus.row(r);
    for (int c = 0; c < corpus.cols; ++c) out(r, c) = row[c];
  }
  return out;
}

Eigen::MatrixXd samples_from(const FeatureMap& fmap) {
  const int cells = fmap.height * fmap.width;
  Eigen::MatrixXd out(cells, fmap.channels);
  for (int c = 0; c < fmap.channels; ++c) {
    for (int i = 0; i < cells; ++i) out(i, c) = fmap.data[static_cast<std::size_t>(c) * cells + i];
  }
  return out;
}

// --- Encoding -------------------------------------------------------------

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::uint64_t encode_vector(const HashModel& model, std::span<const float> x) {
  const Eigen::VectorXd t = model.preactivations(x);
  std::uint64_t code = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (threshold_bit(sigmoid(t[i]))) code |= std::uint64_t{1} << i;
  }
  return code;
}

BinaryCodeMap encode_feature_map(const HashModel& model, const FeatureMap& fmap, int jobs) {
  if (fmap.channels != model.input_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "feature map has " + std::to_string(fmap.channels) +
                                                   " channels, model expects " +
                                                   std::to_string(model.input_dim()));
  }
  BinaryCodeMap out{fmap.height, fmap.width, model.code_len(), fmap.source_height, fmap.source_width, {}};
  out.codes.resize(static_cast<std::size_t>(fmap.height) * fmap.width);
  parallel_for(static_cast<std::size_t>(fmap.height), jobs, [&](std::size_t y) {
    for (int x = 0; x < fmap.width; ++x) {
      out.codes[y * fmap.width + x] = encode_vector(model, fmap.vector_at(static_cast<int>(y), x));
    }
  });
  return out;
}

// --- Containers -----------------------------------------------------------

Bytes encode_model(const HashModel& model) {
  const int d = model.input_dim();
  const int c = model.code_len();
  ByteWriter out(kModelHeaderSize + 4 * (static_cast<std::size_t>(d) * (c + 1) + c * c));
  out.tag("ITQ1");
  out.u32(static_cast<std::uint32_t>(d));
  out.u32(static_cast<std::uint32_t>(c));
  out.u32(0);
  for (int i = 0; i < d; ++i) out.f32(model.mean()[i]);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < c; ++j) out.f32(model.projection()(i, j));
  }
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) out.f32(model.rotation()(i, j));
  }
  return std::move(out).take();
}

HashModel decode_model(ByteView bytes) {
  ByteReader in(bytes);
  if (!in.tag_matches("ITQ1")) {
    if (bytes.size() < 4) throw FormatError(ErrorCode::truncated, 0, "file too short for magic");
    throw FormatError(ErrorCode::bad_magic, 0, "expected magic \"ITQ1\"");
  }
  in.skip(4);
  const std::uint32_t d = in.u32();
  const std::uint32_t c = in.u32();
  if (d == 0 || d > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
    throw FormatError(ErrorCode::bad_header, 4, "input dimension out of range");
  }
  if (c == 0 || c > kMaxCodeLength || c > d) {
    throw FormatError(ErrorCode::bad_header, 8, "code length out of range");
  }
  if (in.u32() != 0) throw FormatError(ErrorCode::bad_header, 12, "reserved word must be 0");
  const std::uint64_t expected = 4 * (std::uint64_t{d} * (c + 1) + std::uint64_t{c} * c);
  if (in.remaining() != expected) {
    throw FormatError(ErrorCode::size_mismatch, in.offset(),
                      "payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(expected));
  }
  auto next = [&in]() {
    const std::size_t at = in.offset();
    const float v = in.f32();
    if (!std::isfinite(v)) throw FormatError(ErrorCode::non_finite, at, "non-finite model weight");
    return v;
  };
  Eigen::VectorXf mean(d);
  for (std::uint32_t i = 0; i < d; ++i) mean[i] = next();
  Eigen::MatrixXf projection(d, c);
  for (std::uint32_t i = 0; i < d; ++i) {
    for (std::uint32_t j = 0; j < c; ++j) projection(i, j) = next();
  }
  Eigen::MatrixXf rotation(c, c);
  for (std::uint32_t i = 0; i < c; ++i) {
    for (std::uint32_t j = 0; j < c; ++j) rotation(i, j) = next();
  }
  try {
    return HashModel(std::move(mean), std::move(projection), std::move(rotation));
  } catch (const Error& e) {
    throw FormatError(ErrorCode::bad_header, kModelHeaderSize, std::string("invalid model weights: ") + e.what());
  }
}

void save_model(const HashModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

HashModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

Bytes encode_code_map(const BinaryCodeMap& codes) {
  codes.validate();
  ByteWriter out(kCodeMapHeaderSize + codes.codes.size() * 8);
  out.tag("BMAP");
  out.u8(0x01);
  out.u8(static_cast<std::uint8_t>(codes.code_len));
  out.u8(0);
  out.u8(0);
  out.u32(static_cast<std::uint32_t>(codes.height));
  out.u32(static_cast<std::uint32_t>(codes.width));
  out.u32(static_cast<std::uint32_t>(codes.source_height));
  out.u32(static_cast<std::uint32_t>(codes.source_width));
  for (std::uint64_t v : codes.codes) out.u64(v);
  return std::move(out).take();
}

BinaryCodeMap decode_code_map(ByteView bytes) {
  ByteReader in(bytes);
  if (!in.tag_matches("BMAP")) {
    if (bytes.size() < 4) throw FormatError(ErrorCode::truncated, 0, "file too short for magic");
    throw FormatError(ErrorCode::bad_magic, 0, "expected magic \"BMAP\"");
  }
  in.skip(4);
  if (in.u8() != 0x01) throw FormatError(ErrorCode::unsupported_version, 4, "unsupported BMAP version");
  BinaryCodeMap out;
  out.code_len = in.u8();
  if (out.code_len < 1 || out.code_len > kMaxCodeLength) {
    throw FormatError(ErrorCode::bad_header, 5, "code length out of range");
  }
  if (in.u8() != 0 || in.u8() != 0) throw FormatError(ErrorCode::bad_header, 6, "reserved bytes must be 0");
  std::uint32_t dims[4];
  for (int i = 0; i < 4; ++i) {
    dims[i] = in.u32();
    if (dims[i] == 0 || dims[i] > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
      throw FormatError(ErrorCode::bad_header, 8 + 4 * i, "dimension out of range");
    }
  }
  out.height = static_cast<int>(dims[0]);
  out.width = static_cast<int>(dims[1]);
  out.source_height = static_cast<int>(dims[2]);
  out.source_width = static_cast<int>(dims[3]);
  if (out.source_height < out.height || out.source_width < out.width) {
    throw FormatError(ErrorCode::bad_header, 16, "code grid is finer than the source image");
  }
  const std::uint64_t cells = std::uint64_t{dims[0]} * dims[1];
  if (in.remaining() / 8 != cells || in.remaining() % 8 != 0) {
    throw FormatError(ErrorCode::size_mismatch, in.offset(), "payload does not match H' x W' codes");
  }
  out.codes.resize(cells);
  for (auto& code : out.codes) {
    const std::size_t at = in.offset();
    code = in.u64();
    if (!code_fits(code, out.code_len)) throw FormatError(ErrorCode::bad_header, at, "code exceeds code length");
  }
  return out;
}

void write_code_map(const BinaryCodeMap& codes, const std::filesystem::path& path) {
  write_file(path, encode_code_map(codes));
}

BinaryCodeMap read_code_map(const std::filesystem::path& path) { return decode_code_map(read_file(path)); }

}  // namespace binseg
