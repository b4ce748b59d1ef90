#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "binseg/tensor_io.hpp"

namespace binseg {

inline constexpr int kDefaultCodeLength = 8;
inline constexpr int kDefaultItqIterations = 50;
inline constexpr int kMaxCodeLength = 64;

/// Per-location binary codes on the feature grid. Bit i of a code is the
/// output of hashing neuron i.
struct BinaryCodeMap {
  int height = 0;
  int width = 0;
  int code_len = 0;
  int source_height = 0;
  int source_width = 0;
  std::vector<std::uint64_t> codes;

  std::uint64_t at(int y, int x) const { return codes[static_cast<std::size_t>(y) * width + x]; }
  void validate() const;
  bool operator==(const BinaryCodeMap&) const = default;
};

/// Learned binary encoder: a mean, an orthonormal D x c projection and an
/// orthogonal c x c rotation. Weights are held at float32 precision, which
/// is also the precision of the model file.
class HashModel {
 public:
  HashModel(Eigen::VectorXf mean, Eigen::MatrixXf projection, Eigen::MatrixXf rotation);

  int input_dim() const { return static_cast<int>(mean_.size()); }
  int code_len() const { return static_cast<int>(rotation_.rows()); }
  const Eigen::VectorXf& mean() const { return mean_; }
  const Eigen::MatrixXf& projection() const { return projection_; }
  const Eigen::MatrixXf& rotation() const { return rotation_; }

  /// Effective layer weights P*R (D x c), evaluated in double precision.
  const Eigen::MatrixXd& weights() const { return weights_; }

  /// Pre-activations t = (x - mean) . W, one per bit.
  Eigen::VectorXd preactivations(std::span<const float> x) const;

  bool operator==(const HashModel& other) const;

 private:
  Eigen::VectorXf mean_;
  Eigen::MatrixXf projection_;
  Eigen::MatrixXf rotation_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd mean_d_;
};

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd projection;  // D x c, columns by descending eigenvalue
  Eigen::VectorXd eigenvalues;  // top c, descending
};

enum class PcaMethod {
  automatic,   // covariance when N > D, Gram matrix otherwise
  covariance,  // eigendecomposition of the D x D covariance
  gram,        // eigendecomposition of the N x N Gram matrix
};

/// Top-c principal directions of the rows of `samples` (N x D). Each
/// column's largest-magnitude entry is made non-negative.
PcaResult fit_pca(const Eigen::MatrixXd& samples, int code_len,
                  PcaMethod method = PcaMethod::automatic);

struct ItqOptions {
  int iterations = kDefaultItqIterations;
  std::uint64_t seed = 0;
  /// Overrides the seeded random orthogonal start.
  std::optional<Eigen::MatrixXd> initial_rotation;
};

struct ItqTrainReport {
  int iterations = 0;
  /// ||B - V R||_F^2 with B = sign(V R), evaluated at the start of each
  /// iteration (before that iteration's Procrustes update).
  std::vector<double> loss_per_iter;
  /// ||B - V R'||_F^2 right after each Procrustes update, same B.
  std::vector<double> loss_after_rotation;
  /// ||R^T R - I||_inf after each update.
  std::vector<double> orthogonality_error;
  /// Loss of the returned rotation.
  double final_loss = 0.0;
};

struct ItqResult {
  Eigen::MatrixXd rotation;
  ItqTrainReport report;
};

/// Seeded random orthogonal c x c matrix: QR of a Gaussian matrix with the
/// signs fixed so R of the factorisation has a positive diagonal.
Eigen::MatrixXd random_rotation(int code_len, std::uint64_t seed);

/// ||sign(V R) - V R||_F^2 with sign(0) = +1.
double quantization_loss(const Eigen::MatrixXd& projected, const Eigen::MatrixXd& rotation);

/// Iterative quantization over PCA-projected data `projected` (N x c).
ItqResult train_itq(const Eigen::MatrixXd& projected, const ItqOptions& options = {});

struct HashTrainOptions {
  int code_len = kDefaultCodeLength;
  int iterations = kDefaultItqIterations;
  std::uint64_t seed = 0;
  PcaMethod pca_method = PcaMethod::automatic;
};

struct HashTrainResult {
  HashModel model;
  ItqTrainReport report;
};

/// fit_pca followed by train_itq on the centered, projected samples.
HashTrainResult train_hash_model(const Eigen::MatrixXd& samples, const HashTrainOptions& options = {});

/// Copies every row of an FVEC corpus, or every grid location of a feature
/// map, into an N x D sample matrix.
Eigen::MatrixXd samples_from(const FeatureMatrix& corpus);
Eigen::MatrixXd samples_from(const FeatureMap& fmap);

/// Logistic function used by the encoding layer.
double sigmoid(double t);

/// Threshold applied to a sigmoid activation: 0 for v <= 0.5, 1 above.
inline int threshold_bit(double activation) { return activation > 0.5 ? 1 : 0; }

/// Binary code of one feature vector; bit i (least significant first) is
/// threshold_bit(sigmoid(t_i)).
std::uint64_t encode_vector(const HashModel& model, std::span<const float> x);

/// Codes for every location of `fmap`. Rows may be spread over `jobs`
/// threads; the result does not depend on it.
BinaryCodeMap encode_feature_map(const HashModel& model, const FeatureMap& fmap, int jobs = 1);

// Model container: "ITQ1", u32le D, u32le c, u32le reserved, then float32le
// mean (D), projection (D x c, row-major), rotation (c x c, row-major).
inline constexpr std::size_t kModelHeaderSize = 16;
Bytes encode_model(const HashModel& model);
HashModel decode_model(ByteView bytes);
void save_model(const HashModel& model, const std::filesystem::path& path);
HashModel load_model(const std::filesystem::path& path);

// Code-map container: "BMAP", u8 version 1, u8 code_len, u16 reserved,
// u32le H', W', source height, source width, then H'*W' u64le codes.
inline constexpr std::size_t kCodeMapHeaderSize = 24;
Bytes encode_code_map(const BinaryCodeMap& codes);
BinaryCodeMap decode_code_map(ByteView bytes);
void write_code_map(const BinaryCodeMap& codes, const std::filesystem::path& path);
BinaryCodeMap read_code_map(const std::filesystem::path& path);

}  // namespace binseg
