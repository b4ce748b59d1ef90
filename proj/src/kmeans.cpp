#include <limits>
#include <random>
#include <string>

#include "binseg/errors.hpp"
#include "binseg/segmenter.hpp"

namespace binseg {

namespace {

// Index of the nearest centroid; the lowest index wins ties.
std::int32_t nearest(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& points, Eigen::Index row,
                     double* distance_sq = nullptr) {
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (points.row(row) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::int32_t>(c);
    }
  }
  if (distance_sq) *distance_sq = best_d;
  return best;
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centroids.row(0) = points.row(pick);
  chosen[pick] = 1;

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        acc += d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
      // Rounding can leave r at the very top of the range.
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (!chosen[i] && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    if (pick < 0) {
      // Every remaining point coincides with a centroid.
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
    chosen[pick] = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iterations,
                    double tolerance) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be positive");
  if (k > n) {
    throw Error(ErrorCode::invalid_argument,
                "k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(n) + ")");
  }
  if (!points.allFinite()) throw Error(ErrorCode::invalid_argument, "k-means points hold non-finite values");

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = plus_plus_seeds(points, k, rng);
  result.assignment.assign(static_cast<std::size_t>(n), 0);

  for (int it = 0; it < max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) result.assignment[i] = nearest(result.centroids, points, i);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.assignment[i]) += points.row(i);
      ++counts[result.assignment[i]];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // an empty cluster keeps its centroid
      const Eigen::RowVectorXd updated = sums.row(c) / double(counts[c]);
      shift = std::max(shift, (updated - result.centroids.row(c)).norm());
      result.centroids.row(c) = updated;
    }
    result.iterations = it + 1;
    if (shift < tolerance) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) result.assignment[i] = nearest(result.centroids, points, i);
  return result;
}

}  // namespace binseg
