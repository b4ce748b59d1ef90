#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "binseg/tensor_io.hpp"

namespace binseg::testing {

/// A generated scene and its exact ground truth (0 = background).
struct ShapeScene {
  RasterImage image;
  LabelMap ground_truth;
};

/// Coloured rectangles and ellipses on a contrasting background, with mild
/// per-pixel noise. Dimensions should be multiples of the feature stride.
ShapeScene shape_scene(std::uint64_t seed, int height = 96, int width = 128);

/// Uniform random RGB noise.
RasterImage noise_image(std::uint64_t seed, int height, int width);

/// Smooth random blobs plus Gaussian noise of the given standard deviation.
RasterImage blob_image(std::uint64_t seed, int height, int width, double noise_sigma = 10.0);

inline constexpr int kPseudoFeatureDim = 16;

/// D=16 stand-in for CNN features on a stride-`stride` grid: cell means of
/// RGB smoothed at two scales, Lab, opponent colour differences, local
/// contrast and luminance.
FeatureMap pseudo_features(const RasterImage& image, int stride = 8);

/// Labels drawn uniformly from [0, num_labels), then densely renumbered.
LabelMap random_labels(std::mt19937_64& rng, int height, int width, int num_labels);

/// Random axis-aligned blocks painted over each other; regions tend to be
/// contiguous but may fragment.
LabelMap random_block_labels(std::mt19937_64& rng, int height, int width, int blocks);

/// A generated dataset written to disk: per image a PPM, an FMAP and a
/// ground-truth PGM, a manifest listing them, and an 8-bit model trained on
/// the pooled feature locations.
struct DiskDataset {
  std::filesystem::path manifest;
  std::filesystem::path model;
  std::vector<ShapeScene> scenes;
};

DiskDataset write_shape_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed, int height = 96,
                                int width = 128);

/// Fresh empty directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace binseg::testing
