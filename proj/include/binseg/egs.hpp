#pragma once

#include "binseg/tensor_io.hpp"

namespace binseg {

/// Parameters of the graph-based baseline. The defaults are the ones used
/// for every benchmark run (sigma 1.0, k 100, min_size 20).
struct EgsParams {
  double sigma = 1.0;
  double k = 100.0;
  int min_size = 20;

  void validate() const;
};

/// Felzenszwalb-Huttenlocher segmentation on the 8-connected pixel grid
/// with Euclidean RGB edge weights over the Gaussian-smoothed image.
LabelMap egs_segment(const RasterImage& image, const EgsParams& params = {});

/// Per-channel separable Gaussian smoothing (radius ceil(4 sigma), clamped
/// borders). Returns planar R, G, B buffers.
struct SmoothedImage {
  int height = 0, width = 0;
  std::vector<float> r, g, b;
};
SmoothedImage gaussian_smooth(const RasterImage& image, double sigma);

}  // namespace binseg
