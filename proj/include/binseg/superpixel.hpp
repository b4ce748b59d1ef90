#pragma once

#include <vector>

#include "binseg/tensor_io.hpp"

namespace binseg {

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

/// sRGB (D65) to CIELAB, one triple per pixel in raster order.
std::vector<Lab> rgb_to_lab(const RasterImage& image);
Lab rgb_to_lab(Rgb pixel);

struct SlicParams {
  int num_superpixels = 300;
  double compactness = 10.0;
  int iterations = 10;
  /// Components smaller than this fraction of the nominal superpixel area
  /// (pixels / num_superpixels) are absorbed by a neighbour.
  double min_region_frac = 0.25;

  void validate(std::size_t pixel_count) const;
};

/// Grid-seeded local k-means in (L, a, b, x, y) followed by connectivity
/// enforcement. The output is fully determined by the image and params.
LabelMap slic(const RasterImage& image, const SlicParams& params);

/// Splits every label into its 4-connected components, then absorbs each
/// component smaller than `min_size` into the neighbour sharing the longest
/// boundary (lowest neighbouring label on ties). Output labels are numbered
/// by first appearance in raster order.
LabelMap enforce_connectivity(const LabelMap& labels, int min_size);

/// Number of 4-adjacent pixel pairs whose labels differ.
std::size_t boundary_length(const LabelMap& labels);

}  // namespace binseg
