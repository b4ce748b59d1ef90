#include "binseg/egs.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "binseg/disjoint_sets.hpp"
#include "binseg/errors.hpp"

namespace binseg {

namespace {

struct Edge {
  float weight;
  std::uint32_t a, b;  // a < b
};

std::vector<float> convolve_rows(const std::vector<float>& src, int h, int w, const std::vector<float>& kernel) {
  const int radius = static_cast<int>(kernel.size()) - 1;
  std::vector<float> dst(src.size());
  for (int y = 0; y < h; ++y) {
    const float* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = kernel[0] * row[x];
      for (int i = 1; i <= radius; ++i) {
        acc += kernel[i] * (row[std::max(x - i, 0)] + row[std::min(x + i, w - 1)]);
      }
      dst[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return dst;
}

std::vector<float> convolve_cols(const std::vector<float>& src, int h, int w, const std::vector<float>& kernel) {
  const int radius = static_cast<int>(kernel.size()) - 1;
  std::vector<float> dst(src.size());
  auto at = [&](int y, int x) { return src[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = kernel[0] * at(y, x);
      for (int i = 1; i <= radius; ++i) {
        acc += kernel[i] * (at(std::max(y - i, 0), x) + at(std::min(y + i, h - 1), x));
      }
      dst[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return dst;
}

}  // namespace

void EgsParams::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0");
  if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorCode::invalid_argument, "k must be positive");
  if (min_size < 1) throw Error(ErrorCode::invalid_argument, "min_size must be positive");
}

SmoothedImage gaussian_smooth(const RasterImage& image, double sigma) {
  const int h = image.height, w = image.width;
  SmoothedImage out{h, w, {}, {}, {}};
  out.r.resize(image.size());
  out.g.resize(image.size());
  out.b.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out.r[i] = image.pixels[i].r;
    out.g[i] = image.pixels[i].g;
    out.b[i] = image.pixels[i].b;
  }
  if (sigma <= 0.0) return out;

  // Half kernel, normalised so the full symmetric kernel sums to one.
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<float> kernel(radius + 1);
  double total = 0.0;
  for (int i = 0; i <= radius; ++i) {
    kernel[i] = static_cast<float>(std::exp(-0.5 * (i / sigma) * (i / sigma)));
    total += (i == 0 ? 1.0 : 2.0) * kernel[i];
  }
  for (float& v : kernel) v = static_cast<float>(v / total);

  for (auto* plane : {&out.r, &out.g, &out.b}) {
    *plane = convolve_cols(convolve_rows(*plane, h, w, kernel), h, w, kernel);
  }
  return out;
}

LabelMap egs_segment(const RasterImage& image, const EgsParams& params) {
  params.validate();
  const int h = image.height, w = image.width;
  if (h <= 0 || w <= 0 || image.pixels.size() != static_cast<std::size_t>(h) * w) {
    throw Error(ErrorCode::invalid_argument, "image shape does not match its pixel count");
  }
  const SmoothedImage s = gaussian_smooth(image, params.sigma);
  auto diff = [&](std::size_t i, std::size_t j) {
    const float dr = s.r[i] - s.r[j], dg = s.g[i] - s.g[j], db = s.b[i] - s.b[j];
    return std::sqrt(dr * dr + dg * dg + db * db);
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(h) * w * 4);
  auto add = [&](int y0, int x0, int y1, int x1) {
    const auto i = static_cast<std::uint32_t>(y0 * w + x0);
    const auto j = static_cast<std::uint32_t>(y1 * w + x1);
    edges.push_back({diff(i, j), std::min(i, j), std::max(i, j)});
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) add(y, x, y, x + 1);
      if (y + 1 < h) add(y, x, y + 1, x);
      if (x + 1 < w && y + 1 < h) add(y, x, y + 1, x + 1);
      if (x + 1 < w && y > 0) add(y, x, y - 1, x + 1);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& p, const Edge& q) {
    return std::tie(p.weight, p.a, p.b) < std::tie(q.weight, q.a, q.b);
  });

  const std::size_t n = image.size();
  DisjointSets sets(n);
  // threshold[root] = Int(C) + k / |C|; Int(C) is the last (largest) edge
  // merged into C because edges arrive in ascending order.
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    const std::size_t a = sets.find(e.a);
    const std::size_t b = sets.find(e.b);
    if (a == b) continue;
    if (e.weight <= threshold[a] && e.weight <= threshold[b]) {
      const std::size_t root = sets.join(a, b);
      threshold[root] = e.weight + params.k / double(sets.size_of(root));
    }
  }
  const auto floor = static_cast<std::size_t>(params.min_size);
  for (const Edge& e : edges) {
    const std::size_t a = sets.find(e.a);
    const std::size_t b = sets.find(e.b);
    if (a != b && (sets.size_of(a) < floor || sets.size_of(b) < floor)) sets.join(a, b);
  }

  std::vector<std::int32_t> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = static_cast<std::int32_t>(sets.find(i));
  return LabelMap::from_raster_order(h, w, roots);
}

}  // namespace binseg
