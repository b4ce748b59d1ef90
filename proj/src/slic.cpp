#include "binseg/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "binseg/errors.hpp"

namespace binseg {

namespace {

// D65 reference white.
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kLabEpsilon = 216.0 / 24389.0;
constexpr double kLabKappa = 24389.0 / 27.0;

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) { return t > kLabEpsilon ? std::cbrt(t) : (kLabKappa * t + 16.0) / 116.0; }

struct Center {
  double l, a, b, x, y;
};

double sq(double v) { return v * v; }

double lab_distance_sq(const Lab& p, const Lab& q) { return sq(p.l - q.l) + sq(p.a - q.a) + sq(p.b - q.b); }

}  // namespace

Lab rgb_to_lab(Rgb pixel) {
  const double r = srgb_to_linear(pixel.r);
  const double g = srgb_to_linear(pixel.g);
  const double b = srgb_to_linear(pixel.b);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<Lab> rgb_to_lab(const RasterImage& image) {
  std::vector<Lab> out(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), out.begin(),
                 [](Rgb p) { return rgb_to_lab(p); });
  return out;
}

void SlicParams::validate(std::size_t pixel_count) const {
  if (num_superpixels < 1) throw Error(ErrorCode::invalid_argument, "superpixel count must be positive");
  if (static_cast<std::size_t>(num_superpixels) > pixel_count) {
    throw Error(ErrorCode::invalid_argument, "superpixel count " + std::to_string(num_superpixels) +
                                                 " exceeds pixel count " + std::to_string(pixel_count));
  }
  if (!(compactness > 0.0)) throw Error(ErrorCode::invalid_argument, "compactness must be positive");
  if (iterations < 1) throw Error(ErrorCode::invalid_argument, "SLIC needs at least one iteration");
  if (!(min_region_frac > 0.0 && min_region_frac <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "min_region_frac must lie in (0, 1]");
  }
}

LabelMap slic(const RasterImage& image, const SlicParams& params) {
  const int h = image.height;
  const int w = image.width;
  if (h <= 0 || w <= 0 || image.pixels.size() != static_cast<std::size_t>(h) * w) {
    throw Error(ErrorCode::invalid_argument, "image shape does not match its pixel count");
  }
  const std::size_t n = image.pixels.size();
  params.validate(n);

  const std::vector<Lab> lab = rgb_to_lab(image);
  const int k = params.num_superpixels;
  const double step = std::sqrt(double(n) / k);
  auto at = [&](int y, int x) -> const Lab& { return lab[static_cast<std::size_t>(y) * w + x]; };

  // Seed grid: columns first so a two-seed grid on a square image splits
  // left/right; cells stay close to square.
  const int nx = std::clamp(static_cast<int>(std::ceil(std::sqrt(double(k) * w / h) - 1e-9)), 1, w);
  const int ny = std::clamp(static_cast<int>(std::lround(double(k) / nx)), 1, h);

  auto gradient = [&](int y, int x) {
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
    return lab_distance_sq(at(y, xr), at(y, xl)) + lab_distance_sq(at(yd, x), at(yu, x));
  };

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int cy = std::min(static_cast<int>((j + 0.5) * h / ny), h - 1);
      const int cx = std::min(static_cast<int>((i + 0.5) * w / nx), w - 1);
      // Move to the lowest-gradient pixel of the 3x3 neighbourhood.
      int by = cy, bx = cx;
      double best = std::numeric_limits<double>::infinity();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = cy + dy, x = cx + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const double g = gradient(y, x);
          if (g < best) {
            best = g;
            by = y;
            bx = x;
          }
        }
      }
      const Lab& c = at(by, bx);
      centers.push_back({c.l, c.a, c.b, double(bx), double(by)});
    }
  }

  const double spatial_weight = sq(params.compactness) / sq(step);
  const int radius = static_cast<int>(std::ceil(step));
  std::vector<std::int32_t> labels(n, -1);
  std::vector<double> dist(n);

  auto distance = [&](const Center& c, int y, int x) {
    const Lab& p = at(y, x);
    return sq(p.l - c.l) + sq(p.a - c.a) + sq(p.b - c.b) +
           (sq(x - c.x) + sq(y - c.y)) * spatial_weight;
  };

  for (int iter = 0; iter < params.iterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& c = centers[ci];
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y)) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y)) + radius);
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x)) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x)) + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const double d = distance(c, y, x);
          if (d < dist[i]) {
            dist[i] = d;
            labels[i] = static_cast<std::int32_t>(ci);
          }
        }
      }
    }

    std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::int32_t l = labels[static_cast<std::size_t>(y) * w + x];
        if (l < 0) continue;
        const Lab& p = at(y, x);
        Center& s = sums[l];
        s.l += p.l;
        s.a += p.a;
        s.b += p.b;
        s.x += x;
        s.y += y;
        ++counts[l];
      }
    }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (counts[ci] == 0) continue;
      const double inv = 1.0 / double(counts[ci]);
      centers[ci] = {sums[ci].l * inv, sums[ci].a * inv, sums[ci].b * inv, sums[ci].x * inv, sums[ci].y * inv};
    }
  }

  // Pixels no window reached take the globally nearest center.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (labels[i] >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const double d = distance(centers[ci], y, x);
        if (d < best) {
          best = d;
          labels[i] = static_cast<std::int32_t>(ci);
        }
      }
    }
  }

  const LabelMap raw = LabelMap::from_raster_order(h, w, labels);
  const int min_size = std::max(1, static_cast<int>(std::lround(params.min_region_frac * double(n) / k)));
  return enforce_connectivity(raw, min_size);
}

}  // namespace binseg
