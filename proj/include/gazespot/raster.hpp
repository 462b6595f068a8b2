#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gazespot/error.hpp"

namespace gazespot {

// Dense row-major 2-D grid of doubles. Carrier for heatmaps, saliency maps,
// ROI masks and taper weights.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // values[y * width + x]

  Raster() = default;
  Raster(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw DataError("raster dimensions must be >= 1");
  }

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Raster& o) const { return width == o.width && height == o.height; }
};

inline void require_finite(const Raster& r, const std::string& what) {
  for (double v : r.values)
    if (!std::isfinite(v)) throw NumericError(what + ": non-finite raster value");
}

inline std::pair<double, double> minmax(const Raster& r) {
  auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
  return {*lo, *hi};
}

// Requested kernel widths may be even (W = 30 in the blurring recipe); they
// are rounded up to the next odd integer so the kernel has a center tap.
inline int odd_kernel_width(int width) {
  if (width < 1) throw DataError("kernel width must be >= 1");
  return (width % 2 == 0) ? width + 1 : width;
}

// Sampled Gaussian, normalized so the sequential sum of the taps is exactly
// 1.0. The fixup loop matters: convolving an all-ones mask must return
// exactly 1.0 so spotlight blending leaves kept pixels bit-identical.
inline std::vector<double> gaussian_kernel(double sigma, int width) {
  if (!(sigma > 0.0)) throw DataError("gaussian sigma must be > 0");
  const int side = odd_kernel_width(width);
  const int center = side / 2;
  std::vector<double> k(side);
  double total = 0.0;
  for (int i = 0; i < side; ++i) {
    const double d = (i - center) / sigma;
    k[i] = std::exp(-0.5 * d * d);
    total += k[i];
  }
  for (double& w : k) w /= total;
  // Pin the sequential sum to exactly 1.0: absorb the normalization residual
  // into the center tap, then give the last tap the exact remainder. With
  // prefix >= 0.5 the subtraction 1 - prefix is exact (Sterbenz), so the
  // final accumulation rounds to 1.0 with no error.
  double s = 0.0;
  for (double w : k) s += w;
  k[center] += 1.0 - s;
  if (side > 1) {
    double prefix = 0.0;
    for (int i = 0; i + 1 < side; ++i) prefix += k[i];
    k[side - 1] = 1.0 - prefix;
  }
  return k;
}

namespace detail {

// One separable pass with replicate padding. `horizontal` selects the axis.
inline void convolve_axis(const Raster& in, const std::vector<double>& kernel,
                          bool horizontal, Raster& out) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const int w = in.width, h = in.height;
  if (horizontal) {
    for (int y = 0; y < h; ++y) {
      const double* row = in.values.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const int xs = std::clamp(x + t, 0, w - 1);
          acc += kernel[t + radius] * row[xs];
        }
        out.at(x, y) = acc;
      }
    }
  } else {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const int ys = std::clamp(y + t, 0, h - 1);
          acc += kernel[t + radius] * in.at(x, ys);
        }
        out.at(x, y) = acc;
      }
    }
  }
}

}  // namespace detail

// Separable Gaussian blur, replicate padding at the borders.
inline Raster gaussian_filter(const Raster& r, double sigma, int width) {
  require_finite(r, "gaussian_filter");
  const std::vector<double> kernel = gaussian_kernel(sigma, width);
  Raster tmp(r.width, r.height);
  Raster out(r.width, r.height);
  detail::convolve_axis(r, kernel, /*horizontal=*/true, tmp);
  detail::convolve_axis(tmp, kernel, /*horizontal=*/false, out);
  return out;
}

// Bilinear resampling with pixel centers aligned at the corners. A target
// axis of length 1 samples the source center.
inline Raster resample_bilinear(const Raster& r, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1)
    throw DataError("resample_bilinear: target dimensions must be >= 1");
  if (new_width == r.width && new_height == r.height) return r;

  Raster out(new_width, new_height);
  const auto src_coord = [](int i, int n_dst, int n_src) {
    if (n_dst == 1) return 0.5 * (n_src - 1);
    return static_cast<double>(i) * (n_src - 1) / (n_dst - 1);
  };
  for (int y = 0; y < new_height; ++y) {
    const double sy = src_coord(y, new_height, r.height);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, r.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double sx = src_coord(x, new_width, r.width);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, r.width - 1);
      const double fx = sx - x0;
      const double top = r.at(x0, y0) * (1.0 - fx) + r.at(x1, y0) * fx;
      const double bot = r.at(x0, y1) * (1.0 - fx) + r.at(x1, y1) * fx;
      out.at(x, y) = top * (1.0 - fy) + bot * fy;
    }
  }
  return out;
}

// (v - min) / (max - min); a constant raster maps to all zeros.
inline Raster normalize_minmax(const Raster& r) {
  require_finite(r, "normalize_minmax");
  const auto [lo, hi] = minmax(r);
  Raster out(r.width, r.height);
  if (hi == lo) return out;
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < r.size(); ++i) out.values[i] = (r.values[i] - lo) * scale;
  return out;
}

// Three channels in [0,1] sharing one footprint.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::array<Raster, 3> channel;

  RgbImage() = default;
  RgbImage(int w, int h, double fill = 0.0)
      : width(w), height(h), channel{Raster(w, h, fill), Raster(w, h, fill), Raster(w, h, fill)} {}
};

inline void require_unit_range(const RgbImage& img, const std::string& what) {
  for (const Raster& c : img.channel)
    for (double v : c.values)
      if (!(v >= 0.0 && v <= 1.0)) throw DataError(what + ": channel value outside [0,1]");
}

}  // namespace gazespot
