#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gazespot/error.hpp"
#include "gazespot/gaze.hpp"
#include "gazespot/raster.hpp"
#include "gazespot/rng.hpp"
#include "gazespot/saliency.hpp"

namespace gazespot {

// Pearson correlation over all pixels, 64-bit accumulation. A constant
// raster has no defined correlation; callers log and exclude those records.
inline double pearson(const Raster& a, const Raster& b) {
  if (!a.same_shape(b)) throw DataError("pearson: raster dimension mismatch");
  const auto [a_lo, a_hi] = minmax(a);
  const auto [b_lo, b_hi] = minmax(b);
  if (a_hi == a_lo || b_hi == b_lo)
    throw CorrelationUndefined("pearson: zero-variance raster");
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a.values[i];
    mean_b += b.values[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a.values[i] - mean_a;
    const double db = b.values[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  return cov / std::sqrt(var_a * var_b);
}

// Fisher's Z; r is clamped just inside (-1,1) so |r| = 1 stays finite.
inline double fisher_z(double r) {
  if (!(r >= -1.0 && r <= 1.0)) throw DataError("fisher_z: |r| must be <= 1");
  return std::atanh(std::clamp(r, -1.0 + 1e-7, 1.0 - 1e-7));
}

// Rater masks -> mean -> min-max normalize -> smooth (W = 10, SD = 5).
inline Raster build_roi(const std::vector<Raster>& rater_masks, double sigma = 5.0,
                        int width = 10) {
  if (rater_masks.empty()) throw DataError("build_roi: empty mask list");
  const Raster& first = rater_masks.front();
  Raster mean(first.width, first.height);
  for (const Raster& m : rater_masks) {
    if (!m.same_shape(first)) throw DataError("build_roi: mask dimension mismatch");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!(m.values[i] >= 0.0 && m.values[i] <= 1.0))
        throw DataError("build_roi: mask values must lie in [0,1]");
      mean.values[i] += m.values[i];
    }
  }
  for (double& v : mean.values) v /= static_cast<double>(rater_masks.size());
  const Raster norm = normalize_minmax(mean);
  const auto [lo, hi] = minmax(norm);
  if (hi == lo) return norm;  // all-zero masks stay all-zero
  return gaussian_filter(norm, sigma, width);
}

// Attention mass inside the ROI over mass outside it. The area-normalized
// variant divides each side by its ROI mass first (sensitivity analysis).
inline double face_detection_index(const Raster& map, const Raster& face_roi,
                                   bool area_normalized = false) {
  if (!map.same_shape(face_roi)) throw DataError("face_detection_index: dimension mismatch");
  double inside = 0.0, outside = 0.0, roi_mass = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double m = map.values[i], r = face_roi.values[i];
    inside += m * r;
    outside += m * (1.0 - r);
    roi_mass += r;
  }
  if (roi_mass == 0.0) throw DataError("face_detection_index: empty face ROI");
  if (inside + outside == 0.0) throw DataError("face_detection_index: all-zero map");
  if (area_normalized) {
    const double total = static_cast<double>(map.size());
    if (roi_mass >= total) throw DegenerateFdi("face_detection_index: ROI covers the whole map");
    inside /= roi_mass;
    outside /= (total - roi_mass);
  }
  if (outside == 0.0)
    throw DegenerateFdi("face_detection_index: no attention mass outside the ROI");
  return inside / outside;
}

// Per-window Fisher-Z similarity; windows with undefined correlation yield
// a missing value rather than zero.
inline std::vector<std::optional<double>> similarity_time_course(const HeatmapSet& heatmaps,
                                                                 const SaliencyMap& saliency) {
  std::vector<std::optional<double>> z;
  z.reserve(heatmaps.windows.size());
  for (const Raster& window : heatmaps.windows) {
    if (!window.same_shape(saliency.map))
      throw DataError("similarity_time_course: window/saliency dimension mismatch");
    try {
      z.push_back(fisher_z(pearson(window, saliency.map)));
    } catch (const CorrelationUndefined&) {
      z.push_back(std::nullopt);
    }
  }
  return z;
}

// Percentile bootstrap CI of the mean; deterministic for a given seed.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                              int resamples = 2000, double level = 0.95,
                                              std::uint64_t seed = 0) {
  if (values.empty()) throw DataError("bootstrap_ci: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw DataError("bootstrap_ci: level must be in (0,1)");
  const std::size_t n = values.size();
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (int b = 0; b < resamples; ++b) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += values[rng.below(n)];
    means[b] = total / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  const double alpha = 1.0 - level;
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw DataError("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace gazespot
