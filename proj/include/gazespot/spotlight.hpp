#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gazespot/error.hpp"
#include "gazespot/raster.hpp"
#include "gazespot/rng.hpp"

namespace gazespot {

enum class Direction { HS, AS };

inline std::string direction_name(Direction d) { return d == Direction::HS ? "HS" : "AS"; }

inline Direction parse_direction(const std::string& s) {
  if (s == "HS" || s == "hs") return Direction::HS;
  if (s == "AS" || s == "as") return Direction::AS;
  throw UsageError("unknown direction '" + s + "' (expected HS or AS)");
}

struct SpotlightConfig {
  Direction direction = Direction::HS;
  double tau = 1.0 / 3.0;  // threshold on the normalized density range
  double blur_sigma = 7.0;
  int blur_width = 30;
  double taper_sigma = 9.0;
  int taper_width = 35;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw DataError("spotlight tau must be in (0,1)");
    if (!(blur_sigma > 0.0 && taper_sigma > 0.0))
      throw DataError("spotlight sigmas must be > 0");
  }
};

// Binary keep mask. HS keeps pixels whose normalized density reaches tau and
// blurs the rest; AS is the exact complement (ties at tau stay in HS).
inline Raster keep_mask(const Raster& heatmap, const SpotlightConfig& config) {
  config.validate();
  Raster mask(heatmap.width, heatmap.height);
  for (std::size_t i = 0; i < heatmap.size(); ++i) {
    const double v = heatmap.values[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError("keep_mask: heatmap must be normalized to [0,1]");
    const bool keep_hs = v >= config.tau;
    mask.values[i] = (config.direction == Direction::HS) == keep_hs ? 1.0 : 0.0;
  }
  return mask;
}

// Fraction of pixels the manipulation blurs.
inline double blur_fraction(const Raster& mask) {
  std::size_t blurred = 0;
  for (double v : mask.values) {
    if (v != 0.0 && v != 1.0) throw DataError("blur_fraction: mask is not binary");
    if (v == 0.0) ++blurred;
  }
  return static_cast<double>(blurred) / static_cast<double>(mask.size());
}

// Blur the whole image, smooth the keep mask into a taper weight, and blend:
// out = m*image + (1-m)*blurred. Where the smoothed mask is exactly 1 or 0
// the output is bit-identical to the original or the blurred image.
inline RgbImage apply_spotlight(const RgbImage& image, const Raster& heatmap,
                                const SpotlightConfig& config) {
  if (heatmap.width != image.width || heatmap.height != image.height)
    throw DataError("apply_spotlight: heatmap/image dimension mismatch");
  const Raster mask = keep_mask(heatmap, config);
  Raster taper = gaussian_filter(mask, config.taper_sigma, config.taper_width);
  for (double& v : taper.values) v = std::clamp(v, 0.0, 1.0);

  RgbImage out(image.width, image.height);
  for (int c = 0; c < 3; ++c) {
    const Raster blurred = gaussian_filter(image.channel[c], config.blur_sigma, config.blur_width);
    for (std::size_t i = 0; i < taper.size(); ++i) {
      const double m = taper.values[i];
      out.channel[c].values[i] =
          m * image.channel[c].values[i] + (1.0 - m) * blurred.values[i];
    }
  }
  return out;
}

struct SourceImage {
  std::string image_id;
  int category = 0;
  RgbImage image;
};

struct RatioDatasetSpec {
  Direction direction = Direction::HS;
  double ratio = 1.0;  // fraction manipulated per category
  std::uint64_t seed = 0;
  SpotlightConfig spotlight;
};

struct DatasetEntry {
  std::string image_id;
  int category = 0;
  bool manipulated = false;
  double blur_fraction = 0.0;
  RgbImage image;
};

// Within each category a seeded PRNG picks round(ratio * n) images for
// manipulation. Selection is a function of (sorted image ids, spec, seed)
// only, so rebuilding a cell reproduces it exactly.
inline std::vector<DatasetEntry> build_ratio_dataset(
    const std::vector<SourceImage>& images, const std::map<std::string, Raster>& heatmaps,
    const RatioDatasetSpec& spec) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= 1.0))
    throw DataError("build_ratio_dataset: ratio must be in [0,1]");

  std::map<int, std::vector<const SourceImage*>> by_category;
  for (const SourceImage& s : images) by_category[s.category].push_back(&s);

  std::vector<DatasetEntry> out;
  out.reserve(images.size());
  for (auto& [category, list] : by_category) {
    std::sort(list.begin(), list.end(), [](const SourceImage* a, const SourceImage* b) {
      return a->image_id < b->image_id;
    });
    const auto n = static_cast<std::uint64_t>(list.size());
    const auto k = static_cast<std::uint64_t>(
        std::llround(spec.ratio * static_cast<double>(n)));
    std::vector<std::uint64_t> order(n);
    for (std::uint64_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(split_seed(spec.seed, static_cast<std::uint64_t>(category)));
    rng.shuffle(order.begin(), order.end());
    std::vector<bool> pick(n, false);
    for (std::uint64_t i = 0; i < k; ++i) pick[order[i]] = true;

    for (std::uint64_t i = 0; i < n; ++i) {
      const SourceImage& src = *list[i];
      DatasetEntry entry;
      entry.image_id = src.image_id;
      entry.category = src.category;
      if (pick[i]) {
        const auto it = heatmaps.find(src.image_id);
        if (it == heatmaps.end())
          throw DataError("build_ratio_dataset: missing heatmap for image '" + src.image_id + "'");
        SpotlightConfig cfg = spec.spotlight;
        cfg.direction = spec.direction;
        entry.image = apply_spotlight(src.image, it->second, cfg);
        entry.blur_fraction = blur_fraction(keep_mask(it->second, cfg));
        entry.manipulated = true;
      } else {
        entry.image = src.image;
      }
      out.push_back(std::move(entry));
    }
  }
  return out;
}

}  // namespace gazespot
