#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazespot/csv.hpp"
#include "gazespot/error.hpp"
#include "gazespot/raster.hpp"

namespace gazespot {

// One 1000 Hz gaze sample. Coordinates are in image-resolution pixels and
// may fall outside the image; out-of-bounds samples are dropped at binning.
struct FixationSample {
  std::string participant_id;
  std::string image_id;
  double t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct GazeWindowing {
  double window_ms = 50.0;
  int max_windows = 20;
};

struct GazePoint {
  double x = 0.0;
  double y = 0.0;
};

// Per-participant view of one image's retained samples.
struct BinnedGaze {
  std::vector<std::string> participants;                      // sorted unique
  std::vector<std::vector<std::vector<GazePoint>>> windows;   // [participant][window]
  std::vector<std::vector<GazePoint>> all_in_bounds;          // [participant]
  std::vector<std::size_t> dropped_beyond_cap;                // [participant]
};

// Discards out-of-bounds samples, then clocks each participant's retained
// samples by rank (the "in-bounds clock"): window = floor(clock / window_ms),
// capped at max_windows. Only in-bounds milliseconds advance the clock.
inline BinnedGaze bin_in_bounds(const std::vector<FixationSample>& samples, int image_width,
                                int image_height, const GazeWindowing& wp = {}) {
  if (wp.window_ms <= 0 || wp.max_windows < 1)
    throw DataError("bin_in_bounds: invalid windowing parameters");

  std::map<std::string, std::vector<const FixationSample*>> by_participant;
  for (const FixationSample& s : samples) by_participant[s.participant_id].push_back(&s);

  BinnedGaze out;
  for (auto& [pid, list] : by_participant) {
    std::stable_sort(list.begin(), list.end(),
                     [](const FixationSample* a, const FixationSample* b) { return a->t_ms < b->t_ms; });
    std::vector<std::vector<GazePoint>> windows(wp.max_windows);
    std::vector<GazePoint> all;
    std::size_t clock = 0, dropped = 0;
    for (const FixationSample* s : list) {
      if (!(s->x >= 0.0 && s->x < image_width && s->y >= 0.0 && s->y < image_height)) continue;
      all.push_back({s->x, s->y});
      const auto w = static_cast<std::size_t>(clock / wp.window_ms);
      if (w < static_cast<std::size_t>(wp.max_windows))
        windows[w].push_back({s->x, s->y});
      else
        ++dropped;
      ++clock;
    }
    out.participants.push_back(pid);
    out.windows.push_back(std::move(windows));
    out.all_in_bounds.push_back(std::move(all));
    out.dropped_beyond_cap.push_back(dropped);
  }
  return out;
}

// Accumulates one count per sample at its pixel, then smooths. Kernel side
// covers +-3 sigma. No normalization here; that happens after averaging.
inline Raster density_map(const std::vector<GazePoint>& points, int width, int height,
                          double sigma = 20.0) {
  Raster acc(width, height);
  for (const GazePoint& p : points) {
    if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height))
      throw DataError("density_map: point outside raster bounds");
    acc.at(static_cast<int>(p.x), static_cast<int>(p.y)) += 1.0;
  }
  const int width_taps = static_cast<int>(std::ceil(6.0 * sigma + 1.0));
  return gaussian_filter(acc, sigma, width_taps);
}

// Elementwise mean across participants followed by min-max normalization.
inline Raster average_heatmap(const std::vector<Raster>& per_participant) {
  if (per_participant.empty()) throw DataError("average_heatmap: empty raster list");
  const Raster& first = per_participant.front();
  Raster mean(first.width, first.height);
  for (const Raster& r : per_participant) {
    if (!r.same_shape(first)) throw DataError("average_heatmap: raster dimension mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) mean.values[i] += r.values[i];
  }
  const double inv = 1.0 / static_cast<double>(per_participant.size());
  for (double& v : mean.values) v *= inv;
  return normalize_minmax(mean);
}

struct HeatmapSet {
  std::string image_id;
  std::vector<Raster> windows;  // normalized, windows.size() == max_windows
  Raster full;                  // all in-bounds samples, normalized
  int participant_count = 0;
};

struct HeatmapParams {
  GazeWindowing windowing;
  double sigma = 20.0;
  // Window k covers samples of windows 0..k instead of window k alone.
  // Sensitivity variant; the study default is disjoint windows.
  bool cumulative = false;
};

// Full per-image pipeline: bin -> per-participant density -> average.
// Participants contribute an all-zero map to windows they never reached.
inline HeatmapSet window_heatmaps(const std::vector<FixationSample>& samples, int width,
                                  int height, const HeatmapParams& params = {}) {
  const BinnedGaze binned = bin_in_bounds(samples, width, height, params.windowing);
  HeatmapSet set;
  if (!samples.empty()) set.image_id = samples.front().image_id;
  const int n_windows = params.windowing.max_windows;
  set.windows.assign(n_windows, Raster(width, height));
  set.full = Raster(width, height);

  std::vector<std::size_t> active;  // participants with any retained sample
  for (std::size_t p = 0; p < binned.participants.size(); ++p)
    if (!binned.all_in_bounds[p].empty()) active.push_back(p);
  set.participant_count = static_cast<int>(active.size());
  if (active.empty()) return set;

  for (int w = 0; w < n_windows; ++w) {
    std::vector<Raster> maps;
    maps.reserve(active.size());
    for (std::size_t p : active) {
      if (params.cumulative) {
        std::vector<GazePoint> pts;
        for (int k = 0; k <= w; ++k)
          pts.insert(pts.end(), binned.windows[p][k].begin(), binned.windows[p][k].end());
        maps.push_back(density_map(pts, width, height, params.sigma));
      } else {
        maps.push_back(density_map(binned.windows[p][w], width, height, params.sigma));
      }
    }
    set.windows[w] = average_heatmap(maps);
  }

  std::vector<Raster> full_maps;
  full_maps.reserve(active.size());
  for (std::size_t p : active)
    full_maps.push_back(density_map(binned.all_in_bounds[p], width, height, params.sigma));
  set.full = average_heatmap(full_maps);
  return set;
}

// Fixation CSV: header `participant,image,t_ms,x,y`, one row per sample.
inline void write_fixation_csv(const std::vector<FixationSample>& samples,
                               const std::string& path) {
  CsvWriter out(path, "participant,image,t_ms,x,y");
  for (const FixationSample& s : samples)
    out.row({s.participant_id, s.image_id, format_double(s.t_ms), format_double(s.x),
             format_double(s.y)});
}

inline std::vector<FixationSample> read_fixation_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int cp = t.column("participant"), ci = t.column("image"), ct = t.column("t_ms"),
            cx = t.column("x"), cy = t.column("y");
  if (cp < 0 || ci < 0 || ct < 0 || cx < 0 || cy < 0)
    throw DataError(path + ": fixation CSV must have participant,image,t_ms,x,y columns");
  std::vector<FixationSample> samples;
  samples.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    FixationSample s;
    s.participant_id = row[cp];
    s.image_id = row[ci];
    s.t_ms = parse_double(row[ct], path);
    s.x = parse_double(row[cx], path);
    s.y = parse_double(row[cy], path);
    if (s.t_ms < 0) throw DataError(path + ": negative t_ms");
    samples.push_back(std::move(s));
  }
  return samples;
}

inline std::map<std::string, std::vector<FixationSample>> group_by_image(
    const std::vector<FixationSample>& samples) {
  std::map<std::string, std::vector<FixationSample>> by_image;
  for (const FixationSample& s : samples) by_image[s.image_id].push_back(s);
  return by_image;
}

}  // namespace gazespot
