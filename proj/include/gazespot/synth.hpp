#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazespot/error.hpp"
#include "gazespot/gaze.hpp"
#include "gazespot/raster.hpp"
#include "gazespot/rng.hpp"
#include "gazespot/roi.hpp"

namespace gazespot {

// Categories cycle in blocks of twelve: the first six of each block are
// animate (carry a face motif), the next six inanimate. Blocks beyond the
// first render with shifted hue/texture parameters, giving disjoint category
// sets for pretraining.
constexpr int kCategoryCycle = 12;

inline bool is_animate(int category) { return category % kCategoryCycle < 6; }

inline std::string category_name(int category) {
  const int block = category / kCategoryCycle;
  const int j = category % kCategoryCycle;
  std::string base = (j < 6 ? "a" : "i") + std::to_string(j % 6);
  if (block > 0) base += "x" + std::to_string(block);
  return base;
}

struct SceneSpec {
  int category = 0;
  int width = 32;
  int height = 32;
  double center_x = 16.0;
  double center_y = 16.0;
  double object_radius = 6.0;
  double rotation = 0.0;
  double face_dx = 0.0;  // face center offset from object center
  double face_dy = -2.0;
  double face_radius = 3.0;    // animate categories only
  double face_contrast = 1.0;  // motif strength in (0,1]; weak faces are hard
  double clutter = 0.6;        // background blob density in [0,1]
  // Context tag: a small striped patch in the unattended background whose
  // stripe orientation encodes the category. A second, shortcut route to the
  // label that stays sharp only where the manipulation leaves the background
  // alone.
  bool tag_present = true;
  double tag_x = 5.0;
  double tag_y = 5.0;
  std::uint64_t seed = 0;
};

struct SceneRender {
  RgbImage image;
  RoiSet rois;
  int category = 0;
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double rr = 0, gg = 0, bb = 0;
  switch (static_cast<int>(hp)) {
    case 0: rr = c; gg = x; break;
    case 1: rr = x; gg = c; break;
    case 2: gg = c; bb = x; break;
    case 3: gg = x; bb = c; break;
    case 4: rr = x; bb = c; break;
    default: rr = c; bb = x; break;
  }
  const double m = v - c;
  r = rr + m;
  g = gg + m;
  b = bb + m;
}

// Body membership in rotated, radius-normalized coordinates. Bodies come in
// three families shared across categories; the focal motif (face or emblem)
// is what tells pair members apart.
inline bool inside_shape(int kind, double qx, double qy) {
  switch (kind % 3) {
    case 0:  // ellipse
      return qx * qx / (0.95 * 0.95) + qy * qy / (0.66 * 0.66) <= 1.0;
    case 1:  // rounded rectangle
      return std::fabs(qx) <= 0.9 && std::fabs(qy) <= 0.6 &&
             (std::fabs(qx) <= 0.7 || std::fabs(qy) <= 0.45 ||
              std::hypot(std::fabs(qx) - 0.7, std::fabs(qy) - 0.45) <= 0.2);
    default:  // diamond
      return std::fabs(qx) / 0.95 + std::fabs(qy) / 0.8 <= 1.0;
  }
}

// Per-category appearance. Categories come in pairs (j, j+3) within the
// animate and inanimate halves: a pair shares hue, body family, and texture;
// only the focal motif separates its members. That puts the discriminative
// information where gaze lands, so attended-region blurring bites.
struct CategoryLook {
  double hue;
  int body_kind;
  double stripe_angle;
  double stripe_period_at32;
  bool wide_motif;  // first pair member: wide-set small eyes / bar emblem
  int variant;      // 0..2 within the half
};

inline CategoryLook category_look(int category) {
  const int block = category / kCategoryCycle;
  const int j = category % kCategoryCycle;
  const bool animate = j < 6;
  const int v = (j % 6) % 3;
  CategoryLook look;
  look.variant = v;
  look.wide_motif = (j % 6) < 3;
  look.body_kind = v;
  const double base = animate ? 0.02 : 0.52;
  look.hue = std::fmod(base + 0.13 * v + 0.31 * block, 1.0);
  look.stripe_angle = 0.6 * v + 0.8 * block + (animate ? 0.0 : 0.4);
  look.stripe_period_at32 = 3.0 + v + 0.7 * block;
  return look;
}

// Soft-edged disc coverage in [0,1]; keeps sub-2px motifs visible.
inline double disc_coverage(double dx, double dy, double radius) {
  return std::clamp(radius - std::hypot(dx, dy) + 0.5, 0.0, 1.0);
}

}  // namespace detail

// Deterministic scene render. The face motif, when present, is drawn as part
// of the object, so the face ROI is a subset of the object ROI by
// construction.
inline SceneRender make_scene(const SceneSpec& spec) {
  const int w = spec.width, h = spec.height;
  if (w < 8 || h < 8) throw DataError("make_scene: image too small");
  const bool animate = is_animate(spec.category);
  const double face_extent =
      animate ? std::hypot(spec.face_dx, spec.face_dy) + spec.face_radius : 0.0;
  const double extent = std::max(spec.object_radius, face_extent) + 1.0;
  if (spec.center_x - extent < 0 || spec.center_x + extent >= w || spec.center_y - extent < 0 ||
      spec.center_y + extent >= h)
    throw DataError("make_scene: object extends outside the image");
  if (animate && face_extent > spec.object_radius + spec.face_radius)
    throw DataError("make_scene: face region outside the object");

  Rng rng(spec.seed);
  const int block = spec.category / kCategoryCycle;
  const detail::CategoryLook look = detail::category_look(spec.category);
  const double hue = look.hue;
  const double hue_jitter = rng.uniform(-0.02, 0.02);
  const double stripe_angle = look.stripe_angle;
  const double stripe_period = look.stripe_period_at32 * std::min(w, h) / 32.0;
  const double stripe_phase = rng.uniform(0.0, 2.0 * M_PI);

  RgbImage img(w, h);

  // Background: soft gradient plus category-neutral clutter blobs.
  const double base = rng.uniform(0.38, 0.5);
  const double gx = rng.uniform(-0.08, 0.08), gy = rng.uniform(-0.08, 0.08);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = base + gx * (x - 0.5 * w) / w + gy * (y - 0.5 * h) / h;
      for (int c = 0; c < 3; ++c) img.channel[c].at(x, y) = v;
    }
  const int n_blobs = 2 + static_cast<int>(std::llround(spec.clutter * 10.0));
  for (int i = 0; i < n_blobs; ++i) {
    const double bx = rng.uniform(0.0, w), by = rng.uniform(0.0, h);
    const double br = rng.uniform(0.05, 0.14) * std::min(w, h);
    double r, g, b;
    detail::hsv_to_rgb(rng.uniform(), rng.uniform(0.15, 0.45), rng.uniform(0.3, 0.7), r, g, b);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (br * br);
        if (d2 > 4.0) continue;
        const double a = 0.8 * std::exp(-0.5 * d2);
        img.channel[0].at(x, y) += a * (r - img.channel[0].at(x, y));
        img.channel[1].at(x, y) += a * (g - img.channel[1].at(x, y));
        img.channel[2].at(x, y) += a * (b - img.channel[2].at(x, y));
      }
  }

  // Body.
  double obj_r, obj_g, obj_b;
  detail::hsv_to_rgb(hue + hue_jitter, 0.6, 0.72, obj_r, obj_g, obj_b);
  const double cos_rot = std::cos(spec.rotation), sin_rot = std::sin(spec.rotation);
  Raster object_mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - spec.center_x, dy = y - spec.center_y;
      const double rx = (dx * cos_rot + dy * sin_rot) / spec.object_radius;
      const double ry = (-dx * sin_rot + dy * cos_rot) / spec.object_radius;
      if (!detail::inside_shape(look.body_kind, rx, ry)) continue;
      object_mask.at(x, y) = 1.0;
      const double stripe =
          1.0 + 0.16 * std::sin(2.0 * M_PI * (x * std::cos(stripe_angle) + y * std::sin(stripe_angle)) /
                                    stripe_period +
                                stripe_phase);
      img.channel[0].at(x, y) = std::clamp(obj_r * stripe, 0.0, 1.0);
      img.channel[1].at(x, y) = std::clamp(obj_g * stripe, 0.0, 1.0);
      img.channel[2].at(x, y) = std::clamp(obj_b * stripe, 0.0, 1.0);
    }

  // Focal motif. Animate: a face whose eye spacing, eye size, and mouth
  // width separate the two pair members. Inanimate: a high-contrast emblem
  // at the object center, bar versus dot pair.
  Raster face_mask(w, h);
  if (animate) {
    const double fx = spec.center_x + spec.face_dx;
    const double fy = spec.center_y + spec.face_dy;
    const double fr = spec.face_radius;
    double skin_r, skin_g, skin_b;
    detail::hsv_to_rgb(hue + hue_jitter + 0.05, 0.2, 0.93, skin_r, skin_g, skin_b);
    const double eye_sep = look.wide_motif ? 0.8 : 0.42;   // between eye centers, r units
    const double eye_r = (look.wide_motif ? 0.2 : 0.34) * fr;
    const double mouth_half = (look.wide_motif ? 0.62 : 0.32) * fr;
    const double eye_y = (-0.3 + 0.06 * look.variant) * fr;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - fx, dy = y - fy;
        const double d = std::hypot(dx, dy);
        if (d > fr) continue;
        face_mask.at(x, y) = 1.0;
        object_mask.at(x, y) = 1.0;
        double r = skin_r, g = skin_g, b = skin_b;
        const double eye =
            std::max(detail::disc_coverage(dx - 0.5 * eye_sep * fr, dy - eye_y, eye_r),
                     detail::disc_coverage(dx + 0.5 * eye_sep * fr, dy - eye_y, eye_r));
        double dark = eye;
        if (dy > 0.3 * fr && dy < 0.62 * fr && std::fabs(dx) <= mouth_half)
          dark = std::max(dark, 0.9);  // mouth bar
        dark *= spec.face_contrast;
        r += dark * (0.04 - r);
        g += dark * (0.04 - g);
        b += dark * (0.04 - b);
        img.channel[0].at(x, y) = r;
        img.channel[1].at(x, y) = g;
        img.channel[2].at(x, y) = b;
      }
  } else {
    // Emblem drawn in object-local upright coordinates.
    const double er = 0.55 * spec.object_radius;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (object_mask.at(x, y) == 0.0) continue;
        const double dx = x - spec.center_x, dy = y - spec.center_y;
        double bright = 0.0;
        if (look.wide_motif) {
          if (std::fabs(dx) <= er && std::fabs(dy) <= 0.28 * er) bright = 1.0;  // bar
        } else {
          bright = std::max(detail::disc_coverage(dx - 0.6 * er, dy, 0.38 * er),
                            detail::disc_coverage(dx + 0.6 * er, dy, 0.38 * er));  // dot pair
        }
        if (bright == 0.0) continue;
        bright *= spec.face_contrast;
        for (int c = 0; c < 3; ++c) {
          double& v = img.channel[c].at(x, y);
          v += bright * (0.97 - v);
        }
      }
  }

  // Context tag: light patch with dark stripes at the category's angle;
  // occluded pixels (behind the object) stay object.
  if (spec.tag_present) {
    const double side = 0.11 * std::min(w, h);  // half-side
    const double theta = (spec.category % kCategoryCycle) * M_PI / 6.0 + 0.12 * block;
    const double period = 3.1 * std::min(w, h) / 32.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (object_mask.at(x, y) != 0.0) continue;
        const double dx = x - spec.tag_x, dy = y - spec.tag_y;
        if (std::fabs(dx) > side || std::fabs(dy) > side) continue;
        const double phase = (dx * std::cos(theta) + dy * std::sin(theta)) / period;
        const double v = std::sin(2.0 * M_PI * phase) > 0.0 ? 0.3 : 0.88;
        for (int c = 0; c < 3; ++c) img.channel[c].at(x, y) = v;
      }
  }

  // Light pixel noise so no raster is degenerate-constant.
  for (int c = 0; c < 3; ++c)
    for (double& v : img.channel[c].values)
      v = std::clamp(v + rng.normal(0.0, 0.015), 0.0, 1.0);

  SceneRender out;
  out.image = std::move(img);
  out.category = spec.category;
  out.rois.object_roi = std::move(object_mask);
  out.rois.face_present = animate;
  if (animate) out.rois.face_roi = std::move(face_mask);
  return out;
}

// Randomized placement for a category at a given resolution. Objects sit in
// an off-center ring so early (central) gaze and late (object) gaze separate.
inline SceneSpec random_scene_spec(int category, int width, int height, Rng& rng) {
  SceneSpec spec;
  spec.category = category;
  spec.width = width;
  spec.height = height;
  const double scale = std::min(width, height);
  spec.rotation = rng.uniform(0.0, 2.0 * M_PI);
  spec.clutter = 0.6;
  spec.face_contrast = rng.uniform(0.3, 1.0);
  if (is_animate(category)) {
    // Compact body with a prominent face, like an animal portrait.
    spec.object_radius = rng.uniform(0.20, 0.24) * scale;
    spec.face_radius = rng.uniform(0.15, 0.17) * scale;
    const double mag = rng.uniform(0.3, 0.45) * spec.object_radius;
    const double dir = -M_PI / 2.0 + rng.uniform(-0.6, 0.6);
    spec.face_dx = mag * std::cos(dir);
    spec.face_dy = mag * std::sin(dir);
  } else {
    // Frame-filling artifact, like vehicles or furniture.
    spec.object_radius = rng.uniform(0.28, 0.33) * scale;
  }
  const double face_extent =
      is_animate(category) ? std::hypot(spec.face_dx, spec.face_dy) + spec.face_radius : 0.0;
  const double extent = std::max(spec.object_radius, face_extent) + 2.0;
  const double ring = rng.uniform(0.06, 0.14) * scale;
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  spec.center_x = std::clamp(0.5 * width + ring * std::cos(angle), extent, width - 1.0 - extent);
  spec.center_y = std::clamp(0.5 * height + ring * std::sin(angle), extent, height - 1.0 - extent);

  // Tag in one of the four corner zones, away from the object center.
  spec.tag_present = rng.uniform() < 0.8;
  const double inset = 0.14 * scale;
  const double corner_x = rng.below(2) ? width - 1 - inset : inset;
  const double corner_y = rng.below(2) ? height - 1 - inset : inset;
  spec.tag_x = corner_x + rng.uniform(-0.03, 0.03) * scale;
  spec.tag_y = corner_y + rng.uniform(-0.03, 0.03) * scale;
  return spec;
}

struct GazeSimParams {
  double latency_ms = 175.0;   // preattentive central phase before saccades
  double central_sigma = 0.0;  // <= 0 selects 8% of the smaller dimension
  double face_bias = 0.7;      // post-latency target probabilities
  double object_bias = 0.2;    // remainder is diffuse exploration
  double fixation_mean_ms = 220.0;
  double fixation_jitter_ms = 80.0;
  double tremor_sigma = 0.6;  // per-sample positional tremor, px
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<GazePoint> mask_pixels(const Raster& mask) {
  std::vector<GazePoint> px;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y) != 0.0) px.push_back({static_cast<double>(x), static_cast<double>(y)});
  return px;
}

inline double clamped_normal(Rng& rng, double sigma, double clamp_at) {
  return std::clamp(rng.normal(0.0, sigma), -clamp_at, clamp_at);
}

}  // namespace detail

// Synthetic 1000 Hz gaze. Before latency_ms (the feedforward sweep) samples
// cluster at the image center within 3*central_sigma. Afterwards fixation
// targets are drawn from the face ROI / object ROI / whole image with the
// configured probabilities; faces attract fixations near their center, the
// way eyes and noses do. Tremor may push samples slightly out of bounds;
// binning drops those.
inline std::vector<FixationSample> simulate_gaze(const RoiSet& rois, int width, int height,
                                                 double duration_ms, const GazeSimParams& params,
                                                 const std::string& participant_id = "p0",
                                                 const std::string& image_id = "") {
  if (duration_ms < 0) throw DataError("simulate_gaze: negative duration");
  Rng rng(params.seed);
  const double sigma_c =
      params.central_sigma > 0 ? params.central_sigma : 0.08 * std::min(width, height);
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);

  double face_bias = params.face_bias, object_bias = params.object_bias;
  if (!rois.face_present) {
    object_bias += face_bias;  // no face: its share falls to the object
    face_bias = 0.0;
  }
  const std::vector<GazePoint> face_px =
      rois.face_roi ? detail::mask_pixels(*rois.face_roi) : std::vector<GazePoint>{};
  // Object fixations target the body (object minus face); face fixations
  // have their own channel.
  Raster body = rois.object_roi;
  if (rois.face_roi)
    for (std::size_t i = 0; i < body.size(); ++i)
      if (rois.face_roi->values[i] != 0.0) body.values[i] = 0.0;
  std::vector<GazePoint> object_px = detail::mask_pixels(body);
  if (object_px.empty()) object_px = detail::mask_pixels(rois.object_roi);
  if (object_px.empty()) throw DataError("simulate_gaze: empty object ROI");

  // Face geometry for center-weighted face fixations.
  double face_cx = 0.0, face_cy = 0.0, face_r = 1.0;
  if (!face_px.empty()) {
    for (const GazePoint& p : face_px) {
      face_cx += p.x;
      face_cy += p.y;
    }
    face_cx /= static_cast<double>(face_px.size());
    face_cy /= static_cast<double>(face_px.size());
    face_r = std::sqrt(static_cast<double>(face_px.size()) / M_PI);
  }

  std::vector<FixationSample> samples;
  samples.reserve(static_cast<std::size_t>(duration_ms));
  const double tremor_clamp = 3.0 * params.tremor_sigma;

  double t = 0.0;
  while (t < duration_ms) {
    const bool preattentive = t < params.latency_ms;
    double tx, ty;
    if (preattentive) {
      tx = cx + detail::clamped_normal(rng, sigma_c, 2.0 * sigma_c);
      ty = cy + detail::clamped_normal(rng, sigma_c, 2.0 * sigma_c);
    } else {
      const double u = rng.uniform();
      if (u < face_bias && !face_px.empty()) {
        // Center-weighted within the face (eyes and nose attract fixations),
        // radially clamped inside it.
        double ox = rng.normal(0.0, 0.38 * face_r);
        double oy = rng.normal(0.0, 0.38 * face_r);
        const double d = std::hypot(ox, oy);
        if (d > 0.7 * face_r) {
          ox *= 0.7 * face_r / d;
          oy *= 0.7 * face_r / d;
        }
        tx = face_cx + ox;
        ty = face_cy + oy;
      } else if (u < face_bias + object_bias) {
        const GazePoint& p = object_px[rng.below(object_px.size())];
        tx = p.x + rng.uniform();
        ty = p.y + rng.uniform();
      } else {
        tx = rng.uniform(0.0, width);
        ty = rng.uniform(0.0, height);
      }
    }
    double dur = params.fixation_mean_ms +
                 rng.uniform(-params.fixation_jitter_ms, params.fixation_jitter_ms);
    dur = std::max(20.0, dur);
    // A fixation never outlives its phase boundary.
    if (preattentive) dur = std::min(dur, params.latency_ms - t);

    const double end = std::min(duration_ms, t + dur);
    for (; t < end; t += 1.0) {
      double x = tx + detail::clamped_normal(rng, params.tremor_sigma, tremor_clamp);
      double y = ty + detail::clamped_normal(rng, params.tremor_sigma, tremor_clamp);
      if (preattentive) {
        // Contract: preattentive samples stay within 3 sigma of center.
        const double dx = x - cx, dy = y - cy;
        const double d = std::hypot(dx, dy);
        if (d > 3.0 * sigma_c) {
          x = cx + dx * (3.0 * sigma_c / d);
          y = cy + dy * (3.0 * sigma_c / d);
        }
      }
      samples.push_back({participant_id, image_id, t, x, y});
    }
  }
  return samples;
}

}  // namespace gazespot
