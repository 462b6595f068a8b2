#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gazespot/gaze.hpp"
#include "gazespot/rng.hpp"
#include "gazespot/synth.hpp"

using namespace gazespot;

namespace {

SceneSpec spec_for(int category, std::uint64_t seed, int size = 32) {
  Rng rng(seed);
  SceneSpec spec = random_scene_spec(category, size, size, rng);
  spec.seed = split_seed(seed, 1);
  return spec;
}

Raster dilate(const Raster& mask, int radius) {
  Raster out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) == 0.0) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && nx < mask.width && ny >= 0 && ny < mask.height) out.at(nx, ny) = 1.0;
        }
    }
  return out;
}

}  // namespace

TEST_CASE("make_scene determinism and category structure") {
  SECTION("same spec renders bit-identically") {
    const SceneSpec spec = spec_for(3, 99);
    const SceneRender a = make_scene(spec);
    const SceneRender b = make_scene(spec);
    for (int c = 0; c < 3; ++c) REQUIRE(a.image.channel[c].values == b.image.channel[c].values);
    REQUIRE(a.rois.object_roi.values == b.rois.object_roi.values);
  }
  SECTION("different seeds render differently") {
    const SceneRender a = make_scene(spec_for(3, 99));
    const SceneRender b = make_scene(spec_for(3, 100));
    REQUIRE(a.image.channel[0].values != b.image.channel[0].values);
  }
  SECTION("animate categories carry a face, inanimate do not") {
    for (int cat = 0; cat < 12; ++cat) {
      const SceneRender r = make_scene(spec_for(cat, 7 + cat));
      REQUIRE(r.rois.face_present == (cat < 6));
      REQUIRE(r.rois.face_roi.has_value() == (cat < 6));
    }
  }
  SECTION("face ROI is a subset of the object ROI") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const SceneRender r = make_scene(spec_for(2, seed));
      for (std::size_t i = 0; i < r.rois.object_roi.size(); ++i)
        if (r.rois.face_roi->values[i] != 0.0) REQUIRE(r.rois.object_roi.values[i] == 1.0);
    }
  }
  SECTION("face ROI area fraction stays in the configured 2-10% band") {
    for (int cat = 0; cat < 6; ++cat)
      for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const SceneRender r = make_scene(spec_for(cat, seed));
        double area = 0.0;
        for (double v : r.rois.face_roi->values) area += v;
        const double fraction = area / r.rois.face_roi->size();
        REQUIRE(fraction >= 0.02);
        REQUIRE(fraction <= 0.10);
      }
  }
  SECTION("object mask never touches the border") {
    for (int cat = 0; cat < 12; ++cat) {
      const SceneRender r = make_scene(spec_for(cat, 31 + cat));
      const Raster& m = r.rois.object_roi;
      for (int x = 0; x < m.width; ++x) {
        REQUIRE(m.at(x, 0) == 0.0);
        REQUIRE(m.at(x, m.height - 1) == 0.0);
      }
      for (int y = 0; y < m.height; ++y) {
        REQUIRE(m.at(0, y) == 0.0);
        REQUIRE(m.at(m.width - 1, y) == 0.0);
      }
    }
  }
  SECTION("geometry violating the invariants is rejected") {
    SceneSpec bad = spec_for(0, 5);
    bad.center_x = 2.0;  // object would stick out of the image
    REQUIRE_THROWS_AS(make_scene(bad), DataError);
    SceneSpec far_face = spec_for(0, 5);
    far_face.face_dx = far_face.object_radius * 3.0;
    REQUIRE_THROWS_AS(make_scene(far_face), DataError);
  }
}

TEST_CASE("simulate_gaze contracts") {
  const SceneRender scene = make_scene(spec_for(1, 77));
  GazeSimParams params;
  params.seed = 5;

  SECTION("deterministic given the seed") {
    const auto a = simulate_gaze(scene.rois, 32, 32, 500, params);
    const auto b = simulate_gaze(scene.rois, 32, 32, 500, params);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].x == b[i].x);
      REQUIRE(a[i].y == b[i].y);
    }
  }
  SECTION("one sample per millisecond") {
    const auto samples = simulate_gaze(scene.rois, 32, 32, 321, params);
    REQUIRE(samples.size() == 321);
    for (std::size_t i = 0; i < samples.size(); ++i) REQUIRE(samples[i].t_ms == i);
  }
  SECTION("duration shorter than latency keeps samples within 3 sigma of center") {
    GazeSimParams p = params;
    p.central_sigma = 2.5;
    const auto samples = simulate_gaze(scene.rois, 32, 32, p.latency_ms - 1, p);
    const double cx = 15.5, cy = 15.5;
    for (const FixationSample& s : samples)
      REQUIRE(std::hypot(s.x - cx, s.y - cy) <= 3.0 * p.central_sigma + 1e-9);
  }
  SECTION("face_bias = 1 keeps post-latency samples inside the dilated face ROI") {
    GazeSimParams p = params;
    p.face_bias = 1.0;
    p.object_bias = 0.0;
    const auto samples = simulate_gaze(scene.rois, 32, 32, 1000, p);
    const int margin = static_cast<int>(std::ceil(3.0 * p.tremor_sigma)) + 1;
    const Raster region = dilate(*scene.rois.face_roi, margin);
    for (const FixationSample& s : samples) {
      if (s.t_ms < p.latency_ms) continue;
      const int x = static_cast<int>(std::floor(s.x)), y = static_cast<int>(std::floor(s.y));
      REQUIRE(x >= 0);
      REQUIRE(x < 32);
      REQUIRE(y >= 0);
      REQUIRE(y < 32);
      REQUIRE(region.at(x, y) == 1.0);
    }
  }
  SECTION("face_bias frequency: 0.6 hits the face ROI at 0.6 +- 0.05 over 50 runs") {
    // object_bias = 0 isolates the face channel: the object ROI contains the
    // face, so object fixations would otherwise inflate the count.
    GazeSimParams p = params;
    p.face_bias = 0.6;
    p.object_bias = 0.0;
    double in_face = 0.0, total = 0.0;
    for (int participant = 0; participant < 50; ++participant) {
      p.seed = split_seed(123, participant);
      for (const FixationSample& s : simulate_gaze(scene.rois, 32, 32, 1500, p)) {
        if (s.t_ms < p.latency_ms) continue;
        total += 1.0;
        const int x = static_cast<int>(std::floor(s.x)), y = static_cast<int>(std::floor(s.y));
        if (x >= 0 && x < 32 && y >= 0 && y < 32 && scene.rois.face_roi->at(x, y) != 0.0)
          in_face += 1.0;
      }
    }
    const double fraction = in_face / total;
    REQUIRE(fraction >= 0.55);
    REQUIRE(fraction <= 0.65);
  }
  SECTION("samples never leave the image by more than the tremor margin") {
    GazeSimParams p = params;
    p.face_bias = 0.0;
    p.object_bias = 0.0;  // diffuse exploration reaches the borders
    const double margin = 3.0 * p.tremor_sigma + 1.0;
    for (int rep = 0; rep < 5; ++rep) {
      p.seed = rep;
      for (const FixationSample& s : simulate_gaze(scene.rois, 32, 32, 1000, p)) {
        REQUIRE(s.x >= -margin);
        REQUIRE(s.x <= 32 + margin);
        REQUIRE(s.y >= -margin);
        REQUIRE(s.y <= 32 + margin);
      }
    }
  }
  SECTION("no face: the face share folds into the object") {
    const SceneRender inanimate = make_scene(spec_for(8, 13));
    GazeSimParams p = params;
    p.face_bias = 1.0;
    p.object_bias = 0.0;
    const int margin = static_cast<int>(std::ceil(3.0 * p.tremor_sigma)) + 1;
    const Raster region = dilate(inanimate.rois.object_roi, margin);
    const auto samples = simulate_gaze(inanimate.rois, 32, 32, 800, p);
    for (const FixationSample& s : samples) {
      if (s.t_ms < p.latency_ms) continue;
      const int x = static_cast<int>(std::floor(s.x)), y = static_cast<int>(std::floor(s.y));
      REQUIRE(region.at(std::clamp(x, 0, 31), std::clamp(y, 0, 31)) == 1.0);
    }
  }
}

TEST_CASE("simulated human face bias produces FDI above 1 (direction check)") {
  // Post-latency density mass vs the exact face ROI, face_bias = 0.6.
  const SceneRender scene = make_scene(spec_for(0, 2024));
  GazeSimParams p;
  p.face_bias = 0.6;
  p.object_bias = 0.3;
  double inside = 0.0, outside = 0.0;
  for (int participant = 0; participant < 20; ++participant) {
    p.seed = split_seed(7, participant);
    for (const FixationSample& s : simulate_gaze(scene.rois, 32, 32, 1500, p)) {
      if (s.t_ms < p.latency_ms) continue;
      const int x = static_cast<int>(std::floor(s.x)), y = static_cast<int>(std::floor(s.y));
      if (x < 0 || x >= 32 || y < 0 || y >= 32) continue;
      if (scene.rois.face_roi->at(x, y) != 0.0)
        inside += 1.0;
      else
        outside += 1.0;
    }
  }
  REQUIRE(inside / outside > 1.0);
}
