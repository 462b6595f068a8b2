#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gazespot/convnet.hpp"
#include "gazespot/convnet_io.hpp"
#include "gazespot/csv.hpp"
#include "gazespot/error.hpp"
#include "gazespot/gaze.hpp"
#include "gazespot/metrics.hpp"
#include "gazespot/raster_io.hpp"
#include "gazespot/saliency.hpp"
#include "gazespot/spotlight.hpp"
#include "gazespot/stats.hpp"
#include "gazespot/synth.hpp"

namespace gazespot {

namespace seeds {
// Domain tags for split_seed so no two pipeline stages share a stream.
constexpr std::uint64_t kScene = 0x01;
constexpr std::uint64_t kGaze = 0x02;
constexpr std::uint64_t kSplit = 0x03;
constexpr std::uint64_t kPretrainScene = 0x04;
constexpr std::uint64_t kPretrainTrain = 0x05;
constexpr std::uint64_t kCell = 0x06;
constexpr std::uint64_t kSweepBoot = 0x07;
constexpr std::uint64_t kReportBoot = 0x08;
}  // namespace seeds

struct StudyConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int image_size = 32;
  int num_categories = 6;       // up to 12; half animate, half inanimate
  int images_per_category = 40; // half reserved for testing
  int participants = 20;
  double duration_ms = 1500.0;
  double heatmap_sigma = 0.0;   // <= 0: scaled from the reference 20 px / 227 px
  double roi_sigma = 0.0;       // <= 0: scaled from 5 px / 227 px
  int roi_width = 0;            // <= 0: scaled from 10 px / 227 px
  bool fdi_area_normalized = false;
  GazeSimParams gaze;
  SpotlightConfig spotlight;  // sigmas/widths <= 0 select the scaled defaults
  std::vector<Direction> directions{Direction::HS, Direction::AS};
  std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int seeds_per_cell = 10;
  TrainConfig train;
  int pretrain_categories = 12;
  int pretrain_images_per_category = 24;
  TrainConfig pretrain;
  int jobs = 0;  // 0: hardware concurrency; GS_JOBS env overrides
  bool save_maps = false;
  bool save_models = true;

  StudyConfig() {
    pretrain.base_lr = 2e-3;
    pretrain.max_epochs = 20;
    spotlight.blur_sigma = -1;
    spotlight.blur_width = -1;
    spotlight.taper_sigma = -1;
    spotlight.taper_width = -1;
  }

  double effective_heatmap_sigma() const {
    return heatmap_sigma > 0 ? heatmap_sigma : std::max(1.5, 0.07 * image_size);
  }
  // Desk-scale blurring defaults. The blur sigma tracks the focal-motif
  // scale (an eighth of the image side) so blurring actually erases the
  // geometry it covers; the taper stays a thin feather at the manipulation
  // boundary, the reference recipe's 4% of the image side. Width/sigma
  // ratios follow the reference recipe (30:7 and 35:9).
  SpotlightConfig effective_spotlight() const {
    SpotlightConfig s = spotlight;
    if (s.blur_sigma <= 0) s.blur_sigma = 0.125 * image_size;
    if (s.blur_width <= 0)
      s.blur_width = static_cast<int>(std::lround(s.blur_sigma * 30.0 / 7.0));
    if (s.taper_sigma <= 0) s.taper_sigma = std::max(1.2, 9.0 * image_size / 227.0);
    if (s.taper_width <= 0)
      s.taper_width = static_cast<int>(std::lround(s.taper_sigma * 35.0 / 9.0));
    return s;
  }
  double effective_roi_sigma() const {
    return roi_sigma > 0 ? roi_sigma : std::max(0.5, 5.0 * image_size / 227.0);
  }
  int effective_roi_width() const {
    return roi_width > 0 ? roi_width : std::max(3, static_cast<int>(std::lround(10.0 * image_size / 227.0)));
  }
  int effective_jobs() const {
    if (const char* env = std::getenv("GS_JOBS")) {
      const int j = std::atoi(env);
      if (j >= 1) return j;
    }
    if (jobs >= 1) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }

  void validate() const {
    if (num_categories < 2 || num_categories > 12)
      throw DataError("config: num_categories must be in [2,12]");
    if (images_per_category < 4) throw DataError("config: images_per_category must be >= 4");
    if (participants < 1) throw DataError("config: participants must be >= 1");
    if (image_size < 16) throw DataError("config: image_size must be >= 16");
    if (seeds_per_cell < 1) throw DataError("config: seeds_per_cell must be >= 1");
    if (directions.empty() || ratios.empty()) throw DataError("config: empty direction/ratio grid");
    for (double r : ratios)
      if (!(r >= 0.0 && r <= 1.0)) throw DataError("config: ratios must lie in [0,1]");
    effective_spotlight().validate();
    train.validate();
    pretrain.validate();
  }
};

// Condition label: ratio 0 is the standard net regardless of direction.
inline std::string condition_name(Direction d, double ratio) {
  const int pct = static_cast<int>(std::lround(ratio * 100.0));
  if (pct == 0) return "STD";
  if (pct == 100) return direction_name(d);
  return direction_name(d) + "-" + std::to_string(pct);
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

inline StudyConfig config_from_json(const nlohmann::json& j) {
  StudyConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.image_size = j.value("image_size", c.image_size);
    c.num_categories = j.value("categories", c.num_categories);
    c.images_per_category = j.value("images_per_category", c.images_per_category);
    c.participants = j.value("participants", c.participants);
    c.duration_ms = j.value("duration_ms", c.duration_ms);
    c.heatmap_sigma = j.value("heatmap_sigma", c.heatmap_sigma);
    c.roi_sigma = j.value("roi_sigma", c.roi_sigma);
    c.roi_width = j.value("roi_width", c.roi_width);
    c.fdi_area_normalized = j.value("fdi_area_normalized", c.fdi_area_normalized);
    c.seeds_per_cell = j.value("seeds_per_cell", c.seeds_per_cell);
    c.jobs = j.value("jobs", c.jobs);
    c.save_maps = j.value("save_maps", c.save_maps);
    c.save_models = j.value("save_models", c.save_models);
    if (j.contains("directions")) {
      c.directions.clear();
      for (const auto& d : j.at("directions")) c.directions.push_back(parse_direction(d));
    }
    if (j.contains("ratios")) {
      c.ratios.clear();
      for (const auto& r : j.at("ratios")) c.ratios.push_back(r.get<double>());
    }
    if (j.contains("gaze")) {
      const auto& g = j.at("gaze");
      c.gaze.latency_ms = g.value("latency_ms", c.gaze.latency_ms);
      c.gaze.central_sigma = g.value("central_sigma", c.gaze.central_sigma);
      c.gaze.face_bias = g.value("face_bias", c.gaze.face_bias);
      c.gaze.object_bias = g.value("object_bias", c.gaze.object_bias);
      c.gaze.fixation_mean_ms = g.value("fixation_mean_ms", c.gaze.fixation_mean_ms);
      c.gaze.fixation_jitter_ms = g.value("fixation_jitter_ms", c.gaze.fixation_jitter_ms);
      c.gaze.tremor_sigma = g.value("tremor_sigma", c.gaze.tremor_sigma);
    }
    if (j.contains("spotlight")) {
      const auto& s = j.at("spotlight");
      c.spotlight.tau = s.value("tau", c.spotlight.tau);
      c.spotlight.blur_sigma = s.value("blur_sigma", c.spotlight.blur_sigma);
      c.spotlight.blur_width = s.value("blur_width", c.spotlight.blur_width);
      c.spotlight.taper_sigma = s.value("taper_sigma", c.spotlight.taper_sigma);
      c.spotlight.taper_width = s.value("taper_width", c.spotlight.taper_width);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.base_lr = t.value("base_lr", c.train.base_lr);
      c.train.momentum = t.value("momentum", c.train.momentum);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.val_fraction = t.value("val_fraction", c.train.val_fraction);
    }
    if (j.contains("pretrain")) {
      const auto& t = j.at("pretrain");
      c.pretrain_categories = t.value("categories", c.pretrain_categories);
      c.pretrain_images_per_category = t.value("images_per_category", c.pretrain_images_per_category);
      c.pretrain.base_lr = t.value("base_lr", c.pretrain.base_lr);
      c.pretrain.max_epochs = t.value("max_epochs", c.pretrain.max_epochs);
      c.pretrain.batch_size = t.value("batch_size", c.pretrain.batch_size);
      c.pretrain.patience = t.value("patience", c.pretrain.patience);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Study data
// ---------------------------------------------------------------------------

struct StudyImage {
  std::string id;
  int synth_category = 0;
  int label = 0;
  bool animate = false;
  bool face_present = false;
  RgbImage image;
  RoiSet rois;
  Raster smoothed_face_roi;  // empty when no face
  HeatmapSet heatmaps;
};

struct StudyData {
  std::vector<StudyImage> images;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Categories enter the study in whole pairs (j, j+3 share hue/body and
// differ by focal motif), alternating animate and inanimate pairs. Without
// both pair members present the focal motif would carry no information.
inline int study_synth_category(int label, int num_categories) {
  static constexpr int kOrder[kCategoryCycle] = {0, 3, 6, 9, 1, 4, 7, 10, 2, 5, 8, 11};
  (void)num_categories;
  return kOrder[label % kCategoryCycle];
}

inline StudyData prepare_study(const StudyConfig& config) {
  config.validate();
  StudyData study;
  const int size = config.image_size;
  const std::uint64_t scene_domain = split_seed(config.seed, seeds::kScene);
  const std::uint64_t gaze_domain = split_seed(config.seed, seeds::kGaze);

  HeatmapParams hp;
  hp.sigma = config.effective_heatmap_sigma();

  const int total = config.num_categories * config.images_per_category;
  study.images.reserve(total);
  for (int label = 0; label < config.num_categories; ++label) {
    const int synth_cat = study_synth_category(label, config.num_categories);
    for (int k = 0; k < config.images_per_category; ++k) {
      const int index = label * config.images_per_category + k;
      StudyImage si;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "img%04d", index);
      si.id = buf;
      si.synth_category = synth_cat;
      si.label = label;
      si.animate = is_animate(synth_cat);

      Rng scene_rng(split_seed(scene_domain, index));
      SceneSpec spec = random_scene_spec(synth_cat, size, size, scene_rng);
      spec.seed = split_seed(scene_domain, 1000000 + index);
      SceneRender render = make_scene(spec);
      si.image = std::move(render.image);
      si.rois = std::move(render.rois);
      si.rois.image_id = si.id;
      si.face_present = si.rois.face_present;
      if (si.face_present)
        si.smoothed_face_roi = build_roi({*si.rois.face_roi}, config.effective_roi_sigma(),
                                         config.effective_roi_width());

      std::vector<FixationSample> samples;
      const std::uint64_t image_gaze = split_seed(gaze_domain, index);
      for (int p = 0; p < config.participants; ++p) {
        GazeSimParams gp = config.gaze;
        gp.seed = split_seed(image_gaze, p);
        std::snprintf(buf, sizeof(buf), "p%03d", p);
        const auto one = simulate_gaze(si.rois, size, size, config.duration_ms, gp, buf, si.id);
        samples.insert(samples.end(), one.begin(), one.end());
      }
      si.heatmaps = window_heatmaps(samples, size, size, hp);
      study.images.push_back(std::move(si));
    }
  }

  // Single fixed held-out half per study seed; manipulation only ever sees
  // train-half heatmaps.
  Rng split_rng(split_seed(config.seed, seeds::kSplit));
  for (int label = 0; label < config.num_categories; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < study.images.size(); ++i)
      if (study.images[i].label == label) idx.push_back(i);
    split_rng.shuffle(idx.begin(), idx.end());
    const std::size_t n_test = idx.size() / 2;
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? study.test_indices : study.train_indices).push_back(idx[i]);
  }
  std::sort(study.train_indices.begin(), study.train_indices.end());
  std::sort(study.test_indices.begin(), study.test_indices.end());
  return study;
}

inline void write_study_artifacts(const StudyConfig& config, const StudyData& study) {
  namespace fs = std::filesystem;
  const fs::path out(config.out_dir);
  fs::create_directories(out / "scenes");
  fs::create_directories(out / "rois");
  fs::create_directories(out / "heatmaps");

  std::set<std::size_t> test_set(study.test_indices.begin(), study.test_indices.end());
  CsvWriter manifest((out / "scenes_manifest.csv").string(),
                     "image,category,animate,face_present,seed,split");
  for (std::size_t i = 0; i < study.images.size(); ++i) {
    const StudyImage& si = study.images[i];
    write_ppm(si.image, (out / "scenes" / (si.id + ".ppm")).string());
    write_rstr(si.rois.object_roi, (out / "rois" / (si.id + "_object.rstr")).string());
    if (si.face_present)
      write_rstr(*si.rois.face_roi, (out / "rois" / (si.id + "_face.rstr")).string());
    for (std::size_t w = 0; w < si.heatmaps.windows.size(); ++w)
      write_rstr(si.heatmaps.windows[w],
                 (out / "heatmaps" / (si.id + "_w" + std::to_string(w) + ".rstr")).string());
    write_rstr(si.heatmaps.full, (out / "heatmaps" / (si.id + "_full.rstr")).string());
    manifest.row({si.id, category_name(si.synth_category), si.animate ? "1" : "0",
                  si.face_present ? "1" : "0", std::to_string(config.seed),
                  test_set.count(i) ? "test" : "train"});
  }
}

// Pretraining on a disjoint synthetic category set (indices 12..), standing
// in for large-scale pretraining. One base net per study seed.
inline Network pretrain_base(const StudyConfig& config) {
  const int size = config.image_size;
  const std::uint64_t scene_domain = split_seed(config.seed, seeds::kPretrainScene);
  LabeledData data;
  for (int c = 0; c < config.pretrain_categories; ++c) {
    const int category = kCategoryCycle + c;
    for (int k = 0; k < config.pretrain_images_per_category; ++k) {
      const int index = c * config.pretrain_images_per_category + k;
      Rng rng(split_seed(scene_domain, index));
      SceneSpec spec = random_scene_spec(category, size, size, rng);
      spec.seed = split_seed(scene_domain, 1000000 + index);
      const SceneRender render = make_scene(spec);
      data.images.push_back(image_to_tensor(render.image));
      data.labels.push_back(c);
    }
  }
  Network net = make_desk_network(config.pretrain_categories, size, size);
  init_weights(net, split_seed(config.seed, seeds::kPretrainTrain));
  TrainConfig tc = config.pretrain;
  tc.seed = split_seed(config.seed, seeds::kPretrainTrain + 100);
  return train_scratch(net, data, tc).net;
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

struct SimilarityRecord {
  std::string image_id;
  std::string condition;
  int seed_index = 0;
  int window = -1;  // -1: full-duration heatmap
  double r = 0.0;
  double z = 0.0;
};

struct FdiRecord {
  std::string image_id;
  std::string condition;
  int seed_index = 0;
  double fdi = 0.0;
  bool censored = false;  // all attention inside the ROI
};

struct CellResult {
  Direction direction = Direction::HS;
  double ratio = 0.0;
  int seed_index = 0;
  bool completed = false;
  std::string error;
  double accuracy = 0.0;
  std::vector<SimilarityRecord> similarity;  // full + per-window rows
  std::vector<FdiRecord> fdi;
  int excluded_correlations = 0;
};

inline std::string ratio_tag(double ratio) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "r%03d", static_cast<int>(std::lround(ratio * 100.0)));
  return buf;
}

inline LabeledData test_data(const StudyData& study) {
  LabeledData data;
  for (std::size_t i : study.test_indices) {
    data.images.push_back(image_to_tensor(study.images[i].image));
    data.labels.push_back(study.images[i].label);
  }
  return data;
}

// One (direction, ratio, seed) cell: build the ratio dataset, fine-tune,
// evaluate held-out accuracy, extract GradCAMs for true labels, and score
// similarity and face-detection records. Everything the cell writes lives
// under its own directory, so cells are independent and re-runs are
// byte-identical.
inline CellResult run_cell(const StudyConfig& config, const StudyData& study,
                           const Network& base, Direction direction, double ratio,
                           int seed_index, const std::string& cell_dir) {
  namespace fs = std::filesystem;
  CellResult result;
  result.direction = direction;
  result.ratio = ratio;
  result.seed_index = seed_index;
  const std::string condition = condition_name(direction, ratio);
  const std::uint64_t cell_seed =
      split_seed(split_seed(config.seed, seeds::kCell), static_cast<std::uint64_t>(seed_index));

  fs::create_directories(cell_dir);

  // Train-half sources and their heatmaps; the disjointness of train and
  // test heatmaps is asserted, mirroring the paper's image halving.
  std::vector<SourceImage> sources;
  std::map<std::string, Raster> train_heatmaps;
  std::set<std::string> test_ids;
  for (std::size_t i : study.test_indices) test_ids.insert(study.images[i].id);
  for (std::size_t i : study.train_indices) {
    const StudyImage& si = study.images[i];
    if (test_ids.count(si.id))
      throw DataError("run_cell: train/test image sets overlap at " + si.id);
    sources.push_back({si.id, si.label, si.image});
    train_heatmaps.emplace(si.id, si.heatmaps.full);
  }

  RatioDatasetSpec spec;
  spec.direction = direction;
  spec.ratio = ratio;
  spec.seed = cell_seed;
  spec.spotlight = config.effective_spotlight();
  const std::vector<DatasetEntry> entries = build_ratio_dataset(sources, train_heatmaps, spec);

  {
    CsvWriter manifest(cell_dir + "/manifest.csv",
                       "image,category,direction,ratio,manipulated,blur_fraction");
    for (const DatasetEntry& e : entries)
      manifest.row({e.image_id, std::to_string(e.category), direction_name(direction),
                    format_double(ratio), e.manipulated ? "1" : "0",
                    format_double(e.blur_fraction)});
  }

  LabeledData train;
  for (const DatasetEntry& e : entries) {
    train.images.push_back(image_to_tensor(e.image));
    train.labels.push_back(e.category);
  }

  TrainConfig tc = config.train;
  tc.seed = cell_seed;
  const FineTuneResult tuned = fine_tune(base, train, tc);
  write_history_csv(tuned.history, cell_dir + "/history.csv");
  if (config.save_models) write_network(tuned.net, cell_dir + "/model.gsnn");

  const LabeledData test = test_data(study);
  const Evaluation ev = evaluate_accuracy(tuned.net, test);
  result.accuracy = ev.accuracy;
  {
    CsvWriter acc(cell_dir + "/accuracy.csv", "condition,seed,accuracy,n_test");
    acc.row({condition, std::to_string(seed_index), format_double(ev.accuracy),
             std::to_string(test.size())});
    CsvWriter conf(cell_dir + "/confusion.csv", "true_category,predicted_category,count");
    for (int t = 0; t < ev.num_categories; ++t)
      for (int p = 0; p < ev.num_categories; ++p)
        conf.row({std::to_string(t), std::to_string(p),
                  std::to_string(ev.confusion[static_cast<std::size_t>(t) * ev.num_categories + p])});
  }

  if (config.save_maps) fs::create_directories(fs::path(cell_dir) / "maps");

  CsvWriter results(cell_dir + "/results.csv", "image,condition,seed,window,r,z");
  CsvWriter fdi_csv(cell_dir + "/fdi.csv", "image,condition,seed,fdi,censored");
  for (std::size_t i : study.test_indices) {
    const StudyImage& si = study.images[i];
    const SaliencyMap sal = gradcam(tuned.net, si.image, si.label, si.id);
    if (config.save_maps) {
      write_rstr(sal.map, cell_dir + "/maps/" + si.id + "_gradcam.rstr");
      write_pgm(sal.map, cell_dir + "/maps/" + si.id + "_gradcam.pgm");
    }
    try {
      const double r = pearson(si.heatmaps.full, sal.map);
      const double z = fisher_z(r);
      result.similarity.push_back({si.id, condition, seed_index, -1, r, z});
      results.row({si.id, condition, std::to_string(seed_index), "", format_double(r),
                   format_double(z)});
    } catch (const CorrelationUndefined&) {
      ++result.excluded_correlations;
    }
    for (std::size_t w = 0; w < si.heatmaps.windows.size(); ++w) {
      try {
        const double r = pearson(si.heatmaps.windows[w], sal.map);
        const double z = fisher_z(r);
        result.similarity.push_back({si.id, condition, seed_index, static_cast<int>(w), r, z});
        results.row({si.id, condition, std::to_string(seed_index), std::to_string(w),
                     format_double(r), format_double(z)});
      } catch (const CorrelationUndefined&) {
        ++result.excluded_correlations;
      }
    }
    if (si.face_present) {
      try {
        const double fdi =
            face_detection_index(sal.map, si.smoothed_face_roi, config.fdi_area_normalized);
        result.fdi.push_back({si.id, condition, seed_index, fdi, false});
        fdi_csv.row({si.id, condition, std::to_string(seed_index), format_double(fdi), "0"});
      } catch (const DegenerateFdi&) {
        result.fdi.push_back({si.id, condition, seed_index, 0.0, true});
        fdi_csv.row({si.id, condition, std::to_string(seed_index), "", "1"});
      }
    }
  }
  result.completed = true;
  return result;
}

// All seeds of one (direction, ratio) condition; failures abort the seed,
// not the condition.
inline std::vector<CellResult> run_condition(const StudyConfig& config, const StudyData& study,
                                             const Network& base, Direction direction,
                                             double ratio) {
  namespace fs = std::filesystem;
  std::vector<CellResult> out;
  for (int s = 0; s < config.seeds_per_cell; ++s) {
    const fs::path dir = fs::path(config.out_dir) / direction_name(direction) / ratio_tag(ratio) /
                         ("s" + std::to_string(s));
    CellResult r;
    try {
      r = run_cell(config, study, base, direction, ratio, s, dir.string());
    } catch (const std::exception& e) {
      r.direction = direction;
      r.ratio = ratio;
      r.seed_index = s;
      r.completed = false;
      r.error = e.what();
      fs::create_directories(dir);
      std::ofstream log(dir / "error.log");
      log << e.what() << "\n";
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  Direction direction = Direction::HS;
  double ratio = 0.0;
  int seeds = 0;
  double mean_accuracy = 0.0;
  double acc_lo = 0.0, acc_hi = 0.0;
  double mean_z = 0.0;
  double z_lo = 0.0, z_hi = 0.0;
};

struct SweepOutcome {
  std::vector<SweepPoint> points;
  std::vector<CellResult> cells;
  int completed = 0;
  int failed = 0;
};

// Mean full-duration z per seed (mean over test images).
inline std::vector<double> per_seed_mean_z(const std::vector<const CellResult*>& cells) {
  std::vector<double> out;
  for (const CellResult* c : cells) {
    std::vector<double> zs;
    for (const SimilarityRecord& rec : c->similarity)
      if (rec.window < 0) zs.push_back(rec.z);
    if (!zs.empty()) out.push_back(mean_of(zs));
  }
  return out;
}

inline SweepOutcome run_sweep(const StudyConfig& config, const StudyData& study,
                              const Network& base) {
  namespace fs = std::filesystem;
  struct Cell {
    Direction direction;
    double ratio;
    int seed_index;
  };
  std::vector<Cell> grid;
  for (Direction d : config.directions)
    for (double r : config.ratios)
      for (int s = 0; s < config.seeds_per_cell; ++s) grid.push_back({d, r, s});

  SweepOutcome outcome;
  outcome.cells.resize(grid.size());
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, std::min<int>(config.effective_jobs(), static_cast<int>(grid.size())));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      const Cell& cell = grid[i];
      const fs::path dir = fs::path(config.out_dir) / direction_name(cell.direction) /
                           ratio_tag(cell.ratio) / ("s" + std::to_string(cell.seed_index));
      try {
        outcome.cells[i] =
            run_cell(config, study, base, cell.direction, cell.ratio, cell.seed_index, dir.string());
      } catch (const std::exception& e) {
        CellResult r;
        r.direction = cell.direction;
        r.ratio = cell.ratio;
        r.seed_index = cell.seed_index;
        r.error = e.what();
        fs::create_directories(dir);
        std::ofstream log(dir / "error.log");
        log << e.what() << "\n";
        outcome.cells[i] = std::move(r);
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (const CellResult& c : outcome.cells) {
    if (c.completed)
      ++outcome.completed;
    else
      ++outcome.failed;
  }

  // Aggregate per grid point, in grid order so the CSV is reproducible.
  std::uint64_t boot_domain = split_seed(config.seed, seeds::kSweepBoot);
  CsvWriter sweep_csv((fs::path(config.out_dir) / "sweep.csv").string(),
                      "direction,ratio,seeds,mean_accuracy,acc_ci_lo,acc_ci_hi,"
                      "mean_z,z_ci_lo,z_ci_hi");
  std::size_t point_index = 0;
  for (Direction d : config.directions)
    for (double r : config.ratios) {
      std::vector<const CellResult*> cells;
      for (const CellResult& c : outcome.cells)
        if (c.completed && c.direction == d && c.ratio == r) cells.push_back(&c);
      ++point_index;
      if (cells.empty()) continue;
      SweepPoint p;
      p.direction = d;
      p.ratio = r;
      p.seeds = static_cast<int>(cells.size());
      std::vector<double> accs;
      for (const CellResult* c : cells) accs.push_back(c->accuracy);
      const std::vector<double> zs = per_seed_mean_z(cells);
      p.mean_accuracy = mean_of(accs);
      std::tie(p.acc_lo, p.acc_hi) =
          bootstrap_ci(accs, 2000, 0.95, split_seed(boot_domain, 2 * point_index));
      if (!zs.empty()) {
        p.mean_z = mean_of(zs);
        std::tie(p.z_lo, p.z_hi) =
            bootstrap_ci(zs, 2000, 0.95, split_seed(boot_domain, 2 * point_index + 1));
      }
      sweep_csv.row({direction_name(d), format_double(r), std::to_string(p.seeds),
                     format_double(p.mean_accuracy), format_double(p.acc_lo),
                     format_double(p.acc_hi), format_double(p.mean_z), format_double(p.z_lo),
                     format_double(p.z_hi)});
      outcome.points.push_back(p);
    }
  return outcome;
}

inline SweepOutcome run_study(const StudyConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  const StudyData study = prepare_study(config);
  write_study_artifacts(config, study);
  const Network base = pretrain_base(config);
  write_network(base, (std::filesystem::path(config.out_dir) / "base.gsnn").string());
  return run_sweep(config, study, base);
}

}  // namespace gazespot
