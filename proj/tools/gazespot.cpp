// gazespot — synthetic guided-visual-attention experiments end to end:
// scene/gaze synthesis, fixation heatmaps, spotlight manipulations,
// fine-tuning, GradCAM extraction, similarity/FDI scoring, ratio sweeps,
// and the statistics used to compare conditions.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gazespot/convnet_io.hpp"
#include "gazespot/harness.hpp"
#include "gazespot/report.hpp"

namespace fs = std::filesystem;
using namespace gazespot;

namespace {

struct ManifestEntry {
  std::string image_id;
  std::string category;
  int label = 0;
};

// Manifest CSV (image,category,...); labels are assigned by sorted category
// name so they are stable across runs.
std::vector<ManifestEntry> read_manifest_entries(const std::string& path,
                                                 std::map<std::string, int>* label_map) {
  const CsvTable t = read_csv(path);
  const int ci = t.column("image"), cc = t.column("category");
  if (ci < 0 || cc < 0) throw DataError(path + ": manifest needs image,category columns");
  std::set<std::string> names;
  for (const auto& row : t.rows) names.insert(row[cc]);
  std::map<std::string, int> labels;
  int next = 0;
  for (const std::string& n : names) labels[n] = next++;
  std::vector<ManifestEntry> entries;
  for (const auto& row : t.rows)
    entries.push_back({row[ci], row[cc], labels[row[cc]]});
  if (label_map) *label_map = labels;
  return entries;
}

LabeledData load_labeled_images(const std::vector<ManifestEntry>& entries,
                                const std::string& image_dir) {
  LabeledData data;
  for (const ManifestEntry& e : entries) {
    const RgbImage img = read_ppm((fs::path(image_dir) / (e.image_id + ".ppm")).string());
    data.images.push_back(image_to_tensor(img));
    data.labels.push_back(e.label);
  }
  return data;
}

int cmd_synth(const std::string& out_dir, int categories, int images_per_category, int size,
              int participants, double duration, std::uint64_t seed, const GazeSimParams& gaze,
              double clutter) {
  fs::create_directories(fs::path(out_dir) / "scenes");
  fs::create_directories(fs::path(out_dir) / "rois");
  CsvWriter manifest((fs::path(out_dir) / "scenes_manifest.csv").string(),
                     "image,category,animate,face_present,seed");
  CsvWriter gaze_csv((fs::path(out_dir) / "gaze.csv").string(), "participant,image,t_ms,x,y");

  const std::uint64_t scene_domain = split_seed(seed, seeds::kScene);
  const std::uint64_t gaze_domain = split_seed(seed, seeds::kGaze);
  for (int label = 0; label < categories; ++label) {
    const int cat = study_synth_category(label, categories);
    for (int k = 0; k < images_per_category; ++k) {
      const int index = label * images_per_category + k;
      char id[16];
      std::snprintf(id, sizeof(id), "img%04d", index);
      Rng rng(split_seed(scene_domain, index));
      SceneSpec spec = random_scene_spec(cat, size, size, rng);
      spec.seed = split_seed(scene_domain, 1000000 + index);
      spec.clutter = clutter;
      const SceneRender render = make_scene(spec);
      write_ppm(render.image, (fs::path(out_dir) / "scenes" / (std::string(id) + ".ppm")).string());
      write_rstr(render.rois.object_roi,
                 (fs::path(out_dir) / "rois" / (std::string(id) + "_object.rstr")).string());
      if (render.rois.face_present)
        write_rstr(*render.rois.face_roi,
                   (fs::path(out_dir) / "rois" / (std::string(id) + "_face.rstr")).string());
      manifest.row({id, category_name(cat), is_animate(cat) ? "1" : "0",
                    render.rois.face_present ? "1" : "0", std::to_string(seed)});
      for (int p = 0; p < participants; ++p) {
        GazeSimParams gp = gaze;
        gp.seed = split_seed(split_seed(gaze_domain, index), p);
        char pid[16];
        std::snprintf(pid, sizeof(pid), "p%03d", p);
        for (const FixationSample& s : simulate_gaze(render.rois, size, size, duration, gp, pid, id))
          gaze_csv.row({s.participant_id, s.image_id, format_double(s.t_ms), format_double(s.x),
                        format_double(s.y)});
      }
    }
  }
  std::cout << "wrote " << categories * images_per_category << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_heatmap(const std::string& fixations, int width, int height, const std::string& out_dir,
                double sigma, double window_ms, int max_windows, bool cumulative) {
  fs::create_directories(out_dir);
  const auto samples = read_fixation_csv(fixations);
  HeatmapParams hp;
  hp.sigma = sigma;
  hp.windowing.window_ms = window_ms;
  hp.windowing.max_windows = max_windows;
  hp.cumulative = cumulative;
  int n = 0;
  for (const auto& [image_id, image_samples] : group_by_image(samples)) {
    const HeatmapSet set = window_heatmaps(image_samples, width, height, hp);
    for (std::size_t w = 0; w < set.windows.size(); ++w)
      write_rstr(set.windows[w],
                 (fs::path(out_dir) / (image_id + "_w" + std::to_string(w) + ".rstr")).string());
    write_rstr(set.full, (fs::path(out_dir) / (image_id + "_full.rstr")).string());
    ++n;
  }
  std::cout << "wrote heatmaps for " << n << " images to " << out_dir << "\n";
  return 0;
}

int cmd_spotlight(const std::string& manifest_path, const std::string& image_dir,
                  const std::string& heatmap_dir, const std::string& direction_str, double ratio,
                  double tau, std::uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::map<std::string, int> label_map;
  const auto entries = read_manifest_entries(manifest_path, &label_map);

  std::vector<SourceImage> sources;
  std::map<std::string, Raster> heatmaps;
  for (const ManifestEntry& e : entries) {
    sources.push_back(
        {e.image_id, e.label, read_ppm((fs::path(image_dir) / (e.image_id + ".ppm")).string())});
    const fs::path hm = fs::path(heatmap_dir) / (e.image_id + "_full.rstr");
    if (fs::exists(hm)) heatmaps.emplace(e.image_id, read_rstr(hm.string()));
  }
  RatioDatasetSpec spec;
  spec.direction = parse_direction(direction_str);
  spec.ratio = ratio;
  spec.seed = seed;
  spec.spotlight.tau = tau;
  const auto dataset = build_ratio_dataset(sources, heatmaps, spec);

  std::map<int, std::string> names;
  for (const auto& [name, label] : label_map) names[label] = name;
  CsvWriter manifest((fs::path(out_dir) / "manifest.csv").string(),
                     "image,category,direction,ratio,manipulated,blur_fraction");
  for (const DatasetEntry& e : dataset) {
    write_ppm(e.image, (fs::path(out_dir) / (e.image_id + ".ppm")).string());
    manifest.row({e.image_id, names[e.category], direction_str, format_double(ratio),
                  e.manipulated ? "1" : "0", format_double(e.blur_fraction)});
  }
  std::cout << "wrote " << dataset.size() << " images to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& image_dir, bool pretrain,
              const std::string& base_path, const std::string& model_out,
              const std::string& history_out, TrainConfig tc) {
  const auto entries = read_manifest_entries(manifest_path, nullptr);
  const LabeledData data = load_labeled_images(entries, image_dir);
  const int categories = *std::max_element(data.labels.begin(), data.labels.end()) + 1;

  FineTuneResult result;
  if (pretrain) {
    const int h = data.images.front().dim(1), w = data.images.front().dim(2);
    Network net = make_desk_network(categories, h, w);
    init_weights(net, split_seed(tc.seed, seeds::kPretrainTrain));
    result = train_scratch(net, data, tc);
  } else {
    if (base_path.empty()) throw UsageError("train: --base is required unless --pretrain");
    const Network base = read_network(base_path);
    result = fine_tune(base, data, tc);
  }
  write_network(result.net, model_out);
  if (!history_out.empty()) write_history_csv(result.history, history_out);
  std::cout << "trained " << (pretrain ? "from scratch" : "by fine-tuning") << ", best epoch "
            << result.best_epoch << ", model written to " << model_out << "\n";
  return 0;
}

int cmd_gradcam(const std::string& model_path, const std::string& manifest_path,
                const std::string& image_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Network net = read_network(model_path);
  const auto entries = read_manifest_entries(manifest_path, nullptr);
  for (const ManifestEntry& e : entries) {
    const RgbImage img = read_ppm((fs::path(image_dir) / (e.image_id + ".ppm")).string());
    const SaliencyMap sal = gradcam(net, img, e.label, e.image_id);
    write_rstr(sal.map, (fs::path(out_dir) / (e.image_id + "_gradcam.rstr")).string());
    write_pgm(sal.map, (fs::path(out_dir) / (e.image_id + "_gradcam.pgm")).string());
  }
  std::cout << "wrote " << entries.size() << " saliency maps to " << out_dir << "\n";
  return 0;
}

std::vector<std::string> saliency_ids(const std::string& dir) {
  std::vector<std::string> ids;
  const std::string suffix = "_gradcam.rstr";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.substr(name.size() - suffix.size()) == suffix)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

int cmd_compare(const std::string& heatmap_dir, const std::string& saliency_dir,
                const std::string& out_csv, const std::string& condition, int seed,
                bool windows) {
  CsvWriter out(out_csv, "image,condition,seed,window,r,z");
  int excluded = 0;
  for (const std::string& id : saliency_ids(saliency_dir)) {
    const Raster sal = read_rstr((fs::path(saliency_dir) / (id + "_gradcam.rstr")).string());
    const fs::path full = fs::path(heatmap_dir) / (id + "_full.rstr");
    if (!fs::exists(full)) continue;
    try {
      const double r = pearson(read_rstr(full.string()), sal);
      out.row({id, condition, std::to_string(seed), "", format_double(r),
               format_double(fisher_z(r))});
    } catch (const CorrelationUndefined&) {
      ++excluded;
    }
    for (int w = 0; windows; ++w) {
      const fs::path wp = fs::path(heatmap_dir) / (id + "_w" + std::to_string(w) + ".rstr");
      if (!fs::exists(wp)) break;
      try {
        const double r = pearson(read_rstr(wp.string()), sal);
        out.row({id, condition, std::to_string(seed), std::to_string(w), format_double(r),
                 format_double(fisher_z(r))});
      } catch (const CorrelationUndefined&) {
        ++excluded;
      }
    }
  }
  if (excluded) std::cerr << "excluded " << excluded << " undefined correlations\n";
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_fdi(const std::string& map_dir, const std::string& roi_dir, const std::string& out_csv,
            const std::string& condition, int seed, bool area_normalized, double roi_sigma,
            int roi_width) {
  CsvWriter out(out_csv, "image,condition,seed,fdi,censored");
  for (const std::string& id : saliency_ids(map_dir)) {
    const fs::path face = fs::path(roi_dir) / (id + "_face.rstr");
    if (!fs::exists(face)) continue;
    const Raster map = read_rstr((fs::path(map_dir) / (id + "_gradcam.rstr")).string());
    const Raster roi = build_roi({read_rstr(face.string())}, roi_sigma, roi_width);
    try {
      const double fdi = face_detection_index(map, roi, area_normalized);
      out.row({id, condition, std::to_string(seed), format_double(fdi), "0"});
    } catch (const DegenerateFdi&) {
      out.row({id, condition, std::to_string(seed), "", "1"});
    }
  }
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override, int jobs_override) {
  StudyConfig config = load_config(config_path);
  if (!out_override.empty()) config.out_dir = out_override;
  if (jobs_override > 0) config.jobs = jobs_override;
  const SweepOutcome outcome = run_study(config);
  std::cout << "cells completed: " << outcome.completed << ", failed: " << outcome.failed << "\n";
  for (const SweepPoint& p : outcome.points)
    std::cout << condition_name(p.direction, p.ratio) << " ratio=" << p.ratio
              << " acc=" << p.mean_accuracy << " z=" << p.mean_z << " (" << p.seeds << " seeds)\n";
  write_report(config.out_dir);
  std::cout << "report written to " << config.out_dir << "/report\n";
  return outcome.failed == 0 ? 0 : 3;
}

std::vector<std::vector<double>> grouped_values(const CsvTable& t, std::vector<std::string>* names) {
  const int cg = t.column("group"), cv = t.column("value");
  if (cg < 0 || cv < 0) throw DataError("stats input needs group,value columns");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& row : t.rows)
    groups[row[cg]].push_back(parse_double(row[cv], "stats input"));
  std::vector<std::vector<double>> out;
  for (auto& [name, values] : groups) {
    if (names) names->push_back(name);
    out.push_back(std::move(values));
  }
  return out;
}

void write_test_results(const std::string& path, const std::vector<std::string>& comparisons,
                        std::vector<TestResult> results, bool adjust) {
  std::vector<double> ps;
  for (const TestResult& r : results) ps.push_back(r.p);
  const std::vector<double> adj = adjust ? bonferroni(ps) : ps;
  CsvWriter out(path, "comparison,test,statistic,df1,df2,p,p_adjusted,effect,effect_name,note");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TestResult& r = results[i];
    out.row({comparisons[i], r.test, format_double(r.statistic),
             std::isnan(r.df1) ? "" : format_double(r.df1),
             std::isnan(r.df2) ? "" : format_double(r.df2), format_double(r.p),
             format_double(adj[i]), format_double(r.effect), r.effect_name, r.note});
  }
}

int cmd_stats(const std::string& input, const std::string& test, const std::string& out_csv,
              bool adjust) {
  const CsvTable t = read_csv(input);
  std::vector<TestResult> results;
  std::vector<std::string> comparisons;

  if (test == "depcorr") {
    const int c12 = t.column("r12"), c13 = t.column("r13"), c23 = t.column("r23");
    if (c12 < 0 || c13 < 0 || c23 < 0)
      throw DataError("depcorr input needs image,r12,r13,r23 columns");
    // Back-transformed average Fisher's Z per column, n = number of images.
    double z12 = 0, z13 = 0, z23 = 0;
    for (const auto& row : t.rows) {
      z12 += std::atanh(parse_double(row[c12], input));
      z13 += std::atanh(parse_double(row[c13], input));
      z23 += std::atanh(parse_double(row[c23], input));
    }
    const double n = static_cast<double>(t.rows.size());
    results.push_back(dependent_corr_test(std::tanh(z12 / n), std::tanh(z13 / n),
                                          std::tanh(z23 / n), t.rows.size()));
    comparisons.push_back("r12_vs_r13");
  } else {
    std::vector<std::string> names;
    const auto groups = grouped_values(t, &names);
    if (test == "welch_anova") {
      results.push_back(welch_anova(groups));
      comparisons.push_back("omnibus");
    } else if (test == "kruskal") {
      results.push_back(kruskal_wallis(groups));
      comparisons.push_back("omnibus");
    } else if (test == "welch_t" || test == "wilcoxon") {
      for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
          results.push_back(test == "welch_t" ? welch_t(groups[i], groups[j])
                                              : wilcoxon_ranksum(groups[i], groups[j]));
          comparisons.push_back(names[i] + "_vs_" + names[j]);
        }
    } else {
      throw UsageError("unknown test '" + test + "'");
    }
  }
  write_test_results(out_csv, comparisons, results, adjust);
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazespot: guided visual attention experiments on synthetic scenes"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate scenes, ROIs, and simulated gaze");
  std::string synth_out;
  int synth_categories = 12, synth_images = 5, synth_size = 32, synth_participants = 3;
  double synth_duration = 1500.0, synth_clutter = 0.6;
  std::uint64_t synth_seed = 1;
  GazeSimParams synth_gaze;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--categories", synth_categories, "number of categories (2-12)");
  synth->add_option("--images-per-category", synth_images, "images per category");
  synth->add_option("--size", synth_size, "image side length in px");
  synth->add_option("--participants", synth_participants, "simulated participants");
  synth->add_option("--duration", synth_duration, "presentation duration in ms");
  synth->add_option("--seed", synth_seed, "master seed");
  synth->add_option("--latency", synth_gaze.latency_ms, "feedforward latency in ms");
  synth->add_option("--central-sigma", synth_gaze.central_sigma, "central phase sigma in px");
  synth->add_option("--face-bias", synth_gaze.face_bias, "P(fixation targets the face)");
  synth->add_option("--object-bias", synth_gaze.object_bias, "P(fixation targets the object)");
  synth->add_option("--clutter", synth_clutter, "background clutter level in [0,1]");

  // heatmap
  auto* heatmap = app.add_subcommand("heatmap", "fixation CSV -> per-window density heatmaps");
  std::string hm_fix, hm_out;
  int hm_w = 0, hm_h = 0, hm_max_windows = 20;
  double hm_sigma = 20.0, hm_window_ms = 50.0;
  bool hm_cumulative = false;
  heatmap->add_option("--fixations", hm_fix, "fixation CSV")->required();
  heatmap->add_option("--width", hm_w, "image width in px")->required();
  heatmap->add_option("--height", hm_h, "image height in px")->required();
  heatmap->add_option("--out", hm_out, "output directory")->required();
  heatmap->add_option("--sigma", hm_sigma, "density smoothing sigma in px");
  heatmap->add_option("--window-ms", hm_window_ms, "window length in ms");
  heatmap->add_option("--max-windows", hm_max_windows, "window cap");
  heatmap->add_flag("--cumulative", hm_cumulative, "cumulative instead of disjoint windows");

  // spotlight
  auto* spot = app.add_subcommand("spotlight", "apply HS/AS manipulation at a given ratio");
  std::string sp_manifest, sp_images, sp_heatmaps, sp_dir = "HS", sp_out;
  double sp_ratio = 1.0, sp_tau = 1.0 / 3.0;
  std::uint64_t sp_seed = 1;
  spot->add_option("--manifest", sp_manifest, "manifest CSV (image,category)")->required();
  spot->add_option("--image-dir", sp_images, "directory with <image>.ppm")->required();
  spot->add_option("--heatmaps", sp_heatmaps, "directory with <image>_full.rstr")->required();
  spot->add_option("--direction", sp_dir, "HS or AS");
  spot->add_option("--ratio", sp_ratio, "fraction manipulated per category");
  spot->add_option("--tau", sp_tau, "density threshold in (0,1)");
  spot->add_option("--seed", sp_seed, "selection seed");
  spot->add_option("--out", sp_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "pretrain or fine-tune a model");
  std::string tr_manifest, tr_images, tr_base, tr_model, tr_history;
  bool tr_pretrain = false;
  TrainConfig tr_config;
  train->add_option("--manifest", tr_manifest, "manifest CSV (image,category)")->required();
  train->add_option("--image-dir", tr_images, "directory with <image>.ppm")->required();
  train->add_flag("--pretrain", tr_pretrain, "train from scratch");
  train->add_option("--base", tr_base, "base model (GSNN1) for fine-tuning");
  train->add_option("--model-out", tr_model, "output model path")->required();
  train->add_option("--history-out", tr_history, "training history CSV");
  train->add_option("--batch-size", tr_config.batch_size, "mini-batch size");
  train->add_option("--lr", tr_config.base_lr, "base learning rate");
  train->add_option("--momentum", tr_config.momentum, "SGDM momentum");
  train->add_option("--epochs", tr_config.max_epochs, "max epochs");
  train->add_option("--patience", tr_config.patience, "validation patience");
  train->add_option("--val-fraction", tr_config.val_fraction, "validation fraction");
  train->add_option("--seed", tr_config.seed, "run seed");

  // gradcam
  auto* grad = app.add_subcommand("gradcam", "saliency maps for true labels");
  std::string gc_model, gc_manifest, gc_images, gc_out;
  grad->add_option("--model", gc_model, "GSNN1 model")->required();
  grad->add_option("--manifest", gc_manifest, "manifest CSV (image,category)")->required();
  grad->add_option("--image-dir", gc_images, "directory with <image>.ppm")->required();
  grad->add_option("--out", gc_out, "output directory")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "correlate heatmaps with saliency maps");
  std::string cp_heatmaps, cp_sal, cp_out, cp_condition = "STD";
  int cp_seed = 0;
  bool cp_windows = false;
  cmp->add_option("--heatmaps", cp_heatmaps, "heatmap directory")->required();
  cmp->add_option("--saliency", cp_sal, "saliency directory")->required();
  cmp->add_option("--out", cp_out, "output CSV")->required();
  cmp->add_option("--condition", cp_condition, "condition label for the rows");
  cmp->add_option("--seed", cp_seed, "seed label for the rows");
  cmp->add_flag("--windows", cp_windows, "also correlate per-window heatmaps");

  // fdi
  auto* fdi = app.add_subcommand("fdi", "face detection indices for saliency maps");
  std::string fd_maps, fd_rois, fd_out, fd_condition = "STD";
  int fd_seed = 0, fd_roi_width = 10;
  double fd_roi_sigma = 5.0;
  bool fd_area = false;
  fdi->add_option("--maps", fd_maps, "saliency directory")->required();
  fdi->add_option("--rois", fd_rois, "directory with <image>_face.rstr")->required();
  fdi->add_option("--out", fd_out, "output CSV")->required();
  fdi->add_option("--condition", fd_condition, "condition label");
  fdi->add_option("--seed", fd_seed, "seed label");
  fdi->add_option("--roi-sigma", fd_roi_sigma, "ROI smoothing sigma");
  fdi->add_option("--roi-width", fd_roi_width, "ROI smoothing kernel width");
  fdi->add_flag("--area-normalized", fd_area, "area-normalized FDI variant");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a full study from a JSON config");
  std::string sw_config, sw_out;
  int sw_jobs = 0;
  sweep->add_option("--config", sw_config, "study config JSON")->required();
  sweep->add_option("--out", sw_out, "override the config's out_dir");
  sweep->add_option("--jobs", sw_jobs, "worker count (also GS_JOBS)");

  // report
  auto* report = app.add_subcommand("report", "summarize a results directory");
  std::string rp_results;
  report->add_option("--results", rp_results, "results directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "hypothesis tests on long-format CSV data");
  std::string st_input, st_test = "kruskal", st_out;
  bool st_adjust = false;
  stats->add_option("--input", st_input, "input CSV (group,value or image,r12,r13,r23)")
      ->required();
  stats->add_option("--test", st_test, "welch_t|welch_anova|kruskal|wilcoxon|depcorr");
  stats->add_option("--out", st_out, "output CSV")->required();
  stats->add_flag("--bonferroni", st_adjust, "Bonferroni-adjust pairwise p values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_categories, synth_images, synth_size, synth_participants,
                       synth_duration, synth_seed, synth_gaze, synth_clutter);
    if (heatmap->parsed())
      return cmd_heatmap(hm_fix, hm_w, hm_h, hm_out, hm_sigma, hm_window_ms, hm_max_windows,
                         hm_cumulative);
    if (spot->parsed())
      return cmd_spotlight(sp_manifest, sp_images, sp_heatmaps, sp_dir, sp_ratio, sp_tau, sp_seed,
                           sp_out);
    if (train->parsed())
      return cmd_train(tr_manifest, tr_images, tr_pretrain, tr_base, tr_model, tr_history,
                       tr_config);
    if (grad->parsed()) return cmd_gradcam(gc_model, gc_manifest, gc_images, gc_out);
    if (cmp->parsed())
      return cmd_compare(cp_heatmaps, cp_sal, cp_out, cp_condition, cp_seed, cp_windows);
    if (fdi->parsed())
      return cmd_fdi(fd_maps, fd_rois, fd_out, fd_condition, fd_seed, fd_area, fd_roi_sigma,
                     fd_roi_width);
    if (sweep->parsed()) return cmd_sweep(sw_config, sw_out, sw_jobs);
    if (report->parsed()) {
      write_report(rp_results);
      std::cout << "report written to " << rp_results << "/report\n";
      return 0;
    }
    if (stats->parsed()) return cmd_stats(st_input, st_test, st_out, st_adjust);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
