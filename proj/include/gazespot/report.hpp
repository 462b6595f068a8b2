#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gazespot/csv.hpp"
#include "gazespot/harness.hpp"
#include "gazespot/metrics.hpp"

namespace gazespot {

namespace detail {

struct CellFiles {
  Direction direction;
  double ratio;
  int seed_index;
  std::filesystem::path dir;
};

// Cells found under <results>/<HS|AS>/<rNNN>/<sK>/, sorted so every summary
// is reproducible regardless of directory iteration order.
inline std::vector<CellFiles> discover_cells(const std::filesystem::path& results) {
  namespace fs = std::filesystem;
  std::vector<CellFiles> cells;
  for (const char* dname : {"HS", "AS"}) {
    const fs::path droot = results / dname;
    if (!fs::exists(droot)) continue;
    for (const auto& ratio_entry : fs::directory_iterator(droot)) {
      if (!ratio_entry.is_directory()) continue;
      const std::string rt = ratio_entry.path().filename().string();
      if (rt.size() != 4 || rt[0] != 'r') continue;
      const double ratio = std::atoi(rt.c_str() + 1) / 100.0;
      for (const auto& seed_entry : fs::directory_iterator(ratio_entry.path())) {
        if (!seed_entry.is_directory()) continue;
        const std::string st = seed_entry.path().filename().string();
        if (st.empty() || st[0] != 's') continue;
        if (!fs::exists(seed_entry.path() / "results.csv")) continue;
        cells.push_back({parse_direction(dname), ratio, std::atoi(st.c_str() + 1),
                         seed_entry.path()});
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [](const CellFiles& a, const CellFiles& b) {
    return std::tie(a.direction, a.ratio, a.seed_index) <
           std::tie(b.direction, b.ratio, b.seed_index);
  });
  return cells;
}

struct ImageMeta {
  std::string category;
  bool animate = false;
  bool face_present = false;
};

inline std::map<std::string, ImageMeta> read_manifest(const std::filesystem::path& results) {
  std::map<std::string, ImageMeta> meta;
  const auto path = results / "scenes_manifest.csv";
  if (!std::filesystem::exists(path)) return meta;
  const CsvTable t = read_csv(path.string());
  const int ci = t.column("image"), cc = t.column("category"), ca = t.column("animate"),
            cf = t.column("face_present");
  if (ci < 0 || cc < 0 || ca < 0 || cf < 0) return meta;
  for (const auto& row : t.rows)
    meta[row[ci]] = {row[cc], row[ca] == "1", row[cf] == "1"};
  return meta;
}

inline std::string point_key(Direction d, double ratio) {
  return direction_name(d) + "," + format_double(ratio);
}

}  // namespace detail

// Emits the seven plot-ready summary tables under <results>/report/. Missing
// per-cell files skip that cell with a note in report/report.log; summaries
// always exist, header-only when there is nothing to aggregate.
inline void write_report(const std::string& results_dir) {
  namespace fs = std::filesystem;
  const fs::path results(results_dir);
  const fs::path rep = results / "report";
  fs::create_directories(rep);
  std::ofstream log(rep / "report.log");

  const std::vector<detail::CellFiles> cells = detail::discover_cells(results);
  const std::map<std::string, detail::ImageMeta> meta = detail::read_manifest(results);
  if (meta.empty()) log << "no scenes_manifest.csv; animacy/face splits will be empty\n";

  struct PointAgg {
    Direction direction;
    double ratio;
    std::vector<double> accuracy;                          // per seed
    std::vector<double> seed_mean_z;                       // per seed
    std::map<std::string, std::vector<double>> z_by_subset;  // pooled image x seed
    std::map<int, std::vector<double>> z_by_window;
    std::vector<double> fdi;  // censored recorded as +inf
    int fdi_censored = 0;
    std::map<std::string, std::vector<double>> accuracy_by_category;
    std::map<std::pair<int, int>, long long> confusion;
  };
  std::map<std::string, PointAgg> points;
  std::vector<std::string> point_order;

  for (const detail::CellFiles& cell : cells) {
    const std::string key = detail::point_key(cell.direction, cell.ratio);
    if (!points.count(key)) {
      points[key].direction = cell.direction;
      points[key].ratio = cell.ratio;
      point_order.push_back(key);
    }
    PointAgg& agg = points[key];

    try {
      const CsvTable acc = read_csv((cell.dir / "accuracy.csv").string());
      const int ca = acc.column("accuracy");
      if (ca >= 0 && !acc.rows.empty())
        agg.accuracy.push_back(parse_double(acc.rows[0][ca], "accuracy.csv"));
    } catch (const std::exception& e) {
      log << cell.dir.string() << ": " << e.what() << "\n";
    }

    try {
      const CsvTable res = read_csv((cell.dir / "results.csv").string());
      const int ci = res.column("image"), cw = res.column("window"), cz = res.column("z");
      std::vector<double> full_z;
      for (const auto& row : res.rows) {
        const double z = parse_double(row[cz], "results.csv");
        if (row[cw].empty()) {
          full_z.push_back(z);
          agg.z_by_subset["all"].push_back(z);
          const auto it = meta.find(row[ci]);
          if (it != meta.end()) {
            agg.z_by_subset[it->second.animate ? "animate" : "inanimate"].push_back(z);
            agg.z_by_subset[it->second.face_present ? "face" : "nonface"].push_back(z);
          }
        } else {
          agg.z_by_window[std::atoi(row[cw].c_str())].push_back(z);
        }
      }
      if (!full_z.empty()) agg.seed_mean_z.push_back(mean_of(full_z));
    } catch (const std::exception& e) {
      log << cell.dir.string() << ": " << e.what() << "\n";
    }

    try {
      const CsvTable fdi = read_csv((cell.dir / "fdi.csv").string());
      const int cf = fdi.column("fdi"), cc = fdi.column("censored");
      for (const auto& row : fdi.rows) {
        if (row[cc] == "1") {
          agg.fdi.push_back(std::numeric_limits<double>::infinity());
          ++agg.fdi_censored;
        } else {
          agg.fdi.push_back(parse_double(row[cf], "fdi.csv"));
        }
      }
    } catch (const std::exception& e) {
      log << cell.dir.string() << ": " << e.what() << "\n";
    }

    try {
      const CsvTable conf = read_csv((cell.dir / "confusion.csv").string());
      const int ct = conf.column("true_category"), cp = conf.column("predicted_category"),
                cn = conf.column("count");
      std::map<int, long long> row_total, row_correct;
      for (const auto& row : conf.rows) {
        const int t = std::atoi(row[ct].c_str()), p = std::atoi(row[cp].c_str());
        const long long n = std::atoll(row[cn].c_str());
        agg.confusion[{t, p}] += n;
        row_total[t] += n;
        if (t == p) row_correct[t] += n;
      }
      for (const auto& [t, total] : row_total)
        if (total > 0)
          agg.accuracy_by_category[std::to_string(t)].push_back(
              static_cast<double>(row_correct[t]) / static_cast<double>(total));
    } catch (const std::exception& e) {
      log << cell.dir.string() << ": " << e.what() << "\n";
    }
  }

  const std::uint64_t boot_seed = split_seed(0, seeds::kReportBoot);
  std::uint64_t boot_index = 0;
  const auto ci_of = [&](const std::vector<double>& v) {
    return bootstrap_ci(v, 2000, 0.95, split_seed(boot_seed, ++boot_index));
  };

  {  // 1. Accuracy per condition (Fig 2A analog).
    CsvWriter out((rep / "accuracy_summary.csv").string(),
                  "direction,ratio,seeds,mean_accuracy,sd,ci_lo,ci_hi");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      if (a.accuracy.empty()) continue;
      const double m = mean_of(a.accuracy);
      double sd = 0.0;
      for (double v : a.accuracy) sd += (v - m) * (v - m);
      sd = a.accuracy.size() > 1 ? std::sqrt(sd / (a.accuracy.size() - 1.0)) : 0.0;
      const auto [lo, hi] = ci_of(a.accuracy);
      out.row({direction_name(a.direction), format_double(a.ratio),
               std::to_string(a.accuracy.size()), format_double(m), format_double(sd),
               format_double(lo), format_double(hi)});
    }
  }
  {  // 2. Accuracy profiles across categories (Fig 2B analog).
    CsvWriter out((rep / "accuracy_by_category.csv").string(),
                  "direction,ratio,category,mean_accuracy,n");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      for (const auto& [cat, vals] : a.accuracy_by_category)
        out.row({direction_name(a.direction), format_double(a.ratio), cat,
                 format_double(mean_of(vals)), std::to_string(vals.size())});
    }
  }
  {  // 3. Similarity split by animacy / face presence (Fig 3 analog).
    CsvWriter out((rep / "similarity_summary.csv").string(),
                  "direction,ratio,subset,n,mean_z,median_z,ci_lo,ci_hi");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      for (const char* subset : {"all", "animate", "inanimate", "face", "nonface"}) {
        const auto it = a.z_by_subset.find(subset);
        if (it == a.z_by_subset.end() || it->second.empty()) continue;
        const auto [lo, hi] = ci_of(it->second);
        out.row({direction_name(a.direction), format_double(a.ratio), subset,
                 std::to_string(it->second.size()), format_double(mean_of(it->second)),
                 format_double(median_of(it->second)), format_double(lo), format_double(hi)});
      }
    }
  }
  {  // 4. Face detection indices (Fig 4 analog).
    CsvWriter out((rep / "fdi_summary.csv").string(),
                  "direction,ratio,n,censored_high,median_fdi");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      if (a.fdi.empty()) continue;
      out.row({direction_name(a.direction), format_double(a.ratio), std::to_string(a.fdi.size()),
               std::to_string(a.fdi_censored), format_double(median_of(a.fdi))});
    }
  }
  {  // 5. Similarity across time windows (Fig 5 analog).
    CsvWriter out((rep / "timecourse.csv").string(),
                  "direction,ratio,window,n,mean_z,ci_lo,ci_hi");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      for (const auto& [w, zs] : a.z_by_window) {
        if (zs.empty()) continue;
        const auto [lo, hi] = ci_of(zs);
        out.row({direction_name(a.direction), format_double(a.ratio), std::to_string(w),
                 std::to_string(zs.size()), format_double(mean_of(zs)), format_double(lo),
                 format_double(hi)});
      }
    }
  }
  {  // 6. Accuracy / similarity trade-off (Fig 6 analog).
    CsvWriter out((rep / "sweep_summary.csv").string(),
                  "direction,ratio,seeds,mean_accuracy,acc_ci_lo,acc_ci_hi,mean_z,z_ci_lo,z_ci_hi");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      if (a.accuracy.empty()) continue;
      const auto [alo, ahi] = ci_of(a.accuracy);
      double mz = 0.0, zlo = 0.0, zhi = 0.0;
      if (!a.seed_mean_z.empty()) {
        mz = mean_of(a.seed_mean_z);
        std::tie(zlo, zhi) = ci_of(a.seed_mean_z);
      }
      out.row({direction_name(a.direction), format_double(a.ratio),
               std::to_string(a.accuracy.size()), format_double(mean_of(a.accuracy)),
               format_double(alo), format_double(ahi), format_double(mz), format_double(zlo),
               format_double(zhi)});
    }
  }
  {  // 7. Confusion counts (Supplementary Fig 2 analog).
    CsvWriter out((rep / "confusion_totals.csv").string(),
                  "direction,ratio,true_category,predicted_category,count");
    for (const std::string& key : point_order) {
      const PointAgg& a = points[key];
      for (const auto& [tp, n] : a.confusion)
        out.row({direction_name(a.direction), format_double(a.ratio), std::to_string(tp.first),
                 std::to_string(tp.second), std::to_string(n)});
    }
  }
}

}  // namespace gazespot
