#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gazespot/rng.hpp"
#include "gazespot/stats.hpp"
#include "support/dist_grid.hpp"

using namespace gazespot;

TEST_CASE("distribution functions match high-precision references to 1e-10") {
  const double worst = gazespot_test::max_distribution_error(
      [](double x) { return normal_cdf(x); },
      [](double x, double df) { return students_t_cdf(x, df); },
      [](double x, double df) { return chi_squared_cdf(x, df); },
      [](double x, double d1, double d2) { return f_cdf(x, d1, d2); });
  REQUIRE(worst < 1e-10);
}

TEST_CASE("welch_t") {
  SECTION("identical groups give t = 0, p = 1") {
    const std::vector<double> g{1.0, 2.0, 3.5, 4.0};
    const TestResult r = welch_t(g, g);
    REQUIRE(r.statistic == 0.0);
    REQUIRE(r.p == 1.0);
  }
  SECTION("extreme separation gives p < 1e-4") {
    const TestResult r = welch_t({1, 2, 3}, {101, 102, 103});
    REQUIRE(r.p < 1e-4);
  }
  SECTION("fixture matches the reference evaluation to 1e-9") {
    // Frozen from an external Welch implementation (variance ratio 1:4).
    const TestResult r = welch_t({1, 2, 3, 4}, {2, 4, 6, 8});
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(-1.7320508075688774, 1e-9));
    REQUIRE_THAT(r.df1, Catch::Matchers::WithinAbs(4.411764705882353, 1e-9));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.15158050484530383, 1e-9));
    REQUIRE_THAT(r.effect, Catch::Matchers::WithinAbs(-1.224744871391589, 1e-9));
  }
  SECTION("antisymmetric under swapping groups") {
    const std::vector<double> a{1.5, 2.0, 9.0, 4.0}, b{0.5, 7.5, 3.25};
    const TestResult ab = welch_t(a, b), ba = welch_t(b, a);
    REQUIRE_THAT(ab.statistic, Catch::Matchers::WithinAbs(-ba.statistic, 1e-12));
    REQUIRE_THAT(ab.p, Catch::Matchers::WithinAbs(ba.p, 1e-12));
  }
  SECTION("degenerate constant groups") {
    const TestResult same = welch_t({2, 2, 2}, {2, 2});
    REQUIRE(same.p == 1.0);
    const TestResult diff = welch_t({2, 2, 2}, {3, 3});
    REQUIRE(diff.p == 0.0);
    REQUIRE(std::isinf(diff.statistic));
    REQUIRE(!diff.note.empty());
  }
}

TEST_CASE("welch_anova") {
  SECTION("identical groups give F = 0, p = 1") {
    const std::vector<double> g{1, 2, 3};
    const TestResult r = welch_anova({g, g, g});
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("two groups agree with welch_t") {
    const std::vector<double> a{1.0, 2.5, 3.5, 7.0}, b{2.0, 4.0, 9.0};
    const TestResult f = welch_anova({a, b});
    const TestResult t = welch_t(a, b);
    REQUIRE_THAT(f.p, Catch::Matchers::WithinAbs(t.p, 1e-9));
    REQUIRE_THAT(f.statistic, Catch::Matchers::WithinAbs(t.statistic * t.statistic, 1e-9));
  }
  SECTION("three-group fixture matches the direct formula oracle") {
    const TestResult r =
        welch_anova({{1, 2, 3, 4}, {2, 4, 6, 9}, {1.5, 2.5, 3.0, 5.0, 6.0}});
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(1.480153772046072, 1e-9));
    REQUIRE_THAT(r.df2, Catch::Matchers::WithinAbs(6.030162678166755, 1e-9));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.2999327954826416, 1e-9));
    REQUIRE_THAT(r.effect, Catch::Matchers::WithinAbs(0.3292717144830665, 1e-9));
  }
}

namespace {

// Brute-force H from first principles: midranks by counting, no shared code
// with the implementation.
double kruskal_h_oracle(const std::vector<std::vector<double>>& groups) {
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const double n = static_cast<double>(pooled.size());
  const auto rank_of = [&](double v) {
    double less = 0, equal = 0;
    for (double u : pooled) {
      if (u < v) ++less;
      if (u == v) ++equal;
    }
    return less + (equal + 1.0) / 2.0;
  };
  double h = 0.0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (double v : g) rs += rank_of(v);
    h += rs * rs / static_cast<double>(g.size());
  }
  h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1);
  double tie = 0.0;
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie += t * t * t - t;
    i = j + 1;
  }
  return h / (1.0 - tie / (n * n * n - n));
}

}  // namespace

TEST_CASE("kruskal_wallis") {
  SECTION("identical groups give H = 0") {
    const std::vector<double> g{1, 2, 3};
    REQUIRE(kruskal_wallis({g, g, g}).statistic == 0.0);
  }
  SECTION("[1,2],[3,4],[5,6] matches exhaustive rank computation") {
    const std::vector<std::vector<double>> groups{{1, 2}, {3, 4}, {5, 6}};
    const TestResult r = kruskal_wallis(groups);
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(kruskal_h_oracle(groups), 1e-12));
    // 32/7, cross-checked against an external implementation.
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(4.571428571428569, 1e-9));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.10170139230422694, 1e-9));
  }
  SECTION("tied fixture matches an external reference") {
    const TestResult r = kruskal_wallis({{1, 2, 2, 3}, {2, 4, 4}, {4, 5, 6}});
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(6.3248407643312, 1e-9));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.04232317874353304, 1e-9));
  }
  SECTION("untied fixture matches an external reference") {
    const TestResult r =
        kruskal_wallis({{1.2, 3.4, 2.2, 5.0}, {2.1, 4.4, 4.9}, {7.0, 6.1, 5.5, 8.2, 9.9}});
    REQUIRE_THAT(r.statistic, Catch::Matchers::WithinAbs(8.121794871794876, 1e-9));
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(0.01723354617042315, 1e-9));
  }
  SECTION("p within 0.01 of a permutation Monte Carlo p") {
    // Group sizes >= 8, where the chi-squared approximation is trustworthy.
    const std::vector<std::vector<double>> groups{
        {3.1, 1.2, 4.5, 2.2, 5.0, 3.3, 2.8, 4.1},
        {4.4, 2.1, 5.3, 4.9, 6.2, 3.6, 5.8, 4.0, 5.1},
        {5.5, 7.0, 4.2, 6.1, 3.9, 6.6, 5.2, 4.8}};
    const double h_obs = kruskal_wallis(groups).statistic;
    std::vector<double> pooled;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
      pooled.insert(pooled.end(), g.begin(), g.end());
      sizes.push_back(g.size());
    }
    Rng rng(99);
    const int reps = 100000;
    int at_least = 0;
    std::vector<double> shuffled = pooled;
    for (int rep = 0; rep < reps; ++rep) {
      rng.shuffle(shuffled.begin(), shuffled.end());
      std::vector<std::vector<double>> perm;
      std::size_t off = 0;
      for (std::size_t s : sizes) {
        perm.emplace_back(shuffled.begin() + off, shuffled.begin() + off + s);
        off += s;
      }
      if (kruskal_wallis(perm).statistic >= h_obs - 1e-12) ++at_least;
    }
    const double p_mc = static_cast<double>(at_least) / reps;
    REQUIRE_THAT(kruskal_wallis(groups).p, Catch::Matchers::WithinAbs(p_mc, 0.01));
  }
  SECTION("all tied") {
    const TestResult r = kruskal_wallis({{1, 1}, {1, 1, 1}});
    REQUIRE(r.statistic == 0.0);
    REQUIRE(r.p == 1.0);
  }
}

namespace {

// Enumeration oracle for the exact two-sided rank-sum p: every C(n, na)
// assignment of ranks to the first sample.
double wilcoxon_exact_oracle(std::size_t na, std::size_t nb, double w_obs) {
  const std::size_t n = na + nb;
  std::vector<int> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + na, 1);
  std::sort(pick.begin(), pick.end());
  const double mu = static_cast<double>(na) * (n + 1) / 2.0;
  const double dev = std::fabs(w_obs - mu);
  long long total = 0, tail = 0;
  do {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) w += static_cast<double>(i + 1);
    ++total;
    if (std::fabs(w - mu) >= dev - 1e-12) ++tail;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return static_cast<double>(tail) / static_cast<double>(total);
}

std::vector<double> ranks_free(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> r;
  for (std::size_t i = 0; i < a.size(); ++i)
    r.push_back(static_cast<double>(
        std::lower_bound(sorted.begin(), sorted.end(), a[i]) - sorted.begin() + 1));
  return r;
}

}  // namespace

TEST_CASE("wilcoxon_ranksum") {
  SECTION("a=[1,2] b=[3,4] has exact two-sided p = 1/3") {
    const TestResult r = wilcoxon_ranksum({1, 2}, {3, 4});
    REQUIRE_THAT(r.p, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
    REQUIRE(r.statistic == 3.0);
    REQUIRE(r.note == "exact");
  }
  SECTION("identical samples give p = 1") {
    const TestResult r = wilcoxon_ranksum({1, 2, 3}, {1, 2, 3});
    REQUIRE(r.p == 1.0);
  }
  SECTION("exact p equals the enumeration oracle to 1e-12") {
    struct Fixture {
      std::vector<double> a, b;
    };
    const Fixture fixtures[] = {
        {{1.0, 2.5, 3.1, 7.0, 9.0}, {2.0, 4.0, 6.5, 8.0}},
        {{0.3, 0.7}, {0.5, 1.5, 2.5, 0.1}},
        {{10, 20, 30, 40, 50, 60}, {15, 25, 35, 45}},
        {{-3, 5, 1, 2, 8, 13, 21}, {0.5, 4.5, 9.5, 11.5, 30, -7}},
    };
    for (const Fixture& f : fixtures) {
      const TestResult r = wilcoxon_ranksum(f.a, f.b);
      REQUIRE(r.note == "exact");
      double w = 0.0;
      for (double v : ranks_free(f.a, f.b)) w += v;
      REQUIRE(r.statistic == w);
      REQUIRE_THAT(r.p,
                   Catch::Matchers::WithinAbs(wilcoxon_exact_oracle(f.a.size(), f.b.size(), w),
                                              1e-12));
    }
    // Cross-check one fixture against an external exact implementation.
    REQUIRE_THAT(wilcoxon_ranksum({1.0, 2.5, 3.1, 7.0, 9.0}, {2.0, 4.0, 6.5, 8.0}).p,
                 Catch::Matchers::WithinAbs(0.9047619047619049, 1e-12));
  }
  SECTION("normal approximation is close to exact at n = 10 + 10") {
    Rng rng(123);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> a, b;
      for (int i = 0; i < 10; ++i) {
        a.push_back(rng.normal());
        b.push_back(rng.normal(0.4, 1.0));
      }
      const double exact = wilcoxon_ranksum(a, b, WilcoxonPolicy::Exact).p;
      const double approx = wilcoxon_ranksum(a, b, WilcoxonPolicy::Normal).p;
      worst = std::max(worst, std::fabs(exact - approx));
    }
    REQUIRE(worst < 0.012);  // continuity-corrected approximation quality
  }
  SECTION("ties route to the tie-corrected normal path") {
    const TestResult r = wilcoxon_ranksum({1, 2, 2, 3}, {2, 4, 5});
    REQUIRE(r.note == "normal_approx");
    REQUIRE(r.p <= 1.0);
    REQUIRE(r.p >= 0.0);
  }
  SECTION("statistic is complementary under swapping") {
    const std::vector<double> a{1, 5, 9, 13}, b{2, 4, 8};
    const TestResult ab = wilcoxon_ranksum(a, b), ba = wilcoxon_ranksum(b, a);
    const double n = 7.0;
    REQUIRE_THAT(ab.statistic + ba.statistic, Catch::Matchers::WithinAbs(n * (n + 1) / 2.0, 1e-12));
    REQUIRE_THAT(ab.p, Catch::Matchers::WithinAbs(ba.p, 1e-12));
  }
}

TEST_CASE("bonferroni") {
  REQUIRE(bonferroni({0.01, 0.02, 0.03}) == std::vector<double>{0.03, 0.06, 0.09});
  REQUIRE(bonferroni({0.2}) == std::vector<double>{0.2});
  REQUIRE(bonferroni({0.5, 0.7, 0.9}) == std::vector<double>{1.0, 1.0, 1.0});
  REQUIRE_THROWS_AS(bonferroni({1.5}), DataError);
}

TEST_CASE("dependent_corr_test") {
  SECTION("equal correlations give Z = 0, p = 1") {
    const TestResult r = dependent_corr_test(0.4, 0.4, 0.3, 50);
    REQUIRE(r.statistic == 0.0);
    REQUIRE(r.p == 1.0);
  }
  SECTION("sign of Z follows r12 - r13") {
    REQUIRE(dependent_corr_test(0.6, 0.2, 0.3, 40).statistic > 0.0);
    REQUIRE(dependent_corr_test(0.2, 0.6, 0.3, 40).statistic < 0.0);
  }
  SECTION("rejects tiny n and |r| = 1") {
    REQUIRE_THROWS_AS(dependent_corr_test(0.4, 0.2, 0.3, 3), DataError);
    REQUIRE_THROWS_AS(dependent_corr_test(1.0, 0.2, 0.3, 30), DataError);
  }
  SECTION("null rejection rate near alpha (small Monte Carlo)") {
    // The full 20k-replication calibration is an acceptance criterion; this
    // is a fast regression guard.
    Rng rng(7);
    const int reps = 2000, n = 50;
    // Cholesky of [[1,.4,.4],[.4,1,.3],[.4,.3,1]].
    const double l21 = 0.4, l22 = std::sqrt(1 - 0.16);
    const double l31 = 0.4, l32 = (0.3 - 0.16) / l22;
    const double l33 = std::sqrt(1 - l31 * l31 - l32 * l32);
    int rejected = 0;
    for (int rep = 0; rep < reps; ++rep) {
      std::vector<double> x(n), y(n), z(n);
      for (int i = 0; i < n; ++i) {
        const double g1 = rng.normal(), g2 = rng.normal(), g3 = rng.normal();
        x[i] = g1;
        y[i] = l21 * g1 + l22 * g2;
        z[i] = l31 * g1 + l32 * g2 + l33 * g3;
      }
      const auto corr = [&](const std::vector<double>& u, const std::vector<double>& v) {
        double mu = 0, mv = 0;
        for (int i = 0; i < n; ++i) {
          mu += u[i];
          mv += v[i];
        }
        mu /= n;
        mv /= n;
        double c = 0, vu = 0, vv = 0;
        for (int i = 0; i < n; ++i) {
          c += (u[i] - mu) * (v[i] - mv);
          vu += (u[i] - mu) * (u[i] - mu);
          vv += (v[i] - mv) * (v[i] - mv);
        }
        return c / std::sqrt(vu * vv);
      };
      const TestResult r = dependent_corr_test(corr(x, y), corr(x, z), corr(y, z), n);
      if (r.p < 0.05) ++rejected;
    }
    const double rate = static_cast<double>(rejected) / reps;
    REQUIRE(rate > 0.02);
    REQUIRE(rate < 0.08);
  }
}

TEST_CASE("tests are invariant to within-group reordering") {
  const std::vector<double> a{3.0, 1.0, 7.0, 5.5}, b{2.0, 9.0, 4.0};
  std::vector<double> a2 = a, b2 = b;
  std::reverse(a2.begin(), a2.end());
  std::reverse(b2.begin(), b2.end());
  REQUIRE(welch_t(a, b).p == welch_t(a2, b2).p);
  REQUIRE(wilcoxon_ranksum(a, b).p == wilcoxon_ranksum(a2, b2).p);
  REQUIRE(kruskal_wallis({a, b}).p == kruskal_wallis({a2, b2}).p);
  REQUIRE(welch_anova({a, b}).p == welch_anova({a2, b2}).p);
}
