#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gazespot/error.hpp"

namespace gazespot {

// ---------------------------------------------------------------------------
// Distribution functions. Regularized incomplete gamma/beta are evaluated by
// power series and Lentz continued fractions, which keeps every CDF here
// within ~1e-14 of reference values across the ranges these tests use.
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

constexpr double kCfEpsilon = 1e-16;
constexpr int kCfMaxIter = 600;
constexpr double kCfTiny = 1e-300;

// Regularized lower incomplete gamma P(a, x), series expansion (x < a + 1).
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int i = 0; i < kCfMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kCfEpsilon) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x), Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kCfTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kCfMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = b + an / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kCfEpsilon) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw DataError("gamma_p: a must be > 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

// Continued fraction for the regularized incomplete beta.
inline double beta_cf(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kCfTiny) d = kCfTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kCfEpsilon) break;
  }
  return h;
}

inline double beta_inc(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DataError("beta_inc: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

inline double chi_squared_cdf(double x, double df) {
  if (!(df > 0.0)) throw DataError("chi_squared_cdf: df must be > 0");
  if (x <= 0.0) return 0.0;
  return detail::gamma_p(0.5 * df, 0.5 * x);
}

inline double students_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DataError("students_t_cdf: df must be > 0");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * detail::beta_inc(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

inline double f_cdf(double x, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw DataError("f_cdf: dfs must be > 0");
  if (x <= 0.0) return 0.0;
  return detail::beta_inc(0.5 * df1, 0.5 * df2, df1 * x / (df1 * x + df2));
}

// ---------------------------------------------------------------------------
// Hypothesis tests
// ---------------------------------------------------------------------------

struct TestResult {
  std::string test;
  double statistic = 0.0;
  double df1 = std::numeric_limits<double>::quiet_NaN();
  double df2 = std::numeric_limits<double>::quiet_NaN();
  double p = 1.0;
  double effect = 0.0;
  std::string effect_name;
  std::string note;
};

namespace detail {

struct Moments {
  double n = 0.0, mean = 0.0, var = 0.0;  // var with n-1 denominator
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  m.n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= m.n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var = x.size() > 1 ? m.var / (m.n - 1.0) : 0.0;
  return m;
}

// Midranks of the pooled sample plus tie-group sizes.
inline std::vector<double> midranks(const std::vector<double>& pooled,
                                    std::vector<std::size_t>* tie_sizes) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    if (tie_sizes && j > i) tie_sizes->push_back(j - i + 1);
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Welch's unequal-variance t test with Welch-Satterthwaite df and Cohen's d
// (pooled SD).
inline TestResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("welch_t: each group needs >= 2 values");
  const auto ma = detail::moments(a), mb = detail::moments(b);
  TestResult r;
  r.test = "welch_t";
  r.effect_name = "cohen_d";

  const double pooled_var =
      ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / (ma.n + mb.n - 2.0);
  if (ma.var == 0.0 && mb.var == 0.0) {
    if (ma.mean == mb.mean) {
      r.statistic = 0.0;
      r.df1 = ma.n + mb.n - 2.0;
      r.p = 1.0;
      r.note = "degenerate: both groups constant and equal";
      return r;
    }
    r.statistic = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
    r.df1 = ma.n + mb.n - 2.0;
    r.p = 0.0;
    r.effect = r.statistic;
    r.note = "degenerate: zero variance, unequal means";
    return r;
  }
  const double se_a = ma.var / ma.n, se_b = mb.var / mb.n;
  r.statistic = (ma.mean - mb.mean) / std::sqrt(se_a + se_b);
  r.df1 = (se_a + se_b) * (se_a + se_b) /
          (se_a * se_a / (ma.n - 1.0) + se_b * se_b / (mb.n - 1.0));
  r.p = 2.0 * (1.0 - students_t_cdf(std::fabs(r.statistic), r.df1));
  r.p = std::clamp(r.p, 0.0, 1.0);
  r.effect = pooled_var > 0.0 ? (ma.mean - mb.mean) / std::sqrt(pooled_var) : 0.0;
  return r;
}

// Welch's heteroscedastic one-way ANOVA; eta^2 = F*df1 / (F*df1 + df2).
inline TestResult welch_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("welch_anova: need >= 2 groups");
  const double k = static_cast<double>(groups.size());
  std::vector<detail::Moments> m;
  for (const auto& g : groups) {
    if (g.size() < 2) throw DataError("welch_anova: each group needs >= 2 values");
    m.push_back(detail::moments(g));
  }
  TestResult r;
  r.test = "welch_anova";
  r.effect_name = "eta_squared";
  r.df1 = k - 1.0;

  bool all_const = true;
  for (const auto& g : m) all_const = all_const && g.var == 0.0;
  if (all_const) {
    bool equal = true;
    for (const auto& g : m) equal = equal && g.mean == m[0].mean;
    r.statistic = equal ? 0.0 : std::numeric_limits<double>::infinity();
    r.df2 = 0.0;
    r.p = equal ? 1.0 : 0.0;
    r.note = "degenerate: zero variance in every group";
    return r;
  }
  for (const auto& g : m)
    if (g.var == 0.0) throw NumericError("welch_anova: a group has zero variance");

  double sum_w = 0.0, mean_w = 0.0;
  std::vector<double> w(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    w[j] = m[j].n / m[j].var;
    sum_w += w[j];
    mean_w += w[j] * m[j].mean;
  }
  mean_w /= sum_w;
  double between = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j)
    between += w[j] * (m[j].mean - mean_w) * (m[j].mean - mean_w);
  double tail = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    const double u = 1.0 - w[j] / sum_w;
    tail += u * u / (m[j].n - 1.0);
  }
  tail /= (k * k - 1.0);
  r.statistic = (between / (k - 1.0)) / (1.0 + 2.0 * (k - 2.0) * tail);
  r.df2 = 1.0 / (3.0 * tail);
  r.p = std::clamp(1.0 - f_cdf(r.statistic, r.df1, r.df2), 0.0, 1.0);
  r.effect = r.statistic * r.df1 / (r.statistic * r.df1 + r.df2);
  return r;
}

// Kruskal-Wallis H with tie correction; eta^2 = (H - k + 1) / (n - k).
inline TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("kruskal_wallis: need >= 2 groups");
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const double n = static_cast<double>(pooled.size());
  const double k = static_cast<double>(groups.size());
  if (pooled.size() < 3) throw DataError("kruskal_wallis: need >= 3 observations");

  std::vector<std::size_t> tie_sizes;
  const std::vector<double> ranks = detail::midranks(pooled, &tie_sizes);

  TestResult r;
  r.test = "kruskal_wallis";
  r.effect_name = "eta_squared";
  r.df1 = k - 1.0;

  double h = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
    h += rank_sum * rank_sum / static_cast<double>(g.size());
    offset += g.size();
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

  double tie_term = 0.0;
  for (std::size_t t : tie_sizes)
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  const double correction = 1.0 - tie_term / (n * n * n - n);
  if (correction == 0.0) {
    r.statistic = 0.0;  // every observation tied
    r.p = 1.0;
    r.note = "degenerate: all observations tied";
    return r;
  }
  h /= correction;
  r.statistic = std::max(0.0, h);
  r.p = std::clamp(1.0 - chi_squared_cdf(r.statistic, r.df1), 0.0, 1.0);
  r.effect = (r.statistic - k + 1.0) / (n - k);
  return r;
}

enum class WilcoxonPolicy { Auto, Exact, Normal };

namespace detail {

// Null distribution of the rank-sum of a size-na subset of ranks 1..n:
// counts[s] = number of subsets with sum s.
inline std::vector<double> ranksum_counts(std::size_t n, std::size_t na) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::vector<double>> c(na + 1, std::vector<double>(max_sum + 1, 0.0));
  c[0][0] = 1.0;
  for (std::size_t rank = 1; rank <= n; ++rank)
    for (std::size_t k = std::min(na, rank); k >= 1; --k)
      for (std::size_t s = max_sum; s >= rank; --s)
        if (c[k - 1][s - rank] > 0.0) c[k][s] += c[k - 1][s - rank];
  return c[na];
}

}  // namespace detail

// Two-sample Wilcoxon rank-sum. W is the rank sum of the first sample. The
// two-sided p is exact (full null enumeration) for combined n <= 20 without
// ties, otherwise a normal approximation with tie and continuity
// corrections. Effect size r = |z| / sqrt(n).
inline TestResult wilcoxon_ranksum(const std::vector<double>& a, const std::vector<double>& b,
                                   WilcoxonPolicy policy = WilcoxonPolicy::Auto) {
  if (a.empty() || b.empty()) throw DataError("wilcoxon_ranksum: empty group");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> tie_sizes;
  const std::vector<double> ranks = detail::midranks(pooled, &tie_sizes);
  double w = 0.0;
  for (std::size_t i = 0; i < na; ++i) w += ranks[i];

  const double mu = static_cast<double>(na) * (n + 1) / 2.0;
  double tie_term = 0.0;
  for (std::size_t t : tie_sizes)
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  const double var = static_cast<double>(na) * nb / 12.0 *
                     ((n + 1) - tie_term / (static_cast<double>(n) * (n - 1)));

  TestResult r;
  r.test = "wilcoxon_ranksum";
  r.statistic = w;
  r.effect_name = "rank_r";

  double z = 0.0;
  if (var > 0.0) {
    const double cc = w > mu ? -0.5 : (w < mu ? 0.5 : 0.0);
    z = (w - mu + cc) / std::sqrt(var);
  }
  r.effect = std::fabs(z) / std::sqrt(static_cast<double>(n));

  const bool can_exact = tie_sizes.empty() && n <= 20;
  const bool exact = policy == WilcoxonPolicy::Exact ||
                     (policy == WilcoxonPolicy::Auto && can_exact);
  if (exact) {
    if (!tie_sizes.empty())
      throw DataError("wilcoxon_ranksum: exact p requires tie-free samples");
    // Integer-exact two-sided tail: |2s - na(n+1)| >= |2W - na(n+1)|.
    const std::vector<double> counts = detail::ranksum_counts(n, na);
    const auto w_int = static_cast<long long>(std::llround(w));
    const long long center2 = static_cast<long long>(na) * (n + 1);
    const long long dev = std::llabs(2 * w_int - center2);
    double tail = 0.0, total = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      total += counts[s];
      if (std::llabs(2 * static_cast<long long>(s) - center2) >= dev) tail += counts[s];
    }
    r.p = tail / total;
    r.note = "exact";
  } else {
    if (var <= 0.0) {
      r.p = 1.0;
      r.note = "degenerate: all observations tied";
      return r;
    }
    r.p = std::clamp(2.0 * (1.0 - normal_cdf(std::fabs(z))), 0.0, 1.0);
    r.note = "normal_approx";
  }
  return r;
}

// p_adj = min(1, m * p) with m = number of comparisons.
inline std::vector<double> bonferroni(const std::vector<double>& p_values) {
  const double m = static_cast<double>(p_values.size());
  std::vector<double> adjusted;
  adjusted.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("bonferroni: p outside [0,1]");
    adjusted.push_back(std::min(1.0, m * p));
  }
  return adjusted;
}

// Dependent overlapping-correlation test (Hittner et al. modification of
// Dunn & Clark, back-transformed average Fisher's Z). Compares r12 with r13
// when variables 2 and 3 overlap on variable 1; r23 couples the two.
inline TestResult dependent_corr_test(double r12, double r13, double r23, std::size_t n) {
  if (n < 4) throw DataError("dependent_corr_test: n must be >= 4");
  for (double r : {r12, r13, r23})
    if (!(r > -1.0 && r < 1.0)) throw DataError("dependent_corr_test: |r| must be < 1");

  const double z1 = std::atanh(r12);
  const double z2 = std::atanh(r13);
  const double rbar = std::tanh(0.5 * (z1 + z2));
  const double rbar2 = rbar * rbar;
  const double denom = (1.0 - rbar2) * (1.0 - rbar2);
  const double cov =
      (r23 * (1.0 - 2.0 * rbar2) - 0.5 * rbar2 * (1.0 - 2.0 * rbar2 - r23 * r23)) / denom;
  if (!(std::fabs(cov) < 1.0))
    throw NumericError("dependent_corr_test: degenerate covariance term");

  TestResult r;
  r.test = "dependent_corr";
  r.statistic = (z1 - z2) * std::sqrt((static_cast<double>(n) - 3.0) / (2.0 - 2.0 * cov));
  r.p = std::clamp(2.0 * (1.0 - normal_cdf(std::fabs(r.statistic))), 0.0, 1.0);
  r.effect = z1 - z2;
  r.effect_name = "z_diff";
  return r;
}

}  // namespace gazespot
