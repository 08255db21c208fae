#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuma/distributions.hpp"
#include "fuma/error.hpp"
#include "fuma/feature_extraction.hpp"

namespace fuma {

struct StatsResult {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;
  std::optional<double> effect_size;
  std::string effect_name;  // "eta2" for ANOVA, "cramers_v" for 2x2 tables
  std::string magnitude;    // small / medium / large, eta2 only
};

/// Effect-size label for eta squared: large above 0.26, medium above 0.13.
inline std::string eta_squared_label(double eta2) {
  if (eta2 > 0.26) return "large";
  if (eta2 > 0.13) return "medium";
  return "small";
}

/// One-way ANOVA with eta squared = SSB / SST.
inline StatsResult anova_one_way(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw InvalidArgument("anova: need at least 2 groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidArgument("anova: each group needs at least 2 observations");
    n += g.size();
    for (double v : g) grand += v;
  }
  grand /= static_cast<double>(n);
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    const double m = sample_mean(g);
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  const double sst = ssb + ssw;
  if (sst == 0.0) throw InvalidArgument("anova: all values identical, F undefined");
  const double df1 = static_cast<double>(groups.size() - 1);
  const double df2 = static_cast<double>(n - groups.size());

  StatsResult r;
  r.test = "anova";
  if (ssw == 0.0) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.statistic = (ssb / df1) / (ssw / df2);
    r.p_value = dist::f_upper_tail(r.statistic, df1, df2);
  }
  r.p_adjusted = r.p_value;
  r.effect_size = ssb / sst;
  r.effect_name = "eta2";
  r.magnitude = eta_squared_label(*r.effect_size);
  return r;
}

/// Pooled-variance two-sample t statistic and two-sided p.
inline std::pair<double, double> pooled_t_test(std::span<const double> a, std::span<const double> b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double df = na + nb - 2.0;
  const double va = sample_sd(a) * sample_sd(a);
  const double vb = sample_sd(b) * sample_sd(b);
  const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
  const double t = (sample_mean(a) - sample_mean(b)) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
  return {t, dist::t_two_sided(t, df)};
}

enum class Alternative { TwoSided, Less, Greater };

namespace detail {

// Doubled midranks (integers) of the pooled sample, plus tie-group sizes.
inline std::pair<std::vector<long>, std::vector<std::size_t>> doubled_midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<long> ranks(n);
  std::vector<std::size_t> ties;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // Ranks i+1..j+1 averaged, doubled: (i+1 + j+1).
    const long r2 = static_cast<long>(i + j + 2);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r2;
    ties.push_back(j - i + 1);
    i = j + 1;
  }
  return {ranks, ties};
}

}  // namespace detail

/// Wilcoxon rank-sum (Mann-Whitney) test of a against b. The statistic is
/// U = W_a - n_a(n_a+1)/2 with midranks for ties. When n_a + n_b <= 12 the p
/// value is exact over all equally likely rank assignments; otherwise it uses
/// the normal approximation with tie-corrected variance and continuity
/// correction. `Less` tests whether a tends to be smaller than b.
inline StatsResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                     Alternative alt = Alternative::TwoSided) {
  if (a.empty() || b.empty()) throw InvalidArgument("wilcoxon: both samples must be non-empty");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto [ranks, ties] = detail::doubled_midranks(pooled);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  long w2 = 0;
  for (std::size_t i = 0; i < na; ++i) w2 += ranks[i];
  const double w = static_cast<double>(w2) / 2.0;

  StatsResult r;
  r.test = "wilcoxon_rank_sum";
  r.statistic = w - static_cast<double>(na * (na + 1)) / 2.0;

  if (n <= 12) {
    // counts[j][s]: ways to choose j of the pooled items with doubled-rank sum s.
    const long max_sum = static_cast<long>(2 * n * n + 2);
    std::vector<std::vector<double>> counts(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum + 1), 0.0));
    counts[0][0] = 1.0;
    for (std::size_t item = 0; item < n; ++item) {
      for (std::size_t j = std::min(item + 1, na); j >= 1; --j) {
        for (long s = max_sum; s >= ranks[item]; --s) counts[j][s] += counts[j - 1][s - ranks[item]];
      }
    }
    double total = 0.0;
    double below = 0.0;
    double above = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      const double c = counts[na][s];
      total += c;
      if (s <= w2) below += c;
      if (s >= w2) above += c;
    }
    const double p_less = below / total;
    const double p_greater = above / total;
    switch (alt) {
      case Alternative::TwoSided: r.p_value = std::min(1.0, 2.0 * std::min(p_less, p_greater)); break;
      case Alternative::Less: r.p_value = p_less; break;
      case Alternative::Greater: r.p_value = p_greater; break;
    }
  } else {
    const double dn = static_cast<double>(n);
    const double mean = static_cast<double>(na) * (dn + 1.0) / 2.0;
    double tie_term = 0.0;
    for (auto t : ties) {
      const double dt = static_cast<double>(t);
      tie_term += dt * dt * dt - dt;
    }
    const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
      r.p_value = 1.0;
    } else {
      const double sd = std::sqrt(var);
      switch (alt) {
        case Alternative::TwoSided: {
          const double z = std::max(0.0, std::fabs(w - mean) - 0.5) / sd;
          r.p_value = std::min(1.0, 2.0 * dist::normal_upper_tail(z));
          break;
        }
        case Alternative::Less: r.p_value = dist::normal_cdf((w - mean + 0.5) / sd); break;
        case Alternative::Greater: r.p_value = dist::normal_upper_tail((w - mean - 0.5) / sd); break;
      }
    }
  }
  r.p_adjusted = r.p_value;
  return r;
}

/// Pearson chi-square (no continuity correction) on an r x 2 table of counts,
/// df = r - 1, with Cramér's V = sqrt(chi2 / n) as the effect size.
inline StatsResult chi_square_table(std::span<const std::array<double, 2>> table) {
  if (table.size() < 2) throw InvalidArgument("chi_square: need at least 2 rows");
  std::vector<double> rows;
  std::array<double, 2> cols{0.0, 0.0};
  for (const auto& r : table) {
    rows.push_back(r[0] + r[1]);
    cols[0] += r[0];
    cols[1] += r[1];
  }
  for (double m : rows) {
    if (!(m > 0.0)) throw InvalidArgument("chi_square: zero marginal");
  }
  if (!(cols[0] > 0.0 && cols[1] > 0.0)) throw InvalidArgument("chi_square: zero marginal");
  const double n = cols[0] + cols[1];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  StatsResult r;
  r.test = "chi_square";
  r.statistic = chi2;
  r.p_value = dist::chi_square_upper_tail(chi2, static_cast<double>(table.size() - 1));
  r.p_adjusted = r.p_value;
  r.effect_size = std::sqrt(chi2 / n);
  r.effect_name = "cramers_v";
  return r;
}

/// 2x2 case of chi_square_table (1 df).
inline StatsResult chi_square_proportions(const std::array<std::array<double, 2>, 2>& table) {
  return chi_square_table(std::span<const std::array<double, 2>>(table));
}

/// Holm-Bonferroni step-down adjustment, returned in input order.
inline std::vector<double> holm_bonferroni(std::span<const double> p) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("holm: p-values must lie in [0,1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - i) * p[order[i]]));
    adjusted[order[i]] = running;
  }
  return adjusted;
}

/// Adjusted Rand index between two labelings of the same elements.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InvalidArgument("ari: partitions over different element sets");
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, c] : cells) index += choose2(c);
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& [key, c] : rows) sum_a += choose2(c);
  for (const auto& [key, c] : cols) sum_b += choose2(c);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = (sum_a + sum_b) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Cohen's d with pooled SD, (mean_a - mean_b) / s_pooled; 0 when s_pooled is 0.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() + b.size() <= 2) return 0.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = a.size() > 1 ? sample_sd(a) * sample_sd(a) : 0.0;
  const double vb = b.size() > 1 ? sample_sd(b) * sample_sd(b) : 0.0;
  const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
  if (!(pooled > 0.0)) return 0.0;
  return (sample_mean(a) - sample_mean(b)) / pooled;
}

}  // namespace fuma
