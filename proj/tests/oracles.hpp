#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Deliberately naive; none of this reuses library code
// beyond the data types.

#include <compare>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "fuma/matrix.hpp"
#include "fuma/rule_mining.hpp"

namespace oracle {

// Minimum TWCV over every assignment of n rows into k non-empty clusters.
inline double optimal_twcv(const fuma::Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<std::size_t> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::size_t> sizes(k, 0);
    for (auto c : a) ++sizes[c];
    if (std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; })) {
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
          double mean = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            if (a[i] == c) mean += x(i, j);
          }
          mean /= static_cast<double>(sizes[c]);
          for (std::size_t i = 0; i < n; ++i) {
            if (a[i] == c) total += (x(i, j) - mean) * (x(i, j) - mean);
          }
        }
      }
      best = std::min(best, total);
    }
    std::size_t pos = 0;
    while (pos < n && ++a[pos] == k) a[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

struct RuleFact {
  std::vector<fuma::Condition> key;
  std::size_t support = 0;
  double confidence = 0.0;

  friend std::partial_ordering operator<=>(const RuleFact& a, const RuleFact& b) {
    if (a.key != b.key) return a.key <=> b.key;
    if (a.support != b.support) return a.support <=> b.support;
    return a.confidence <=> b.confidence;
  }
  friend bool operator==(const RuleFact&, const RuleFact&) = default;
};

// All rules of length <= 2 over 0/1 features (threshold 0.5) that a fully
// branching confidence-improving tree could reach, after duplicate removal and
// dominance pruning.
inline std::vector<RuleFact> binary_rules(const fuma::Matrix& x, const std::vector<std::size_t>& y, std::size_t target,
                                          double support_frac, double improvement) {
  const std::size_t n = x.rows();
  std::size_t n_target = 0;
  for (auto v : y) n_target += v == target;
  const double floor = std::max(1.0, support_frac * static_cast<double>(n_target));
  const double base = static_cast<double>(n_target) / static_cast<double>(n);

  auto stats = [&](const std::vector<fuma::Condition>& conds, std::size_t& support, double& conf) {
    support = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool ok = true;
      for (const auto& c : conds) {
        const double v = x(i, c.feature);
        ok = ok && (c.op == fuma::Op::LessEqual ? v <= c.threshold : v > c.threshold);
      }
      if (!ok) continue;
      ++support;
      hits += y[i] == target;
    }
    conf = support ? static_cast<double>(hits) / static_cast<double>(support) : 0.0;
  };
  // Feature j takes both values among rows matching `conds`.
  auto varies = [&](const std::vector<fuma::Condition>& conds, std::size_t j) {
    bool zero = false;
    bool one = false;
    for (std::size_t i = 0; i < n; ++i) {
      bool ok = true;
      for (const auto& c : conds) {
        const double v = x(i, c.feature);
        ok = ok && (c.op == fuma::Op::LessEqual ? v <= c.threshold : v > c.threshold);
      }
      if (!ok) continue;
      (x(i, j) > 0.5 ? one : zero) = true;
    }
    return zero && one;
  };

  std::vector<fuma::Condition> singles;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    singles.push_back({j, fuma::Op::LessEqual, 0.5});
    singles.push_back({j, fuma::Op::Greater, 0.5});
  }

  std::set<RuleFact> found;
  for (const auto& a : singles) {
    if (!varies({}, a.feature)) continue;
    std::size_t sa = 0;
    double ca = 0.0;
    stats({a}, sa, ca);
    if (static_cast<double>(sa) < floor || ca < std::min(base + improvement, 1.0)) continue;
    found.insert({{a}, sa, ca});
    for (const auto& b : singles) {
      if (b.feature == a.feature || !varies({a}, b.feature)) continue;
      std::size_t sab = 0;
      double cab = 0.0;
      stats({a, b}, sab, cab);
      if (static_cast<double>(sab) < floor || cab < std::min(ca + improvement, 1.0)) continue;
      std::vector<fuma::Condition> key = {a, b};
      std::sort(key.begin(), key.end());
      found.insert({key, sab, cab});
    }
  }

  std::vector<RuleFact> all(found.begin(), found.end());
  std::vector<RuleFact> kept;
  for (const auto& r : all) {
    bool dominated = false;
    for (const auto& s : all) {
      if (s.key.size() >= r.key.size()) continue;
      const bool subset = std::all_of(s.key.begin(), s.key.end(), [&](const fuma::Condition& c) {
        return std::find(r.key.begin(), r.key.end(), c) != r.key.end();
      });
      if (subset && s.confidence >= r.confidence && s.support >= r.support) dominated = true;
    }
    if (!dominated) kept.push_back(r);
  }
  return kept;
}

inline std::vector<RuleFact> facts(const fuma::RuleSet& set) {
  std::vector<RuleFact> out;
  for (const auto& r : set.rules) out.push_back({r.key(), r.support, r.confidence});
  std::sort(out.begin(), out.end());
  return out;
}

// S_A evaluated straight from its definition.
inline double membership(const std::vector<double>& confidence, const std::vector<int>& satisfied) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    num += satisfied[i] * confidence[i];
    den += confidence[i];
  }
  return num / den;
}

// Two-sided exact rank-sum p-value by enumerating every subset of size |a|.
inline double wilcoxon_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      less += pooled[j] < pooled[i];
      equal += pooled[j] == pooled[i];
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) observed += rank[i];
  double total = 0.0;
  double low = 0.0;
  double high = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) s += rank[i];
    }
    total += 1.0;
    low += s <= observed + 1e-9;
    high += s >= observed - 1e-9;
  }
  return std::min(1.0, 2.0 * std::min(low, high) / total);
}

}  // namespace oracle
