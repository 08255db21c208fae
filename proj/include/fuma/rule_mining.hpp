#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fuma/error.hpp"
#include "fuma/features.hpp"
#include "fuma/matrix.hpp"

namespace fuma {

enum class Op { LessEqual, Greater };

inline std::string_view op_symbol(Op op) { return op == Op::LessEqual ? "<=" : ">"; }

/// feature <= threshold or feature > threshold, in raw feature units.
struct Condition {
  std::size_t feature = 0;
  Op op = Op::LessEqual;
  double threshold = 0.0;

  bool holds(double value) const { return op == Op::LessEqual ? value <= threshold : value > threshold; }

  friend auto operator<=>(const Condition& a, const Condition& b) {
    return std::tie(a.feature, a.op, a.threshold) <=> std::tie(b.feature, b.op, b.threshold);
  }
  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Class association rule X -> cluster.
struct AssociationRule {
  std::vector<Condition> conditions;  // in discovery order
  std::size_t consequent = 0;
  std::size_t support = 0;      // training rows matching every condition
  std::size_t target_hits = 0;  // matching rows that belong to the consequent
  double confidence = 0.0;      // target_hits / support

  /// Conditions as a sorted set, the rule's identity.
  std::vector<Condition> key() const {
    auto k = conditions;
    std::sort(k.begin(), k.end());
    return k;
  }

  friend bool operator==(const AssociationRule&, const AssociationRule&) = default;
};

struct RuleSet {
  std::size_t cluster = 0;
  std::vector<AssociationRule> rules;
  double confidence_sum = 0.0;

  void refresh_sum() {
    confidence_sum = 0.0;
    for (const auto& r : rules) confidence_sum += r.confidence;
  }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

struct MiningParams {
  double min_support_frac = 0.1;
  double min_confidence_improvement = 0.01;
  std::size_t max_len = 3;
  std::size_t max_branching = 3;

  void validate() const {
    if (!(min_support_frac >= 0.0 && min_support_frac <= 1.0)) throw InvalidArgument("min_support_frac must be in [0,1]");
    if (!(min_confidence_improvement >= 0.0)) throw InvalidArgument("min_confidence_improvement must be >= 0");
    if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
    if (max_branching < 1) throw InvalidArgument("max_branching must be >= 1");
  }
};

inline bool rule_matches(const AssociationRule& rule, std::span<const double> vector) {
  for (const auto& c : rule.conditions) {
    if (!c.holds(vector[c.feature])) return false;
  }
  return true;
}

/// (support, confidence) of a rule recomputed on a labelled matrix.
inline std::pair<std::size_t, double> rule_stats(const AssociationRule& rule, const Matrix& features,
                                                 std::span<const std::size_t> assignment) {
  std::size_t support = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    if (!rule_matches(rule, features.row(i))) continue;
    ++support;
    if (assignment[i] == rule.consequent) ++hits;
  }
  if (support == 0) throw InvalidArgument("rule_stats: rule matches no row, confidence undefined");
  return {support, static_cast<double>(hits) / static_cast<double>(support)};
}

/// Confidence a child must reach to extend a node of confidence `parent`.
inline double required_confidence(double parent, double improvement) {
  return std::min(parent + improvement, 1.0);
}

/// Removes every rule for which another rule with a proper subset of its
/// conditions has at least its confidence and support.
inline std::vector<AssociationRule> prune_dominated(std::vector<AssociationRule> rules) {
  std::vector<std::vector<Condition>> keys;
  keys.reserve(rules.size());
  for (const auto& r : rules) keys.push_back(r.key());
  std::vector<AssociationRule> kept;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < rules.size() && !dominated; ++j) {
      if (i == j || keys[j].size() >= keys[i].size()) continue;
      if (!std::includes(keys[i].begin(), keys[i].end(), keys[j].begin(), keys[j].end())) continue;
      dominated = rules[j].confidence >= rules[i].confidence && rules[j].support >= rules[i].support;
    }
    if (!dominated) kept.push_back(std::move(rules[i]));
  }
  return kept;
}

namespace detail {

struct Candidate {
  Condition condition;
  std::size_t support = 0;
  std::size_t hits = 0;
  double confidence = 0.0;
};

inline bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.support != b.support) return a.support > b.support;
  if (a.condition.feature != b.condition.feature) return a.condition.feature < b.condition.feature;
  if (a.condition.threshold != b.condition.threshold) return a.condition.threshold < b.condition.threshold;
  return a.condition.op < b.condition.op;
}

// Every threshold split at midpoints of the distinct values among `rows`.
inline std::vector<Candidate> split_candidates(const Matrix& x, std::span<const std::size_t> rows,
                                               std::span<const std::size_t> assignment, std::size_t target) {
  std::vector<Candidate> out;
  std::size_t total_hits = 0;
  for (auto r : rows) total_hits += assignment[r] == target;
  std::vector<std::pair<double, bool>> values(rows.size());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) values[i] = {x(rows[i], j), assignment[rows[i]] == target};
    std::sort(values.begin(), values.end());
    std::size_t left = 0;
    std::size_t left_hits = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      ++left;
      left_hits += values[i].second;
      if (i + 1 == values.size() || values[i + 1].first == values[i].first) continue;
      const double t = values[i].first + (values[i + 1].first - values[i].first) / 2.0;
      const std::size_t right = rows.size() - left;
      const std::size_t right_hits = total_hits - left_hits;
      out.push_back({{j, Op::LessEqual, t}, left, left_hits, static_cast<double>(left_hits) / static_cast<double>(left)});
      out.push_back({{j, Op::Greater, t}, right, right_hits, static_cast<double>(right_hits) / static_cast<double>(right)});
    }
  }
  return out;
}

}  // namespace detail

/// Grows a rule tree toward `target` from the empty rule. At each node the
/// candidate threshold conditions that keep support >= min_support_frac *
/// |target| and raise confidence by at least min_confidence_improvement
/// (capped at 1) are ranked, and the best max_branching become children.
/// Every node below the root is a rule; dominated rules are then removed.
inline RuleSet mine_rules(const Matrix& features, std::span<const std::size_t> assignment, std::size_t target,
                          const MiningParams& params = {}) {
  params.validate();
  const std::size_t n = features.rows();
  if (assignment.size() != n) throw InvalidArgument("mine_rules: assignment length mismatch");
  if (n < 10) throw InvalidArgument("mine_rules: need at least 10 rows");
  std::size_t n_target = 0;
  for (auto a : assignment) n_target += a == target;
  if (n_target == 0) throw InvalidArgument("mine_rules: target cluster is empty");
  const double floor = std::max(1.0, params.min_support_frac * static_cast<double>(n_target));

  struct Node {
    std::vector<Condition> conditions;
    std::vector<std::size_t> rows;
    double confidence;
  };
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::deque<Node> queue;
  queue.push_back({{}, all, static_cast<double>(n_target) / static_cast<double>(n)});

  std::set<std::vector<Condition>> seen;
  std::vector<AssociationRule> emitted;
  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (node.conditions.size() >= params.max_len) continue;
    // Any child of a pure node is dominated by it.
    if (!node.conditions.empty() && node.confidence >= 1.0) continue;
    const double required = required_confidence(node.confidence, params.min_confidence_improvement);
    auto candidates = detail::split_candidates(features, node.rows, assignment, target);
    std::erase_if(candidates, [&](const detail::Candidate& c) {
      return static_cast<double>(c.support) < floor || c.confidence < required;
    });
    std::sort(candidates.begin(), candidates.end(), detail::candidate_before);
    if (candidates.size() > params.max_branching) candidates.resize(params.max_branching);

    for (const auto& cand : candidates) {
      Node child;
      child.conditions = node.conditions;
      child.conditions.push_back(cand.condition);
      auto key = child.conditions;
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) continue;
      for (auto r : node.rows) {
        if (cand.condition.holds(features(r, cand.condition.feature))) child.rows.push_back(r);
      }
      child.confidence = cand.confidence;
      emitted.push_back({child.conditions, target, cand.support, cand.hits, cand.confidence});
      queue.push_back(std::move(child));
    }
  }

  RuleSet set;
  set.cluster = target;
  set.rules = prune_dominated(std::move(emitted));
  if (set.rules.empty()) {
    throw EmptyRuleSetError("no rule for cluster " + std::to_string(target) +
                            " meets the support and confidence floors; relax the mining parameters");
  }
  std::stable_sort(set.rules.begin(), set.rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.support > b.support;
  });
  set.refresh_sum();
  return set;
}

inline std::string column_name(std::size_t feature, std::size_t width = kNumFeatures) {
  if (width == kNumFeatures && feature < kNumFeatures) return std::string(kFeatureNames[feature]);
  return "f" + std::to_string(feature);
}

inline std::string format_conditions(const AssociationRule& rule, std::size_t width = kNumFeatures) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
    const auto& c = rule.conditions[i];
    if (i) out << " AND ";
    out << column_name(c.feature, width) << ' ' << op_symbol(c.op) << ' ' << c.threshold;
  }
  return out.str();
}

}  // namespace fuma
