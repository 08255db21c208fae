#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuma/cluster_model.hpp"
#include "fuma/error.hpp"
#include "fuma/features.hpp"
#include "fuma/rule_mining.hpp"

namespace fuma {

/// S_A for one cluster: sum of confidences of satisfied rules over the sum of
/// all rule confidences of that cluster.
struct MembershipScore {
  std::size_t cluster = 0;
  double score = 0.0;
  std::vector<bool> satisfied;  // T_ri per rule
  double satisfied_confidence = 0.0;
  double confidence_sum = 0.0;
};

inline MembershipScore membership_score(const RuleSet& rules, std::span<const double> vector) {
  if (rules.rules.empty()) throw InvalidArgument("membership_score: empty ruleset");
  MembershipScore m;
  m.cluster = rules.cluster;
  m.satisfied.reserve(rules.rules.size());
  for (const auto& r : rules.rules) {
    const bool t = rule_matches(r, vector);
    m.satisfied.push_back(t);
    if (t) m.satisfied_confidence += r.confidence;
    m.confidence_sum += r.confidence;
  }
  if (!(m.confidence_sum > 0.0)) throw InvalidArgument("membership_score: confidence sum must be positive");
  m.score = m.satisfied_confidence / m.confidence_sum;
  return m;
}

struct RuleRef {
  std::size_t cluster = 0;
  std::size_t index = 0;
  friend bool operator==(const RuleRef&, const RuleRef&) = default;
};

inline std::string rule_id(const RuleRef& ref) {
  return "c" + std::to_string(ref.cluster) + "r" + std::to_string(ref.index);
}

struct ViolatedRule {
  RuleRef rule;
  std::vector<std::size_t> failed_conditions;
};

struct ClassificationResult {
  std::optional<std::size_t> assigned;  // nullopt = Unclassified
  std::vector<MembershipScore> scores;  // per cluster
  std::vector<RuleRef> matched_rules;
  std::vector<ViolatedRule> violated_high_cluster_rules;
  bool ambiguity_flag = false;
};

struct ClassifyOptions {
  /// Students with fewer logged actions than this stay Unclassified.
  double min_action_count = 0.0;
};

/// Assigns the cluster with the highest membership score. Exact ties go to
/// the cluster with more training members and raise the ambiguity flag; when
/// every score is zero the student is Unclassified.
inline ClassificationResult classify(std::span<const double> vector, const ClusterModel& model,
                                     const ClassifyOptions& options = {}) {
  if (model.rulesets.size() != model.k() || model.k() < 2) throw InvalidArgument("classify: model missing rulesets");
  if (vector.size() != kNumFeatures) throw InvalidArgument("classify: expected 21 features");
  ClassificationResult res;
  for (const auto& set : model.rulesets) res.scores.push_back(membership_score(set, vector));

  const std::size_t high = model.high_cluster();
  for (std::size_t c = 0; c < model.k(); ++c) {
    const auto& set = model.rulesets[c];
    for (std::size_t i = 0; i < set.rules.size(); ++i) {
      if (res.scores[c].satisfied[i]) {
        res.matched_rules.push_back({c, i});
      } else if (c == high) {
        ViolatedRule v{{c, i}, {}};
        const auto& conds = set.rules[i].conditions;
        for (std::size_t j = 0; j < conds.size(); ++j) {
          if (!conds[j].holds(vector[conds[j].feature])) v.failed_conditions.push_back(j);
        }
        res.violated_high_cluster_rules.push_back(std::move(v));
      }
    }
  }

  if (options.min_action_count > 0.0 && vector[index_of(Feature::CountAll)] < options.min_action_count) return res;
  double best = 0.0;
  for (const auto& s : res.scores) best = std::max(best, s.score);
  if (best <= 0.0) return res;

  const auto sizes = model.clustering.sizes();
  std::vector<std::size_t> tied;
  for (std::size_t c = 0; c < res.scores.size(); ++c) {
    if (res.scores[c].score == best) tied.push_back(c);
  }
  std::size_t winner = tied.front();
  for (auto c : tied) {
    if (sizes[c] > sizes[winner]) winner = c;
  }
  res.assigned = winner;
  res.ambiguity_flag = tied.size() > 1;
  return res;
}

enum class Direction { Increase, Decrease };

inline std::string_view direction_name(Direction d) { return d == Direction::Increase ? "increase" : "decrease"; }

struct Intervention {
  std::size_t feature = 0;
  Direction direction = Direction::Increase;
  RuleRef source_rule;
  double threshold = 0.0;
  double confidence = 0.0;
  std::string message_template;
};

/// Prescriptive suggestions from the High cluster's rules that the student
/// violates. Only students assigned to a cluster other than High receive any.
/// One suggestion per feature, from the highest-confidence source rule,
/// ordered by that confidence.
inline std::vector<Intervention> suggest_interventions(const ClassificationResult& result, const ClusterModel& model) {
  std::vector<Intervention> out;
  if (!result.assigned || *result.assigned == model.high_cluster()) return out;
  std::map<std::size_t, Intervention> by_feature;
  for (const auto& v : result.violated_high_cluster_rules) {
    const auto& rule = model.rulesets[v.rule.cluster].rules[v.rule.index];
    for (auto ci : v.failed_conditions) {
      const auto& cond = rule.conditions[ci];
      Intervention iv;
      iv.feature = cond.feature;
      iv.direction = cond.op == Op::Greater ? Direction::Increase : Direction::Decrease;
      iv.source_rule = v.rule;
      iv.threshold = cond.threshold;
      iv.confidence = rule.confidence;
      iv.message_template = std::string("Try to ") + std::string(direction_name(iv.direction)) + " your " +
                            std::string(kFeatureNames[cond.feature]) + (iv.direction == Direction::Increase ? " above" : " to at most") +
                            " {threshold}";
      const auto it = by_feature.find(iv.feature);
      if (it == by_feature.end() || iv.confidence > it->second.confidence) by_feature[iv.feature] = iv;
    }
  }
  for (auto& [f, iv] : by_feature) out.push_back(std::move(iv));
  std::stable_sort(out.begin(), out.end(),
                   [](const Intervention& a, const Intervention& b) { return a.confidence > b.confidence; });
  return out;
}

}  // namespace fuma
