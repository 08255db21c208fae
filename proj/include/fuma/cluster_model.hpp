#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuma/clustering.hpp"
#include "fuma/error.hpp"
#include "fuma/event_ingest.hpp"
#include "fuma/feature_extraction.hpp"
#include "fuma/rule_mining.hpp"

namespace fuma {

struct OutcomeSummary {
  std::size_t members = 0;
  double mean_grade = 0.0;
  double pass_rate = 0.0;
  double dropout_rate = 0.0;

  friend bool operator==(const OutcomeSummary&, const OutcomeSummary&) = default;
};

/// The trained artifact: normalizer, clustering, outcome labels and rules.
struct ClusterModel {
  static constexpr int kFormatVersion = 1;

  NormalizationParams normalization;
  Clustering clustering;
  std::vector<std::size_t> rank;    // per cluster, 0 = highest mean grade
  std::vector<std::string> labels;  // per cluster, "High" / "Low" / "Rank-r"
  std::vector<OutcomeSummary> outcome_summary;
  bool label_tie = false;  // ranking needed a tie-break
  int dropout_week = 0;
  std::vector<RuleSet> rulesets;  // per cluster

  std::size_t k() const noexcept { return clustering.k; }

  std::size_t cluster_with_rank(std::size_t r) const {
    return static_cast<std::size_t>(std::find(rank.begin(), rank.end(), r) - rank.begin());
  }
  std::size_t high_cluster() const { return cluster_with_rank(0); }
  std::size_t low_cluster() const { return cluster_with_rank(k() - 1); }

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Ranks clusters by mean final grade (ties: higher pass rate, then lower
/// index) and fills the outcome summary. `outcomes` is aligned with the
/// clustered rows; dropout is measured as of `dropout_week`.
inline ClusterModel label_clusters(const Clustering& clustering, std::span<const OutcomeRecord> outcomes,
                                   int dropout_week) {
  if (outcomes.size() != clustering.assignment.size()) {
    throw InvalidArgument("label_clusters: missing outcome for a clustered student");
  }
  ClusterModel model;
  model.clustering = clustering;
  model.dropout_week = dropout_week;
  const std::size_t k = clustering.k;
  model.outcome_summary.assign(k, {});
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& s = model.outcome_summary[clustering.assignment[i]];
    ++s.members;
    s.mean_grade += outcomes[i].final_grade;
    s.pass_rate += outcomes[i].passed ? 1.0 : 0.0;
    s.dropout_rate += outcomes[i].dropped_by(dropout_week) ? 1.0 : 0.0;
  }
  for (auto& s : model.outcome_summary) {
    if (s.members == 0) throw InvalidArgument("label_clusters: empty cluster");
    const double m = static_cast<double>(s.members);
    s.mean_grade /= m;
    s.pass_rate /= m;
    s.dropout_rate /= m;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  const auto& sum = model.outcome_summary;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sum[a].mean_grade != sum[b].mean_grade) return sum[a].mean_grade > sum[b].mean_grade;
    if (sum[a].pass_rate != sum[b].pass_rate) return sum[a].pass_rate > sum[b].pass_rate;
    return a < b;
  });
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (sum[order[i]].mean_grade == sum[order[i + 1]].mean_grade) model.label_tie = true;
  }
  model.rank.assign(k, 0);
  model.labels.assign(k, "");
  for (std::size_t r = 0; r < k; ++r) {
    model.rank[order[r]] = r;
    model.labels[order[r]] = r == 0 ? "High" : (r + 1 == k ? "Low" : "Rank-" + std::to_string(r + 1));
  }
  return model;
}

/// Mines one RuleSet per cluster on raw features.
inline std::vector<RuleSet> mine_all_rules(const Matrix& raw, std::span<const std::size_t> assignment, std::size_t k,
                                           const MiningParams& params) {
  std::vector<RuleSet> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back(mine_rules(raw, assignment, c, params));
  return out;
}

namespace detail {

using nlohmann::json;

inline json condition_to_json(const Condition& c) {
  return json{{"feature", column_name(c.feature)}, {"op", std::string(op_symbol(c.op))}, {"threshold", c.threshold}};
}

inline Condition condition_from_json(const json& j) {
  Condition c;
  const auto name = j.at("feature").get<std::string>();
  const auto idx = feature_index(name);
  if (!idx) throw Error("model: unknown feature name " + name);
  c.feature = *idx;
  const auto op = j.at("op").get<std::string>();
  if (op == "<=") {
    c.op = Op::LessEqual;
  } else if (op == ">") {
    c.op = Op::Greater;
  } else {
    throw Error("model: unknown condition op " + op);
  }
  c.threshold = j.at("threshold").get<double>();
  if (!std::isfinite(c.threshold)) throw Error("model: non-finite threshold");
  return c;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ClusterModel& m) {
  using nlohmann::json;
  json j;
  j["format"] = "fuma-model";
  j["version"] = ClusterModel::kFormatVersion;
  j["features"] = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
  j["normalization"] = {{"mean", m.normalization.mean}, {"sd", m.normalization.sd}};
  json centroids = json::array();
  for (std::size_t c = 0; c < m.clustering.k; ++c) {
    const auto row = m.clustering.centroids.row(c);
    centroids.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["clustering"] = {{"k", m.clustering.k},
                     {"twcv", m.clustering.twcv},
                     {"centroids", centroids},
                     {"assignment", m.clustering.assignment}};
  j["dropout_week"] = m.dropout_week;
  j["label_tie"] = m.label_tie;
  json clusters = json::array();
  for (std::size_t c = 0; c < m.clustering.k; ++c) {
    const auto& s = m.outcome_summary[c];
    json rules = json::array();
    for (const auto& r : m.rulesets[c].rules) {
      json conds = json::array();
      for (const auto& cond : r.conditions) conds.push_back(detail::condition_to_json(cond));
      rules.push_back({{"conditions", conds},
                       {"support", r.support},
                       {"target_hits", r.target_hits},
                       {"confidence", r.confidence}});
    }
    clusters.push_back({{"index", c},
                        {"label", m.labels[c]},
                        {"rank", m.rank[c]},
                        {"members", s.members},
                        {"mean_grade", s.mean_grade},
                        {"pass_rate", s.pass_rate},
                        {"dropout_rate", s.dropout_rate},
                        {"rules", rules}});
  }
  j["clusters"] = clusters;
  return j;
}

inline ClusterModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("version")) throw Error("model: missing version field");
  if (j.value("format", "") != "fuma-model") throw Error("model: not a fuma model file");
  if (j.at("version").get<int>() != ClusterModel::kFormatVersion) throw Error("model: unsupported version");
  const auto names = j.at("features").get<std::vector<std::string>>();
  if (names != std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end())) {
    throw Error("model: feature list differs from the canonical 21 features");
  }
  ClusterModel m;
  m.normalization.mean = j.at("normalization").at("mean").get<std::vector<double>>();
  m.normalization.sd = j.at("normalization").at("sd").get<std::vector<double>>();
  const auto& cl = j.at("clustering");
  m.clustering.k = cl.at("k").get<std::size_t>();
  m.clustering.twcv = cl.at("twcv").get<double>();
  m.clustering.assignment = cl.at("assignment").get<std::vector<std::size_t>>();
  const auto centroids = cl.at("centroids").get<std::vector<std::vector<double>>>();
  if (centroids.size() != m.clustering.k) throw Error("model: centroid count differs from k");
  m.clustering.centroids = Matrix(0, kNumFeatures);
  for (const auto& row : centroids) m.clustering.centroids.append_row(row);
  m.dropout_week = j.at("dropout_week").get<int>();
  m.label_tie = j.at("label_tie").get<bool>();
  const auto& clusters = j.at("clusters");
  if (clusters.size() != m.clustering.k) throw Error("model: cluster entries differ from k");
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cj = clusters[c];
    m.labels.push_back(cj.at("label").get<std::string>());
    m.rank.push_back(cj.at("rank").get<std::size_t>());
    m.outcome_summary.push_back({cj.at("members").get<std::size_t>(), cj.at("mean_grade").get<double>(),
                                 cj.at("pass_rate").get<double>(), cj.at("dropout_rate").get<double>()});
    RuleSet set;
    set.cluster = c;
    std::set<std::vector<Condition>> keys;
    for (const auto& rj : cj.at("rules")) {
      AssociationRule r;
      for (const auto& condj : rj.at("conditions")) r.conditions.push_back(detail::condition_from_json(condj));
      r.consequent = c;
      r.support = rj.at("support").get<std::size_t>();
      r.target_hits = rj.at("target_hits").get<std::size_t>();
      r.confidence = rj.at("confidence").get<double>();
      if (!keys.insert(r.key()).second) throw Error("model: duplicate rule in cluster " + std::to_string(c));
      set.rules.push_back(std::move(r));
    }
    if (set.rules.empty()) throw Error("model: cluster " + std::to_string(c) + " has no rules");
    set.refresh_sum();
    m.rulesets.push_back(std::move(set));
  }
  std::vector<std::size_t> sorted_rank = m.rank;
  std::sort(sorted_rank.begin(), sorted_rank.end());
  for (std::size_t r = 0; r < sorted_rank.size(); ++r) {
    if (sorted_rank[r] != r) throw Error("model: cluster ranks are not a permutation");
  }
  return m;
}

inline void save_model(std::ostream& out, const ClusterModel& m) { out << model_to_json(m).dump(2) << '\n'; }

inline ClusterModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model: ") + e.what());
  }
}

}  // namespace fuma
