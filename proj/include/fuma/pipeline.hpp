#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuma/cluster_model.hpp"
#include "fuma/clustering.hpp"
#include "fuma/error.hpp"
#include "fuma/event_ingest.hpp"
#include "fuma/feature_extraction.hpp"
#include "fuma/rule_mining.hpp"

namespace fuma {

struct DiscoveryParams {
  std::size_t k_min = 2;
  std::size_t k_max = 6;
  std::optional<std::size_t> fixed_k;  // skip selection when set
  GAParams ga;
  MiningParams mining;
  std::size_t jobs = 1;
  int dropout_week = 0;

  void validate() const {
    if (k_min < 2) throw InvalidArgument("k range must start at 2 or above");
    if (k_max < k_min) throw InvalidArgument("empty k range");
    if (fixed_k && *fixed_k < 2) throw InvalidArgument("k must be >= 2");
    ga.validate();
    mining.validate();
  }
};

struct Discovery {
  ClusterModel model;
  std::optional<KSelection> selection;  // empty when k was fixed
};

/// Normalizes, clusters (choosing k unless fixed) and labels clusters by
/// outcome. Rulesets are left empty. `outcomes` is aligned with `raw` rows.
inline Discovery discover_clusters(const Matrix& raw, std::span<const OutcomeRecord> outcomes,
                                   const DiscoveryParams& params) {
  params.validate();
  if (raw.rows() != outcomes.size()) throw InvalidArgument("discover: outcome count differs from feature rows");
  const NormalizationParams norm = fit_normalizer(raw);
  const Matrix z = apply_normalizer(raw, norm);

  Discovery out;
  Clustering clustering;
  if (params.fixed_k) {
    GAParams ga = params.ga;
    ga.seed = derive_seed(params.ga.seed, *params.fixed_k);
    clustering = ga_kmeans(z, *params.fixed_k, ga);
  } else {
    const std::size_t k_max = std::min(params.k_max, raw.rows() - 1);
    out.selection = select_k(z, params.k_min, k_max, params.ga, params.jobs);
    clustering = out.selection->best();
  }
  out.model = label_clusters(clustering, outcomes, params.dropout_week);
  out.model.normalization = norm;
  return out;
}

/// discover_clusters followed by rule mining on the raw features.
inline Discovery discover(const Matrix& raw, std::span<const OutcomeRecord> outcomes, const DiscoveryParams& params) {
  Discovery out = discover_clusters(raw, outcomes, params);
  out.model.rulesets = mine_all_rules(raw, out.model.clustering.assignment, out.model.k(), params.mining);
  return out;
}

/// Outcome records ordered like `ids`; throws when one is missing.
inline std::vector<OutcomeRecord> align_outcomes(std::span<const std::string> ids,
                                                 std::span<const OutcomeRecord> outcomes) {
  std::map<std::string, const OutcomeRecord*> by_id;
  for (const auto& o : outcomes) by_id[o.student_id] = &o;
  std::vector<OutcomeRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("missing outcome for student " + id);
    out.push_back(*it->second);
  }
  return out;
}

/// Students active in week `week` (last active week >= week) with their raw
/// features up to that week and aligned outcomes.
struct WeekCohort {
  int week = 0;
  FeatureTable features;
  std::vector<OutcomeRecord> outcomes;
  std::vector<std::size_t> source_rows;  // index into the full outcome list
};

inline WeekCohort week_cohort(const std::vector<VideoEvent>& events, const VideoCatalog& catalog,
                              std::span<const OutcomeRecord> outcomes, int week,
                              const SessionizerParams& sp = {}, const ExtractOptions& eo = {}) {
  const FeatureTable all = extract_feature_table(events, catalog, week, sp, eo);
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < outcomes.size(); ++i) row_of[outcomes[i].student_id] = i;
  WeekCohort c;
  c.week = week;
  for (std::size_t i = 0; i < all.student_ids.size(); ++i) {
    const auto it = row_of.find(all.student_ids[i]);
    if (it == row_of.end()) throw InvalidArgument("missing outcome for student " + all.student_ids[i]);
    const OutcomeRecord& o = outcomes[it->second];
    if (o.last_active_week < week) continue;
    c.features.student_ids.push_back(o.student_id);
    c.features.values.append_row(all.values.row(i));
    c.outcomes.push_back(o);
    c.source_rows.push_back(it->second);
  }
  return c;
}

}  // namespace fuma
