#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fuma/classifier.hpp"
#include "fuma/cluster_model.hpp"
#include "fuma/error.hpp"
#include "fuma/parallel.hpp"
#include "fuma/pipeline.hpp"
#include "fuma/rng.hpp"
#include "fuma/statistics.hpp"

namespace fuma {

/// Cohen's kappa between two labelings over the same categories.
inline double cohens_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("kappa: labelings differ in length");
  std::map<std::size_t, double> ma;
  std::map<std::size_t, double> mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    agree += a[i] == b[i];
  }
  const double n = static_cast<double>(a.size());
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [c, v] : ma) {
    const auto it = mb.find(c);
    if (it != mb.end()) pe += (v / n) * (it->second / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

/// Assigns each index in [0, n) to one of `folds` folds after a seeded shuffle.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("folds must be >= 2");
  if (n < folds) throw InvalidArgument("fewer items than folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < n; ++i) out[i % folds].push_back(order[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

struct CVOptions {
  std::size_t folds = 10;
  std::size_t inner_folds = 3;
  std::vector<double> support_grid{0.05, 0.1, 0.2};
  std::vector<std::size_t> branching_grid{3, 10, 30};
  DiscoveryParams discovery;  // ga.seed is replaced by per-fold seeds
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    if (inner_folds < 2) throw InvalidArgument("inner folds must be >= 2");
    if (support_grid.empty() || branching_grid.empty()) throw InvalidArgument("mining parameter grid is empty");
    discovery.validate();
  }
};

struct FoldModel {
  ClusterModel model;
  double min_support_frac = 0.0;
  std::size_t max_branching = 0;
  std::vector<std::optional<double>> inner_accuracy;  // per grid cell, empty when mining failed
};

inline std::uint64_t fold_seed(std::uint64_t master, std::size_t fold) { return derive_seed(master, 1000 + fold); }

/// Trains one outer fold on `train` rows only: clustering (k chosen by the
/// validity vote), outcome labels, and the mining parameters (support floor x
/// branching, support-major grid order) picked by inner CV agreement between
/// rule-based classification and the fold's clustering.
inline FoldModel train_fold(const Matrix& raw, std::span<const OutcomeRecord> outcomes,
                            std::span<const std::size_t> train, const CVOptions& opt, std::uint64_t seed) {
  const Matrix x = raw.select_rows(train);
  std::vector<OutcomeRecord> outs;
  outs.reserve(train.size());
  for (auto i : train) outs.push_back(outcomes[i]);
  DiscoveryParams dp = opt.discovery;
  dp.ga.seed = seed;
  dp.jobs = 1;
  FoldModel fm;
  fm.model = discover_clusters(x, outs, dp).model;
  const auto& assignment = fm.model.clustering.assignment;
  const std::size_t k = fm.model.k();

  const auto inner = make_folds(x.rows(), opt.inner_folds, derive_seed(seed, 7));
  std::vector<MiningParams> grid;
  for (double sup : opt.support_grid) {
    for (std::size_t br : opt.branching_grid) {
      MiningParams mp = dp.mining;
      mp.min_support_frac = sup;
      mp.max_branching = br;
      grid.push_back(mp);
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double correct = 0.0;
    bool ok = true;
    for (std::size_t f = 0; f < inner.size() && ok; ++f) {
      std::vector<bool> held(x.rows(), false);
      for (auto i : inner[f]) held[i] = true;
      std::vector<std::size_t> tr;
      std::vector<std::size_t> tr_assign;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        if (held[i]) continue;
        tr.push_back(i);
        tr_assign.push_back(assignment[i]);
      }
      ClusterModel m = fm.model;
      try {
        m.rulesets = mine_all_rules(x.select_rows(tr), tr_assign, k, grid[g]);
      } catch (const InvalidArgument&) {
        ok = false;
      } catch (const EmptyRuleSetError&) {
        ok = false;
      }
      if (!ok) break;
      for (auto i : inner[f]) {
        const auto res = classify(x.row(i), m);
        correct += res.assigned && *res.assigned == assignment[i];
      }
    }
    if (!ok) {
      fm.inner_accuracy.emplace_back();
      continue;
    }
    fm.inner_accuracy.emplace_back(correct / static_cast<double>(x.rows()));
    if (!best || *fm.inner_accuracy[g] > *fm.inner_accuracy[*best]) best = g;
  }
  if (!best) throw EmptyRuleSetError("no mining parameters in the grid yield rules for every cluster");
  fm.min_support_frac = grid[*best].min_support_frac;
  fm.max_branching = grid[*best].max_branching;
  fm.model.rulesets = mine_all_rules(x, assignment, k, grid[*best]);
  return fm;
}

struct FoldResult {
  std::vector<std::size_t> test;
  FoldModel trained;
  std::vector<std::optional<std::size_t>> predicted;  // per test row
  std::vector<std::size_t> proxy;                     // nearest-centroid cluster per test row
  double accuracy = 0.0;                              // predicted vs proxy
  double kappa = 0.0;
  std::optional<double> truth_accuracy;
  std::size_t unclassified = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [proxy][predicted], last column = Unclassified
};

struct CVReport {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  double mean_kappa = 0.0;
  std::optional<double> mean_truth_accuracy;
  std::optional<double> sd_truth_accuracy;
  std::optional<double> majority_rate;  // share of the most common truth label
};

/// Nested cross-validation of the whole pipeline. Test rows of an outer fold
/// never reach that fold's normalizer, clustering or rules. Accuracy is
/// agreement with the nearest trained centroid; with `truth`, each trained
/// cluster also maps to the majority truth label of its training members and
/// truth accuracy is scored; Unclassified students get the training majority
/// label there, while proxy accuracy counts them as wrong.
inline CVReport nested_cv(const Matrix& raw, std::span<const OutcomeRecord> outcomes, const CVOptions& opt,
                          std::optional<std::span<const std::size_t>> truth = std::nullopt) {
  opt.validate();
  const std::size_t n = raw.rows();
  if (outcomes.size() != n) throw InvalidArgument("nested_cv: outcome count differs from feature rows");
  if (truth && truth->size() != n) throw InvalidArgument("nested_cv: truth count differs from feature rows");
  if (n < 2 * opt.folds) throw InvalidArgument("nested_cv: need at least 2 students per fold");

  const auto folds = make_folds(n, opt.folds, derive_seed(opt.seed, 0xf01d));
  CVReport report;
  report.folds.resize(folds.size());
  parallel_for(folds.size(), opt.jobs, [&](std::size_t f) {
    FoldResult& fr = report.folds[f];
    fr.test = folds[f];
    std::vector<bool> held(n, false);
    for (auto i : fr.test) held[i] = true;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (!held[i]) train.push_back(i);
    }
    fr.trained = train_fold(raw, outcomes, train, opt, fold_seed(opt.seed, f));
    const ClusterModel& m = fr.trained.model;
    const std::size_t k = m.k();

    std::vector<std::size_t> cluster_truth(k, 0);
    std::size_t fallback_truth = 0;
    if (truth) {
      std::map<std::size_t, std::size_t> overall;
      for (auto i : train) ++overall[(*truth)[i]];
      std::size_t top = 0;
      for (const auto& [label, count] : overall) {
        if (count > top) {
          top = count;
          fallback_truth = label;
        }
      }
      std::vector<std::map<std::size_t, std::size_t>> votes(k);
      for (std::size_t j = 0; j < train.size(); ++j) ++votes[m.clustering.assignment[j]][(*truth)[train[j]]];
      for (std::size_t c = 0; c < k; ++c) {
        std::size_t best = 0;
        for (const auto& [label, count] : votes[c]) {
          if (count > best) {
            best = count;
            cluster_truth[c] = label;
          }
        }
      }
    }

    fr.confusion.assign(k, std::vector<std::size_t>(k + 1, 0));
    std::vector<std::size_t> pred_cat;
    double agree = 0.0;
    double truth_hits = 0.0;
    for (auto i : fr.test) {
      const auto res = classify(raw.row(i), m);
      const auto z = apply_normalizer(raw.row(i), m.normalization);
      const std::size_t proxy = detail::nearest_centroid(z, m.clustering.centroids);
      fr.predicted.push_back(res.assigned);
      fr.proxy.push_back(proxy);
      const std::size_t cat = res.assigned ? *res.assigned : k;
      pred_cat.push_back(cat);
      ++fr.confusion[proxy][cat];
      if (!res.assigned) ++fr.unclassified;
      agree += cat == proxy;
      if (truth && (res.assigned ? cluster_truth[*res.assigned] : fallback_truth) == (*truth)[i]) truth_hits += 1.0;
    }
    const double nt = static_cast<double>(fr.test.size());
    fr.accuracy = agree / nt;
    fr.kappa = cohens_kappa(fr.proxy, pred_cat);
    if (truth) fr.truth_accuracy = truth_hits / nt;
  });

  std::vector<double> acc;
  std::vector<double> kap;
  std::vector<double> tacc;
  for (const auto& fr : report.folds) {
    acc.push_back(fr.accuracy);
    kap.push_back(fr.kappa);
    if (fr.truth_accuracy) tacc.push_back(*fr.truth_accuracy);
  }
  report.mean_accuracy = sample_mean(acc);
  report.sd_accuracy = sample_sd(acc);
  report.mean_kappa = sample_mean(kap);
  if (truth) {
    report.mean_truth_accuracy = sample_mean(tacc);
    report.sd_truth_accuracy = sample_sd(tacc);
    std::map<std::size_t, std::size_t> counts;
    for (auto t : *truth) ++counts[t];
    std::size_t top = 0;
    for (const auto& [label, c] : counts) top = std::max(top, c);
    report.majority_rate = static_cast<double>(top) / static_cast<double>(n);
  }
  return report;
}

struct FeatureRank {
  std::size_t feature = 0;
  double d = 0.0;      // Cohen's d, High minus Low
  int direction = 0;   // sign of mean_High - mean_Low
  double p_value = 1.0;
  double p_adjusted = 1.0;
};

/// Ranks all 21 features by |Cohen's d| between the High and Low clusters of
/// a two-cluster model, with Wilcoxon p-values Holm-adjusted over the 21
/// comparisons. Ties in |d| keep canonical feature order.
inline std::vector<FeatureRank> rank_discriminative_features(const Matrix& raw, std::span<const std::size_t> assignment,
                                                             std::size_t k, std::size_t high_cluster) {
  if (k != 2) throw InvalidArgument("feature ranking needs exactly 2 clusters");
  if (raw.cols() != kNumFeatures) throw InvalidArgument("feature ranking expects 21 features");
  if (assignment.size() != raw.rows()) throw InvalidArgument("feature ranking: assignment length mismatch");
  std::vector<FeatureRank> out;
  std::vector<double> p;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    std::vector<double> hi;
    std::vector<double> lo;
    for (std::size_t i = 0; i < raw.rows(); ++i) (assignment[i] == high_cluster ? hi : lo).push_back(raw(i, j));
    if (hi.empty() || lo.empty()) throw InvalidArgument("feature ranking: empty cluster");
    FeatureRank r;
    r.feature = j;
    r.d = cohens_d(hi, lo);
    const double diff = sample_mean(hi) - sample_mean(lo);
    r.direction = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
    r.p_value = wilcoxon_rank_sum(hi, lo).p_value;
    p.push_back(r.p_value);
    out.push_back(r);
  }
  const auto adj = holm_bonferroni(p);
  for (std::size_t j = 0; j < out.size(); ++j) out[j].p_adjusted = adj[j];
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureRank& a, const FeatureRank& b) { return std::fabs(a.d) > std::fabs(b.d); });
  return out;
}

struct OutcomeTests {
  std::optional<StatsResult> grade;    // one-way ANOVA on final grade
  std::optional<StatsResult> passed;   // chi-square, cluster x passed
  std::optional<StatsResult> dropout;  // chi-square, cluster x dropped
  std::vector<std::string> notes;
};

/// Cluster-outcome tests, Holm-adjusted across the tests that could be run.
inline OutcomeTests outcome_tests(const ClusterModel& model, std::span<const OutcomeRecord> outcomes) {
  const std::size_t k = model.k();
  const auto& assignment = model.clustering.assignment;
  OutcomeTests t;
  std::vector<std::vector<double>> grades(k);
  std::vector<std::array<double, 2>> pass(k, {0.0, 0.0});
  std::vector<std::array<double, 2>> drop(k, {0.0, 0.0});
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const std::size_t c = assignment[i];
    grades[c].push_back(outcomes[i].final_grade);
    pass[c][outcomes[i].passed ? 0 : 1] += 1.0;
    drop[c][outcomes[i].dropped_by(model.dropout_week) ? 0 : 1] += 1.0;
  }
  try {
    t.grade = anova_one_way(grades);
  } catch (const InvalidArgument& e) {
    t.notes.push_back(std::string("final_grade: ") + e.what());
  }
  try {
    t.passed = chi_square_table(pass);
  } catch (const InvalidArgument& e) {
    t.notes.push_back(std::string("passed: ") + e.what());
  }
  try {
    t.dropout = chi_square_table(drop);
  } catch (const InvalidArgument& e) {
    t.notes.push_back(std::string("dropout: ") + e.what());
  }
  std::vector<StatsResult*> present;
  for (auto* r : {&t.grade, &t.passed, &t.dropout}) {
    if (*r) present.push_back(&**r);
  }
  std::vector<double> p;
  for (auto* r : present) p.push_back(r->p_value);
  const auto adj = holm_bonferroni(p);
  for (std::size_t i = 0; i < present.size(); ++i) present[i]->p_adjusted = adj[i];
  return t;
}

struct WeekAnalysis {
  int week = 0;
  std::size_t n_students = 0;
  Discovery discovery;
  OutcomeTests tests;
  std::vector<FeatureRank> ranking;  // two-cluster models only
  std::optional<CVReport> cv;
};

struct EvaluationOptions {
  DiscoveryParams discovery;
  std::size_t folds = 10;  // 0 skips cross-validation
  CVOptions cv;            // folds, discovery and seed are overwritten
  std::uint64_t seed = 0;
  SessionizerParams sessionizer;
  ExtractOptions extract;
};

/// Full pipeline and statistics for the students active at one week cutoff.
inline WeekAnalysis analyze_week(const std::vector<VideoEvent>& events, const VideoCatalog& catalog,
                                 std::span<const OutcomeRecord> outcomes, int week, const EvaluationOptions& opt,
                                 std::optional<std::span<const std::size_t>> truth = std::nullopt) {
  const WeekCohort cohort = week_cohort(events, catalog, outcomes, week, opt.sessionizer, opt.extract);
  WeekAnalysis wa;
  wa.week = week;
  wa.n_students = cohort.outcomes.size();
  if (wa.n_students < 10) throw InvalidArgument("week " + std::to_string(week) + ": fewer than 10 active students");
  DiscoveryParams dp = opt.discovery;
  dp.dropout_week = week;
  dp.ga.seed = derive_seed(opt.seed, static_cast<std::uint64_t>(week));
  wa.discovery = discover(cohort.features.values, cohort.outcomes, dp);
  const ClusterModel& m = wa.discovery.model;
  wa.tests = outcome_tests(m, cohort.outcomes);
  if (m.k() == 2) {
    wa.ranking = rank_discriminative_features(cohort.features.values, m.clustering.assignment, 2, m.high_cluster());
  }
  if (opt.folds > 0) {
    CVOptions cv = opt.cv;
    cv.folds = opt.folds;
    cv.discovery = dp;
    cv.seed = derive_seed(opt.seed, 100 + static_cast<std::uint64_t>(week));
    std::vector<std::size_t> week_truth;
    if (truth) {
      for (auto r : cohort.source_rows) week_truth.push_back((*truth)[r]);
    }
    wa.cv = nested_cv(cohort.features.values, cohort.outcomes, cv,
                      truth ? std::optional<std::span<const std::size_t>>(week_truth) : std::nullopt);
  }
  return wa;
}

/// Students active in each week 1..weeks (last active week >= w).
inline std::vector<std::size_t> active_per_week(std::span<const OutcomeRecord> outcomes, int weeks) {
  std::vector<std::size_t> out(static_cast<std::size_t>(std::max(weeks, 0)), 0);
  for (const auto& o : outcomes) {
    for (int w = 1; w <= weeks && w <= o.last_active_week; ++w) ++out[static_cast<std::size_t>(w - 1)];
  }
  return out;
}

namespace detail {

inline std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string fmt_p(double p) {
  char buf[64];
  if (p > 0.0 && p < 1e-4) {
    std::snprintf(buf, sizeof buf, "%.3e", p);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", p);
  }
  return buf;
}

}  // namespace detail

struct Series {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Machine-readable series backing the report tables.
inline std::vector<Series> report_series(std::span<const WeekAnalysis> weeks, std::span<const OutcomeRecord> outcomes,
                                         int course_weeks) {
  using detail::fmt;
  std::vector<Series> out;
  Series active{"active-per-week", {"week", "active_count"}, {}};
  const auto counts = active_per_week(outcomes, course_weeks);
  for (std::size_t w = 0; w < counts.size(); ++w) active.rows.push_back({std::to_string(w + 1), std::to_string(counts[w])});
  out.push_back(active);

  Series clusters{"cluster-outcomes",
                  {"week", "cluster", "label", "members", "mean_grade", "pass_rate", "dropout_rate"},
                  {}};
  Series features{"discriminative-features", {"week", "rank", "feature", "cohens_d", "direction", "p_holm"}, {}};
  Series cv{"cross-validation",
            {"week", "fold", "k", "min_support_frac", "max_branching", "accuracy", "kappa", "truth_accuracy"},
            {}};
  for (const auto& wa : weeks) {
    const auto& m = wa.discovery.model;
    for (std::size_t r = 0; r < m.k(); ++r) {
      const std::size_t c = m.cluster_with_rank(r);
      const auto& s = m.outcome_summary[c];
      clusters.rows.push_back({std::to_string(wa.week), std::to_string(c), m.labels[c], std::to_string(s.members),
                               fmt(s.mean_grade), fmt(s.pass_rate), fmt(s.dropout_rate)});
    }
    for (std::size_t i = 0; i < wa.ranking.size(); ++i) {
      const auto& f = wa.ranking[i];
      features.rows.push_back({std::to_string(wa.week), std::to_string(i + 1), std::string(kFeatureNames[f.feature]),
                               fmt(f.d), f.direction > 0 ? "+" : (f.direction < 0 ? "-" : "0"),
                               detail::fmt_p(f.p_adjusted)});
    }
    if (wa.cv) {
      for (std::size_t f = 0; f < wa.cv->folds.size(); ++f) {
        const auto& fr = wa.cv->folds[f];
        cv.rows.push_back({std::to_string(wa.week), std::to_string(f + 1), std::to_string(fr.trained.model.k()),
                           fmt(fr.trained.min_support_frac, 2), std::to_string(fr.trained.max_branching),
                           fmt(fr.accuracy), fmt(fr.kappa),
                           fr.truth_accuracy ? fmt(*fr.truth_accuracy) : std::string("NA")});
      }
    }
  }
  out.push_back(clusters);
  out.push_back(features);
  out.push_back(cv);
  return out;
}

inline void write_series_csv(std::ostream& out, const Series& s) {
  for (std::size_t i = 0; i < s.header.size(); ++i) out << (i ? "," : "") << s.header[i];
  out << '\n';
  for (const auto& row : s.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void write_report(std::ostream& out, std::span<const WeekAnalysis> weeks, std::span<const OutcomeRecord> outcomes,
                         int course_weeks, std::uint64_t seed) {
  using detail::fmt;
  using detail::fmt_p;
  out << "FUMA evaluation report\n";
  out << "students: " << outcomes.size() << "\n";
  out << "seed: " << seed << "\n";
  out << "weeks:";
  for (const auto& wa : weeks) out << ' ' << wa.week;
  out << "\n\n";

  for (const auto& wa : weeks) {
    const auto& m = wa.discovery.model;
    out << "== Week " << wa.week << " ==\n";
    out << "active students: " << wa.n_students << "\n";
    if (wa.discovery.selection) {
      const auto& sel = *wa.discovery.selection;
      out << "k = " << sel.best_k << " (votes: silhouette " << sel.vote_silhouette << ", calinski_harabasz "
          << sel.vote_calinski_harabasz << ", c_index " << sel.vote_c_index << ")\n";
      out << "k  silhouette  calinski_harabasz  c_index  twcv\n";
      for (const auto& row : sel.table) {
        out << row.k << "  " << fmt(row.silhouette) << "  " << fmt(row.calinski_harabasz) << "  " << fmt(row.c_index)
            << "  " << fmt(row.twcv) << "\n";
      }
    } else {
      out << "k = " << m.k() << " (fixed)\n";
    }
    if (m.label_tie) out << "note: cluster ranking needed a tie-break\n";
    out << "\ncluster  label  members  mean_grade  pass_rate  dropout_rate\n";
    for (std::size_t r = 0; r < m.k(); ++r) {
      const std::size_t c = m.cluster_with_rank(r);
      const auto& s = m.outcome_summary[c];
      out << c << "  " << m.labels[c] << "  " << s.members << "  " << fmt(s.mean_grade) << "  " << fmt(s.pass_rate)
          << "  " << fmt(s.dropout_rate) << "\n";
    }
    out << "\nmeasure  test  statistic  p  p_holm  effect\n";
    auto line = [&](const char* name, const std::optional<StatsResult>& r) {
      if (!r) return;
      out << name << "  " << r->test << "  " << fmt(r->statistic) << "  " << fmt_p(r->p_value) << "  "
          << fmt_p(r->p_adjusted) << "  ";
      if (r->effect_size) out << r->effect_name << "=" << fmt(*r->effect_size);
      if (!r->magnitude.empty()) out << " (" << r->magnitude << ")";
      out << "\n";
    };
    line("final_grade", wa.tests.grade);
    line("passed", wa.tests.passed);
    line("dropout", wa.tests.dropout);
    for (const auto& n : wa.tests.notes) out << "note: " << n << "\n";
    out << "note: categorical outcomes report Cramer's V, not eta squared\n";

    if (!wa.ranking.empty()) {
      out << "\ndiscriminative features (High vs Low)\nrank  feature  cohens_d  dir  p_holm\n";
      for (std::size_t i = 0; i < wa.ranking.size(); ++i) {
        const auto& f = wa.ranking[i];
        out << i + 1 << "  " << kFeatureNames[f.feature] << "  " << fmt(f.d) << "  "
            << (f.direction > 0 ? "+" : (f.direction < 0 ? "-" : "0")) << "  " << fmt_p(f.p_adjusted) << "\n";
      }
    }

    out << "\nrules\n";
    for (std::size_t c = 0; c < m.k(); ++c) {
      for (std::size_t i = 0; i < m.rulesets[c].rules.size(); ++i) {
        const auto& r = m.rulesets[c].rules[i];
        out << rule_id({c, i}) << " [" << m.labels[c] << "]  " << format_conditions(r) << "  support=" << r.support
            << "  confidence=" << fmt(r.confidence) << "\n";
      }
    }

    if (wa.cv) {
      const auto& cv = *wa.cv;
      out << "\ncross-validation (" << cv.folds.size() << " folds)\n";
      out << "fold  k  min_support_frac  max_branching  accuracy  kappa  truth_accuracy  unclassified\n";
      for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        const auto& fr = cv.folds[f];
        out << f + 1 << "  " << fr.trained.model.k() << "  " << fmt(fr.trained.min_support_frac, 2) << "  "
            << fr.trained.max_branching << "  " << fmt(fr.accuracy) << "  " << fmt(fr.kappa) << "  "
            << (fr.truth_accuracy ? fmt(*fr.truth_accuracy) : std::string("NA")) << "  " << fr.unclassified << "\n";
      }
      out << "mean accuracy " << fmt(cv.mean_accuracy) << " (sd " << fmt(cv.sd_accuracy) << "), mean kappa "
          << fmt(cv.mean_kappa) << "\n";
      if (cv.mean_truth_accuracy) {
        out << "mean truth accuracy " << fmt(*cv.mean_truth_accuracy) << " (sd " << fmt(*cv.sd_truth_accuracy)
            << "), majority rate " << fmt(*cv.majority_rate) << "\n";
      }
    }
    out << "\n";
  }

  for (const auto& s : report_series(weeks, outcomes, course_weeks)) {
    out << "# BEGIN-SERIES " << s.name << "\n";
    write_series_csv(out, s);
    out << "# END-SERIES " << s.name << "\n";
  }
}

/// Extracts one embedded series (as CSV text) from a report.
inline std::string extract_series(std::istream& report, const std::string& name) {
  std::string line;
  std::string out;
  bool inside = false;
  bool found = false;
  while (std::getline(report, line)) {
    if (line == "# BEGIN-SERIES " + name) {
      inside = true;
      found = true;
      continue;
    }
    if (inside && line == "# END-SERIES " + name) break;
    if (inside) out += line + "\n";
  }
  if (!found) throw Error("report has no series named " + name);
  return out;
}

}  // namespace fuma
