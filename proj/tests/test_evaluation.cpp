#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fuma/evaluation.hpp"
#include "fuma/synth.hpp"

using namespace fuma;

namespace {

struct Data {
  Matrix raw;
  std::vector<OutcomeRecord> outcomes;
  std::vector<std::size_t> truth;
};

// Two planted groups of students with distinct feature profiles.
Data planted(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, kNumFeatures), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i % 3 == 0 ? 0 : 1;
    d.truth.push_back(g);
    for (std::size_t j = 0; j < kNumFeatures; ++j) d.raw(i, j) = rng.normal(g == 0 && j < 6 ? 3.0 : 0.0, 1.0);
    const double grade = std::clamp(rng.normal(g == 0 ? 0.8 : 0.4, 0.1), 0.0, 1.0);
    d.outcomes.push_back({"s" + std::to_string(i), grade, grade >= 0.8, g == 0 ? 6 : 1 + static_cast<int>(i % 5)});
  }
  return d;
}

CVOptions small_cv() {
  CVOptions opt;
  opt.folds = 3;
  opt.inner_folds = 2;
  opt.support_grid = {0.1, 0.2};
  opt.branching_grid = {3};
  opt.discovery.fixed_k = 2;
  opt.discovery.ga.generations = 15;
  opt.discovery.ga.population_size = 10;
  opt.seed = 9;
  return opt;
}

}  // namespace

TEST(MakeFolds, Partition) {
  for (std::size_t n : {10u, 37u, 100u}) {
    const auto folds = make_folds(n, 10, 42);
    ASSERT_EQ(folds.size(), 10u);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
      EXPECT_GE(f.size(), n / 10);
      EXPECT_LE(f.size(), n / 10 + 1);
      for (auto i : f) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(*seen.rbegin(), n - 1);
  }
  EXPECT_EQ(make_folds(50, 5, 1), make_folds(50, 5, 1));
  EXPECT_THROW(make_folds(5, 10, 1), InvalidArgument);
  EXPECT_THROW(make_folds(5, 1, 1), InvalidArgument);
}

TEST(CohensKappa, Cases) {
  const std::vector<std::size_t> a = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
  const std::vector<std::size_t> b = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, b), 0.0);
  const std::vector<std::size_t> c = {1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, c), -1.0);
  EXPECT_THROW(cohens_kappa(a, std::vector<std::size_t>{0}), InvalidArgument);
}

TEST(TrainFold, NeverSeesTestRows) {
  const auto d = planted(90, 1);
  const auto opt = small_cv();
  const auto folds = make_folds(90, 3, 5);
  std::vector<std::size_t> train;
  std::set<std::size_t> test(folds[0].begin(), folds[0].end());
  for (std::size_t i = 0; i < 90; ++i) {
    if (!test.count(i)) train.push_back(i);
  }
  const auto base = train_fold(d.raw, d.outcomes, train, opt, 77);

  // Scramble every test row's features and outcomes.
  auto raw = d.raw;
  auto outcomes = d.outcomes;
  for (auto i : test) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) raw(i, j) = 1e6 * (j + 1.0);
    outcomes[i] = {"x", 0.0, false, 0};
  }
  const auto again = train_fold(raw, outcomes, train, opt, 77);
  EXPECT_EQ(again.model, base.model);
  EXPECT_EQ(again.min_support_frac, base.min_support_frac);
  EXPECT_EQ(again.inner_accuracy, base.inner_accuracy);
}

TEST(NestedCv, FoldModelsIgnoreTheirTestRows) {
  const auto d = planted(90, 2);
  const auto opt = small_cv();
  const auto report = nested_cv(d.raw, d.outcomes, opt, d.truth);
  ASSERT_EQ(report.folds.size(), 3u);
  std::set<std::size_t> seen;
  for (const auto& f : report.folds) {
    for (auto i : f.test) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 90u);

  auto raw = d.raw;
  for (auto i : report.folds[1].test) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) raw(i, j) = -5e5;
  }
  const auto perturbed = nested_cv(raw, d.outcomes, opt, d.truth);
  EXPECT_EQ(perturbed.folds[1].trained.model, report.folds[1].trained.model);
}

TEST(NestedCv, RecoversPlantedGroups) {
  const auto d = planted(120, 3);
  const auto report = nested_cv(d.raw, d.outcomes, small_cv(), d.truth);
  ASSERT_TRUE(report.mean_truth_accuracy);
  EXPECT_GT(*report.mean_truth_accuracy, 0.9);
  EXPECT_NEAR(*report.majority_rate, 80.0 / 120.0, 1e-12);
  for (const auto& f : report.folds) {
    EXPECT_GE(f.accuracy, 0.0);
    EXPECT_LE(f.accuracy, 1.0);
    std::size_t total = 0;
    for (const auto& row : f.confusion) {
      for (auto c : row) total += c;
    }
    EXPECT_EQ(total, f.test.size());
  }
}

TEST(NestedCv, SameSeedSameReportAcrossJobCounts) {
  const auto d = planted(60, 4);
  auto opt = small_cv();
  const auto a = nested_cv(d.raw, d.outcomes, opt);
  opt.jobs = 3;
  const auto b = nested_cv(d.raw, d.outcomes, opt);
  EXPECT_EQ(a.mean_accuracy, b.mean_accuracy);
  for (std::size_t f = 0; f < a.folds.size(); ++f) EXPECT_EQ(a.folds[f].trained.model, b.folds[f].trained.model);
  EXPECT_THROW(nested_cv(Matrix(5, kNumFeatures), std::vector<OutcomeRecord>(5), opt), InvalidArgument);
}

TEST(RankFeatures, ConstantFeatureRanksLast) {
  Rng rng(7);
  Matrix raw(20, kNumFeatures);
  std::vector<std::size_t> assignment(20);
  for (std::size_t i = 0; i < 20; ++i) {
    assignment[i] = i < 8 ? 1 : 0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) raw(i, j) = rng.normal(assignment[i] * 0.1 * j, 1.0);
    raw(i, 5) = 2.0;
  }
  const auto ranks = rank_discriminative_features(raw, assignment, 2, 1);
  ASSERT_EQ(ranks.size(), kNumFeatures);
  EXPECT_EQ(ranks.back().feature, 5u);
  EXPECT_EQ(ranks.back().d, 0.0);
  EXPECT_EQ(ranks.back().direction, 0);
  std::set<std::size_t> features;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    features.insert(ranks[i].feature);
    EXPECT_GE(ranks[i].p_adjusted, ranks[i].p_value);
    if (i) { EXPECT_GE(std::fabs(ranks[i - 1].d), std::fabs(ranks[i].d)); }
    EXPECT_EQ(ranks[i].direction, ranks[i].d > 0 ? 1 : (ranks[i].d < 0 ? -1 : 0));
  }
  EXPECT_EQ(features.size(), kNumFeatures);
  EXPECT_THROW(rank_discriminative_features(raw, assignment, 3, 1), InvalidArgument);
}

TEST(OutcomeTests, SeparatedClusters) {
  const auto d = planted(90, 5);
  Clustering c;
  c.k = 2;
  c.assignment = d.truth;
  const auto model = label_clusters(c, d.outcomes, 3);
  const auto t = outcome_tests(model, d.outcomes);
  ASSERT_TRUE(t.grade && t.dropout);
  EXPECT_LT(t.grade->p_adjusted, 1e-10);
  EXPECT_EQ(t.grade->magnitude, "large");
  EXPECT_EQ(t.dropout->effect_name, "cramers_v");
  EXPECT_GE(t.grade->p_adjusted, t.grade->p_value);
}

TEST(OutcomeTests, UntestableMeasureIsNoted) {
  Clustering c;
  c.k = 2;
  c.assignment = {0, 0, 1, 1};
  const std::vector<OutcomeRecord> o = {{"a", 0.1, false, 6}, {"b", 0.2, false, 6}, {"c", 0.3, false, 6}, {"d", 0.5, false, 6}};
  const auto t = outcome_tests(label_clusters(c, o, 2), o);
  EXPECT_TRUE(t.grade);
  EXPECT_FALSE(t.passed);
  EXPECT_FALSE(t.dropout);
  EXPECT_EQ(t.notes.size(), 2u);
}

TEST(ActivePerWeek, Counts) {
  const std::vector<OutcomeRecord> o = {{"a", 0, false, 0}, {"b", 0, false, 2}, {"c", 0.9, true, 6}};
  EXPECT_EQ(active_per_week(o, 6), (std::vector<std::size_t>{2, 2, 1, 1, 1, 1}));
}

TEST(Report, SeriesRoundTripAndDeterminism) {
  auto cfg = default_cohort_config();
  cfg.n_students = 120;
  cfg.seed = 8;
  const auto cohort = generate_cohort(cfg);
  EvaluationOptions opt;
  opt.folds = 0;
  opt.discovery.k_max = 3;
  opt.discovery.ga.generations = 20;
  opt.seed = 3;
  std::vector<WeekAnalysis> weeks;
  for (int w : {2, 3}) weeks.push_back(analyze_week(cohort.events, cohort.catalog, cohort.outcomes, w, opt));
  std::ostringstream a;
  write_report(a, weeks, cohort.outcomes, 6, opt.seed);
  std::vector<WeekAnalysis> again;
  for (int w : {2, 3}) again.push_back(analyze_week(cohort.events, cohort.catalog, cohort.outcomes, w, opt));
  std::ostringstream b;
  write_report(b, again, cohort.outcomes, 6, opt.seed);
  EXPECT_EQ(a.str(), b.str());

  std::istringstream in(a.str());
  const auto csv = extract_series(in, "active-per-week");
  std::ostringstream expected;
  write_series_csv(expected, report_series(weeks, cohort.outcomes, 6)[0]);
  EXPECT_EQ(csv, expected.str());
  std::istringstream in2(a.str());
  EXPECT_THROW(extract_series(in2, "nope"), Error);
}
