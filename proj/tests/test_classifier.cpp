#include <gtest/gtest.h>

#include "fuma/classifier.hpp"
#include "fuma/rng.hpp"
#include "oracles.hpp"

using namespace fuma;

namespace {

constexpr std::size_t kRewatch = static_cast<std::size_t>(Feature::PropRewatched);
constexpr std::size_t kSeek = static_cast<std::size_t>(Feature::SeekLenMean);
constexpr std::size_t kPause = static_cast<std::size_t>(Feature::PauseDurMean);

AssociationRule rule(std::vector<Condition> conds, std::size_t cluster, double conf) {
  return {std::move(conds), cluster, 10, static_cast<std::size_t>(conf * 10), conf};
}

RuleSet ruleset(std::size_t cluster, std::vector<AssociationRule> rules) {
  RuleSet s{cluster, std::move(rules), 0.0};
  s.refresh_sum();
  return s;
}

// Cluster 0 = High (30 training members), cluster 1 = Low (70).
ClusterModel two_cluster_model(RuleSet high, RuleSet low) {
  ClusterModel m;
  m.clustering.k = 2;
  m.clustering.assignment.assign(100, 1);
  std::fill(m.clustering.assignment.begin(), m.clustering.assignment.begin() + 30, 0);
  m.clustering.centroids = Matrix(2, kNumFeatures);
  m.rank = {0, 1};
  m.labels = {"High", "Low"};
  m.outcome_summary = {{30, 0.7, 0.3, 0.0}, {70, 0.4, 0.05, 0.3}};
  m.normalization.mean.assign(kNumFeatures, 0.0);
  m.normalization.sd.assign(kNumFeatures, 1.0);
  m.rulesets = {std::move(high), std::move(low)};
  return m;
}

std::vector<double> vec(std::initializer_list<std::pair<std::size_t, double>> values) {
  std::vector<double> v(kNumFeatures, 0.0);
  for (auto [i, x] : values) v[i] = x;
  return v;
}

}  // namespace

TEST(MembershipScore, HandEvaluated) {
  const auto set = ruleset(0, {rule({{0, Op::Greater, 1.0}}, 0, 0.9), rule({{1, Op::Greater, 1.0}}, 0, 0.6),
                               rule({{2, Op::Greater, 1.0}}, 0, 0.5)});
  const auto m = membership_score(set, vec({{0, 2.0}, {2, 2.0}}));
  EXPECT_NEAR(m.score, 0.7, 1e-12);
  EXPECT_EQ(m.satisfied, (std::vector<bool>{true, false, true}));
  EXPECT_NEAR(m.confidence_sum, 2.0, 1e-12);
  EXPECT_EQ(membership_score(set, vec({})).score, 0.0);
  EXPECT_EQ(membership_score(set, vec({{0, 2}, {1, 2}, {2, 2}})).score, 1.0);
}

TEST(MembershipScore, EmptyRulesetRejected) {
  EXPECT_THROW(membership_score(RuleSet{}, vec({})), InvalidArgument);
}

TEST(MembershipScore, RandomFixturesAgainstDefinition) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.index(8);
    std::vector<AssociationRule> rules;
    std::vector<double> conf;
    std::vector<int> sat;
    auto v = vec({});
    for (std::size_t i = 0; i < m; ++i) {
      conf.push_back(rng.uniform(0.05, 1.0));
      sat.push_back(rng.bernoulli(0.5));
      rules.push_back(rule({{i, Op::Greater, 0.5}}, 0, conf.back()));
      v[i] = sat.back() ? 1.0 : 0.0;
    }
    const auto score = membership_score(ruleset(0, rules), v);
    EXPECT_NEAR(score.score, oracle::membership(conf, sat), 1e-12);
    EXPECT_GE(score.score, 0.0);
    EXPECT_LE(score.score, 1.0);
    // Satisfying one more rule never lowers the score.
    for (std::size_t i = 0; i < m; ++i) {
      if (sat[i]) continue;
      auto v2 = v;
      v2[i] = 1.0;
      EXPECT_GE(membership_score(ruleset(0, rules), v2).score, score.score);
    }
  }
}

TEST(Classify, DominantHigh) {
  const auto model = two_cluster_model(ruleset(0, {rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8)}),
                                       ruleset(1, {rule({{kRewatch, Op::LessEqual, 0.2}}, 1, 0.7)}));
  const auto res = classify(vec({{kRewatch, 0.5}}), model);
  ASSERT_TRUE(res.assigned);
  EXPECT_EQ(*res.assigned, 0u);
  EXPECT_FALSE(res.ambiguity_flag);
  EXPECT_EQ(res.matched_rules, (std::vector<RuleRef>{{0, 0}}));
  EXPECT_TRUE(res.violated_high_cluster_rules.empty());
}

TEST(Classify, NoRulesSatisfiedIsUnclassified) {
  const auto model = two_cluster_model(ruleset(0, {rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8)}),
                                       ruleset(1, {rule({{kSeek, Op::Greater, 10.0}}, 1, 0.7)}));
  const auto res = classify(vec({}), model);
  EXPECT_FALSE(res.assigned);
  EXPECT_TRUE(suggest_interventions(res, model).empty());
}

TEST(Classify, TieGoesToLargerClusterWithFlag) {
  // Both clusters score 0.5; the Low cluster has more training members.
  const auto model = two_cluster_model(
      ruleset(0, {rule({{0, Op::Greater, 0.5}}, 0, 0.6), rule({{1, Op::Greater, 0.5}}, 0, 0.6)}),
      ruleset(1, {rule({{2, Op::Greater, 0.5}}, 1, 0.6), rule({{3, Op::Greater, 0.5}}, 1, 0.6)}));
  const auto res = classify(vec({{0, 1}, {2, 1}}), model);
  ASSERT_TRUE(res.assigned);
  EXPECT_EQ(*res.assigned, 1u);
  EXPECT_TRUE(res.ambiguity_flag);

  // Same tie with the High cluster larger.
  auto flipped = model;
  for (auto& a : flipped.clustering.assignment) a = 1 - a;
  const auto res2 = classify(vec({{0, 1}, {2, 1}}), flipped);
  EXPECT_EQ(*res2.assigned, 0u);
  EXPECT_TRUE(res2.ambiguity_flag);
}

TEST(Classify, MinimumActionCountKnob) {
  const auto model = two_cluster_model(ruleset(0, {rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8)}),
                                       ruleset(1, {rule({{kRewatch, Op::LessEqual, 0.2}}, 1, 0.7)}));
  ClassifyOptions opt;
  opt.min_action_count = 5;
  EXPECT_FALSE(classify(vec({{kRewatch, 0.5}}), model, opt).assigned);
  EXPECT_TRUE(classify(vec({{kRewatch, 0.5}, {static_cast<std::size_t>(Feature::CountAll), 5}}), model, opt).assigned);
}

TEST(Classify, ErrorsAndDeterminism) {
  auto model = two_cluster_model(ruleset(0, {rule({{0, Op::Greater, 0.2}}, 0, 0.8)}),
                                 ruleset(1, {rule({{0, Op::LessEqual, 0.2}}, 1, 0.7)}));
  const auto v = vec({{0, 0.1}});
  const auto a = classify(v, model);
  const auto b = classify(v, model);
  EXPECT_EQ(a.assigned, b.assigned);
  EXPECT_EQ(a.scores[0].score, b.scores[0].score);
  EXPECT_EQ(a.scores[1].score, b.scores[1].score);
  EXPECT_THROW(classify(std::vector<double>(3, 0.0), model), InvalidArgument);
  model.rulesets.pop_back();
  EXPECT_THROW(classify(v, model), InvalidArgument);
}

TEST(Interventions, ViolatedHighRule) {
  const auto model = two_cluster_model(ruleset(0, {rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8)}),
                                       ruleset(1, {rule({{kRewatch, Op::LessEqual, 0.2}}, 1, 0.7)}));
  const auto res = classify(vec({{kRewatch, 0.1}}), model);
  ASSERT_EQ(*res.assigned, 1u);
  const auto ivs = suggest_interventions(res, model);
  ASSERT_EQ(ivs.size(), 1u);
  EXPECT_EQ(ivs[0].feature, kRewatch);
  EXPECT_EQ(ivs[0].direction, Direction::Increase);
  EXPECT_DOUBLE_EQ(ivs[0].threshold, 0.2);
  EXPECT_NE(ivs[0].message_template.find("{threshold}"), std::string::npos);
}

TEST(Interventions, DedupKeepsHighestConfidenceAndOrders) {
  const auto model = two_cluster_model(
      ruleset(0, {rule({{kRewatch, Op::Greater, 0.3}}, 0, 0.6), rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8),
                  rule({{kSeek, Op::LessEqual, 5.0}}, 0, 0.7)}),
      ruleset(1, {rule({{kPause, Op::Greater, 100.0}}, 1, 0.9)}));
  const auto res = classify(vec({{kRewatch, 0.1}, {kSeek, 20.0}, {kPause, 200.0}}), model);
  ASSERT_EQ(*res.assigned, 1u);
  const auto ivs = suggest_interventions(res, model);
  ASSERT_EQ(ivs.size(), 2u);
  EXPECT_EQ(ivs[0].feature, kRewatch);
  EXPECT_EQ(ivs[0].source_rule, (RuleRef{0, 1}));
  EXPECT_DOUBLE_EQ(ivs[0].confidence, 0.8);
  EXPECT_EQ(ivs[1].feature, kSeek);
  EXPECT_EQ(ivs[1].direction, Direction::Decrease);
}

TEST(Interventions, HighStudentGetsNone) {
  const auto model = two_cluster_model(
      ruleset(0, {rule({{kRewatch, Op::Greater, 0.2}}, 0, 0.8), rule({{kSeek, Op::LessEqual, 5.0}}, 0, 0.7)}),
      ruleset(1, {rule({{kRewatch, Op::LessEqual, 0.2}}, 1, 0.7)}));
  const auto res = classify(vec({{kRewatch, 0.5}, {kSeek, 50.0}}), model);
  ASSERT_EQ(*res.assigned, 0u);
  EXPECT_FALSE(res.violated_high_cluster_rules.empty());
  EXPECT_TRUE(suggest_interventions(res, model).empty());
}
