#include <gtest/gtest.h>

#include "fuma/feature_extraction.hpp"
#include "fuma/rng.hpp"
#include "fuma/rule_mining.hpp"
#include "oracles.hpp"

using namespace fuma;

namespace {

struct Dataset {
  Matrix x;
  std::vector<std::size_t> y;
};

Dataset random_binary(Rng& rng, std::size_t n, std::size_t d) {
  Dataset ds{Matrix(n, d), std::vector<std::size_t>(n)};
  // Label depends on the first two features with noise so rules exist.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double p = 0.15 + 0.35 * ds.x(i, 0) + 0.35 * ds.x(i, 1);
    ds.y[i] = rng.bernoulli(p) ? 1 : 0;
  }
  return ds;
}

Dataset random_continuous(Rng& rng, std::size_t n, std::size_t d) {
  Dataset ds{Matrix(n, d), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    ds.y[i] = rng.bernoulli(0.4) ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = rng.normal(ds.y[i] * (j % 2 ? 1.0 : -0.5), 1.0);
  }
  return ds;
}

}  // namespace

TEST(MineRules, BinaryFeatureCleanSplit) {
  Matrix x(0, 1);
  std::vector<std::size_t> y;
  for (int i = 0; i < 10; ++i) {
    const double f = i < 6 ? 1.0 : 0.0;
    x.append_row(std::vector<double>{f});
    y.push_back(i < 6 ? 0 : 1);
  }
  const auto set = mine_rules(x, y, 0);
  ASSERT_EQ(set.rules.size(), 1u);
  const auto& r = set.rules[0];
  ASSERT_EQ(r.conditions.size(), 1u);
  EXPECT_EQ(r.conditions[0].op, Op::Greater);
  EXPECT_DOUBLE_EQ(r.conditions[0].threshold, 0.5);
  EXPECT_EQ(r.support, 6u);
  EXPECT_EQ(r.confidence, 1.0);
  EXPECT_DOUBLE_EQ(set.confidence_sum, 1.0);
}

TEST(MineRules, TargetIsEveryone) {
  Rng rng(1);
  auto ds = random_continuous(rng, 30, 3);
  std::fill(ds.y.begin(), ds.y.end(), 0);
  const auto set = mine_rules(ds.x, ds.y, 0);
  for (const auto& r : set.rules) EXPECT_EQ(r.confidence, 1.0);
}

TEST(MineRules, Errors) {
  Rng rng(2);
  auto ds = random_continuous(rng, 30, 3);
  EXPECT_THROW(mine_rules(ds.x, ds.y, 5), InvalidArgument);
  EXPECT_THROW(mine_rules(Matrix(5, 3), std::vector<std::size_t>(5, 0), 0), InvalidArgument);
  MiningParams p;
  p.max_len = 0;
  EXPECT_THROW(mine_rules(ds.x, ds.y, 0, p), InvalidArgument);
  // Constant features offer no split at all.
  EXPECT_THROW(mine_rules(Matrix(ds.x.rows(), 2, 1.0), ds.y, 1), EmptyRuleSetError);
}

TEST(MineRules, MatchesBruteForceOracle) {
  Rng rng(314);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng.index(55);
    const std::size_t d = 1 + rng.index(6);
    const auto ds = random_binary(rng, n, d);
    const std::size_t target = rng.index(2);
    MiningParams p;
    p.max_len = 2;
    p.max_branching = 1000;
    p.min_support_frac = rng.uniform(0.0, 0.3);
    p.min_confidence_improvement = rng.uniform(0.005, 0.1);
    std::size_t n_target = 0;
    for (auto v : ds.y) n_target += v == target;
    if (n_target == 0) continue;
    const auto expected = oracle::binary_rules(ds.x, ds.y, target, p.min_support_frac, p.min_confidence_improvement);
    if (expected.empty()) {
      EXPECT_THROW(mine_rules(ds.x, ds.y, target, p), EmptyRuleSetError) << "trial " << trial;
    } else {
      EXPECT_EQ(oracle::facts(mine_rules(ds.x, ds.y, target, p)), expected) << "trial " << trial;
    }
  }
}

TEST(MineRules, StoredStatsRecompute) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = random_continuous(rng, 80, 5);
    for (std::size_t target = 0; target < 2; ++target) {
      const auto set = mine_rules(ds.x, ds.y, target);
      double sum = 0.0;
      for (const auto& r : set.rules) {
        const auto [support, conf] = rule_stats(r, ds.x, ds.y);
        EXPECT_EQ(support, r.support);
        EXPECT_NEAR(conf, r.confidence, 1e-12);
        EXPECT_EQ(r.consequent, target);
        EXPECT_GE(r.support, 1u);
        EXPECT_LE(r.conditions.size(), 3u);
        sum += r.confidence;
      }
      EXPECT_NEAR(set.confidence_sum, sum, 1e-12);
      EXPECT_GT(set.confidence_sum, 0.0);
    }
  }
}

TEST(MineRules, AddingConditionNeverRaisesSupport) {
  Rng rng(6);
  const auto ds = random_continuous(rng, 100, 4);
  MiningParams p;
  p.max_branching = 5;
  p.max_len = 3;
  for (const auto& r : mine_rules(ds.x, ds.y, 1, p).rules) {
    for (std::size_t len = 1; len < r.conditions.size(); ++len) {
      AssociationRule prefix = r;
      prefix.conditions.resize(len);
      EXPECT_GE(rule_stats(prefix, ds.x, ds.y).first, r.support);
    }
  }
}

TEST(MineRules, SupportFloorIsRespected) {
  Rng rng(7);
  const auto ds = random_continuous(rng, 120, 4);
  std::size_t n_target = 0;
  for (auto v : ds.y) n_target += v == 1;
  MiningParams p;
  p.min_support_frac = 0.25;
  for (const auto& r : mine_rules(ds.x, ds.y, 1, p).rules) {
    EXPECT_GE(static_cast<double>(r.support), 0.25 * static_cast<double>(n_target));
  }
}

TEST(MineRules, NoDominatedOrDuplicateRules) {
  Rng rng(8);
  const auto ds = random_continuous(rng, 100, 5);
  MiningParams p;
  p.max_branching = 6;
  const auto set = mine_rules(ds.x, ds.y, 0, p);
  for (std::size_t i = 0; i < set.rules.size(); ++i) {
    for (std::size_t j = 0; j < set.rules.size(); ++j) {
      if (i == j) continue;
      const auto ki = set.rules[i].key();
      const auto kj = set.rules[j].key();
      EXPECT_NE(ki, kj);
      if (kj.size() < ki.size() && std::includes(ki.begin(), ki.end(), kj.begin(), kj.end())) {
        EXPECT_FALSE(set.rules[j].confidence >= set.rules[i].confidence && set.rules[j].support >= set.rules[i].support);
      }
    }
  }
}

TEST(MineRules, Deterministic) {
  Rng rng(9);
  const auto ds = random_continuous(rng, 90, 6);
  EXPECT_EQ(mine_rules(ds.x, ds.y, 1), mine_rules(ds.x, ds.y, 1));
}

TEST(MineRules, RawUnitsMatchZScoredMining) {
  Rng rng(10);
  const auto ds = random_continuous(rng, 90, 4);
  const auto norm = fit_normalizer(ds.x);
  const Matrix z = apply_normalizer(ds.x, norm);
  const auto raw_set = mine_rules(ds.x, ds.y, 1);
  const auto z_set = mine_rules(z, ds.y, 1);
  ASSERT_EQ(raw_set.rules.size(), z_set.rules.size());
  for (std::size_t r = 0; r < raw_set.rules.size(); ++r) {
    EXPECT_EQ(raw_set.rules[r].support, z_set.rules[r].support);
    EXPECT_EQ(raw_set.rules[r].confidence, z_set.rules[r].confidence);
    for (std::size_t i = 0; i < ds.x.rows(); ++i) {
      EXPECT_EQ(rule_matches(raw_set.rules[r], ds.x.row(i)), rule_matches(z_set.rules[r], z.row(i)));
    }
  }
}

TEST(RuleMatches, Boundaries) {
  AssociationRule empty;
  const std::vector<double> v = {3.0, 10.0};
  EXPECT_TRUE(rule_matches(empty, v));
  AssociationRule le{{{0, Op::LessEqual, 3.0}}, 0, 0, 0, 0.0};
  AssociationRule gt{{{0, Op::Greater, 3.0}}, 0, 0, 0, 0.0};
  AssociationRule pause{{{1, Op::Greater, 5.0}}, 0, 0, 0, 0.0};
  EXPECT_TRUE(rule_matches(le, v));
  EXPECT_FALSE(rule_matches(gt, v));
  EXPECT_TRUE(rule_matches(pause, v));
}

TEST(RuleStats, Counting) {
  Matrix x(10, 1);
  std::vector<std::size_t> y(10, 1);
  for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
  for (std::size_t i = 0; i < 4; ++i) y[i] = 0;
  AssociationRule all{{{0, Op::LessEqual, 100.0}}, 0, 0, 0, 0.0};
  EXPECT_EQ(rule_stats(all, x, y).second, 0.4);
  AssociationRule exact{{{0, Op::LessEqual, 3.5}}, 0, 0, 0, 0.0};
  EXPECT_EQ(rule_stats(exact, x, y), (std::pair<std::size_t, double>{4, 1.0}));
  AssociationRule none{{{0, Op::Greater, 100.0}}, 0, 0, 0, 0.0};
  EXPECT_THROW(rule_stats(none, x, y), InvalidArgument);
}

TEST(RequiredConfidence, CappedAtOne) {
  EXPECT_DOUBLE_EQ(required_confidence(0.5, 0.01), 0.51);
  EXPECT_EQ(required_confidence(0.995, 0.01), 1.0);
}
