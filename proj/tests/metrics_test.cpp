#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "randprompt/metrics.hpp"
#include "randprompt/rng.hpp"

namespace randprompt {
namespace {

LabeledScores random_instance(Xoshiro256& rng, std::size_t n, std::size_t distinct) {
  LabeledScores d;
  d.scores.resize(n);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = static_cast<int>(rng.uniform_below(2));
    d.scores[i] = distinct == 0 ? rng.normal() + 0.7 * d.labels[i]
                                : static_cast<double>(rng.uniform_below(distinct));
  }
  d.labels[0] = 0;
  d.labels[1] = 1;
  return d;
}

TEST(Auroc, PerfectSeparationAndAllTies) {
  EXPECT_DOUBLE_EQ(auroc({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(auroc({{0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}}), 0.0);
  EXPECT_EQ(auroc({{0.3, 0.3, 0.3, 0.3, 0.3}, {0, 1, 1, 0, 0}}), 0.5);
}

TEST(Aupr, PerfectSeparationAndPrevalenceUnderTies) {
  EXPECT_DOUBLE_EQ(aupr({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(aupr({{1.0, 1.0, 1.0, 1.0, 1.0}, {0, 1, 0, 0, 1}}), 0.4);
  EXPECT_DOUBLE_EQ(aupr_trapezoidal({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(aupr_trapezoidal({{1.0, 1.0, 1.0, 1.0, 1.0}, {0, 1, 0, 0, 1}}), 0.4);
}

TEST(Aupr, HandComputedExample) {
  // Ranking (desc): 1, 0, 1, 0 -> precision 1 at recall 0.5, 2/3 at recall 1.
  EXPECT_DOUBLE_EQ(aupr({{0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}}), 0.5 * 1.0 + 0.5 * (2.0 / 3.0));
}

// Scores that put a higher share of positives in every higher tie group
// never fall below the base rate.
TEST(Aupr, AtLeastPrevalenceForMonotoneGroups) {
  Xoshiro256 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    // (positives, size) per group, ranked so the realized rate rises with score.
    std::vector<std::pair<std::size_t, std::size_t>> groups(1 + rng.uniform_below(6));
    for (auto& [pos, size] : groups) {
      size = 1 + rng.uniform_below(20);
      pos = rng.uniform_below(size + 1);
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
      return a.first * b.second < b.first * a.second;
    });
    LabeledScores d;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t k = 0; k < groups[g].second; ++k) {
        d.scores.push_back(static_cast<double>(g));
        d.labels.push_back(k < groups[g].first ? 1 : 0);
      }
    }
    if (d.positives() == 0 || d.negatives() == 0) continue;
    const double prevalence = static_cast<double>(d.positives()) / static_cast<double>(d.labels.size());
    EXPECT_GE(aupr(d), prevalence - 1e-12) << trial;
  }
}

TEST(F1Max, PerfectAndAllPositiveCases) {
  const auto perfect = f1_max({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}});
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  EXPECT_DOUBLE_EQ(perfect.threshold, 0.8);
  const auto all_pos = f1_max({{0.4, 0.2, 0.9}, {1, 1, 1}});
  EXPECT_DOUBLE_EQ(all_pos.f1, 1.0);
  EXPECT_DOUBLE_EQ(all_pos.threshold, 0.2);
  EXPECT_THROW(f1_max({{0.1, 0.2}, {0, 0}}), MetricError);
}

TEST(F1Max, TiesKeepHighestThreshold) {
  // t = 0.9 gives F1 2/3 (tp 1, fn 1); t = 0.5 also gives 2/3 (tp 2, fp 2).
  const auto r = f1_max({{0.9, 0.5, 0.5, 0.5}, {1, 1, 0, 0}});
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.threshold, 0.9);
}

TEST(Metrics, SingleClassIsRejected) {
  EXPECT_THROW(auroc({{0.1, 0.2}, {1, 1}}), MetricError);
  EXPECT_THROW(aupr({{0.1, 0.2}, {0, 0}}), MetricError);
  EXPECT_THROW(evaluate({{0.1, 0.2}, {0, 0}}), MetricError);
  EXPECT_THROW(auroc({{0.1, 0.2}, {0, 2}}), ArgumentError);
  EXPECT_THROW(auroc({{0.1, std::nan("")}, {0, 1}}), ArgumentError);
  EXPECT_THROW(auroc({{0.1}, {0, 1}}), ArgumentError);
}

TEST(Metrics, AgreeWithBruteForceOracles) {
  Xoshiro256 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(300);
    const std::size_t distinct = trial % 3 == 0 ? 0 : 1 + rng.uniform_below(trial % 3 == 1 ? 4 : 40);
    const auto d = random_instance(rng, n, distinct);
    EXPECT_NEAR(auroc(d), oracle::auroc_pairs(d.scores, d.labels), 1e-12) << trial;
    EXPECT_NEAR(aupr(d), oracle::average_precision_sweep(d.scores, d.labels), 1e-12) << trial;
    EXPECT_NEAR(f1_max(d).f1, oracle::f1_max_sweep(d.scores, d.labels), 1e-12) << trial;
  }
}

TEST(Metrics, InvariantUnderStrictlyIncreasingTransforms) {
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = random_instance(rng, 200, trial % 2 ? 10 : 0);
    auto t = d;
    for (auto& s : t.scores) s = std::exp(3.0 * s) + 7.0;
    EXPECT_DOUBLE_EQ(auroc(d), auroc(t));
    EXPECT_DOUBLE_EQ(aupr(d), aupr(t));
    EXPECT_DOUBLE_EQ(f1_max(d).f1, f1_max(t).f1);
    auto neg = d;
    for (auto& s : neg.scores) s = -s;
    EXPECT_NEAR(auroc(d) + auroc(neg), 1.0, 1e-12);
  }
}

TEST(F1Max, DominatesEveryThreshold) {
  Xoshiro256 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_instance(rng, 150, trial % 2 ? 6 : 0);
    const auto best = f1_max(d);
    EXPECT_NEAR(oracle::f1_at(d.scores, d.labels, best.threshold), best.f1, 1e-12);
    for (int k = 0; k < 30; ++k) {
      EXPECT_LE(oracle::f1_at(d.scores, d.labels, rng.uniform(-4.0, 6.0)), best.f1 + 1e-12);
    }
  }
}

TEST(SeedStatistics, MeanAndPopulationStd) {
  EvalReport a, b;
  a.categories["x"].auroc.mean = 0.90;
  b.categories["x"].auroc.mean = 0.92;
  a.mean.auroc.mean = 0.90;
  b.mean.auroc.mean = 0.92;
  const std::vector<EvalReport> runs{a, b};
  const auto s = seed_statistics(runs);
  EXPECT_EQ(s.runs, 2u);
  EXPECT_NEAR(s.categories.at("x").auroc.mean, 0.91, 1e-15);
  EXPECT_NEAR(s.categories.at("x").auroc.std, 0.01, 1e-15);
  EXPECT_NEAR(s.mean.auroc.std, 0.01, 1e-15);

  const auto single = seed_statistics(std::vector<EvalReport>{a});
  EXPECT_EQ(single.mean.auroc.std, 0.0);
  EXPECT_EQ(single.mean.auroc.mean, 0.90);

  EvalReport c;
  c.categories["y"] = {};
  EXPECT_THROW(seed_statistics(std::vector<EvalReport>{a, c}), ArgumentError);
  EXPECT_THROW(seed_statistics(std::vector<EvalReport>{}), ArgumentError);
}

TEST(SeedStatistics, MatchesTwoPassOracle) {
  Xoshiro256 rng(1);
  std::vector<EvalReport> runs(10);
  std::vector<double> values;
  for (auto& r : runs) {
    r.categories["c"].aupr.mean = 0.8 + 0.1 * rng.uniform01();
    r.mean = r.categories["c"];
    values.push_back(r.mean.aupr.mean);
  }
  const auto s = seed_statistics(runs);
  const auto [mean, sd] = oracle::mean_std_two_pass(values);
  EXPECT_NEAR(s.mean.aupr.mean, mean, 1e-15);
  EXPECT_NEAR(s.mean.aupr.std, sd, 1e-15);
}

TEST(EvaluateCategories, MeanIsUnweightedAcrossCategories) {
  std::map<std::string, LabeledScores> data;
  data["a"] = {{0.1, 0.9}, {0, 1}};
  data["b"] = {{0.9, 0.8, 0.1, 0.2, 0.3, 0.4}, {0, 0, 1, 1, 0, 0}};
  const auto r = evaluate_categories(data);
  EXPECT_DOUBLE_EQ(r.categories.at("a").auroc.mean, 1.0);
  EXPECT_DOUBLE_EQ(r.categories.at("b").auroc.mean, 0.0);
  EXPECT_DOUBLE_EQ(r.mean.auroc.mean, 0.5);
  data["c"] = {{0.1, 0.2}, {0, 0}};
  try {
    evaluate_categories(data);
    FAIL() << "expected MetricError";
  } catch (const MetricError& e) {
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
  }
}

TEST(Report, JsonRoundTripAndTable) {
  EvalReport r;
  r.runs = 3;
  r.categories["bottle"] = {{0.921, 0.011}, {0.95, 0.0}, {0.9, 0.02}};
  r.categories["cable"] = {{0.8, 0.0}, {0.7, 0.0}, {0.6, 0.0}};
  r.mean = {{0.86, 0.005}, {0.825, 0.0}, {0.75, 0.01}};
  EXPECT_EQ(eval_report_from_json(nlohmann::json::parse(to_json(r).dump())), r);

  const auto table = format_table(r, "demo");
  EXPECT_NE(table.find("demo\n"), std::string::npos);
  EXPECT_NE(table.find("92.1±1.1"), std::string::npos);
  EXPECT_NE(table.find("Mean"), std::string::npos);
  r.runs = 1;
  const auto plain = format_table(r);
  EXPECT_EQ(plain.find("±"), std::string::npos);
  EXPECT_NE(plain.find("86.0"), std::string::npos);
}

}  // namespace
}  // namespace randprompt
