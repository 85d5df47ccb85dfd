#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/metric_oracles.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/metrics/ranking.hpp"

namespace voxflow::metrics {
namespace {

using S = std::vector<double>;
using L = std::vector<std::uint8_t>;

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(S{0.1, 0.4, 0.35, 0.8}, L{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auroc(S{0.1, 0.2, 0.8, 0.9}, L{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(S{0.3, 0.3, 0.3, 0.3, 0.3}, L{0, 1, 1, 0, 0}), 0.5);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(auroc(S{0.1, 0.2}, L{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auroc(S{0.1, 0.2}, L{0, 0}), UndefinedMetricError);
  EXPECT_THROW(auroc(S{0.1}, L{0, 1}), DimensionError);
}

TEST(Auprc, Examples) {
  EXPECT_NEAR(auprc(S{0.9, 0.8, 0.7}, L{1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(auprc(S{0.9, 0.8, 0.2, 0.1}, L{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auprc(S{0.1, 0.5, 0.3}, L{1, 1, 1}), 1.0);
  EXPECT_THROW(auprc(S{0.1, 0.5}, L{0, 0}), UndefinedMetricError);
}

TEST(BestF1, Examples) {
  const auto both = best_f1_threshold(S{0.9, 0.1}, L{0, 1});
  EXPECT_NEAR(both.f1, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(both.threshold, 0.1);
  const auto sep = best_f1_threshold(S{0.1, 0.2, 0.7, 0.8}, L{0, 0, 1, 1});
  EXPECT_EQ(sep.f1, 1.0);
  EXPECT_EQ(sep.threshold, 0.7);
}

TEST(BestF1, TiesGoToTheLargerThreshold) {
  // Cutting at 0.8 or at 0.3 both give F1 = 2/3.
  const auto r = best_f1_threshold(S{0.8, 0.5, 0.4, 0.3, 0.1}, L{1, 0, 0, 1, 0});
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.threshold, 0.8);
}

TEST(ThresholdedStats, Examples) {
  const auto perfect = thresholded_stats(S{0.9, 0.1}, L{1, 0}, 0.5);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.specificity, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);

  const auto none = thresholded_stats(S{0.2, 0.1, 0.3}, L{1, 0, 1}, 0.9);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.specificity, 1.0);

  // TP, FN, FP, TN in that order.
  const auto one_each = thresholded_stats(S{0.9, 0.1, 0.8, 0.2}, L{1, 1, 0, 0}, 0.5);
  EXPECT_EQ(one_each.accuracy, 0.5);
  EXPECT_EQ(one_each.specificity, 0.5);
  EXPECT_EQ(one_each.precision, 0.5);
  EXPECT_EQ(one_each.f1, 0.5);
}

TEST(Dice, Examples) {
  EXPECT_EQ(dice(L{1, 1, 0, 0}, L{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(dice(L{0, 0}, L{0, 0}), 0.0);
  EXPECT_EQ(dice(L{1, 0}, L{1, 0}), 1.0);
}

TEST(RankingProperty, MatchesIndependentOracles) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = testing::random_ranking_case(rng);
    EXPECT_NEAR(auroc(c.scores, c.labels), testing::auroc_pairs(c.scores, c.labels), 1e-9) << trial;
    EXPECT_NEAR(auprc(c.scores, c.labels), testing::ap_rank_walk(c.scores, c.labels), 1e-9) << trial;
    const auto got = best_f1_threshold(c.scores, c.labels);
    const auto want = testing::brute_max_dice(c.scores, c.labels);
    EXPECT_EQ(got.f1, want.dice) << trial;
    EXPECT_EQ(got.threshold, want.threshold) << trial;
    L binarized;
    for (double s : c.scores) binarized.push_back(s >= got.threshold);
    EXPECT_EQ(dice(binarized, c.labels), got.f1) << trial;
    EXPECT_EQ(thresholded_stats(c.scores, c.labels, got.threshold).f1, got.f1) << trial;
  }
}

TEST(RankingProperty, AurocInvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_ranking_case(rng);
    S exp_scores, cubed;
    for (double s : c.scores) {
      exp_scores.push_back(std::exp(3.0 * s) - 7.0);
      cubed.push_back(s * s * s + 2.0 * s);
    }
    const double base = auroc(c.scores, c.labels);
    EXPECT_NEAR(auroc(exp_scores, c.labels), base, 1e-12);
    EXPECT_NEAR(auroc(cubed, c.labels), base, 1e-12);
  }
}

TEST(RankingProperty, RatesLieInUnitInterval) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_ranking_case(rng);
    const auto st = thresholded_stats(c.scores, c.labels, u(rng));
    for (double r : {auroc(c.scores, c.labels), auprc(c.scores, c.labels),
                     best_f1_threshold(c.scores, c.labels).f1, st.accuracy, st.specificity, st.precision,
                     st.f1}) {
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
    }
  }
}

}  // namespace
}  // namespace voxflow::metrics
