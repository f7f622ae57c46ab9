#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fsbench/metrics.hpp"
#include "fsbench/random.hpp"

namespace mt = fsbench::metrics;
using fsbench::ImportanceVector;

namespace {

double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

// Average precision by sweeping every distinct score as a threshold.
double ap_thresholds(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thr = s;
  std::sort(thr.begin(), thr.end(), std::greater<>());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  double total_pos = 0;
  for (int v : y) total_pos += v;
  double ap = 0, prev_recall = 0;
  for (double t : thr) {
    double tp = 0, pred = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        pred += 1;
        tp += y[i];
      }
    ap += (tp / total_pos - prev_recall) * (tp / pred);
    prev_recall = tp / total_pos;
  }
  return ap;
}

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(mt::auroc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(mt::auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(mt::auroc(std::vector<double>{0.9, 0.4, 0.6, 0.2}, std::vector<int>{1, 0, 0, 1}), 0.5);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(mt::auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), fsbench::UndefinedMetric);
  EXPECT_THROW(mt::auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), fsbench::UndefinedMetric);
}

TEST(Auroc, MatchesPairCountingOracle) {
  fsbench::CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 20.0) / 20.0;  // coarse grid forces ties
      y[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(mt::auroc(s, y), auroc_pairs(s, y), 1e-12);
  }
}

TEST(Auroc, MonotoneInvarianceAndNegationSymmetry) {
  fsbench::CounterRng rng(2);
  std::vector<double> s(100), t(100), neg(100);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i] = rng.normal();
    t[i] = std::exp(3.0 * s[i]) + 1.0;
    neg[i] = -s[i];
    y[i] = i % 3 == 0;
  }
  EXPECT_DOUBLE_EQ(mt::auroc(s, y), mt::auroc(t, y));
  EXPECT_NEAR(mt::auroc(s, y) + mt::auroc(neg, y), 1.0, 1e-15);
}

TEST(Auprc, Examples) {
  EXPECT_NEAR(mt::auprc(std::vector<double>{0.9, 0.8, 0.7}, std::vector<int>{1, 0, 1}), 5.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(mt::auprc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_THROW(mt::auprc(std::vector<double>{0.1}, std::vector<int>{0}), fsbench::UndefinedMetric);
}

TEST(Auprc, MatchesThresholdSweepOracle) {
  fsbench::CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(150);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 10.0);
      y[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    y[0] = 1;
    EXPECT_NEAR(mt::auprc(s, y), ap_thresholds(s, y), 1e-12);
  }
}

TEST(Auprc, UninformativeScoresNearPrevalence) {
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    fsbench::CounterRng rng(seed);
    std::vector<double> s(200);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      s[i] = rng.uniform();
      y[i] = i % 2;
    }
    mean += mt::auprc(s, y) / 200.0;
  }
  EXPECT_NEAR(mean, 0.5, 0.03);
}

TEST(BestP, RelevantAtPositionsThreeAndFour) {
  ImportanceVector v{{0.5, 0.4, 0.9, 0.8, 0.3, 0.2, 0.1, 0.0}, 0};
  const std::vector<std::size_t> rel{0, 1};
  EXPECT_DOUBLE_EQ(mt::best_p_score(v, rel), 0.0);
  EXPECT_DOUBLE_EQ(mt::best_2p_score(v, rel), 100.0);
}

TEST(BestP, ConstantImportanceLandsAtRandomBaseline) {
  const std::vector<std::size_t> rel{0, 1};
  double mean = 0;
  const int seeds = 4000;
  for (int s = 0; s < seeds; ++s) mean += mt::best_p_score(ImportanceVector{std::vector<double>(64, 1.0), static_cast<std::uint64_t>(s)}, rel);
  mean /= seeds;
  EXPECT_NEAR(mean, mt::random_best_p(2, 64), 0.6);
  EXPECT_NEAR(mt::random_best_p(2, 64), 3.125, 1e-12);
}

TEST(BestP, InvariantUnderMonotoneTransform) {
  fsbench::CounterRng rng(5);
  std::vector<double> a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = rng.normal();
    b[i] = std::atan(a[i]) * 7 - 2;
  }
  const std::vector<std::size_t> rel{3, 7, 11};
  const auto ra = mt::ranking_score(ImportanceVector{a, 9}, rel);
  const auto rb = mt::ranking_score(ImportanceVector{b, 9}, rel);
  EXPECT_EQ(ra.best_p, rb.best_p);
  EXPECT_EQ(ra.best_2p, rb.best_2p);
}

TEST(BestP, Errors) {
  ImportanceVector v{{1, 2, 3}, 0};
  EXPECT_THROW(mt::best_p_score(v, std::vector<std::size_t>{}), std::invalid_argument);
  EXPECT_THROW(mt::best_p_score(v, std::vector<std::size_t>{0, 1, 2, 3}), std::invalid_argument);
}

TEST(BestP, TwoPIsCappedAtM) {
  ImportanceVector v{{3, 2, 1}, 0};
  EXPECT_DOUBLE_EQ(mt::best_2p_score(v, std::vector<std::size_t>{0, 2}), 100.0);
  EXPECT_NEAR(mt::random_best_2p(2, 3), 100.0, 1e-12);
}
