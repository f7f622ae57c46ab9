#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fsbench/importance.hpp"
#include "fsbench/random.hpp"

using fsbench::CounterRng;

TEST(Random, DeriveSeedIsStableAndSensitiveToEachPart) {
  EXPECT_EQ(fsbench::derive_seed(7, "a", 1), fsbench::derive_seed(7, "a", 1));
  EXPECT_NE(fsbench::derive_seed(7, "a", 1), fsbench::derive_seed(7, "a", 2));
  EXPECT_NE(fsbench::derive_seed(7, "a", 1), fsbench::derive_seed(7, "b", 1));
  EXPECT_NE(fsbench::derive_seed(7, "a", 1), fsbench::derive_seed(8, "a", 1));
}

TEST(Random, UniformMomentsAndRange) {
  CounterRng rng(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0 / 12.0, 0.002);
}

TEST(Random, NormalMoments) {
  CounterRng rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(1.0, 2.0);
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 1.0, 0.02);
  EXPECT_NEAR(std::sqrt(s2 / n - mean * mean), 2.0, 0.02);
}

TEST(Random, BelowCoversRangeUniformly) {
  CounterRng rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Random, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(50), b;
  std::iota(a.begin(), a.end(), 0);
  b = a;
  CounterRng r1(9), r2(9);
  fsbench::shuffle(a.begin(), a.end(), r1);
  fsbench::shuffle(b.begin(), b.end(), r2);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Random, CellDrawsDoNotDependOnCallOrder) {
  const double a = fsbench::cell_uniform(1, 2, 3, 4);
  (void)fsbench::cell_uniform(1, 2, 3, 5);
  EXPECT_EQ(a, fsbench::cell_uniform(1, 2, 3, 4));
}

TEST(Importance, RankingOrdersByScoreAndBreaksTiesBySeed) {
  fsbench::ImportanceVector v{{0.1, 0.9, 0.5}, 0};
  EXPECT_EQ(v.ranking(), (std::vector<std::size_t>{1, 2, 0}));

  // All-equal scores: different seeds give different orders, each a permutation.
  fsbench::ImportanceVector flat{std::vector<double>(20, 1.0), 1};
  fsbench::ImportanceVector flat2{std::vector<double>(20, 1.0), 2};
  EXPECT_NE(flat.ranking(), flat2.ranking());
  auto r = flat.ranking();
  std::sort(r.begin(), r.end());
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], i);
}

TEST(Importance, NanRanksLast) {
  fsbench::ImportanceVector v{{std::nan(""), -5.0, 2.0}, 0};
  EXPECT_EQ(v.ranking().back(), 0u);
}
