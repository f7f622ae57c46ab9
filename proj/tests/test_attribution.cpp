#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fsbench/attribution.hpp"
#include "fsbench/datagen.hpp"
#include "fsbench/metrics.hpp"

using fsbench::CounterRng;
using fsbench::Matrix;
namespace at = fsbench::attribution;
namespace nn = fsbench::nn;
using at::Method;

namespace {

nn::MlpModel random_model(std::vector<std::size_t> dims, std::uint64_t seed, double scale = 2.0) {
  nn::MlpModel model(std::move(dims));
  model.init_uniform_fan_in(seed);
  for (double& p : model.parameters()) p *= scale;
  return model;
}

Matrix random_inputs(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix x(rows, cols);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  return x;
}

nn::MlpModel linear_model(const std::vector<double>& w, double bias) {
  nn::MlpModel model({w.size(), 1});
  for (std::size_t j = 0; j < w.size(); ++j) model.weight(0, 0, j) = w[j];
  model.biases(0)[0] = bias;
  return model;
}

double logit_of(const nn::MlpModel& model, std::span<const double> row) {
  Matrix x(1, row.size());
  std::copy(row.begin(), row.end(), x.row(0).begin());
  return nn::predict_logit(model, x)[0];
}

// Exact Shapley values of v(S) = logit(x on S, 0 elsewhere) by subset enumeration.
std::vector<double> exact_shapley(const nn::MlpModel& model, std::span<const double> x) {
  const std::size_t m = x.size();
  std::vector<double> fact(m + 1, 1.0);
  for (std::size_t k = 1; k <= m; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
  std::vector<double> value(std::size_t{1} << m);
  for (std::size_t mask = 0; mask < value.size(); ++mask) {
    std::vector<double> z(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      if (mask >> j & 1) z[j] = x[j];
    value[mask] = logit_of(model, z);
  }
  std::vector<double> phi(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t mask = 0; mask < value.size(); ++mask) {
      if (mask >> j & 1) continue;
      const auto s = static_cast<std::size_t>(__builtin_popcountll(mask));
      phi[j] += fact[s] * fact[m - s - 1] / fact[m] * (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  return phi;
}

double row_sum(const Matrix& s, std::size_t r) {
  const auto row = s.row(r);
  return std::accumulate(row.begin(), row.end(), 0.0);
}

}  // namespace

TEST(Aggregate, Examples) {
  const auto ones = at::aggregate_global(Matrix(4, 3, 1.0));
  EXPECT_EQ(ones.scores, (std::vector<double>{1, 1, 1}));
  Matrix flip{{1.0, 2.0}, {-1.0, 2.0}};
  const auto g = at::aggregate_global(flip);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 2.0);
  const auto single = at::aggregate_global(Matrix{{-3.0, 0.5}});
  EXPECT_EQ(single.scores, (std::vector<double>{3.0, 0.5}));
}

TEST(Ratio, Examples) {
  Matrix s{{1.0, 1.0}, {0.0, 2.0}, {2.0, -4.0}, {0.0, 0.0}};
  EXPECT_EQ(at::attribution_ratio(s, 0, 1), (std::vector<double>{1.0, 0.0, 0.5, 1.0}));
  EXPECT_THROW(at::attribution_ratio(s, 0, 2), std::invalid_argument);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : at::kAllMethods) EXPECT_EQ(at::parse_method(at::to_string(m)), m);
  EXPECT_THROW(at::parse_method("lime"), std::invalid_argument);
}

TEST(LinearCollapse, AllMethodsReduceToWeightTimesInput) {
  const std::vector<double> w{3.0, -1.0, 0.5, 0.0, 2.0};
  const auto model = linear_model(w, 0.7);
  CounterRng rng(1);
  const Matrix x = random_inputs(12, w.size(), rng);

  const Matrix sal = at::saliency(model, x);
  const auto g = at::aggregate_global(sal);
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(g[j], std::abs(w[j]), 1e-12);

  at::AttributionConfig cfg;
  cfg.seed = 4;
  for (Method m : {Method::InputXGradient, Method::IntegratedGradients, Method::DeepLift, Method::FeatureAblation,
                   Method::ShapleySampling}) {
    const Matrix s = at::instance_scores(model, x, m, cfg);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < w.size(); ++j) ASSERT_NEAR(s(r, j), w[j] * x(r, j), 1e-8) << at::to_string(m);
  }
  const Matrix sg = at::smoothgrad(model, x, 0.1, 7, 3);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(sg(r, j), w[j], 1e-12);
  // Linear model with a single step still integrates exactly.
  const Matrix ig1 = at::integrated_gradients(model, x, 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(ig1(r, j), w[j] * x(r, j), 1e-12);
}

TEST(LinearCollapse, TwoWeightExample) {
  const auto model = linear_model({3.0, -1.0}, 0.0);
  CounterRng rng(2);
  const auto g = at::attribute(model, random_inputs(5, 2, rng), Method::Saliency).global_importance;
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

TEST(InputXGradient, ZeroInputGivesZero) {
  const auto model = random_model({4, 8, 8, 1}, 3);
  const Matrix s = at::input_x_gradient(model, Matrix(3, 4));
  for (double v : s.values()) EXPECT_EQ(v, 0.0);
  const Matrix ig = at::integrated_gradients(model, Matrix(3, 4));
  for (double v : ig.values()) EXPECT_EQ(v, 0.0);
}

TEST(IntegratedGradients, CompletenessAtThreeHundredSteps) {
  CounterRng rng(4);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto model = random_model({8, 16, 16, 1}, seed);
    const Matrix x = random_inputs(4, 8, rng);
    const Matrix ig = at::integrated_gradients(model, x, 300);
    const auto base = nn::predict_logit(model, Matrix(1, 8))[0];
    const auto logits = nn::predict_logit(model, x);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double delta = logits[r] - base;
      double mass = 0.0;
      for (double v : ig.row(r)) mass += std::abs(v);
      // Scale by the attribution mass too, so rows whose logit change nearly
      // cancels do not turn a small absolute error into a large ratio.
      worst = std::max(worst, std::abs(row_sum(ig, r) - delta) / std::max({std::abs(delta), mass, 1e-12}));
    }
  }
  EXPECT_LE(worst, 0.02);
}

TEST(DeepLift, SummationToDelta) {
  CounterRng rng(5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto model = random_model({8, 16, 16, 1}, seed);
    const Matrix x = random_inputs(6, 8, rng);
    const Matrix dl = at::deeplift(model, x);
    const auto base = nn::predict_logit(model, Matrix(1, 8))[0];
    const auto logits = nn::predict_logit(model, x);
    for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_NEAR(row_sum(dl, r), logits[r] - base, 1e-6);
  }
}

TEST(Shapley, FullEnumerationMatchesSubsetOracle) {
  CounterRng rng(6);
  for (std::size_t m : {3u, 5u, 6u}) {
    const auto model = random_model({m, 16, 16, 1}, m);
    const Matrix x = random_inputs(3, m, rng);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> all;
    do all.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    const Matrix est = at::shapley_from_permutations(model, x, all);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto phi = exact_shapley(model, x.row(r));
      for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(est(r, j), phi[j], 1e-10);
    }
  }
}

TEST(Shapley, EachPermutationTelescopes) {
  const auto model = random_model({7, 16, 16, 1}, 8);
  CounterRng rng(7);
  const Matrix x = random_inputs(5, 7, rng);
  const auto base = nn::predict_logit(model, Matrix(1, 7))[0];
  const auto logits = nn::predict_logit(model, x);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix s = at::shapley_value_sampling(model, x, 1, seed);
    for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_NEAR(row_sum(s, r), logits[r] - base, 1e-12);
  }
}

TEST(Ablation, DeadFeatureAndAdditivity) {
  auto model = random_model({4, 8, 8, 1}, 9);
  for (std::size_t o = 0; o < 8; ++o) model.weight(0, o, 2) = 0.0;
  CounterRng rng(8);
  const Matrix x = random_inputs(6, 4, rng);
  const Matrix s = at::feature_ablation(model, x);
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_EQ(s(r, 2), 0.0);

  const auto additive = linear_model({1.0, -2.0, 0.5, 4.0}, -0.3);
  const Matrix a = at::feature_ablation(additive, x);
  const auto logits = nn::predict_logit(additive, x);
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_NEAR(row_sum(a, r), logits[r] + 0.3, 1e-12);

  // Rank-1 update agrees with a full forward pass.
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < 4; ++j) {
      std::vector<double> z(x.row(r).begin(), x.row(r).end());
      z[j] = 0.0;
      EXPECT_NEAR(s(r, j), logit_of(model, x.row(r)) - logit_of(model, z), 1e-12);
    }
}

TEST(Permutation, DeadAndConstantColumnsScoreZero) {
  auto model = random_model({4, 8, 8, 1}, 10);
  for (std::size_t o = 0; o < 8; ++o) model.weight(0, o, 1) = 0.0;
  CounterRng rng(9);
  Matrix x = random_inputs(20, 4, rng);
  for (std::size_t r = 0; r < 20; ++r) x(r, 3) = 0.25;
  const Matrix s = at::feature_permutation(model, x, 3);
  for (std::size_t r = 0; r < 20; ++r) {
    EXPECT_EQ(s(r, 1), 0.0);
    EXPECT_EQ(s(r, 3), 0.0);
    EXPECT_GE(s(r, 0), 0.0);
  }
}

TEST(Permutation, RelevantFeatureOfUnivariateTaskBeatsDecoys) {
  CounterRng rng(10);
  Matrix x(1200, 10);
  fsbench::Labels y(1200);
  for (std::size_t r = 0; r < 1200; ++r) {
    for (double& v : x.row(r)) v = rng.uniform();
    y[r] = x(r, 0) > 0.5 ? 1 : 0;
  }
  nn::TrainConfig cfg;
  cfg.seed = 1;
  const auto trained = nn::train_mlp(x, y, cfg);
  std::vector<std::size_t> eval(1000);
  std::iota(eval.begin(), eval.end(), std::size_t{200});
  const Matrix xe = nn::prepare_inputs(trained.model, fsbench::select_rows(x, eval));
  const auto g = at::attribute(trained.model, xe, Method::FeaturePermutation).global_importance;
  for (std::size_t j = 1; j < 10; ++j) EXPECT_GT(g[0], g[j]);
}

TEST(SmoothGrad, VanishingNoiseRecoversSaliency) {
  const auto model = random_model({5, 16, 16, 1}, 11);
  CounterRng rng(11);
  const Matrix x = random_inputs(8, 5, rng);
  const Matrix sal = at::saliency(model, x);
  const Matrix sg = at::smoothgrad(model, x, 1e-12, 10, 2);
  for (std::size_t k = 0; k < sal.values().size(); ++k) EXPECT_NEAR(sg.values()[k], sal.values()[k], 1e-9);
}

TEST(SmoothGrad, EstimateVarianceShrinksWithSampleCount) {
  const auto model = random_model({3, 16, 16, 1}, 12);
  const Matrix x{{0.1, -0.2, 0.3}};
  auto variance = [&](std::size_t n_samples) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 300; ++seed) v.push_back(at::smoothgrad(model, x, 0.5, n_samples, seed)(0, 0));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0;
    for (double e : v) var += (e - mean) * (e - mean);
    return var / static_cast<double>(v.size() - 1);
  };
  const double ratio = variance(5) / variance(20);
  EXPECT_GT(ratio, 2.5);
  EXPECT_LT(ratio, 6.4);
}

TEST(Invariance, ColumnPermutationPermutesDeterministicMethods) {
  const auto model = random_model({6, 16, 16, 1}, 13);
  CounterRng rng(12);
  const Matrix x = random_inputs(10, 6, rng);
  const std::vector<std::size_t> pi{3, 0, 5, 1, 4, 2};  // new column k holds old column pi[k]
  nn::MlpModel permuted = model;
  for (std::size_t o = 0; o < 16; ++o)
    for (std::size_t k = 0; k < 6; ++k) permuted.weight(0, o, k) = model.weight(0, o, pi[k]);
  const Matrix xp = fsbench::select_columns(x, pi);
  for (Method m : {Method::Saliency, Method::InputXGradient, Method::IntegratedGradients, Method::DeepLift,
                   Method::GuidedBackprop, Method::Deconvolution, Method::FeatureAblation}) {
    const auto a = at::attribute(model, x, m).global_importance;
    const auto b = at::attribute(permuted, xp, m).global_importance;
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(b[k], a[pi[k]], 1e-12) << at::to_string(m);
  }
}

TEST(AllMethods, GlobalImportanceIsFiniteAndNonnegative) {
  const auto model = random_model({9, 16, 16, 1}, 14);
  CounterRng rng(13);
  const Matrix x = random_inputs(15, 9, rng);
  at::AttributionConfig cfg;
  cfg.ig_steps = 10;
  cfg.smoothgrad_samples = 5;
  cfg.shapley_permutations = 3;
  for (Method m : at::kAllMethods) {
    const auto r = at::attribute(model, x, m, cfg);
    EXPECT_EQ(r.instance_scores.rows(), 15u);
    EXPECT_EQ(r.instance_scores.cols(), 9u);
    ASSERT_EQ(r.global_importance.size(), 9u);
    for (double v : r.global_importance.scores) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Saliency, XorFeaturesReceiveSimilarImportance) {
  const auto d = fsbench::datagen::gen_xor(1200, 2, 21);
  double g0 = 0, g1 = 0;
  for (std::size_t fold = 0; fold < 6; ++fold) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < d.n(); ++i) (i % 6 == fold ? te : tr).push_back(i);
    fsbench::Labels ytr;
    for (auto i : tr) ytr.push_back(d.labels[i]);
    nn::TrainConfig cfg;
    cfg.seed = fold;
    const auto trained = nn::train_mlp(fsbench::select_rows(d.features, tr), ytr, cfg);
    const Matrix xe = nn::prepare_inputs(trained.model, fsbench::select_rows(d.features, te));
    const auto g = at::attribute(trained.model, xe, Method::Saliency).global_importance;
    g0 += g[0];
    g1 += g[1];
  }
  EXPECT_GE(std::min(g0, g1) / std::max(g0, g1), 0.75);
}

namespace {

struct TrainTest {
  Matrix x_train, x_eval;
  fsbench::Labels y_train;
};

TrainTest split(const fsbench::datagen::SyntheticDataset& d) {
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < d.n(); ++i) (i % 6 == 0 ? te : tr).push_back(i);
  TrainTest t;
  t.x_train = fsbench::select_rows(d.features, tr);
  t.x_eval = fsbench::select_rows(d.features, te);
  for (auto i : tr) t.y_train.push_back(d.labels[i]);
  return t;
}

}  // namespace

TEST(Bootstrap, DegenerateConfigurationReducesToHeldout) {
  const auto t = split(fsbench::datagen::gen_xor(300, 6, 3));
  nn::TrainConfig cfg;
  cfg.seed = 5;
  at::BootstrapConfig held{at::BootstrapMode::Heldout, 1, 1.0, false};
  at::BootstrapConfig boot{at::BootstrapMode::Bootstrap, 1, 1.0, false};
  const auto a = at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {}, held);
  const auto b = at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {}, boot);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.size(), 6u);
  const auto c = at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {},
                                           {at::BootstrapMode::Trainset, 1, 1.0, false});
  EXPECT_EQ(c.size(), 6u);
  EXPECT_THROW(at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {},
                                         {at::BootstrapMode::Bootstrap, 0, 0.8, true}),
               std::invalid_argument);
}

TEST(Bootstrap, AveragedRunsDoNotLoseToHeldoutOnSmallXor) {
  double held_sum = 0, boot_sum = 0;
  int cells = 0;
  for (std::size_t m : {8u, 32u}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto d = fsbench::datagen::gen_xor(1000, m, 100 + seed);
      const auto t = split(d);
      nn::TrainConfig cfg;
      cfg.seed = seed;
      const auto held = at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {},
                                                  {at::BootstrapMode::Heldout, 1, 0.8, true});
      const auto boot = at::bootstrap_attribution(Method::Saliency, t.x_train, t.y_train, t.x_eval, cfg, {},
                                                  {at::BootstrapMode::Bootstrap, 10, 0.8, true});
      held_sum += fsbench::metrics::best_2p_score(held, d.relevant_idx);
      boot_sum += fsbench::metrics::best_2p_score(boot, d.relevant_idx);
      ++cells;
    }
  }
  EXPECT_GE(boot_sum / cells, held_sum / cells - 10.0);
}
