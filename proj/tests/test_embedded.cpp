#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fsbench/embedded.hpp"
#include "fsbench/knockoffs.hpp"
#include "fsbench/random.hpp"

namespace em = fsbench::embedded;
namespace ko = fsbench::knockoffs;
namespace nn = fsbench::nn;
using fsbench::CounterRng;
using fsbench::Labels;
using fsbench::Matrix;

namespace {

Eigen::MatrixXd ar1(std::size_t m, double rho) {
  Eigen::MatrixXd s(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
  return s;
}

Matrix gaussian_sample(const Eigen::MatrixXd& sigma, std::size_t n, std::uint64_t seed) {
  const Eigen::MatrixXd l = sigma.llt().matrixL();
  const auto m = static_cast<std::size_t>(sigma.rows());
  CounterRng rng(seed);
  Matrix x(n, m);
  Eigen::VectorXd xi(sigma.rows());
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : xi) v = rng.normal();
    const Eigen::VectorXd row = l * xi;
    for (std::size_t c = 0; c < m; ++c) x(r, c) = row(static_cast<Eigen::Index>(c));
  }
  return x;
}

// Sample covariance between column a of `x` and column b of `y`.
double cross_cov(const Matrix& x, std::size_t a, const Matrix& y, std::size_t b) {
  const std::size_t n = x.rows();
  double ma = 0, mb = 0;
  for (std::size_t r = 0; r < n; ++r) {
    ma += x(r, a);
    mb += y(r, b);
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double acc = 0;
  for (std::size_t r = 0; r < n; ++r) acc += (x(r, a) - ma) * (y(r, b) - mb);
  return acc / static_cast<double>(n - 1);
}

Matrix uniform_matrix(std::size_t n, std::size_t m, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix x(n, m);
  for (auto& v : x.values()) v = rng.uniform();
  return x;
}

Labels threshold_labels(const Matrix& x, std::size_t col) {
  Labels y(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) y[r] = x(r, col) > 0.5 ? 1 : 0;
  return y;
}

Labels coin_labels(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  Labels y(n);
  for (auto& v : y) v = rng.uniform() < 0.5 ? 1 : 0;
  return y;
}

nn::TrainConfig small_config(std::uint64_t seed) {
  nn::TrainConfig cfg;
  cfg.seed = seed;
  return cfg;
}

// Central differences of a trainable's objective against its analytic gradient.
template <class Net>
double max_param_gradient_error(Net& net, const Matrix& x, const Labels& y) {
  const auto blocks = net.parameter_blocks();
  std::size_t total = 0;
  for (auto b : blocks) total += b.size();
  std::vector<double> grad(total, 0.0);
  net.objective(x, y, grad);
  double worst = 0.0;
  std::size_t k = 0;
  for (auto b : blocks)
    for (double& p : b) {
      const double h = 1e-6, saved = p;
      p = saved + h;
      const double up = net.objective(x, y, {}).total();
      p = saved - h;
      const double down = net.objective(x, y, {}).total();
      p = saved;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[k]) / std::max(1.0, std::abs(fd)));
      ++k;
    }
  return worst;
}

}  // namespace

TEST(Knockoffs, ConditionalCovarianceMatchesFormula) {
  for (double rho : {0.0, 0.3, 0.7, 0.95}) {
    const Eigen::MatrixXd sigma = ar1(6, rho);
    const auto p = ko::gaussian_knockoff_params(sigma);
    const Eigen::MatrixXd inv = p.sigma.inverse();
    const Eigen::MatrixXd d = p.s * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::MatrixXd expected = 2 * d - d * inv * d;
    EXPECT_LE((p.cond_root * p.cond_root.transpose() - expected).cwiseAbs().maxCoeff(), 1e-10) << rho;
    // Marginal of x~ and its cross-covariance with x, from the conditional law.
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(6, 6) - d * inv;
    EXPECT_LE((a * p.sigma * a.transpose() + expected - p.sigma).cwiseAbs().maxCoeff(), 1e-10) << rho;
    EXPECT_LE((p.sigma * a.transpose() - (p.sigma - d)).cwiseAbs().maxCoeff(), 1e-10) << rho;
  }
}

TEST(Knockoffs, EquicorrelatedScaleKeepsCovariancePsd) {
  const Eigen::MatrixXd sigma = ar1(8, 0.9);
  const auto p = ko::gaussian_knockoff_params(sigma);
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.sigma).eigenvalues().minCoeff();
  EXPECT_GT(p.s, 0.0);
  EXPECT_LE(p.s, std::min(1.0, 2 * lmin) + 1e-15);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.cond_cov).eigenvalues().minCoeff(), 0.0);
}

TEST(Knockoffs, RidgeScalesWithTrace) {
  const Eigen::MatrixXd sigma = 4.0 * Eigen::MatrixXd::Identity(3, 3);
  const auto p = ko::gaussian_knockoff_params(sigma);
  EXPECT_NEAR(p.sigma(0, 0), 4.0 + 1e-3 * 4.0, 1e-15);
  EXPECT_EQ(p.sigma(0, 1), 0.0);
}

TEST(Knockoffs, IdentityCovarianceGivesIndependentCopies) {
  const auto p = ko::gaussian_knockoff_params(Eigen::MatrixXd::Identity(4, 4), false);
  EXPECT_EQ(p.s, 1.0);
  EXPECT_LE((p.cond_cov - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((p.shift - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);

  Eigen::MatrixXd z(1000, 4);
  CounterRng rng(1);
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
  const Eigen::MatrixXd zt = ko::sample_conditional(z, p, 2);
  const Eigen::MatrixXd zc = z.rowwise() - z.colwise().mean();
  const Eigen::MatrixXd tc = zt.rowwise() - zt.colwise().mean();
  EXPECT_LE((zc.transpose() * tc / 999.0).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Knockoffs, SampledMomentsMatchTarget) {
  const std::size_t m = 20;
  const Eigen::MatrixXd sigma = ar1(m, 0.5);
  const Matrix x = gaussian_sample(sigma, 1000, 3);
  const auto k = ko::gen_gaussian_knockoffs(x, 4);
  ASSERT_EQ(k.construction, ko::Construction::GaussianModelX);
  ASSERT_EQ(k.x_tilde.rows(), 1000u);
  ASSERT_EQ(k.x_tilde.cols(), m);
  const double s = k.d_diag[0];
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b)
      EXPECT_NEAR(cross_cov(k.x_tilde, a, k.x_tilde, b), sigma(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)),
                  0.15);
    EXPECT_NEAR(cross_cov(x, a, k.x_tilde, a), 1.0 - s, 0.15);
  }
}

TEST(Knockoffs, GaussianIsDeterministicAndRejectsNonFinite) {
  const Matrix x = gaussian_sample(ar1(3, 0.4), 50, 5);
  EXPECT_EQ(ko::gen_gaussian_knockoffs(x, 6).x_tilde, ko::gen_gaussian_knockoffs(x, 6).x_tilde);
  EXPECT_NE(ko::gen_gaussian_knockoffs(x, 6).x_tilde, ko::gen_gaussian_knockoffs(x, 7).x_tilde);
  Matrix bad = x;
  bad(3, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ko::gen_gaussian_knockoffs(bad, 1), std::invalid_argument);
  Eigen::MatrixXd sig = ar1(3, 0.2);
  sig(0, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ko::gaussian_knockoff_params(sig), std::invalid_argument);
}

TEST(Knockoffs, UniformCopiesAreIndependentDraws) {
  const Matrix x = uniform_matrix(1000, 6, 8);
  const auto k = ko::gen_uniform_knockoffs(x, 9);
  ASSERT_EQ(k.x_tilde.rows(), x.rows());
  ASSERT_EQ(k.x_tilde.cols(), x.cols());
  for (std::size_t j = 0; j < 6; ++j) {
    const double corr = cross_cov(x, j, k.x_tilde, j) / std::sqrt(cross_cov(x, j, x, j) * cross_cov(k.x_tilde, j, k.x_tilde, j));
    EXPECT_NEAR(corr, 0.0, 0.1);
    const auto col = k.x_tilde.column(j);
    EXPECT_NEAR(std::accumulate(col.begin(), col.end(), 0.0) / 1000.0, 0.5, 0.05);
    for (double v : col) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(CancelOut, GateActivations) {
  const std::vector<double> w{-2.0, 0.0, 1.5, 30.0};
  const auto s = em::gate_values(w, em::CancelOutVariant::Sigmoid);
  EXPECT_NEAR(s[1], 0.5, 1e-15);
  const auto soft = em::gate_values(w, em::CancelOutVariant::Softmax);
  EXPECT_NEAR(std::accumulate(soft.begin(), soft.end(), 0.0), 1.0, 1e-12);
  const auto flat = em::gate_values(std::vector<double>(5, 1.0), em::CancelOutVariant::Softmax);
  for (double v : flat) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(CancelOut, SigmoidPenaltyDropsWhenAnyGateDrops) {
  CounterRng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> g(16);
    for (double& v : g) v = rng.uniform(0.01, 0.99);
    const double base = em::sigmoid_gate_penalty(g, 0.2, 0.1);
    const auto j = static_cast<std::size_t>(rng.below(16));
    g[j] *= rng.uniform(0.1, 0.99);
    EXPECT_LT(em::sigmoid_gate_penalty(g, 0.2, 0.1), base);
  }
}

TEST(CancelOut, PenaltyGradientMatchesFiniteDifferences) {
  std::vector<double> g{0.2, 0.9, 0.5, 0.7, 0.1};
  std::vector<double> dg(5, 0.0);
  em::sigmoid_gate_penalty(g, 0.2, 0.1, dg);
  for (std::size_t j = 0; j < 5; ++j) {
    auto up = g, down = g;
    up[j] += 1e-6;
    down[j] -= 1e-6;
    const double fd = (em::sigmoid_gate_penalty(up, 0.2, 0.1) - em::sigmoid_gate_penalty(down, 0.2, 0.1)) / 2e-6;
    EXPECT_NEAR(dg[j], fd, 1e-8);
  }
}

TEST(CancelOut, ObjectiveGradientMatchesFiniteDifferences) {
  const Matrix x = fsbench::center_unit_interval(uniform_matrix(24, 5, 11));
  const Labels y = coin_labels(24, 12);
  for (auto variant : {em::CancelOutVariant::Sigmoid, em::CancelOutVariant::Softmax}) {
    em::CancelOutConfig co;
    co.variant = variant;
    nn::TrainConfig cfg = small_config(13);
    cfg.hidden = {6, 4};
    auto model = em::init_cancelout(5, cfg, co);
    CounterRng rng(14);
    for (double& w : model.gate_weights) w = rng.uniform(-1.0, 2.0);
    em::CancelOutTrainable net{model, 1e-2, co};
    EXPECT_LT(max_param_gradient_error(net, x, y), 1e-5) << em::to_string(variant);
  }
}

TEST(CancelOut, ImportanceRangesAndFullEpochBudget) {
  const Matrix x = uniform_matrix(200, 6, 15);
  const Labels y = threshold_labels(x, 0);
  em::CancelOutConfig co;
  co.epochs = 20;
  const auto sig = em::train_cancelout(x, y, small_config(16), co);
  ASSERT_EQ(sig.importance.size(), 6u);
  for (double v : sig.importance.scores) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(sig.history.epochs_run(), 20u);
  EXPECT_FALSE(sig.history.stopped_early);

  co.variant = em::CancelOutVariant::Softmax;
  const auto soft = em::train_cancelout(x, y, small_config(16), co);
  EXPECT_NEAR(std::accumulate(soft.importance.scores.begin(), soft.importance.scores.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(em::predict_logit(soft.model, x).size(), 200u);
}

TEST(CancelOut, UnivariateSignalRanksInTopTwo) {
  for (auto variant : {em::CancelOutVariant::Sigmoid, em::CancelOutVariant::Softmax}) {
    int hits = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Matrix x = uniform_matrix(500, 16, 100 + s);
      const Labels y = threshold_labels(x, 0);
      em::CancelOutConfig co;
      co.variant = variant;
      const auto res = em::train_cancelout(x, y, small_config(200 + s), co);
      const auto order = res.importance.ranking();
      hits += (order[0] == 0 || order[1] == 0) ? 1 : 0;
    }
    EXPECT_GE(hits, 4) << em::to_string(variant);
  }
}

TEST(CancelOut, DeterministicAndValidated) {
  const Matrix x = uniform_matrix(100, 4, 17);
  const Labels y = threshold_labels(x, 1);
  em::CancelOutConfig co;
  co.epochs = 5;
  EXPECT_EQ(em::train_cancelout(x, y, small_config(1), co).importance.scores,
            em::train_cancelout(x, y, small_config(1), co).importance.scores);
  co.epochs = 0;
  EXPECT_THROW(em::train_cancelout(x, y, small_config(1), co), std::invalid_argument);
}

TEST(DeepPink, UntrainedStatisticIsZero) {
  const auto model = em::init_deeppink(7, small_config(1));
  for (double w : em::knockoff_statistic(model)) EXPECT_EQ(w, 0.0);
}

TEST(DeepPink, SwappingFeatureWithKnockoffMirrorsTheModel) {
  const Matrix x = uniform_matrix(30, 5, 18);
  const auto k = ko::gen_uniform_knockoffs(x, 19);
  auto model = em::init_deeppink(5, small_config(2));
  CounterRng rng(20);
  for (double& v : model.z) v = rng.uniform(-2.0, 2.0);
  for (double& v : model.z_tilde) v = rng.uniform(-2.0, 2.0);
  const auto base = em::predict_logit(model, x, k.x_tilde);
  const auto w = em::knockoff_statistic(model);

  const std::size_t j = 2;
  Matrix xs = x, ks = k.x_tilde;
  for (std::size_t r = 0; r < x.rows(); ++r) std::swap(xs(r, j), ks(r, j));
  auto swapped = model;
  std::swap(swapped.z[j], swapped.z_tilde[j]);
  EXPECT_EQ(em::predict_logit(swapped, xs, ks), base);
  EXPECT_EQ(em::knockoff_statistic(swapped)[j], -w[j]);
}

TEST(DeepPink, ObjectiveGradientMatchesFiniteDifferences) {
  const Matrix x = uniform_matrix(24, 4, 21);
  const auto k = ko::gen_uniform_knockoffs(x, 22);
  const Labels y = coin_labels(24, 23);
  nn::TrainConfig cfg = small_config(24);
  cfg.hidden = {5, 3};
  auto model = em::init_deeppink(4, cfg);
  CounterRng rng(25);
  for (double& v : model.z) v = rng.uniform(-1.5, 1.5);
  for (double& v : model.z_tilde) v = rng.uniform(-1.5, 1.5);
  em::DeepPinkTrainable net{model, 1e-2};
  EXPECT_LT(max_param_gradient_error(net, em::paired_inputs(model, x, k.x_tilde), y), 1e-5);
}

TEST(DeepPink, PrefersRealSignalOverKnockoff) {
  const Matrix x = uniform_matrix(600, 8, 26);
  const Labels y = threshold_labels(x, 0);
  const auto k = ko::gen_uniform_knockoffs(x, 27);
  const auto res = em::train_deeppink(x, k, y, small_config(28));
  ASSERT_EQ(res.importance.size(), 8u);
  EXPECT_EQ(res.importance.ranking().front(), 0u);
  EXPECT_GT(res.importance[0], 0.0);
}

TEST(DeepPink, NullStatisticsCenterOnZero) {
  constexpr int kSeeds = 10;
  constexpr std::size_t m = 4;
  std::vector<double> sum(m, 0), sum_sq(m, 0);
  for (int s = 0; s < kSeeds; ++s) {
    const Matrix x = uniform_matrix(200, m, 300 + s);
    const auto k = ko::gen_uniform_knockoffs(x, 400 + s);
    const auto res = em::train_deeppink(x, k, coin_labels(200, 500 + s), small_config(600 + s));
    for (std::size_t j = 0; j < m; ++j) {
      sum[j] += res.importance[j];
      sum_sq[j] += res.importance[j] * res.importance[j];
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double mean = sum[j] / kSeeds;
    const double var = (sum_sq[j] - kSeeds * mean * mean) / (kSeeds - 1);
    EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / kSeeds)) << "feature " << j;
  }
}

TEST(DeepPink, RejectsMismatchedKnockoffs) {
  const Matrix x = uniform_matrix(20, 3, 29);
  const auto k = ko::gen_uniform_knockoffs(uniform_matrix(20, 4, 30), 31);
  EXPECT_THROW(em::train_deeppink(x, k, threshold_labels(x, 0), small_config(1)), std::invalid_argument);
}
