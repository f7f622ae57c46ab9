#pragma once

// Knockoff copies of a feature matrix: i.i.d. uniform draws for the uniform
// generators, and equicorrelated second-order Model-X Gaussian knockoffs.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fsbench/matrix.hpp"
#include "fsbench/random.hpp"

namespace fsbench::knockoffs {

enum class Construction { Uniform, GaussianModelX };

inline std::string_view to_string(Construction c) {
  return c == Construction::Uniform ? "uniform" : "gaussian_modelx";
}

struct KnockoffMatrix {
  Matrix x_tilde;
  Construction construction = Construction::Uniform;
  std::vector<double> d_diag;  // Gaussian case only
};

inline KnockoffMatrix gen_uniform_knockoffs(const Matrix& x, std::uint64_t seed) {
  KnockoffMatrix out{Matrix(x.rows(), x.cols()), Construction::Uniform, {}};
  CounterRng rng(derive_seed(seed, "uniform_knockoffs"));
  for (double& v : out.x_tilde.values()) v = rng.uniform();
  return out;
}

// Everything the Gaussian sampler needs, derived from a covariance matrix.
struct GaussianKnockoffParams {
  Eigen::MatrixXd sigma;      // after ridge
  Eigen::MatrixXd sigma_inv;
  double s = 0.0;             // D = s * I
  Eigen::MatrixXd shift;      // D * sigma^-1; conditional mean is x - shift * x
  Eigen::MatrixXd cond_cov;   // 2D - D sigma^-1 D
  Eigen::MatrixXd cond_root;  // cond_root * cond_root^T == cond_cov
  std::size_t shrink_steps = 0;
};

inline constexpr double kRidgeScale = 1e-3;
inline constexpr double kShrinkFactor = 0.999;

inline GaussianKnockoffParams gaussian_knockoff_params(const Eigen::MatrixXd& sigma_in, bool ridge = true) {
  const Eigen::Index m = sigma_in.rows();
  if (m == 0 || sigma_in.cols() != m) throw std::invalid_argument("gaussian_knockoff_params: covariance must be square");
  if (!sigma_in.allFinite()) throw std::invalid_argument("gaussian_knockoff_params: non-finite covariance");
  GaussianKnockoffParams p;
  p.sigma = 0.5 * (sigma_in + sigma_in.transpose());
  if (ridge) p.sigma.diagonal().array() += kRidgeScale * p.sigma.trace() / static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sig_eig(p.sigma);
  const double lambda_min = sig_eig.eigenvalues().minCoeff();
  if (!(lambda_min > 0.0)) throw std::invalid_argument("gaussian_knockoff_params: covariance is not positive definite");
  p.sigma_inv = sig_eig.eigenvectors() * sig_eig.eigenvalues().cwiseInverse().asDiagonal() *
                sig_eig.eigenvectors().transpose();
  p.s = std::min(1.0, 2.0 * lambda_min);
  // 2sI - s^2 Sigma^-1 shares Sigma's eigenvectors: eigenvalues 2s - s^2 / lambda_i.
  const Eigen::VectorXd& lambda = sig_eig.eigenvalues();
  auto cond_eigenvalues = [&] { return (2.0 * p.s - p.s * p.s * lambda.array().inverse()).matrix().eval(); };
  Eigen::VectorXd v = cond_eigenvalues();
  while (v.minCoeff() < 0.0) {
    if (++p.shrink_steps > 100000) throw std::invalid_argument("gaussian_knockoff_params: could not reach a PSD covariance");
    p.s *= kShrinkFactor;
    v = cond_eigenvalues();
  }
  const Eigen::MatrixXd& q = sig_eig.eigenvectors();
  p.shift = p.s * p.sigma_inv;
  p.cond_cov = q * v.asDiagonal() * q.transpose();
  p.cond_root = q * v.cwiseSqrt().asDiagonal();
  return p;
}

// Draws x~ | x ~ N(x - shift x, cond_cov) row by row on the given scale.
inline Eigen::MatrixXd sample_conditional(const Eigen::MatrixXd& z, const GaussianKnockoffParams& p,
                                          std::uint64_t seed) {
  if (z.cols() != p.sigma.rows()) throw std::invalid_argument("sample_conditional: width does not match parameters");
  CounterRng rng(derive_seed(seed, "gaussian_knockoffs"));
  Eigen::MatrixXd noise(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) noise(r, c) = rng.normal();
  return z - z * p.shift.transpose() + noise * p.cond_root.transpose();
}

// Columns are standardized with their sample mean and sd, knockoffs are drawn
// on that scale and mapped back. Constant columns get a constant knockoff.
inline KnockoffMatrix gen_gaussian_knockoffs(const Matrix& x, std::uint64_t seed) {
  const std::size_t n = x.rows(), m = x.cols();
  if (n < 2 || m == 0) throw std::invalid_argument("gen_gaussian_knockoffs: need at least 2 rows and 1 column");
  for (double v : x.values())
    if (!std::isfinite(v)) throw std::invalid_argument("gen_gaussian_knockoffs: non-finite input");
  Eigen::MatrixXd z(n, m);
  std::vector<double> mean(m, 0.0), sd(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t r = 0; r < n; ++r) mean[c] += x(r, c);
    mean[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) sd[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
    sd[c] = std::sqrt(sd[c] / static_cast<double>(n - 1));
    for (std::size_t r = 0; r < n; ++r)
      z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sd[c] > 0.0 ? (x(r, c) - mean[c]) / sd[c] : 0.0;
  }
  Eigen::MatrixXd sigma = z.transpose() * z / static_cast<double>(n - 1);
  for (std::size_t c = 0; c < m; ++c)
    if (sd[c] == 0.0) sigma(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 1.0;
  const GaussianKnockoffParams p = gaussian_knockoff_params(sigma);

  const Eigen::MatrixXd zt = sample_conditional(z, p, seed);

  KnockoffMatrix out{Matrix(n, m), Construction::GaussianModelX, std::vector<double>(m, p.s)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c)
      out.x_tilde(r, c) = mean[c] + sd[c] * zt(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

}  // namespace fsbench::knockoffs
