#pragma once

// Instance-level attribution for the MLP classifier. Every method explains the
// positive-class logit against the all-zero baseline, on inputs given at the
// model's own input scale (see nn::prepare_inputs). Global importance is the
// column-wise mean of absolute instance scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fsbench/importance.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/nn.hpp"
#include "fsbench/random.hpp"

namespace fsbench::attribution {

enum class Method : std::uint8_t {
  Saliency,
  InputXGradient,
  IntegratedGradients,
  DeepLift,
  SmoothGrad,
  GuidedBackprop,
  Deconvolution,
  FeatureAblation,
  FeaturePermutation,
  ShapleySampling,
};

inline constexpr std::array<Method, 10> kAllMethods = {
    Method::Saliency,        Method::InputXGradient, Method::IntegratedGradients, Method::DeepLift,
    Method::SmoothGrad,      Method::GuidedBackprop, Method::Deconvolution,       Method::FeatureAblation,
    Method::FeaturePermutation, Method::ShapleySampling,
};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Saliency: return "saliency";
    case Method::InputXGradient: return "input_x_gradient";
    case Method::IntegratedGradients: return "integrated_gradients";
    case Method::DeepLift: return "deeplift";
    case Method::SmoothGrad: return "smoothgrad";
    case Method::GuidedBackprop: return "guided_backprop";
    case Method::Deconvolution: return "deconvolution";
    case Method::FeatureAblation: return "feature_ablation";
    case Method::FeaturePermutation: return "feature_permutation";
    case Method::ShapleySampling: return "shapley_value_sampling";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown attribution method: " + std::string(s));
}

struct AttributionConfig {
  std::size_t ig_steps = 50;
  double smoothgrad_std = 0.1;
  std::size_t smoothgrad_samples = 50;
  std::size_t shapley_permutations = 25;
  std::uint64_t seed = 0;
};

struct AttributionResult {
  Method method = Method::Saliency;
  Matrix instance_scores;  // n_eval x m, signed
  ImportanceVector global_importance;
  AttributionConfig config;
};

inline ImportanceVector aggregate_global(const Matrix& scores, std::uint64_t tie_break_seed = 0) {
  ImportanceVector out{std::vector<double>(scores.cols(), 0.0), tie_break_seed};
  if (scores.rows() == 0) return out;
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out.scores[j] += std::abs(row[j]);
  }
  for (double& s : out.scores) s /= static_cast<double>(scores.rows());
  return out;
}

// Per-row min(|a|,|b|) / max(|a|,|b|) of two attribution columns; 1 when both are 0.
inline std::vector<double> attribution_ratio(const Matrix& scores, std::size_t j1, std::size_t j2) {
  if (j1 >= scores.cols() || j2 >= scores.cols()) throw std::invalid_argument("attribution_ratio: column out of range");
  std::vector<double> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const double a = std::abs(scores(r, j1)), b = std::abs(scores(r, j2));
    const double hi = std::max(a, b);
    out[r] = hi == 0.0 ? 1.0 : std::min(a, b) / hi;
  }
  return out;
}

// ---- gradient-based methods ----

inline Matrix saliency(const nn::MlpModel& model, const Matrix& x) {
  return nn::input_gradient(model, x, nn::BackwardRule::Vanilla);
}

inline Matrix guided_backprop(const nn::MlpModel& model, const Matrix& x) {
  return nn::input_gradient(model, x, nn::BackwardRule::Guided);
}

inline Matrix deconvolution(const nn::MlpModel& model, const Matrix& x) {
  return nn::input_gradient(model, x, nn::BackwardRule::Deconv);
}

inline Matrix input_x_gradient(const nn::MlpModel& model, const Matrix& x) {
  Matrix g = saliency(model, x);
  for (std::size_t k = 0; k < g.values().size(); ++k) g.values()[k] *= x.values()[k];
  return g;
}

// Path integral from the zero baseline, trapezoid rule on `steps` evenly spaced
// points of [0,1] (midpoint rule when steps == 1).
inline Matrix integrated_gradients(const nn::MlpModel& model, const Matrix& x, std::size_t steps = 50) {
  if (steps == 0) throw std::invalid_argument("integrated_gradients: steps must be positive");
  Matrix acc(x.rows(), x.cols());
  Matrix scaled(x.rows(), x.cols());
  for (std::size_t k = 0; k < steps; ++k) {
    double alpha = 0.5, weight = 1.0;
    if (steps > 1) {
      const double h = 1.0 / static_cast<double>(steps - 1);
      alpha = static_cast<double>(k) * h;
      weight = (k == 0 || k + 1 == steps) ? 0.5 * h : h;
    }
    for (std::size_t i = 0; i < x.values().size(); ++i) scaled.values()[i] = alpha * x.values()[i];
    const Matrix g = saliency(model, scaled);
    for (std::size_t i = 0; i < acc.values().size(); ++i) acc.values()[i] += weight * g.values()[i];
  }
  for (std::size_t i = 0; i < acc.values().size(); ++i) acc.values()[i] *= x.values()[i];
  return acc;
}

// DeepLift Rescale rule against the zero baseline: each hidden unit passes
// back the secant slope between its input and baseline pre-activations.
inline Matrix deeplift(const nn::MlpModel& model, const Matrix& x) {
  const nn::ForwardTape tape = nn::forward(model, x);
  const nn::ForwardTape base = nn::forward(model, Matrix(1, x.cols()));
  const double slope = model.negative_slope();
  auto rescale = [&](std::size_t layer, std::size_t, std::size_t unit, double z, double up) {
    const double z0 = base.pre[layer](0, unit);
    const double dz = z - z0;
    const double mult = std::abs(dz) > 1e-10
                            ? (nn::leaky_relu(z, slope) - nn::leaky_relu(z0, slope)) / dz
                            : (z > 0.0 ? 1.0 : slope);
    return mult * up;
  };
  const std::vector<double> ones(x.rows(), 1.0);
  Matrix m = nn::backpropagate(model, tape, ones, rescale);
  for (std::size_t i = 0; i < m.values().size(); ++i) m.values()[i] *= x.values()[i];
  return m;
}

// Mean saliency over Gaussian-perturbed copies of each input.
inline Matrix smoothgrad(const nn::MlpModel& model, const Matrix& x, double noise_std = 0.1,
                         std::size_t n_samples = 50, std::uint64_t seed = 0) {
  if (n_samples == 0) throw std::invalid_argument("smoothgrad: n_samples must be positive");
  CounterRng rng(derive_seed(seed, "smoothgrad"));
  Matrix acc(x.rows(), x.cols());
  Matrix noisy(x.rows(), x.cols());
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t i = 0; i < x.values().size(); ++i) noisy.values()[i] = x.values()[i] + rng.normal(0.0, noise_std);
    const Matrix g = saliency(model, noisy);
    for (std::size_t i = 0; i < acc.values().size(); ++i) acc.values()[i] += g.values()[i];
  }
  for (double& v : acc.values()) v /= static_cast<double>(n_samples);
  return acc;
}

// ---- perturbation-based methods ----
//
// These change one input at a time, so the first-layer pre-activation is
// updated by a rank-1 step and only the remaining small layers are re-run.

namespace detail {

class TailEvaluator {
 public:
  explicit TailEvaluator(const nn::MlpModel& model) : model_(model) {
    const std::size_t widest = *std::max_element(model.layer_dims().begin(), model.layer_dims().end());
    a_.resize(widest);
    b_.resize(widest);
  }

  // Logit given the first layer's pre-activation.
  double operator()(std::span<const double> pre0) {
    const std::size_t L = model_.layer_count();
    if (L == 1) return pre0[0];
    const auto& dims = model_.layer_dims();
    const double slope = model_.negative_slope();
    for (std::size_t i = 0; i < dims[1]; ++i) a_[i] = nn::leaky_relu(pre0[i], slope);
    for (std::size_t l = 1; l < L; ++l) {
      const std::size_t in = dims[l], out = dims[l + 1];
      const auto w = model_.weights(l);
      const auto bias = model_.biases(l);
      for (std::size_t o = 0; o < out; ++o) {
        double acc = bias[o];
        const double* wo = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wo[i] * a_[i];
        b_[o] = l + 1 < L ? nn::leaky_relu(acc, slope) : acc;
      }
      std::swap(a_, b_);
    }
    return a_[0];
  }

 private:
  const nn::MlpModel& model_;
  std::vector<double> a_, b_;
};

// First-layer weights transposed to (in x out) so column j is contiguous.
inline std::vector<double> first_layer_columns(const nn::MlpModel& model) {
  const std::size_t in = model.layer_dims()[0], out = model.layer_dims()[1];
  const auto w = model.weights(0);
  std::vector<double> t(in * out);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) t[i * out + o] = w[o * in + i];
  return t;
}

inline void check_single_output(const nn::MlpModel& model, const Matrix& x) {
  nn::check_input_width(model, x);
  if (model.output_dim() != 1) throw std::invalid_argument("attribution: model must have a single logit output");
}

}  // namespace detail

// logit(x) - logit(x with x_j set to 0).
inline Matrix feature_ablation(const nn::MlpModel& model, const Matrix& x) {
  detail::check_single_output(model, x);
  const std::size_t h = model.layer_dims()[1], m = x.cols();
  const auto wt = detail::first_layer_columns(model);
  const Matrix pre0 = nn::forward(model, x).pre[0];
  detail::TailEvaluator tail(model);
  Matrix out(x.rows(), m);
  std::vector<double> work(h);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = pre0.row(r);
    const double base = tail(p);
    for (std::size_t j = 0; j < m; ++j) {
      const double xj = x(r, j);
      if (xj == 0.0) continue;
      const double* col = wt.data() + j * h;
      for (std::size_t o = 0; o < h; ++o) work[o] = p[o] - col[o] * xj;
      out(r, j) = base - tail(work);
    }
  }
  return out;
}

// |logit(x) - logit(x with x_j taken from another row)|, one seeded shuffle
// of the evaluation rows per feature.
inline Matrix feature_permutation(const nn::MlpModel& model, const Matrix& x, std::uint64_t seed = 0) {
  detail::check_single_output(model, x);
  const std::size_t h = model.layer_dims()[1], m = x.cols(), n = x.rows();
  const auto wt = detail::first_layer_columns(model);
  const Matrix pre0 = nn::forward(model, x).pre[0];
  detail::TailEvaluator tail(model);
  std::vector<double> base(n);
  for (std::size_t r = 0; r < n; ++r) base[r] = tail(pre0.row(r));
  Matrix out(n, m);
  std::vector<std::size_t> perm(n);
  std::vector<double> work(h);
  for (std::size_t j = 0; j < m; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(derive_seed(seed, "permutation", j));
    shuffle(perm.begin(), perm.end(), rng);
    const double* col = wt.data() + j * h;
    for (std::size_t r = 0; r < n; ++r) {
      const double delta = x(perm[r], j) - x(r, j);
      if (delta == 0.0) continue;
      const auto p = pre0.row(r);
      for (std::size_t o = 0; o < h; ++o) work[o] = p[o] + col[o] * delta;
      out(r, j) = std::abs(tail(work) - base[r]);
    }
  }
  return out;
}

// Castro-style Shapley estimate from explicit feature orderings: features are
// switched from the baseline to their input value in order and credited with
// the logit change.
inline Matrix shapley_from_permutations(const nn::MlpModel& model, const Matrix& x,
                                        const std::vector<std::vector<std::size_t>>& permutations) {
  detail::check_single_output(model, x);
  if (permutations.empty()) throw std::invalid_argument("shapley: need at least one permutation");
  const std::size_t h = model.layer_dims()[1], m = x.cols();
  for (const auto& p : permutations)
    if (p.size() != m) throw std::invalid_argument("shapley: permutation length must equal feature count");
  const auto wt = detail::first_layer_columns(model);
  const auto bias0 = model.biases(0);
  detail::TailEvaluator tail(model);
  Matrix out(x.rows(), m);
  std::vector<double> work(h);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = out.row(r);
    for (const auto& perm : permutations) {
      std::copy(bias0.begin(), bias0.end(), work.begin());
      double prev = tail(work);
      for (std::size_t j : perm) {
        const double xj = x(r, j);
        if (xj == 0.0) continue;
        const double* col = wt.data() + j * h;
        for (std::size_t o = 0; o < h; ++o) work[o] += col[o] * xj;
        const double cur = tail(work);
        dst[j] += cur - prev;
        prev = cur;
      }
    }
    for (double& v : dst) v /= static_cast<double>(permutations.size());
  }
  return out;
}

// Orderings shared by all rows, drawn from a seeded stream.
inline Matrix shapley_value_sampling(const nn::MlpModel& model, const Matrix& x, std::size_t n_permutations = 25,
                                     std::uint64_t seed = 0) {
  if (n_permutations == 0) throw std::invalid_argument("shapley: n_permutations must be positive");
  CounterRng rng(derive_seed(seed, "shapley"));
  std::vector<std::vector<std::size_t>> perms(n_permutations, std::vector<std::size_t>(x.cols()));
  for (auto& p : perms) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p.begin(), p.end(), rng);
  }
  return shapley_from_permutations(model, x, perms);
}

inline Matrix instance_scores(const nn::MlpModel& model, const Matrix& x, Method method,
                              const AttributionConfig& cfg = {}) {
  switch (method) {
    case Method::Saliency: return saliency(model, x);
    case Method::InputXGradient: return input_x_gradient(model, x);
    case Method::IntegratedGradients: return integrated_gradients(model, x, cfg.ig_steps);
    case Method::DeepLift: return deeplift(model, x);
    case Method::SmoothGrad: return smoothgrad(model, x, cfg.smoothgrad_std, cfg.smoothgrad_samples, cfg.seed);
    case Method::GuidedBackprop: return guided_backprop(model, x);
    case Method::Deconvolution: return deconvolution(model, x);
    case Method::FeatureAblation: return feature_ablation(model, x);
    case Method::FeaturePermutation: return feature_permutation(model, x, cfg.seed);
    case Method::ShapleySampling: return shapley_value_sampling(model, x, cfg.shapley_permutations, cfg.seed);
  }
  throw std::invalid_argument("instance_scores: unknown method");
}

// `x` must already be on the model's input scale.
inline AttributionResult attribute(const nn::MlpModel& model, const Matrix& x, Method method,
                                   const AttributionConfig& cfg = {}) {
  AttributionResult out;
  out.method = method;
  out.config = cfg;
  out.instance_scores = instance_scores(model, x, method, cfg);
  out.global_importance = aggregate_global(out.instance_scores, cfg.seed);
  return out;
}

// ---- retraining protocols ----

enum class BootstrapMode : std::uint8_t {
  Heldout,    // one model, scored on the evaluation rows
  Bootstrap,  // n_runs models on resampled training rows, scores averaged
  Trainset,   // one model, scored on its own training rows
};

struct BootstrapConfig {
  BootstrapMode mode = BootstrapMode::Bootstrap;
  std::size_t n_runs = 10;
  double sample_frac = 0.8;
  bool with_replacement = true;
};

// Raw [0,1] features in, global importance out. Run 0 of BOOTSTRAP uses the
// same training seed as HELDOUT, so one full-size sample without replacement
// reproduces it.
inline ImportanceVector bootstrap_attribution(Method method, const Matrix& x_train, std::span<const int> y_train,
                                              const Matrix& x_eval, const nn::TrainConfig& train_cfg,
                                              const AttributionConfig& attr_cfg, const BootstrapConfig& boot) {
  if (boot.n_runs < 1) throw std::invalid_argument("bootstrap_attribution: n_runs must be at least 1");
  if (!(boot.sample_frac > 0.0 && boot.sample_frac <= 1.0))
    throw std::invalid_argument("bootstrap_attribution: sample_frac must lie in (0,1]");
  if (boot.mode != BootstrapMode::Bootstrap) {
    const auto trained = nn::train_mlp(x_train, y_train, train_cfg);
    const Matrix& rows = boot.mode == BootstrapMode::Heldout ? x_eval : x_train;
    return attribute(trained.model, nn::prepare_inputs(trained.model, rows), method, attr_cfg).global_importance;
  }
  const std::size_t n = x_train.rows();
  const auto k = static_cast<std::size_t>(std::llround(boot.sample_frac * static_cast<double>(n)));
  ImportanceVector acc{std::vector<double>(x_train.cols(), 0.0), attr_cfg.seed};
  for (std::size_t run = 0; run < boot.n_runs; ++run) {
    CounterRng rng(derive_seed(train_cfg.seed, "bootstrap", run));
    std::vector<std::size_t> idx;
    if (boot.with_replacement) {
      idx.resize(k);
      for (auto& i : idx) i = rng.below(n);
    } else {
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      shuffle(idx.begin(), idx.end(), rng);
      idx.resize(k);
    }
    std::sort(idx.begin(), idx.end());
    nn::TrainConfig cfg = train_cfg;
    if (run > 0) cfg.seed = derive_seed(train_cfg.seed, "bootstrap_train", run);
    const Matrix xs = select_rows(x_train, idx);
    const Labels ys = gather(y_train, std::span<const std::size_t>(idx));
    const auto trained = nn::train_mlp(xs, ys, cfg);
    const auto g =
        attribute(trained.model, nn::prepare_inputs(trained.model, x_eval), method, attr_cfg).global_importance;
    for (std::size_t j = 0; j < acc.size(); ++j) acc.scores[j] += g.scores[j];
  }
  for (double& s : acc.scores) s /= static_cast<double>(boot.n_runs);
  return acc;
}

}  // namespace fsbench::attribution
