#pragma once

// Feature selection learned during training: CancelOut gates in front of the
// MLP, and DeepPINK's pairwise feature/knockoff filter layer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "fsbench/importance.hpp"
#include "fsbench/knockoffs.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/nn.hpp"

namespace fsbench::embedded {

enum class CancelOutVariant { Sigmoid, Softmax };

inline std::string_view to_string(CancelOutVariant v) { return v == CancelOutVariant::Sigmoid ? "sigmoid" : "softmax"; }

struct CancelOutConfig {
  CancelOutVariant variant = CancelOutVariant::Sigmoid;
  double lambda1 = 0.2;  // weight on the gate variance (rewarded)
  double lambda2 = 0.1;  // weight on the gate sum (penalized)
  double init_beta = 1.0;
  std::size_t epochs = 300;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("CancelOutConfig: epochs must be >= 1");
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(init_beta))
      throw std::invalid_argument("CancelOutConfig: coefficients must be finite");
  }
};

// Gate activations g(w).
inline std::vector<double> gate_values(std::span<const double> w, CancelOutVariant variant) {
  std::vector<double> g(w.size());
  if (variant == CancelOutVariant::Sigmoid) {
    for (std::size_t j = 0; j < w.size(); ++j) g[j] = nn::sigmoid(w[j]);
    return g;
  }
  const double top = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) total += g[j] = std::exp(w[j] - top);
  for (double& v : g) v /= total;
  return g;
}

// lambda2 * sum(g) - lambda1 * Var(g), sample variance. Adds d/dg into `dg`.
inline double sigmoid_gate_penalty(std::span<const double> g, double lambda1, double lambda2, std::span<double> dg = {}) {
  const std::size_t m = g.size();
  double sum = 0.0;
  for (double v : g) sum += v;
  double var = 0.0;
  const double mean = sum / static_cast<double>(m);
  if (m > 1) {
    for (double v : g) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m - 1);
  }
  if (!dg.empty())
    for (std::size_t j = 0; j < m; ++j)
      dg[j] += lambda2 - (m > 1 ? lambda1 * 2.0 * (g[j] - mean) / static_cast<double>(m - 1) : 0.0);
  return lambda2 * sum - lambda1 * var;
}

struct CancelOutModel {
  std::vector<double> gate_weights;
  CancelOutVariant variant = CancelOutVariant::Sigmoid;
  nn::MlpModel mlp;

  std::vector<double> gates() const { return gate_values(gate_weights, variant); }
};

// Network inputs (already on the model's scale) scaled by the gates.
inline Matrix gated_inputs(const CancelOutModel& model, const Matrix& x) {
  const auto g = model.gates();
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= g[c];
  }
  return out;
}

inline std::vector<double> predict_logit(const CancelOutModel& model, const Matrix& x_raw) {
  return nn::forward(model.mlp, gated_inputs(model, nn::prepare_inputs(model.mlp, x_raw))).logits();
}

// Parameter layout: gate weights, then the MLP's flat parameters.
struct CancelOutTrainable {
  CancelOutModel& model;
  double l2;
  CancelOutConfig co;

  std::vector<std::span<double>> parameter_blocks() {
    return {std::span<double>(model.gate_weights), model.mlp.parameters()};
  }

  nn::LossTerms objective(const Matrix& x, std::span<const int> y, std::span<double> grad) const {
    const std::size_t m = x.cols();
    const auto g = model.gates();
    const nn::ForwardTape tape = nn::forward(model.mlp, gated_inputs(model, x));
    const auto logits = tape.logits();
    const bool want = !grad.empty();
    std::vector<double> dlogit(want ? logits.size() : 0);
    std::span<double> mlp_grad = want ? grad.subspan(m) : std::span<double>{};
    nn::LossTerms out;
    out.data = nn::bce_mean(logits, y, dlogit);
    out.penalty = nn::l2_penalty(model.mlp, l2, mlp_grad);
    std::vector<double> dg(want ? m : 0, 0.0);
    if (co.variant == CancelOutVariant::Sigmoid) out.penalty += sigmoid_gate_penalty(g, co.lambda1, co.lambda2, dg);
    if (!want) return out;

    const Matrix dx = nn::backpropagate(model.mlp, tape, dlogit, nn::VanillaGate{model.mlp.negative_slope()}, mlp_grad);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto xr = x.row(r);
      const auto dr = dx.row(r);
      for (std::size_t c = 0; c < m; ++c) dg[c] += dr[c] * xr[c];
    }
    if (co.variant == CancelOutVariant::Sigmoid) {
      for (std::size_t j = 0; j < m; ++j) grad[j] += dg[j] * g[j] * (1.0 - g[j]);
    } else {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g[j] * dg[j];
      for (std::size_t j = 0; j < m; ++j) grad[j] += g[j] * (dg[j] - dot);
    }
    return out;
  }
};

struct CancelOutResult {
  CancelOutModel model;
  ImportanceVector importance;  // g(w) after training
  nn::TrainHistory history;
};

inline CancelOutModel init_cancelout(std::size_t m, const nn::TrainConfig& cfg, const CancelOutConfig& co) {
  CancelOutModel model{std::vector<double>(m, co.init_beta), co.variant,
                       nn::MlpModel(nn::mlp_dims(m, cfg), cfg.negative_slope)};
  model.mlp.init_uniform_fan_in(derive_seed(cfg.seed, "init"));
  model.mlp.set_centered_inputs(cfg.center_inputs);
  return model;
}

// Trains for exactly co.epochs epochs; early stopping is always off.
inline CancelOutResult train_cancelout(const Matrix& x, std::span<const int> y, const nn::TrainConfig& cfg,
                                       const CancelOutConfig& co) {
  co.validate();
  nn::TrainConfig run = cfg;
  run.max_epochs = co.epochs;
  run.early_stop.enabled = false;
  CancelOutResult out{init_cancelout(x.cols(), run, co), {}, {}};
  CancelOutTrainable net{out.model, run.l2_lambda, co};
  out.history = nn::train_network(net, nn::prepare_inputs(out.model.mlp, x), y, run);
  out.importance = ImportanceVector{out.model.gates(), cfg.seed};
  return out;
}

struct DeepPinkModel {
  std::vector<double> z;        // original-feature filter weights
  std::vector<double> z_tilde;  // knockoff filter weights
  nn::MlpModel mlp;
};

// Filter layer u_j = z_j * x_j + z~_j * x~_j on a [x | x~] input block.
inline Matrix pairwise_filter(const DeepPinkModel& model, const Matrix& paired) {
  const std::size_t m = model.z.size();
  if (paired.cols() != 2 * m) throw std::invalid_argument("deeppink: expected [x | x~] with 2m columns");
  Matrix u(paired.rows(), m);
  for (std::size_t r = 0; r < paired.rows(); ++r) {
    const auto p = paired.row(r);
    auto ur = u.row(r);
    for (std::size_t j = 0; j < m; ++j) ur[j] = model.z[j] * p[j] + model.z_tilde[j] * p[m + j];
  }
  return u;
}

// Knockoff statistic W_j = z_j^2 - z~_j^2.
inline std::vector<double> knockoff_statistic(const DeepPinkModel& model) {
  std::vector<double> w(model.z.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = model.z[j] * model.z[j] - model.z_tilde[j] * model.z_tilde[j];
  return w;
}

inline Matrix paired_inputs(const DeepPinkModel& model, const Matrix& x_raw, const Matrix& x_tilde_raw) {
  if (x_raw.rows() != x_tilde_raw.rows() || x_raw.cols() != x_tilde_raw.cols())
    throw std::invalid_argument("deeppink: knockoff shape does not match the features");
  return hstack(nn::prepare_inputs(model.mlp, x_raw), nn::prepare_inputs(model.mlp, x_tilde_raw));
}

inline std::vector<double> predict_logit(const DeepPinkModel& model, const Matrix& x_raw, const Matrix& x_tilde_raw) {
  return nn::forward(model.mlp, pairwise_filter(model, paired_inputs(model, x_raw, x_tilde_raw))).logits();
}

// Parameter layout: z, z~, then the MLP's flat parameters.
struct DeepPinkTrainable {
  DeepPinkModel& model;
  double l2;

  std::vector<std::span<double>> parameter_blocks() {
    return {std::span<double>(model.z), std::span<double>(model.z_tilde), model.mlp.parameters()};
  }

  nn::LossTerms objective(const Matrix& paired, std::span<const int> y, std::span<double> grad) const {
    const std::size_t m = model.z.size();
    const nn::ForwardTape tape = nn::forward(model.mlp, pairwise_filter(model, paired));
    const auto logits = tape.logits();
    const bool want = !grad.empty();
    std::vector<double> dlogit(want ? logits.size() : 0);
    std::span<double> mlp_grad = want ? grad.subspan(2 * m) : std::span<double>{};
    nn::LossTerms out;
    out.data = nn::bce_mean(logits, y, dlogit);
    out.penalty = nn::l2_penalty(model.mlp, l2, mlp_grad);
    if (!want) return out;
    const Matrix du = nn::backpropagate(model.mlp, tape, dlogit, nn::VanillaGate{model.mlp.negative_slope()}, mlp_grad);
    for (std::size_t r = 0; r < paired.rows(); ++r) {
      const auto p = paired.row(r);
      const auto d = du.row(r);
      for (std::size_t j = 0; j < m; ++j) {
        grad[j] += d[j] * p[j];
        grad[m + j] += d[j] * p[m + j];
      }
    }
    return out;
  }
};

struct DeepPinkResult {
  DeepPinkModel model;
  ImportanceVector importance;  // W, signed
  nn::TrainHistory history;
};

inline DeepPinkModel init_deeppink(std::size_t m, const nn::TrainConfig& cfg) {
  DeepPinkModel model{std::vector<double>(m, 1.0), std::vector<double>(m, 1.0),
                      nn::MlpModel(nn::mlp_dims(m, cfg), cfg.negative_slope)};
  model.mlp.init_uniform_fan_in(derive_seed(cfg.seed, "init"));
  model.mlp.set_centered_inputs(cfg.center_inputs);
  return model;
}

inline DeepPinkResult train_deeppink(const Matrix& x, const knockoffs::KnockoffMatrix& knock, std::span<const int> y,
                                     const nn::TrainConfig& cfg) {
  DeepPinkResult out{init_deeppink(x.cols(), cfg), {}, {}};
  const Matrix paired = paired_inputs(out.model, x, knock.x_tilde);
  DeepPinkTrainable net{out.model, cfg.l2_lambda};
  out.history = nn::train_network(net, paired, y, cfg);
  out.importance = ImportanceVector{knockoff_statistic(out.model), cfg.seed};
  return out;
}

}  // namespace fsbench::embedded
