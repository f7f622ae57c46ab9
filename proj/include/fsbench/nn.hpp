#pragma once

// Small fully-connected network with LeakyReLU hidden layers and a single
// logit output, trained with Adam on binary cross-entropy.
//
// Gradients are hand-written over a forward tape. The hidden-unit backward
// step is a pluggable "gate" so attribution rules (guided backprop,
// deconvolution, DeepLift multipliers) reuse the same traversal.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsbench/errors.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/random.hpp"

namespace fsbench::nn {

enum class BackwardRule : std::uint8_t { Vanilla, Guided, Deconv };

class MlpModel {
 public:
  MlpModel() = default;

  explicit MlpModel(std::vector<std::size_t> layer_dims, double negative_slope = 0.2)
      : dims_(std::move(layer_dims)), slope_(negative_slope) {
    if (dims_.size() < 2) throw std::invalid_argument("MlpModel: need at least input and output dims");
    if (std::find(dims_.begin(), dims_.end(), std::size_t{0}) != dims_.end())
      throw std::invalid_argument("MlpModel: zero-width layer");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      w_off_.push_back(offset);
      offset += dims_[l] * dims_[l + 1];
      b_off_.push_back(offset);
      offset += dims_[l + 1];
    }
    params_.assign(offset, 0.0);
  }

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t output_dim() const noexcept { return dims_.back(); }
  std::size_t layer_count() const noexcept { return dims_.size() - 1; }
  double negative_slope() const noexcept { return slope_; }

  // Whether the model expects inputs mapped from [0,1] to [-1,1].
  bool centered_inputs() const noexcept { return centered_; }
  void set_centered_inputs(bool v) noexcept { centered_ = v; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::size_t weight_offset(std::size_t layer) const noexcept { return w_off_[layer]; }
  std::size_t bias_offset(std::size_t layer) const noexcept { return b_off_[layer]; }

  // Layer weights, row-major (out x in).
  std::span<double> weights(std::size_t layer) noexcept {
    return {params_.data() + w_off_[layer], dims_[layer] * dims_[layer + 1]};
  }
  std::span<const double> weights(std::size_t layer) const noexcept {
    return {params_.data() + w_off_[layer], dims_[layer] * dims_[layer + 1]};
  }
  std::span<double> biases(std::size_t layer) noexcept { return {params_.data() + b_off_[layer], dims_[layer + 1]}; }
  std::span<const double> biases(std::size_t layer) const noexcept {
    return {params_.data() + b_off_[layer], dims_[layer + 1]};
  }

  double& weight(std::size_t layer, std::size_t out, std::size_t in) noexcept {
    return params_[w_off_[layer] + out * dims_[layer] + in];
  }
  double weight(std::size_t layer, std::size_t out, std::size_t in) const noexcept {
    return params_[w_off_[layer] + out * dims_[layer] + in];
  }

  // PyTorch-style init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform_fan_in(std::uint64_t seed) {
    CounterRng rng(seed);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
      for (double& w : weights(l)) w = rng.uniform(-bound, bound);
      for (double& b : biases(l)) b = rng.uniform(-bound, bound);
    }
  }

  bool all_finite() const noexcept {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> w_off_;
  std::vector<std::size_t> b_off_;
  std::vector<double> params_;
  double slope_ = 0.2;
  bool centered_ = false;
};

inline double leaky_relu(double z, double slope) noexcept { return z > 0.0 ? z : slope * z; }
inline double sigmoid(double z) noexcept {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Inputs and pre-activations of every layer for one batch.
struct ForwardTape {
  std::vector<Matrix> inputs;  // inputs[l]: rows x dims[l]
  std::vector<Matrix> pre;     // pre[l]:    rows x dims[l+1]

  std::size_t rows() const noexcept { return inputs.empty() ? 0 : inputs.front().rows(); }
  std::vector<double> logits() const { return pre.back().column(0); }
};

inline void check_input_width(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim())
    throw std::invalid_argument("model expects " + std::to_string(model.input_dim()) + " input columns, got " +
                                std::to_string(x.cols()));
}

inline ForwardTape forward(const MlpModel& model, const Matrix& x) {
  check_input_width(model, x);
  const auto& dims = model.layer_dims();
  const std::size_t rows = x.rows();
  ForwardTape tape;
  tape.inputs.reserve(model.layer_count());
  tape.pre.reserve(model.layer_count());
  tape.inputs.push_back(x);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const auto w = model.weights(l);
    const auto b = model.biases(l);
    const Matrix& a = tape.inputs[l];
    Matrix z(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto ar = a.row(r);
      auto zr = z.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w.data() + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += wo[i] * ar[i];
        zr[o] = acc;
      }
    }
    if (l + 1 < model.layer_count()) {
      Matrix act(rows, out);
      for (std::size_t k = 0; k < z.values().size(); ++k)
        act.values()[k] = leaky_relu(z.values()[k], model.negative_slope());
      tape.pre.push_back(std::move(z));
      tape.inputs.push_back(std::move(act));
    } else {
      tape.pre.push_back(std::move(z));
    }
  }
  return tape;
}

inline std::vector<double> predict_logit(const MlpModel& model, const Matrix& x) {
  if (model.output_dim() != 1) throw std::invalid_argument("predict_logit: model has more than one output");
  return forward(model, x).logits();
}

inline std::vector<double> predict_proba(const MlpModel& model, const Matrix& x) {
  auto z = predict_logit(model, x);
  for (double& v : z) v = sigmoid(v);
  return z;
}

// Hidden-unit backward gates. Each maps (layer, row, unit, pre-activation,
// upstream gradient) to the gradient at the pre-activation.
struct VanillaGate {
  double slope;
  double operator()(std::size_t, std::size_t, std::size_t, double z, double up) const noexcept {
    return z > 0.0 ? up : slope * up;
  }
};

// Guided backprop treats LeakyReLU as its ReLU gate: pass only where both the
// forward unit is active and the backward signal is positive.
struct GuidedGate {
  double operator()(std::size_t, std::size_t, std::size_t, double z, double up) const noexcept {
    return (z > 0.0 && up > 0.0) ? up : 0.0;
  }
};

// Deconvolution gates on the backward signal only.
struct DeconvGate {
  double operator()(std::size_t, std::size_t, std::size_t, double, double up) const noexcept {
    return up > 0.0 ? up : 0.0;
  }
};

// Propagates `seed` (gradient w.r.t. each output, rows x output_dim flattened)
// back to the inputs. When `param_grad` is non-empty it receives the
// accumulated parameter gradients in `MlpModel::parameters()` layout.
template <class Gate>
Matrix backpropagate(const MlpModel& model, const ForwardTape& tape, std::span<const double> seed, Gate&& gate,
                     std::span<double> param_grad = {}) {
  const auto& dims = model.layer_dims();
  const std::size_t rows = tape.rows();
  const std::size_t L = model.layer_count();
  if (seed.size() != rows * dims[L]) throw std::invalid_argument("backpropagate: seed size mismatch");
  Matrix delta(rows, dims[L]);
  std::copy(seed.begin(), seed.end(), delta.values().begin());
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const auto w = model.weights(l);
    const Matrix& a = tape.inputs[l];
    if (!param_grad.empty()) {
      double* gw = param_grad.data() + model.weight_offset(l);
      double* gb = param_grad.data() + model.bias_offset(l);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto ar = a.row(r);
        for (std::size_t o = 0; o < out; ++o) {
          const double d = delta(r, o);
          if (d == 0.0) continue;
          gb[o] += d;
          double* gwo = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) gwo[i] += d * ar[i];
        }
      }
    }
    Matrix up(rows, in);
    for (std::size_t r = 0; r < rows; ++r) {
      auto ur = up.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        const double* wo = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) ur[i] += d * wo[i];
      }
    }
    if (l == 0) return up;
    const Matrix& z = tape.pre[l - 1];
    Matrix next(rows, in);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < in; ++i) next(r, i) = gate(l - 1, r, i, z(r, i), up(r, i));
    delta = std::move(next);
  }
  return delta;  // unreachable: layer_count() >= 1
}

// Gradient of the logit with respect to the inputs under the chosen rule.
inline Matrix input_gradient(const MlpModel& model, const Matrix& x, BackwardRule rule) {
  const ForwardTape tape = forward(model, x);
  const std::vector<double> ones(x.rows() * model.output_dim(), 1.0);
  switch (rule) {
    case BackwardRule::Vanilla: return backpropagate(model, tape, ones, VanillaGate{model.negative_slope()});
    case BackwardRule::Guided: return backpropagate(model, tape, ones, GuidedGate{});
    case BackwardRule::Deconv: return backpropagate(model, tape, ones, DeconvGate{});
  }
  throw std::invalid_argument("input_gradient: unknown backward rule");
}

// Numerically stable binary cross-entropy on a logit.
inline double bce_with_logits(double z, int y) noexcept {
  return std::max(z, 0.0) - z * static_cast<double>(y) + std::log1p(std::exp(-std::abs(z)));
}

struct LossTerms {
  double data = 0.0;     // mean binary cross-entropy
  double penalty = 0.0;  // regularizers
  double total() const noexcept { return data + penalty; }
};

// Mean BCE over rows given logits; adds d(loss)/d(logit) into `dlogit` when
// it is non-empty.
inline double bce_mean(std::span<const double> logits, std::span<const int> y, std::span<double> dlogit) {
  const double inv = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    loss += bce_with_logits(logits[r], y[r]);
    if (!dlogit.empty()) dlogit[r] = (sigmoid(logits[r]) - static_cast<double>(y[r])) * inv;
  }
  return loss * inv;
}

// lambda * sum of squared weights (biases excluded).
inline double l2_penalty(const MlpModel& model, double lambda, std::span<double> param_grad) {
  if (lambda == 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto w = model.weights(l);
    const std::size_t off = model.weight_offset(l);
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += w[k] * w[k];
      if (!param_grad.empty()) param_grad[off + k] += 2.0 * lambda * w[k];
    }
  }
  return lambda * acc;
}

// BCE + L2 objective of a plain MLP. `param_grad` may be empty (loss only).
inline LossTerms mlp_objective(const MlpModel& model, const Matrix& x, std::span<const int> y, double l2,
                               std::span<double> param_grad) {
  const ForwardTape tape = forward(model, x);
  const auto logits = tape.logits();
  std::vector<double> dlogit(param_grad.empty() ? 0 : logits.size());
  LossTerms out;
  out.data = bce_mean(logits, y, dlogit);
  if (!param_grad.empty()) backpropagate(model, tape, dlogit, VanillaGate{model.negative_slope()}, param_grad);
  out.penalty = l2_penalty(model, l2, param_grad);
  return out;
}

class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // `blocks` are the parameter spans in the same order as the flat `grad`.
  void step(const std::vector<std::span<double>>& blocks, std::span<const double> grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t k = 0;
    for (auto block : blocks) {
      for (double& p : block) {
        const double g = grad[k];
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g * g;
        p -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
        ++k;
      }
    }
  }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct SchedulerConfig {
  double factor = 0.9;
  std::size_t patience = 10;
  std::size_t cooldown = 5;
  double threshold = 1e-4;  // relative improvement that counts as progress
};

// Reduce-on-plateau: multiply the LR by `factor` once the monitored loss has
// not improved for more than `patience` epochs, then hold for `cooldown`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, SchedulerConfig cfg) : lr_(lr), cfg_(cfg) {}

  double lr() const noexcept { return lr_; }

  void step(double loss) {
    if (loss < best_ * (1.0 - cfg_.threshold)) {
      best_ = loss;
      bad_ = 0;
    } else {
      ++bad_;
    }
    if (cooldown_left_ > 0) {
      --cooldown_left_;
      bad_ = 0;
    }
    if (bad_ > cfg_.patience) {
      lr_ *= cfg_.factor;
      cooldown_left_ = cfg_.cooldown;
      bad_ = 0;
    }
  }

 private:
  double lr_;
  SchedulerConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  std::size_t cooldown_left_ = 0;
};

struct EarlyStopConfig {
  bool enabled = true;
  double val_fraction = 0.2;
  std::size_t patience = 5;
};

struct TrainConfig {
  double lr = 0.005;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 1000;
  double l2_lambda = 1e-2;
  double input_noise_std = 0.05;
  SchedulerConfig scheduler;
  EarlyStopConfig early_stop;
  std::vector<std::size_t> hidden = {16, 16};
  double negative_slope = 0.2;
  bool center_inputs = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (max_epochs == 0) throw std::invalid_argument("TrainConfig: max_epochs must be positive");
    if (l2_lambda < 0.0 || input_noise_std < 0.0)
      throw std::invalid_argument("TrainConfig: l2_lambda and input_noise_std must be non-negative");
    if (early_stop.enabled && !(early_stop.val_fraction > 0.0 && early_stop.val_fraction < 1.0))
      throw std::invalid_argument("TrainConfig: val_fraction must lie in (0,1)");
    if (!(scheduler.factor > 0.0 && scheduler.factor <= 1.0))
      throw std::invalid_argument("TrainConfig: scheduler factor must lie in (0,1]");
  }
};

// Entry 0 describes the initial parameters; entry e > 0 the state after epoch e.
struct TrainHistory {
  std::vector<double> train_loss;  // full objective on the training split, no input noise
  std::vector<double> val_loss;    // BCE on the validation split (train objective when there is none)
  std::vector<double> lr;          // learning rate used during the epoch (entry 0: initial)
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::size_t epochs_run() const noexcept { return train_loss.empty() ? 0 : train_loss.size() - 1; }
};

// Anything the trainer can optimize: parameter spans plus an objective that
// fills a flat gradient laid out block after block.
template <class Net>
concept Trainable = requires(Net& net, const Net& cnet, const Matrix& x, std::span<const int> y,
                             std::span<double> grad) {
  { net.parameter_blocks() } -> std::same_as<std::vector<std::span<double>>>;
  { cnet.objective(x, y, grad) } -> std::same_as<LossTerms>;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Per-class shuffled holdout of round(fraction * class size) rows.
inline Split stratified_holdout(std::span<const int> y, double fraction, CounterRng rng) {
  Split out;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) members.push_back(i);
    shuffle(members.begin(), members.end(), rng);
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    out.holdout.insert(out.holdout.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  return out;
}

inline std::size_t count_class(std::span<const int> y, int cls) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), cls));
}

template <Trainable Net>
TrainHistory train_network(Net& net, const Matrix& x, std::span<const int> y, const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.size()) throw std::invalid_argument("train_network: row/label count mismatch");
  for (int v : y)
    if (v != 0 && v != 1) throw std::invalid_argument("train_network: labels must be 0/1");

  const CounterRng root(derive_seed(cfg.seed, "train"));
  Split split;
  if (cfg.early_stop.enabled) {
    split = stratified_holdout(y, cfg.early_stop.val_fraction, root.derive("split"));
  } else {
    split.train.resize(y.size());
    std::iota(split.train.begin(), split.train.end(), std::size_t{0});
  }
  const Labels yt = gather(y, std::span<const std::size_t>(split.train));
  const Labels yv = gather(y, std::span<const std::size_t>(split.holdout));
  auto too_small = [](const Labels& v) { return count_class(v, 0) < 2 || count_class(v, 1) < 2; };
  if (too_small(yt) || (cfg.early_stop.enabled && too_small(yv)))
    throw std::invalid_argument("train_network: each class needs at least 2 rows in the training and validation splits");
  const Matrix xt = select_rows(x, split.train);
  const Matrix xv = select_rows(x, split.holdout);
  const bool has_val = cfg.early_stop.enabled;

  const auto blocks = net.parameter_blocks();
  std::size_t total = 0;
  for (auto b : blocks) total += b.size();
  std::vector<double> grad(total), best(total);
  auto save = [&](std::vector<double>& dst) {
    std::size_t k = 0;
    for (auto b : blocks)
      for (double v : b) dst[k++] = v;
  };
  auto restore = [&](const std::vector<double>& src) {
    std::size_t k = 0;
    for (auto b : blocks)
      for (double& v : b) v = src[k++];
  };
  auto finite_params = [&] {
    for (auto b : blocks)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  };

  TrainHistory hist;
  PlateauScheduler sched(cfg.lr, cfg.scheduler);
  auto evaluate = [&](std::size_t epoch, double lr_used) {
    const LossTerms tr = net.objective(xt, yt, {});
    const double v = has_val ? net.objective(xv, yv, {}).data : tr.total();
    if (!std::isfinite(tr.total()) || !std::isfinite(v))
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    hist.train_loss.push_back(tr.total());
    hist.val_loss.push_back(v);
    hist.lr.push_back(lr_used);
    return std::pair{tr.total(), v};
  };

  double best_val = evaluate(0, cfg.lr).second;
  save(best);

  Adam adam(total);
  CounterRng order_rng = root.derive("order");
  CounterRng noise_rng = root.derive("noise");
  std::vector<std::size_t> order(xt.rows());
  const std::size_t cols = x.cols();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = sched.lr();
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Matrix xb(end - start, cols);
      Labels yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto src = xt.row(order[i]);
        auto dst = xb.row(i - start);
        for (std::size_t c = 0; c < cols; ++c)
          dst[c] = src[c] + (cfg.input_noise_std > 0.0 ? noise_rng.normal(0.0, cfg.input_noise_std) : 0.0);
        yb[i - start] = yt[order[i]];
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossTerms batch_loss = net.objective(xb, yb, grad);
      if (!std::isfinite(batch_loss.total()))
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": non-finite batch loss");
      adam.step(blocks, grad, lr);
    }
    if (!finite_params())
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": non-finite parameter");
    const auto [train_total, val] = evaluate(epoch, lr);
    sched.step(train_total);
    if (!has_val) {
      hist.best_epoch = epoch;
      continue;
    }
    if (val < best_val) {
      best_val = val;
      hist.best_epoch = epoch;
      save(best);
      since_best = 0;
    } else if (++since_best >= cfg.early_stop.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  if (has_val) restore(best);
  return hist;
}

// Adapts an MlpModel to the trainer.
struct MlpTrainable {
  MlpModel& model;
  double l2;

  std::vector<std::span<double>> parameter_blocks() { return {model.parameters()}; }
  LossTerms objective(const Matrix& x, std::span<const int> y, std::span<double> grad) const {
    return mlp_objective(model, x, y, l2, grad);
  }
};

inline std::vector<std::size_t> mlp_dims(std::size_t inputs, const TrainConfig& cfg) {
  std::vector<std::size_t> dims{inputs};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  return dims;
}

struct TrainedMlp {
  MlpModel model;
  TrainHistory history;
};

// Maps raw features onto the model's input scale.
inline Matrix prepare_inputs(const MlpModel& model, const Matrix& x_raw) {
  return model.centered_inputs() ? center_unit_interval(x_raw) : x_raw;
}

// Trains the default classifier on raw [0,1] features (centered to [-1,1]
// when cfg.center_inputs). Returns the snapshot with the lowest validation loss.
inline TrainedMlp train_mlp(const Matrix& x, std::span<const int> y, const TrainConfig& cfg) {
  TrainedMlp out{MlpModel(mlp_dims(x.cols(), cfg), cfg.negative_slope), {}};
  out.model.init_uniform_fan_in(derive_seed(cfg.seed, "init"));
  out.model.set_centered_inputs(cfg.center_inputs);
  const Matrix xin = prepare_inputs(out.model, x);
  MlpTrainable net{out.model, cfg.l2_lambda};
  out.history = train_network(net, xin, y, cfg);
  return out;
}

}  // namespace fsbench::nn
