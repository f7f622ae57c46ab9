#pragma once

// CART classification trees (Gini), a bagged random forest, mean-decrease-in-
// impurity importance, and path-dependent TreeSHAP.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fsbench/importance.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/parallel.hpp"
#include "fsbench/random.hpp"

namespace fsbench::forest {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  double cover = 0.0;                    // training draws reaching the node
  std::array<double, 2> class_counts{};  // negatives, positives
  double value = 0.0;                    // P(y = 1) among those draws

  bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
 public:
  std::vector<Node> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                       : nodes[i].right);
    return nodes[i].value;
  }

  // Number of edges on the longest root-to-leaf path.
  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
  }
};

struct ForestConfig {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;       // 0: floor(sqrt(m))
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0: all hardware threads
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ForestConfig config;
};

inline std::size_t default_mtry(std::size_t m) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m)))));
}

namespace detail {

inline double gini(double c0, double c1) {
  const double n = c0 + c1;
  return n > 0.0 ? 1.0 - (c0 * c0 + c1 * c1) / (n * n) : 0.0;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& columns, std::size_t n_rows, std::size_t n_features, std::span<const int> y,
              const ForestConfig& cfg, std::size_t mtry)
      : cols_(columns), n_(n_rows), m_(n_features), y_(y), cfg_(cfg), mtry_(mtry) {
    features_.resize(m_);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> samples, CounterRng& rng) {
    samples_ = std::move(samples);
    DecisionTree tree;
    struct Task {
      std::size_t node, begin, end, depth;
    };
    std::vector<Task> stack{{0, 0, samples_.size(), 0}};
    tree.nodes.emplace_back();
    while (!stack.empty()) {
      const Task t = stack.back();
      stack.pop_back();
      Node node;
      for (std::size_t i = t.begin; i < t.end; ++i) node.class_counts[static_cast<std::size_t>(y_[samples_[i]])] += 1.0;
      node.cover = static_cast<double>(t.end - t.begin);
      node.value = node.cover > 0.0 ? node.class_counts[1] / node.cover : 0.0;
      const bool pure = node.class_counts[0] == 0.0 || node.class_counts[1] == 0.0;
      const bool too_small = t.end - t.begin < cfg_.min_samples_split;
      const bool too_deep = cfg_.max_depth > 0 && t.depth >= cfg_.max_depth;
      if (!pure && !too_small && !too_deep) {
        const auto split = best_split(t.begin, t.end, rng);
        if (split.feature >= 0) {
          const double* col = cols_.data() + static_cast<std::size_t>(split.feature) * n_;
          const auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                          samples_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                          [&](std::size_t r) { return col[r] <= split.threshold; });
          const auto cut = static_cast<std::size_t>(mid - samples_.begin());
          node.feature = split.feature;
          node.threshold = split.threshold;
          node.left = static_cast<int>(tree.nodes.size());
          node.right = node.left + 1;
          tree.nodes.emplace_back();
          tree.nodes.emplace_back();
          stack.push_back({static_cast<std::size_t>(node.right), cut, t.end, t.depth + 1});
          stack.push_back({static_cast<std::size_t>(node.left), t.begin, cut, t.depth + 1});
        }
      }
      tree.nodes[t.node] = node;
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
  };

  // Visits features in random order until `mtry` non-constant ones have been
  // scanned (or all are exhausted). Zero-gain splits are accepted; equal
  // scores go to the lower feature index, then the lower threshold.
  Split best_split(std::size_t begin, std::size_t end, CounterRng& rng) {
    Split best;
    double best_score = -1.0;
    const std::size_t k = end - begin;
    std::size_t scanned = 0;
    for (std::size_t v = 0; v < m_ && scanned < mtry_; ++v) {
      const std::size_t pick = v + rng.below(m_ - v);
      std::swap(features_[v], features_[pick]);
      const std::size_t f = features_[v];
      const double* col = cols_.data() + f * n_;
      buf_.resize(k);
      double total1 = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t r = samples_[begin + i];
        buf_[i] = {col[r], y_[r]};
        total1 += y_[r];
      }
      std::sort(buf_.begin(), buf_.end());
      if (buf_.front().first == buf_.back().first) continue;
      ++scanned;
      const double total0 = static_cast<double>(k) - total1;
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < k; ++i) {
        (buf_[i].second ? l1 : l0) += 1.0;
        if (buf_[i].first == buf_[i + 1].first) continue;
        const double nl = l0 + l1, nr = static_cast<double>(k) - nl;
        const double r0 = total0 - l0, r1 = total1 - l1;
        const double score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
        const int fi = static_cast<int>(f);
        if (score > best_score || (score == best_score && fi < best.feature)) {
          best_score = score;
          best.feature = fi;
          const double lo = buf_[i].first, hi = buf_[i + 1].first;
          double thr = lo + (hi - lo) / 2.0;
          if (thr >= hi) thr = lo;
          best.threshold = thr;
        }
      }
    }
    return best;
  }

  const std::vector<double>& cols_;
  std::size_t n_, m_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, int>> buf_;
};

inline std::vector<double> column_major(const Matrix& x) {
  std::vector<double> out(x.rows() * x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c * x.rows() + r] = x(r, c);
  return out;
}

}  // namespace detail

inline RandomForest fit_forest(const Matrix& x, std::span<const int> y, const ForestConfig& cfg = {}) {
  if (x.rows() != y.size()) throw std::invalid_argument("fit_forest: row/label count mismatch");
  if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("fit_forest: empty data");
  if (cfg.n_trees == 0) throw std::invalid_argument("fit_forest: n_trees must be positive");
  if (cfg.min_samples_split < 2) throw std::invalid_argument("fit_forest: min_samples_split must be at least 2");
  for (int v : y)
    if (v != 0 && v != 1) throw std::invalid_argument("fit_forest: labels must be 0/1");
  const std::size_t n = x.rows(), m = x.cols();
  const std::size_t mtry = std::min(m, cfg.mtry == 0 ? default_mtry(m) : cfg.mtry);
  const auto cols = detail::column_major(x);

  RandomForest forest;
  forest.n_features = m;
  forest.config = cfg;
  forest.config.mtry = mtry;
  forest.trees.resize(cfg.n_trees);
  parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
    CounterRng rng(derive_seed(cfg.seed, "tree", t));
    std::vector<std::size_t> samples(n);
    if (cfg.bootstrap) {
      for (auto& s : samples) s = rng.below(n);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(cols, n, m, y, cfg, mtry);
    forest.trees[t] = builder.build(std::move(samples), rng);
  });
  return forest;
}

inline std::vector<double> predict_proba(const RandomForest& forest, const Matrix& x) {
  if (x.cols() != forest.n_features) throw std::invalid_argument("predict_proba: feature count mismatch");
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double acc = 0.0;
    for (const auto& tree : forest.trees) acc += tree.predict(row);
    out[r] = acc / static_cast<double>(forest.trees.size());
  }
  return out;
}

// Per-tree cover-weighted Gini decrease normalized to sum 1, averaged over
// trees that split at least once, renormalized. All zero when no tree splits.
inline ImportanceVector impurity_importance(const RandomForest& forest, std::uint64_t tie_break_seed = 0) {
  ImportanceVector out{std::vector<double>(forest.n_features, 0.0), tie_break_seed};
  std::vector<double> tree_imp(forest.n_features);
  std::size_t split_trees = 0;
  for (const auto& tree : forest.trees) {
    std::fill(tree_imp.begin(), tree_imp.end(), 0.0);
    double total = 0.0;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double dec = node.cover * detail::gini(node.class_counts[0], node.class_counts[1]) -
                         l.cover * detail::gini(l.class_counts[0], l.class_counts[1]) -
                         r.cover * detail::gini(r.class_counts[0], r.class_counts[1]);
      const double d = std::max(0.0, dec);
      tree_imp[static_cast<std::size_t>(node.feature)] += d;
      total += d;
    }
    if (tree.nodes.size() <= 1) continue;
    ++split_trees;
    if (total > 0.0)
      for (std::size_t j = 0; j < tree_imp.size(); ++j) out.scores[j] += tree_imp[j] / total;
  }
  if (split_trees == 0) return out;
  const double sum = std::accumulate(out.scores.begin(), out.scores.end(), 0.0);
  if (sum > 0.0)
    for (double& s : out.scores) s /= sum;
  return out;
}

// ---- TreeSHAP (path-dependent, polynomial time) ----

namespace detail {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

inline void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / d1;
    path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) / d1;
  }
}

inline void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      next_one_portion = tmp - path[i].pweight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].pweight = path[i].pweight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

inline double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero * static_cast<double>(depth - i) / d1;
    } else {
      total += path[i].pweight / zero / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

class ShapWalker {
 public:
  ShapWalker(const DecisionTree& tree, std::span<const double> x, std::span<double> phi)
      : tree_(tree), x_(x), phi_(phi) {
    const std::size_t d = tree.depth() + 2;
    path_.resize(d * (d + 1) / 2 + d);
  }

  void run() { recurse(0, 0, path_.data(), 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node_index, std::size_t depth, PathElement* parent_path, double zero_fraction,
               double one_fraction, int feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const Node& node = tree_.nodes[node_index];
    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const PathElement& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }
    const bool go_left = x_[static_cast<std::size_t>(node.feature)] <= node.threshold;
    const auto hot = static_cast<std::size_t>(go_left ? node.left : node.right);
    const auto cold = static_cast<std::size_t>(go_left ? node.right : node.left);
    const double hot_zero = tree_.nodes[hot].cover / node.cover;
    const double cold_zero = tree_.nodes[cold].cover / node.cover;
    double incoming_zero = 1.0, incoming_one = 1.0;
    std::size_t k = 0;
    for (; k <= depth; ++k)
      if (path[k].feature == node.feature) break;
    if (k != depth + 1) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      depth -= 1;
    }
    recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const DecisionTree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
  std::vector<PathElement> path_;
};

}  // namespace detail

// Expected tree output under the training cover.
inline double expected_value(const DecisionTree& tree) { return tree.nodes.front().value; }

inline double expected_value(const RandomForest& forest) {
  double acc = 0.0;
  for (const auto& t : forest.trees) acc += expected_value(t);
  return acc / static_cast<double>(forest.trees.size());
}

// Adds the tree's SHAP values for row `x` into `phi` (length m).
inline void tree_shap_accumulate(const DecisionTree& tree, std::span<const double> x, std::span<double> phi) {
  if (tree.nodes.size() <= 1) return;
  detail::ShapWalker(tree, x, phi).run();
}

inline std::vector<double> tree_shap(const DecisionTree& tree, std::span<const double> x) {
  std::vector<double> phi(x.size(), 0.0);
  tree_shap_accumulate(tree, x, phi);
  return phi;
}

struct ShapValues {
  Matrix phi;  // rows x m
  double base_value = 0.0;
};

// Forest SHAP values: the mean of per-tree values. Rows are processed in
// parallel; each row's sum is accumulated in tree order.
inline ShapValues tree_shap(const RandomForest& forest, const Matrix& x, std::size_t threads = 1) {
  if (x.cols() != forest.n_features) throw std::invalid_argument("tree_shap: feature count mismatch");
  ShapValues out{Matrix(x.rows(), x.cols()), expected_value(forest)};
  const double inv = 1.0 / static_cast<double>(forest.trees.size());
  parallel_for(x.rows(), threads, [&](std::size_t r) {
    auto phi = out.phi.row(r);
    for (const auto& tree : forest.trees) tree_shap_accumulate(tree, x.row(r), phi);
    for (double& v : phi) v *= inv;
  });
  return out;
}

inline ImportanceVector tree_shap_global(const RandomForest& forest, const Matrix& x, std::uint64_t tie_break_seed = 0,
                                         std::size_t threads = 1) {
  const auto shap = tree_shap(forest, x, threads);
  ImportanceVector out{std::vector<double>(x.cols(), 0.0), tie_break_seed};
  if (x.rows() == 0) return out;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out.scores[j] += std::abs(shap.phi(r, j));
  for (double& s : out.scores) s /= static_cast<double>(x.rows());
  return out;
}

}  // namespace fsbench::forest
