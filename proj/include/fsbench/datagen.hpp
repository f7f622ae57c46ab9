#pragma once

// Synthetic benchmark datasets with known predictive features.
//
// The four "uniform" generators draw every feature from U(0,1) and label rows
// with a fixed nonlinear rule over the first p columns; all other columns are
// decoys. Class balance is exact: candidate rows are drawn in sequence and
// kept while their class still has room (per-class rejection sampling).
// Every cell is addressed by (seed, generator, candidate row, column), so
// widening m only appends decoy columns and never changes existing ones.
//
// The DAG generator simulates a sparse directed graphical model with sigmoid
// links and binarizes the sink node at its median.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fsbench/errors.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/random.hpp"

namespace fsbench::datagen {

enum class Generator : std::uint8_t { Ring, Xor, RingXor, RingXorSum, Dag };

inline std::string_view to_string(Generator g) {
  switch (g) {
    case Generator::Ring: return "ring";
    case Generator::Xor: return "xor";
    case Generator::RingXor: return "ring_xor";
    case Generator::RingXorSum: return "ring_xor_sum";
    case Generator::Dag: return "dag";
  }
  return "unknown";
}

inline Generator parse_generator(std::string_view s) {
  if (s == "ring") return Generator::Ring;
  if (s == "xor") return Generator::Xor;
  if (s == "ring_xor" || s == "ring+xor") return Generator::RingXor;
  if (s == "ring_xor_sum" || s == "ring+xor+sum") return Generator::RingXorSum;
  if (s == "dag") return Generator::Dag;
  throw std::invalid_argument("unknown dataset generator: " + std::string(s));
}

// Number of predictive columns of a uniform generator.
inline std::size_t predictive_count(Generator g) {
  switch (g) {
    case Generator::Ring:
    case Generator::Xor: return 2;
    case Generator::RingXor: return 4;
    case Generator::RingXorSum: return 6;
    case Generator::Dag: break;
  }
  throw std::invalid_argument("predictive_count: DAG has no fixed predictive count");
}

// Labeling rules. Each clause is exposed so tests and the label replay can
// evaluate it on stored rows.
namespace rules {

inline constexpr double kRingRadius = 0.35;
inline constexpr double kRingHalfWidth = 0.1151;
inline constexpr double kRingXorRingHalfWidth = 0.0704;
inline constexpr double kRingXorXorThreshold = 0.0337;
inline constexpr double kSumRingHalfWidth = 0.0479;
inline constexpr double kSumXorThreshold = 0.0598;
inline constexpr double kSumThreshold = 1.4074;
inline constexpr double kSumNoiseSd = 0.2;

inline bool ring(double x0, double x1, double half_width) {
  const double r = std::sqrt((x0 - 0.5) * (x0 - 0.5) + (x1 - 0.5) * (x1 - 0.5));
  return std::abs(r - kRingRadius) <= half_width;
}

inline bool xor_quadrant(double x0, double x1, double threshold) {
  return (x0 - 0.5) * (0.5 - x1) >= threshold;
}

inline bool sum(double x4, double x5, double noise) { return x4 + x5 + noise >= kSumThreshold; }

// `noise` is only read by RingXorSum.
inline bool label(Generator g, std::span<const double> row, double noise = 0.0) {
  switch (g) {
    case Generator::Ring: return ring(row[0], row[1], kRingHalfWidth);
    case Generator::Xor: return xor_quadrant(row[0], row[1], 0.0);
    case Generator::RingXor:
      return ring(row[0], row[1], kRingXorRingHalfWidth) ||
             xor_quadrant(row[2], row[3], kRingXorXorThreshold);
    case Generator::RingXorSum:
      return ring(row[0], row[1], kSumRingHalfWidth) || xor_quadrant(row[2], row[3], kSumXorThreshold) ||
             sum(row[4], row[5], noise);
    case Generator::Dag: break;
  }
  throw std::invalid_argument("rules::label: DAG labels are not a closed-form rule");
}

}  // namespace rules

struct DagParams {
  std::size_t n = 1000;
  std::size_t m = 2000;
  double edge_prob = 0.005;
  std::size_t n_irrelevant = 1000;
  std::size_t n_causal_edges = 20;
  double sigma = 0.3;
};

// Graph behind a DAG dataset. Node indices are feature columns; the target
// is an extra sink node that is not stored in `edges`.
struct DagMetadata {
  std::size_t nodes = 0;
  struct Edge {
    std::size_t from;
    std::size_t to;
    double weight;
  };
  std::vector<Edge> edges;              // from < to
  std::vector<std::size_t> y_parents;   // direct parents of the target
  std::vector<double> y_weights;
  std::vector<std::size_t> irrelevant_idx;
  std::vector<std::size_t> causal_idx;      // ancestors of the target
  std::vector<std::size_t> correlated_idx;  // descendants of causal nodes that are not causal
  double noise_sigma = 0.3;
  std::size_t attempts = 1;

  // Dense adjacency, row-major nodes x nodes; entry (i, j) set iff i -> j.
  std::vector<std::uint8_t> adjacency() const {
    std::vector<std::uint8_t> a(nodes * nodes, 0);
    for (const auto& e : edges) a[e.from * nodes + e.to] = 1;
    return a;
  }
};

struct SyntheticDataset {
  Matrix features;
  Labels labels;
  std::vector<std::size_t> relevant_idx;
  Generator generator = Generator::Ring;
  std::uint64_t seed = 0;
  // Per-row noise of the sum clause (RingXorSum only), so labels can be replayed.
  std::vector<double> sum_noise;
  std::optional<DagMetadata> dag;

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t m() const noexcept { return features.cols(); }
};

namespace detail {

inline constexpr std::uint64_t kNoiseColumn = ~std::uint64_t{0};

inline void check_uniform_args(Generator g, std::size_t n, std::size_t m) {
  const std::size_t p = predictive_count(g);
  if (m < p)
    throw std::invalid_argument(std::string(to_string(g)) + ": m must be at least " + std::to_string(p));
  if (n == 0 || n % 2 != 0) throw std::invalid_argument(std::string(to_string(g)) + ": n must be even and positive");
}

inline SyntheticDataset generate_uniform(Generator g, std::size_t n, std::size_t m, std::uint64_t seed) {
  check_uniform_args(g, n, m);
  const std::size_t p = predictive_count(g);
  const auto gid = static_cast<std::uint64_t>(g);
  const bool has_noise = g == Generator::RingXorSum;

  SyntheticDataset out;
  out.generator = g;
  out.seed = seed;
  out.features = Matrix(n, m);
  out.labels.resize(n);
  out.relevant_idx.resize(p);
  std::iota(out.relevant_idx.begin(), out.relevant_idx.end(), std::size_t{0});
  if (has_noise) out.sum_noise.resize(n);

  const std::size_t quota = n / 2;
  std::size_t taken[2] = {0, 0};
  std::vector<double> head(p);
  // Every rule has prevalence well inside (0.01, 0.99); the cap only guards
  // against a broken rule looping forever.
  const std::uint64_t max_candidates = 1000ULL * n + 1000;
  std::size_t row = 0;
  for (std::uint64_t cand = 0; row < n; ++cand) {
    if (cand >= max_candidates) throw GenerationFailed("rejection sampling did not reach class balance");
    for (std::size_t j = 0; j < p; ++j) head[j] = cell_uniform(seed, gid, cand, j);
    const double noise = has_noise ? rules::kSumNoiseSd * cell_normal(seed, gid, cand, kNoiseColumn) : 0.0;
    const int y = rules::label(g, head, noise) ? 1 : 0;
    if (taken[y] == quota) continue;
    ++taken[y];
    auto dst = out.features.row(row);
    std::copy(head.begin(), head.end(), dst.begin());
    for (std::size_t j = p; j < m; ++j) dst[j] = cell_uniform(seed, gid, cand, j);
    out.labels[row] = y;
    if (has_noise) out.sum_noise[row] = noise;
    ++row;
  }
  return out;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Standardizes `z` in place to zero mean and unit variance (population sd);
// constant vectors become all zero.
inline void standardize(std::vector<double>& z) {
  const double n = static_cast<double>(z.size());
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : z) v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

}  // namespace detail

inline SyntheticDataset gen_ring(std::size_t n, std::size_t m, std::uint64_t seed) {
  return detail::generate_uniform(Generator::Ring, n, m, seed);
}

inline SyntheticDataset gen_xor(std::size_t n, std::size_t m, std::uint64_t seed) {
  return detail::generate_uniform(Generator::Xor, n, m, seed);
}

inline SyntheticDataset gen_ring_xor(std::size_t n, std::size_t m, std::uint64_t seed) {
  return detail::generate_uniform(Generator::RingXor, n, m, seed);
}

inline SyntheticDataset gen_ring_xor_sum(std::size_t n, std::size_t m, std::uint64_t seed) {
  return detail::generate_uniform(Generator::RingXorSum, n, m, seed);
}

inline SyntheticDataset gen_dag(const DagParams& params, std::uint64_t seed) {
  const std::size_t m = params.m;
  const std::size_t n = params.n;
  if (params.n_irrelevant >= m) throw std::invalid_argument("gen_dag: n_irrelevant must be smaller than m");
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_dag: n must be even and at least 2");
  if (params.edge_prob < 0.0 || params.edge_prob > 1.0) throw std::invalid_argument("gen_dag: edge_prob outside [0,1]");
  if (!(params.sigma > 0.0)) throw std::invalid_argument("gen_dag: sigma must be positive");
  const auto gid = static_cast<std::uint64_t>(Generator::Dag);

  constexpr std::size_t kMaxAttempts = 100;
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t key = derive_seed(seed, gid, "attempt", attempt);
    CounterRng rng(key);

    // Strictly upper-triangular random graph.
    std::vector<std::uint8_t> zeroed(m, 0);
    {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      auto pick = rng.derive("zero");
      shuffle(order.begin(), order.end(), pick);
      for (std::size_t k = 0; k < params.n_irrelevant; ++k) zeroed[order[k]] = 1;
    }
    std::vector<std::vector<std::size_t>> parents(m);
    std::vector<std::vector<double>> weights(m);
    DagMetadata meta;
    meta.nodes = m;
    meta.noise_sigma = params.sigma;
    meta.attempts = attempt + 1;
    if (params.edge_prob > 0.0) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
          if (cell_uniform(key, "edge", i, j) >= params.edge_prob) continue;
          if (zeroed[i] || zeroed[j]) continue;
          const double w = 2.0 * cell_uniform(key, "gamma", i, j) - 1.0;
          parents[j].push_back(i);
          weights[j].push_back(w);
          meta.edges.push_back({i, j, w});
        }
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      if (zeroed[i]) meta.irrelevant_idx.push_back(i);

    // Target parents come from the non-zeroed nodes.
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < m; ++i)
      if (!zeroed[i]) eligible.push_back(i);
    auto pick = rng.derive("y_parents");
    shuffle(eligible.begin(), eligible.end(), pick);
    const std::size_t k = std::min(params.n_causal_edges, eligible.size());
    if (k == 0) continue;  // degenerate: target would be pure noise
    meta.y_parents.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(meta.y_parents.begin(), meta.y_parents.end());
    for (auto p : meta.y_parents) meta.y_weights.push_back(2.0 * cell_uniform(key, "gamma_y", p) - 1.0);

    // Simulate in index order, which is a topological order.
    Matrix x(n, m);
    std::vector<double> z(n);
    // Feature nodes average their parents; the target sums them.
    auto simulate = [&](std::size_t node, std::span<const std::size_t> pa, std::span<const double> w,
                        auto&& read_parent) {
      const bool average = node < m;
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t q = 0; q < pa.size(); ++q) acc += w[q] * read_parent(r, pa[q]);
        if (average && !pa.empty()) acc /= static_cast<double>(pa.size());
        z[r] = params.sigma * cell_normal(key, "eps", r, node) + acc;
      }
      detail::standardize(z);
    };
    auto read_x = [&](std::size_t r, std::size_t j) { return x(r, j); };
    for (std::size_t i = 0; i < m; ++i) {
      simulate(i, parents[i], weights[i], read_x);
      for (std::size_t r = 0; r < n; ++r) x(r, i) = detail::sigmoid(z[r]);
    }
    simulate(m, meta.y_parents, meta.y_weights, read_x);
    std::vector<double> y_value(n);
    for (std::size_t r = 0; r < n; ++r) y_value[r] = detail::sigmoid(z[r]);

    std::vector<double> sorted = y_value;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double upper = sorted[n / 2];
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2));
    const double median = 0.5 * (lower + upper);
    Labels labels(n);
    std::size_t positives = 0;
    for (std::size_t r = 0; r < n; ++r) {
      labels[r] = y_value[r] > median ? 1 : 0;
      positives += static_cast<std::size_t>(labels[r]);
    }
    if (positives != n / 2) continue;  // ties at the median

    // Ancestors of the target.
    std::vector<std::uint8_t> causal(m, 0);
    std::vector<std::size_t> stack(meta.y_parents.begin(), meta.y_parents.end());
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      if (causal[v]) continue;
      causal[v] = 1;
      for (auto p : parents[v]) stack.push_back(p);
    }
    // Nodes reachable from a causal node that are not causal themselves share
    // a common cause with the target.
    std::vector<std::vector<std::size_t>> children(m);
    for (const auto& e : meta.edges) children[e.from].push_back(e.to);
    std::vector<std::uint8_t> reached(m, 0);
    for (std::size_t v = 0; v < m; ++v)
      if (causal[v]) stack.push_back(v);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto c : children[v]) {
        if (reached[c]) continue;
        reached[c] = 1;
        stack.push_back(c);
      }
    }
    for (std::size_t v = 0; v < m; ++v) {
      if (causal[v]) meta.causal_idx.push_back(v);
      else if (reached[v]) meta.correlated_idx.push_back(v);
    }

    SyntheticDataset out;
    out.features = std::move(x);
    out.labels = std::move(labels);
    out.relevant_idx = meta.causal_idx;
    out.generator = Generator::Dag;
    out.seed = seed;
    out.dag = std::move(meta);
    return out;
  }
  throw GenerationFailed("gen_dag: no valid graph after 100 attempts");
}

// Dispatch used by the harness and CLI. DAG uses default parameters with the
// given n and m.
inline SyntheticDataset generate(Generator g, std::size_t n, std::size_t m, std::uint64_t seed,
                                 const DagParams& dag_params = {}) {
  if (g == Generator::Dag) {
    DagParams p = dag_params;
    p.n = n;
    p.m = m;
    return gen_dag(p, seed);
  }
  return detail::generate_uniform(g, n, m, seed);
}

// Re-evaluates the labeling rule on stored rows; true when every stored
// label is reproduced.
inline bool replay_labels(const SyntheticDataset& d) {
  if (d.generator == Generator::Dag) return false;
  for (std::size_t r = 0; r < d.n(); ++r) {
    const double noise = d.sum_noise.empty() ? 0.0 : d.sum_noise[r];
    if ((rules::label(d.generator, d.features.row(r), noise) ? 1 : 0) != d.labels[r]) return false;
  }
  return true;
}

}  // namespace fsbench::datagen
