#pragma once

// Model-free feature rankers: histogram mutual information, mRMR (MID
// scheme) and ReliefF. Inputs are expected on [0,1]; pass data through
// minmax_scale first when it is not.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fsbench/importance.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/parallel.hpp"
#include "fsbench/random.hpp"

namespace fsbench::filters {

inline constexpr std::size_t kDefaultBins = 20;

// Equal-width bin of a value on [0,1]; out-of-range values are clamped.
inline std::uint16_t bin_of(double v, std::size_t bins) {
  if (!(v > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
  return static_cast<std::uint16_t>(std::min(b, bins - 1));
}

inline std::vector<std::uint16_t> bin_codes(std::span<const double> column, std::size_t bins = kDefaultBins) {
  std::vector<std::uint16_t> out(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) out[i] = bin_of(column[i], bins);
  return out;
}

// Joint counts of (feature bin, class).
struct BinnedHistogram {
  std::size_t bins = kDefaultBins;
  std::vector<double> counts;  // bins x 2, row-major
  std::size_t n = 0;

  double count(std::size_t bin, int cls) const { return counts[bin * 2 + static_cast<std::size_t>(cls)]; }
};

inline BinnedHistogram histogram(std::span<const double> column, std::span<const int> labels,
                                 std::size_t bins = kDefaultBins) {
  if (column.size() != labels.size()) throw std::invalid_argument("histogram: length mismatch");
  BinnedHistogram h{bins, std::vector<double>(bins * 2, 0.0), column.size()};
  for (std::size_t i = 0; i < column.size(); ++i) h.counts[bin_of(column[i], bins) * 2 + static_cast<std::size_t>(labels[i])] += 1.0;
  return h;
}

// Plug-in mutual information (nats) of two discrete codes.
template <class A, class B>
double mutual_information_codes(std::span<const A> a, std::size_t ka, std::span<const B> b, std::size_t kb) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual_information: length mismatch");
  if (a.empty()) throw std::invalid_argument("mutual_information: empty input");
  std::vector<double> joint(ka * kb, 0.0), pa(ka, 0.0), pb(kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto u = static_cast<std::size_t>(a[i]), v = static_cast<std::size_t>(b[i]);
    joint[u * kb + v] += 1.0;
    pa[u] += 1.0;
    pb[v] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t u = 0; u < ka; ++u) {
    if (pa[u] == 0.0) continue;
    for (std::size_t v = 0; v < kb; ++v) {
      const double c = joint[u * kb + v];
      if (c == 0.0) continue;
      mi += c / n * std::log(c * n / (pa[u] * pb[v]));
    }
  }
  return std::max(0.0, mi);
}

inline double mutual_information(std::span<const double> column, std::span<const int> labels,
                                 std::size_t bins = kDefaultBins) {
  if (bins == 0) throw std::invalid_argument("mutual_information: bins must be positive");
  const auto codes = bin_codes(column, bins);
  return mutual_information_codes(std::span<const std::uint16_t>(codes), bins, labels, 2);
}

inline ImportanceVector mi_rank(const Matrix& x, std::span<const int> labels, std::size_t bins = kDefaultBins,
                                std::uint64_t tie_break_seed = 0) {
  if (x.rows() != labels.size()) throw std::invalid_argument("mi_rank: row/label count mismatch");
  ImportanceVector out{std::vector<double>(x.cols()), tie_break_seed};
  for (std::size_t j = 0; j < x.cols(); ++j) out.scores[j] = mutual_information(x.column(j), labels, bins);
  return out;
}

struct MrmrResult {
  std::vector<std::size_t> selected;  // in selection order
  ImportanceVector importance;        // k - rank for selected features, 0 otherwise
};

// Greedy max-relevance min-redundancy, difference form:
// argmax_f MI(f; y) - mean_{s in S} MI(f; s). Equal scores go to the lower index.
inline MrmrResult mrmr_select(const Matrix& x, std::span<const int> labels, std::size_t k_select,
                              std::size_t bins = kDefaultBins, std::uint64_t tie_break_seed = 0) {
  const std::size_t m = x.cols();
  if (k_select == 0) throw std::invalid_argument("mrmr_select: k_select must be positive");
  if (k_select > m) throw std::invalid_argument("mrmr_select: k_select exceeds the number of features");
  if (x.rows() != labels.size()) throw std::invalid_argument("mrmr_select: row/label count mismatch");
  std::vector<std::vector<std::uint16_t>> codes(m);
  std::vector<double> relevance(m), redundancy(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    codes[j] = bin_codes(x.column(j), bins);
    relevance[j] = mutual_information_codes(std::span<const std::uint16_t>(codes[j]), bins, labels, 2);
  }
  std::vector<char> taken(m, 0);
  MrmrResult out;
  out.importance = ImportanceVector{std::vector<double>(m, 0.0), tie_break_seed};
  for (std::size_t step = 0; step < k_select; ++step) {
    std::size_t best = m;
    double best_score = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (taken[j]) continue;
      const double score = step == 0 ? relevance[j] : relevance[j] - redundancy[j] / static_cast<double>(step);
      if (best == m || score > best_score) {
        best = j;
        best_score = score;
      }
    }
    taken[best] = 1;
    out.selected.push_back(best);
    out.importance.scores[best] = static_cast<double>(k_select - step);
    if (step + 1 == k_select) break;
    const std::span<const std::uint16_t> s(codes[best]);
    for (std::size_t j = 0; j < m; ++j)
      if (!taken[j]) redundancy[j] += mutual_information_codes(std::span<const std::uint16_t>(codes[j]), bins, s, bins);
  }
  return out;
}

struct ReliefConfig {
  std::size_t k_neighbors = 10;
  std::uint64_t seed = 0;  // orders neighbors at equal distance
  std::size_t threads = 1;
};

// ReliefF for binary labels over every instance. Feature differences are
// normalized by the column range; distance is Euclidean on the normalized
// features. Classes too small for k neighbors use fewer, with a warning.
inline ImportanceVector relieff(const Matrix& x, std::span<const int> labels, const ReliefConfig& cfg = {}) {
  const std::size_t n = x.rows(), m = x.cols();
  if (n != labels.size()) throw std::invalid_argument("relieff: row/label count mismatch");
  if (cfg.k_neighbors == 0) throw std::invalid_argument("relieff: k_neighbors must be positive");
  const std::size_t class_size[2] = {static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0)),
                                     static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1))};
  if (class_size[0] < 2 || class_size[1] < 2) throw std::invalid_argument("relieff: each class needs at least 2 rows");
  std::size_t k_hit[2], k_miss[2];
  for (int c : {0, 1}) {
    k_hit[c] = std::min(cfg.k_neighbors, class_size[c] - 1);
    k_miss[c] = std::min(cfg.k_neighbors, class_size[1 - c]);
    if (k_hit[c] < cfg.k_neighbors || k_miss[c] < cfg.k_neighbors)
      std::clog << "relieff: class " << c << " has too few rows for " << cfg.k_neighbors
                << " neighbors; using " << k_hit[c] << " hits and " << k_miss[c] << " misses\n";
  }

  const Matrix z = minmax_scale(x);
  std::vector<double> dist(n * n, 0.0);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto zi = z.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto zj = z.row(j);
      double acc = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double d = zi[c] - zj[c];
        acc += d * d;
      }
      dist[i * n + j] = acc;
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) dist[i * n + j] = dist[j * n + i];

  std::vector<std::uint64_t> tie_key(n);
  for (std::size_t i = 0; i < n; ++i) tie_key[i] = derive_seed(cfg.seed, "relief", i);

  std::vector<double> w(m, 0.0);
  std::vector<std::size_t> hits, misses;
  for (std::size_t i = 0; i < n; ++i) {
    hits.clear();
    misses.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? hits : misses).push_back(j);
    }
    const double* di = dist.data() + i * n;
    auto closer = [&](std::size_t a, std::size_t b) {
      if (di[a] != di[b]) return di[a] < di[b];
      if (tie_key[a] != tie_key[b]) return tie_key[a] < tie_key[b];
      return a < b;
    };
    const auto c = static_cast<std::size_t>(labels[i]);
    const std::size_t kh = k_hit[c], km = k_miss[c];
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(kh), hits.end(), closer);
    std::partial_sort(misses.begin(), misses.begin() + static_cast<std::ptrdiff_t>(km), misses.end(), closer);
    const auto zi = z.row(i);
    const double hit_scale = 1.0 / (static_cast<double>(n) * static_cast<double>(kh));
    const double miss_scale = 1.0 / (static_cast<double>(n) * static_cast<double>(km));
    for (std::size_t h = 0; h < kh; ++h) {
      const auto zh = z.row(hits[h]);
      for (std::size_t f = 0; f < m; ++f) w[f] -= std::abs(zi[f] - zh[f]) * hit_scale;
    }
    for (std::size_t q = 0; q < km; ++q) {
      const auto zq = z.row(misses[q]);
      for (std::size_t f = 0; f < m; ++f) w[f] += std::abs(zi[f] - zq[f]) * miss_scale;
    }
  }
  return ImportanceVector{std::move(w), cfg.seed};
}

}  // namespace fsbench::filters
