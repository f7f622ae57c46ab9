#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "fsbench/errors.hpp"
#include "fsbench/importance.hpp"

namespace fsbench::metrics {

namespace detail {

inline void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("metric: scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("metric: NaN score");
}

// Indices ordered by decreasing score.
inline std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace detail

// Mann-Whitney U with midranks for ties.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);  // mean of 1-based ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auroc: both classes must be present");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Average precision: sum over distinct thresholds of (recall step) x precision.
inline double auprc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  const std::size_t total_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (total_pos == 0) throw UndefinedMetric("auprc: no positive labels");
  const auto order = detail::descending(scores);
  const std::size_t n = order.size();
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct RankingScore {
  double best_p = 0.0;   // percent of the top-p features that are relevant
  double best_2p = 0.0;  // relevant features among the top-2p, as a percent of p
  std::size_t p = 0;
  std::size_t m = 0;
};

// Percent of `relevant` found among the `k` highest-ranked features, relative to p.
inline double recovered_percent(const std::vector<std::size_t>& ranking, std::span<const std::size_t> relevant,
                                std::size_t k) {
  const std::unordered_set<std::size_t> rel(relevant.begin(), relevant.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) hits += rel.count(ranking[i]);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(relevant.size());
}

inline RankingScore ranking_score(const ImportanceVector& importance, std::span<const std::size_t> relevant) {
  const std::size_t p = relevant.size(), m = importance.size();
  if (p == 0) throw std::invalid_argument("ranking_score: p must be positive");
  if (p > m) throw std::invalid_argument("ranking_score: p exceeds the number of features");
  for (auto j : relevant)
    if (j >= m) throw std::invalid_argument("ranking_score: relevant index out of range");
  const auto ranking = importance.ranking();
  return {recovered_percent(ranking, relevant, p), recovered_percent(ranking, relevant, 2 * p), p, m};
}

inline double best_p_score(const ImportanceVector& importance, std::span<const std::size_t> relevant) {
  return ranking_score(importance, relevant).best_p;
}

inline double best_2p_score(const ImportanceVector& importance, std::span<const std::size_t> relevant) {
  return ranking_score(importance, relevant).best_2p;
}

// Expected scores of a uniformly random ranking ("dummy" selector).
inline double random_best_p(std::size_t p, std::size_t m) {
  return 100.0 * static_cast<double>(p) / static_cast<double>(m);
}
inline double random_best_2p(std::size_t p, std::size_t m) {
  return 100.0 * static_cast<double>(std::min(2 * p, m)) / static_cast<double>(m);
}

}  // namespace fsbench::metrics
