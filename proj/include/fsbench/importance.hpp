#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "fsbench/random.hpp"

namespace fsbench {

// One score per feature; the common output of every feature-selection method.
// Larger means more important. Signed scores are allowed (knockoff statistics).
struct ImportanceVector {
  std::vector<double> scores;
  std::uint64_t tie_break_seed = 0;

  std::size_t size() const noexcept { return scores.size(); }
  double operator[](std::size_t j) const noexcept { return scores[j]; }

  // Feature indices ordered by decreasing score. Equal scores are ordered by a
  // seeded shuffle so constant-score methods land at the random baseline
  // instead of favouring low column indices. NaN ranks last.
  std::vector<std::size_t> ranking() const {
    const std::size_t m = scores.size();
    std::vector<std::uint64_t> key(m);
    for (std::size_t j = 0; j < m; ++j) key[j] = derive_seed(tie_break_seed, "tie", j);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto value = [&](std::size_t j) {
      return std::isnan(scores[j]) ? -std::numeric_limits<double>::infinity() : scores[j];
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = value(a), vb = value(b);
      if (va != vb) return va > vb;
      if (key[a] != key[b]) return key[a] < key[b];
      return a < b;
    });
    return order;
  }
};

}  // namespace fsbench
