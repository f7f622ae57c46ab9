// Generate a RING dataset with decoys, rank features three ways and score
// each ranking against the known relevant pair.

#include <iostream>

#include "fsbench/fsbench.hpp"

int main() {
  using namespace fsbench;
  const auto data = datagen::gen_ring(1000, 64, 42);

  const auto mi = filters::mi_rank(data.features, data.labels);
  const auto mrmr = filters::mrmr_select(data.features, data.labels, 4).importance;

  forest::ForestConfig fc;
  fc.n_trees = 100;
  fc.seed = 7;
  const auto rf = forest::impurity_importance(forest::fit_forest(data.features, data.labels, fc));

  for (const auto& [name, imp] : {std::pair{"mi", mi}, std::pair{"mrmr", mrmr}, std::pair{"random_forest", rf}}) {
    const auto s = metrics::ranking_score(imp, data.relevant_idx);
    std::cout << name << ": best-p " << s.best_p << "%, best-2p " << s.best_2p << "%\n";
  }
  std::cout << "random baseline best-p: " << metrics::random_best_p(2, 64) << "%\n";
}
