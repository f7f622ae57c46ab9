#pragma once

// Benchmark protocol: dilution grid, stratified K-fold with a fresh column
// permutation per fold, method dispatch, aggregation and report files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fsbench/attribution.hpp"
#include "fsbench/datagen.hpp"
#include "fsbench/embedded.hpp"
#include "fsbench/filters.hpp"
#include "fsbench/forest.hpp"
#include "fsbench/importance.hpp"
#include "fsbench/io.hpp"
#include "fsbench/knockoffs.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/metrics.hpp"
#include "fsbench/nn.hpp"
#include "fsbench/parallel.hpp"
#include "fsbench/random.hpp"

namespace fsbench::harness {

using datagen::Generator;

inline constexpr std::array<std::size_t, 9> kDilution = {8, 16, 32, 64, 128, 256, 512, 1024, 2048};

inline std::vector<std::size_t> default_m_schedule(Generator g) {
  std::vector<std::size_t> out;
  switch (g) {
    case Generator::Ring:
    case Generator::Xor: out = {2, 4}; break;
    case Generator::RingXor: out = {4}; break;
    case Generator::RingXorSum: out = {6}; break;
    case Generator::Dag: return {2000};
  }
  out.insert(out.end(), kDilution.begin(), kDilution.end());
  return out;
}

// ---- method registry ----

enum class Family { Network, Attribution, Filter, Embedded, Forest, Control };

struct MethodInfo {
  std::string name;
  Family family;
  bool predictive;  // rows carry held-out AUROC/AUPRC
  bool nn_capped;   // skipped above the config's nn_m_cap
};

inline const std::vector<MethodInfo>& method_registry() {
  static const std::vector<MethodInfo> registry = [] {
    std::vector<MethodInfo> r{{"neural_network", Family::Network, true, true}};
    for (auto m : attribution::kAllMethods) r.push_back({std::string(attribution::to_string(m)), Family::Attribution, false, true});
    r.push_back({"mi", Family::Filter, false, false});
    r.push_back({"mrmr", Family::Filter, false, false});
    r.push_back({"relief", Family::Filter, false, false});
    r.push_back({"cancelout_sigmoid", Family::Embedded, true, true});
    r.push_back({"cancelout_softmax", Family::Embedded, true, true});
    r.push_back({"deeppink", Family::Embedded, true, true});
    r.push_back({"random_forest", Family::Forest, true, false});
    r.push_back({"treeshap", Family::Forest, false, false});
    r.push_back({"index_biased", Family::Control, false, false});
    return r;
  }();
  return registry;
}

inline std::size_t method_rank(std::string_view name) {
  const auto& reg = method_registry();
  for (std::size_t i = 0; i < reg.size(); ++i)
    if (reg[i].name == name) return i;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

inline const MethodInfo& method_info(std::string_view name) { return method_registry()[method_rank(name)]; }

inline std::vector<std::string> all_method_names() {
  std::vector<std::string> out;
  for (const auto& m : method_registry()) out.push_back(m.name);
  return out;
}

// ---- configuration ----

struct BenchmarkConfig {
  std::vector<Generator> datasets{Generator::Ring, Generator::Xor, Generator::RingXor, Generator::RingXorSum,
                                  Generator::Dag};
  std::map<Generator, std::vector<std::size_t>> m_overrides;
  std::size_t n = 1000;
  std::vector<std::string> methods = all_method_names();
  std::size_t folds = 6;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
  std::string profile = "full";
  std::size_t n_trees = 500;
  std::size_t nn_m_cap = 2048;
  bool omit_timing = false;
  nn::TrainConfig train{};
  attribution::AttributionConfig attribution{};
  embedded::CancelOutConfig cancelout{};
  filters::ReliefConfig relief{};
  std::size_t mi_bins = filters::kDefaultBins;
  datagen::DagParams dag{};

  std::vector<std::size_t> m_schedule(Generator g) const {
    const auto it = m_overrides.find(g);
    return it != m_overrides.end() ? it->second : default_m_schedule(g);
  }

  void validate() const {
    if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
    if (n < 2 * folds || n % 2 != 0) throw std::invalid_argument("config: n must be even and at least 2 * folds");
    if (datasets.empty()) throw std::invalid_argument("config: no datasets");
    if (methods.empty()) throw std::invalid_argument("config: no methods");
    for (const auto& m : methods) method_rank(m);
    for (auto g : datasets)
      for (std::size_t m : m_schedule(g))
        if (m < (g == Generator::Dag ? 2 : datagen::predictive_count(g)))
          throw std::invalid_argument("config: m=" + std::to_string(m) + " too small for " +
                                      std::string(datagen::to_string(g)));
    if (n_trees == 0) throw std::invalid_argument("config: n_trees must be positive");
    train.validate();
  }
};

// Named presets: "full" matches the published protocol, "ci" trims forest
// size and the NN width cap.
inline BenchmarkConfig profile_config(std::string_view name) {
  BenchmarkConfig c;
  c.profile = std::string(name);
  if (name == "full") return c;
  if (name == "ci") {
    c.n_trees = 100;
    c.nn_m_cap = 256;
    return c;
  }
  throw std::invalid_argument("unknown profile: " + std::string(name) + " (expected full or ci)");
}

// Structured config file. Every key is optional and overrides the profile.
//   {"profile": "ci", "datasets": ["ring", "xor"], "n": 1000, "folds": 6,
//    "methods": ["mi", "random_forest"], "base_seed": 7, "workers": 1,
//    "n_trees": 100, "nn_m_cap": 256, "m_overrides": {"ring": [8, 64]},
//    "omit_timing": false, "train": {"max_epochs": 1000, ...},
//    "dag": {"n_irrelevant": 1000, "edge_prob": 0.005, ...}}
inline BenchmarkConfig config_from_json(const io::Json& j) {
  BenchmarkConfig c = profile_config(j.value("profile", std::string("full")));
  if (j.contains("datasets")) {
    c.datasets.clear();
    for (const auto& d : j.at("datasets")) c.datasets.push_back(datagen::parse_generator(d.get<std::string>()));
  }
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  c.n = j.value("n", c.n);
  c.folds = j.value("folds", c.folds);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.workers = j.value("workers", c.workers);
  c.n_trees = j.value("n_trees", c.n_trees);
  c.nn_m_cap = j.value("nn_m_cap", c.nn_m_cap);
  c.omit_timing = j.value("omit_timing", c.omit_timing);
  if (j.contains("m_overrides"))
    for (const auto& [k, v] : j.at("m_overrides").items())
      c.m_overrides[datagen::parse_generator(k)] = v.get<std::vector<std::size_t>>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.lr = t.value("lr", c.train.lr);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.l2_lambda = t.value("l2_lambda", c.train.l2_lambda);
    c.train.input_noise_std = t.value("input_noise_std", c.train.input_noise_std);
    c.train.hidden = t.value("hidden", c.train.hidden);
    c.train.early_stop.patience = t.value("patience", c.train.early_stop.patience);
  }
  if (j.contains("cancelout")) c.cancelout.epochs = j.at("cancelout").value("epochs", c.cancelout.epochs);
  if (j.contains("dag")) {
    const auto& d = j.at("dag");
    c.dag.n_irrelevant = d.value("n_irrelevant", c.dag.n_irrelevant);
    c.dag.edge_prob = d.value("edge_prob", c.dag.edge_prob);
    c.dag.n_causal_edges = d.value("n_causal_edges", c.dag.n_causal_edges);
    c.dag.sigma = d.value("sigma", c.dag.sigma);
  }
  if (j.contains("relief")) c.relief.k_neighbors = j.at("relief").value("k_neighbors", c.relief.k_neighbors);
  if (j.contains("attribution")) {
    const auto& a = j.at("attribution");
    c.attribution.ig_steps = a.value("ig_steps", c.attribution.ig_steps);
    c.attribution.smoothgrad_samples = a.value("smoothgrad_samples", c.attribution.smoothgrad_samples);
    c.attribution.smoothgrad_std = a.value("smoothgrad_std", c.attribution.smoothgrad_std);
    c.attribution.shapley_permutations = a.value("shapley_permutations", c.attribution.shapley_permutations);
  }
  c.validate();
  return c;
}

inline io::Json config_to_json(const BenchmarkConfig& c) {
  io::Json ds = io::Json::array();
  for (auto g : c.datasets) ds.push_back(std::string(datagen::to_string(g)));
  io::Json sched = io::Json::object();
  for (auto g : c.datasets) sched[std::string(datagen::to_string(g))] = c.m_schedule(g);
  return io::Json{{"profile", c.profile},
                  {"datasets", ds},
                  {"m_schedule", sched},
                  {"n", c.n},
                  {"methods", c.methods},
                  {"folds", c.folds},
                  {"base_seed", c.base_seed},
                  {"n_trees", c.n_trees},
                  {"nn_m_cap", c.nn_m_cap},
                  {"train",
                   {{"lr", c.train.lr},
                    {"batch_size", c.train.batch_size},
                    {"max_epochs", c.train.max_epochs},
                    {"l2_lambda", c.train.l2_lambda},
                    {"input_noise_std", c.train.input_noise_std},
                    {"hidden", c.train.hidden},
                    {"patience", c.train.early_stop.patience}}},
                  {"attribution",
                   {{"ig_steps", c.attribution.ig_steps},
                    {"smoothgrad_samples", c.attribution.smoothgrad_samples},
                    {"smoothgrad_std", c.attribution.smoothgrad_std},
                    {"shapley_permutations", c.attribution.shapley_permutations}}},
                  {"cancelout",
                   {{"epochs", c.cancelout.epochs},
                    {"lambda1", c.cancelout.lambda1},
                    {"lambda2", c.cancelout.lambda2},
                    {"init_beta", c.cancelout.init_beta}}},
                  {"relief", {{"k_neighbors", c.relief.k_neighbors}, {"iterations", "all rows"}}},
                  {"dag",
                   {{"n_irrelevant", c.dag.n_irrelevant},
                    {"edge_prob", c.dag.edge_prob},
                    {"n_causal_edges", c.dag.n_causal_edges},
                    {"sigma", c.dag.sigma}}},
                  {"mi_bins", c.mi_bins}};
}

// ---- protocol pieces ----

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified K-fold: each class is shuffled and dealt round-robin, the
// second class continuing where the first stopped so fold sizes differ by
// at most one.
inline std::vector<Fold> kfold_split(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("kfold_split: labels must be 0/1");
    by_class[labels[i]].push_back(i);
  }
  for (int c : {0, 1})
    if (by_class[c].size() < folds)
      throw std::invalid_argument("kfold_split: class " + std::to_string(c) + " has fewer members than folds");
  std::vector<std::vector<std::size_t>> test(folds);
  std::size_t next = 0;
  for (int c : {0, 1}) {
    CounterRng rng(derive_seed(seed, "kfold", c));
    shuffle(by_class[c].begin(), by_class[c].end(), rng);
    for (std::size_t i : by_class[c]) test[next++ % folds].push_back(i);
  }
  std::vector<Fold> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::sort(test[f].begin(), test[f].end());
    out[f].test = test[f];
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f) out[f].train.insert(out[f].train.end(), test[g].begin(), test[g].end());
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

struct PermutedColumns {
  Matrix x;
  std::vector<std::size_t> order;     // new column c holds original column order[c]
  std::vector<std::size_t> position;  // original column j now sits at position[j]

  std::vector<std::size_t> map(std::span<const std::size_t> original) const {
    std::vector<std::size_t> out;
    for (std::size_t j : original) out.push_back(position.at(j));
    return out;
  }
};

inline std::vector<std::size_t> column_order(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, "columns"));
  shuffle(order.begin(), order.end(), rng);
  return order;
}

inline PermutedColumns apply_column_order(const Matrix& x, std::vector<std::size_t> order) {
  PermutedColumns out{select_columns(x, order), std::move(order), {}};
  out.position.resize(out.order.size());
  for (std::size_t c = 0; c < out.order.size(); ++c) out.position[out.order[c]] = c;
  return out;
}

inline PermutedColumns permute_columns(const Matrix& x, std::uint64_t seed) {
  return apply_column_order(x, column_order(x.cols(), seed));
}

inline std::uint64_t dataset_seed(std::uint64_t base, Generator g, std::size_t n) {
  return derive_seed(base, "dataset", datagen::to_string(g), n);
}

inline std::uint64_t seed_trace(std::uint64_t base, std::string_view dataset, std::size_t m, std::size_t fold,
                                std::string_view method) {
  return derive_seed(base, dataset, m, fold, method);
}

// ---- results ----

struct BenchmarkResult {
  std::string dataset;
  std::string method;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t fold = 0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  std::optional<double> best_p;
  std::optional<double> best_2p;
  double wall_time_ms = 0.0;
  std::uint64_t seed_trace = 0;
  std::string error;  // non-empty on a failed row

  bool failed() const noexcept { return !error.empty(); }
  friend bool operator==(const BenchmarkResult&, const BenchmarkResult&) = default;
};

// Scoring targets of one generated dataset. DAG produces two: causal
// features only, and causal plus correlated features.
struct Target {
  std::string name;
  std::vector<std::size_t> relevant;
};

inline std::vector<Target> scoring_targets(const datagen::SyntheticDataset& d) {
  if (!d.dag) return {{std::string(datagen::to_string(d.generator)), d.relevant_idx}};
  std::vector<std::size_t> wide = d.dag->causal_idx;
  wide.insert(wide.end(), d.dag->correlated_idx.begin(), d.dag->correlated_idx.end());
  std::sort(wide.begin(), wide.end());
  wide.erase(std::unique(wide.begin(), wide.end()), wide.end());
  return {{"dag", d.dag->causal_idx}, {"dag_correlated", wide}};
}

struct BenchmarkRun {
  BenchmarkConfig config;
  std::vector<BenchmarkResult> results;
  std::map<std::string, std::map<std::size_t, std::size_t>> relevant_count;  // target -> m -> p
};

namespace detail {

struct Group {
  Generator generator;
  std::size_t m;
  datagen::SyntheticDataset data;
  std::vector<Target> targets;
  std::vector<Fold> folds;
  std::optional<knockoffs::KnockoffMatrix> knockoffs;
};

struct MethodOutput {
  std::optional<ImportanceVector> importance;
  std::optional<std::vector<double>> test_scores;
};

class FoldRunner {
 public:
  FoldRunner(const BenchmarkConfig& cfg, const Group& group, std::size_t fold)
      : cfg_(cfg), group_(group), fold_(fold), name_(datagen::to_string(group.generator)) {
    const auto perm_seed = derive_seed(cfg.base_seed, "permute", name_, group.m, fold);
    perm_ = permute_columns(group.data.features, perm_seed);
    const Fold& f = group.folds[fold];
    x_train_ = select_rows(perm_.x, f.train);
    x_test_ = select_rows(perm_.x, f.test);
    y_train_ = gather(std::span<const int>(group.data.labels), std::span<const std::size_t>(f.train));
    y_test_ = gather(std::span<const int>(group.data.labels), std::span<const std::size_t>(f.test));
    for (const auto& t : group.targets) targets_.push_back({t.name, perm_.map(t.relevant)});
  }

  std::vector<BenchmarkResult> run(const std::vector<std::string>& methods) {
    std::vector<BenchmarkResult> rows;
    for (const auto& method : methods) {
      const MethodInfo& info = method_info(method);
      if (info.nn_capped && group_.m > cfg_.nn_m_cap) continue;
      const std::uint64_t trace = seed_trace(cfg_.base_seed, name_, group_.m, fold_, method);
      const auto t0 = std::chrono::steady_clock::now();
      MethodOutput out;
      std::string error;
      try {
        out = dispatch(method, trace);
      } catch (const std::exception& e) {
        error = e.what();
        if (error.empty()) error = "unknown failure";
      }
      const double ms = cfg_.omit_timing
                            ? 0.0
                            : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& target : targets_) {
        BenchmarkResult r{target.name, method, group_.m, cfg_.n, fold_, {}, {}, {}, {}, ms, trace, error};
        if (error.empty()) {
          try {
            if (out.test_scores) {
              r.auroc = metrics::auroc(*out.test_scores, y_test_);
              r.auprc = metrics::auprc(*out.test_scores, y_test_);
            }
            if (out.importance) {
              const auto score = metrics::ranking_score(*out.importance, target.relevant);
              r.best_p = score.best_p;
              r.best_2p = score.best_2p;
            }
          } catch (const std::exception& e) {
            r.error = e.what();
          }
        }
        rows.push_back(std::move(r));
      }
    }
    return rows;
  }

 private:
  nn::TrainConfig train_config(std::uint64_t seed) const {
    nn::TrainConfig t = cfg_.train;
    t.seed = seed;
    return t;
  }

  const nn::TrainedMlp& shared_mlp() {
    if (!mlp_) mlp_ = nn::train_mlp(x_train_, y_train_, train_config(trace_of("neural_network")));
    return *mlp_;
  }

  const forest::RandomForest& shared_forest() {
    if (!forest_) {
      forest::ForestConfig fc;
      fc.n_trees = cfg_.n_trees;
      fc.seed = trace_of("random_forest");
      forest_ = forest::fit_forest(x_train_, y_train_, fc);
    }
    return *forest_;
  }

  const Matrix& filter_inputs() {
    if (!filter_x_) filter_x_ = group_.generator == Generator::Dag ? minmax_scale(x_train_) : x_train_;
    return *filter_x_;
  }

  std::uint64_t trace_of(std::string_view method) const {
    return seed_trace(cfg_.base_seed, name_, group_.m, fold_, method);
  }

  static std::vector<double> logits_to_proba(std::vector<double> z) {
    for (double& v : z) v = nn::sigmoid(v);
    return z;
  }

  MethodOutput dispatch(const std::string& method, std::uint64_t trace) {
    const MethodInfo& info = method_info(method);
    MethodOutput out;
    switch (info.family) {
      case Family::Network: {
        const auto& mlp = shared_mlp();
        out.test_scores = nn::predict_proba(mlp.model, nn::prepare_inputs(mlp.model, x_test_));
        return out;
      }
      case Family::Attribution: {
        const auto& mlp = shared_mlp();
        attribution::AttributionConfig ac = cfg_.attribution;
        ac.seed = trace;
        out.importance = attribution::attribute(mlp.model, nn::prepare_inputs(mlp.model, x_test_),
                                                attribution::parse_method(method), ac)
                             .global_importance;
        return out;
      }
      case Family::Filter: {
        const Matrix& x = filter_inputs();
        if (method == "mi") {
          out.importance = filters::mi_rank(x, y_train_, cfg_.mi_bins, trace);
        } else if (method == "mrmr") {
          const std::size_t p = targets_.front().relevant.size();
          const std::size_t k = std::max<std::size_t>(1, std::min(x.cols(), 2 * p));
          out.importance = filters::mrmr_select(x, y_train_, k, cfg_.mi_bins, trace).importance;
        } else {
          filters::ReliefConfig rc = cfg_.relief;
          rc.seed = trace;
          out.importance = filters::relieff(x, y_train_, rc);
        }
        return out;
      }
      case Family::Embedded: {
        if (method == "deeppink") {
          if (!group_.knockoffs) throw std::logic_error("deeppink: knockoffs were not prepared");
          const Matrix k_all = select_columns(group_.knockoffs->x_tilde, perm_.order);
          const Fold& f = group_.folds[fold_];
          knockoffs::KnockoffMatrix k_train{select_rows(k_all, f.train), group_.knockoffs->construction, {}};
          const auto res = embedded::train_deeppink(x_train_, k_train, y_train_, train_config(trace));
          out.importance = res.importance;
          out.test_scores = logits_to_proba(embedded::predict_logit(res.model, x_test_, select_rows(k_all, f.test)));
          return out;
        }
        embedded::CancelOutConfig co = cfg_.cancelout;
        co.variant = method == "cancelout_sigmoid" ? embedded::CancelOutVariant::Sigmoid
                                                   : embedded::CancelOutVariant::Softmax;
        const auto res = embedded::train_cancelout(x_train_, y_train_, train_config(trace), co);
        out.importance = res.importance;
        out.test_scores = logits_to_proba(embedded::predict_logit(res.model, x_test_));
        return out;
      }
      case Family::Forest: {
        const auto& f = shared_forest();
        if (method == "random_forest") {
          out.importance = forest::impurity_importance(f, trace);
          out.test_scores = forest::predict_proba(f, x_test_);
        } else {
          out.importance = forest::tree_shap_global(f, x_test_, trace);
        }
        return out;
      }
      case Family::Control: {
        std::vector<double> s(perm_.x.cols());
        for (std::size_t j = 0; j < s.size(); ++j) s[j] = -static_cast<double>(j);
        out.importance = ImportanceVector{std::move(s), trace};
        return out;
      }
    }
    throw std::logic_error("unhandled method family");
  }

  const BenchmarkConfig& cfg_;
  const Group& group_;
  std::size_t fold_;
  std::string_view name_;
  PermutedColumns perm_;
  Matrix x_train_, x_test_;
  Labels y_train_, y_test_;
  std::vector<Target> targets_;
  std::optional<nn::TrainedMlp> mlp_;
  std::optional<forest::RandomForest> forest_;
  std::optional<Matrix> filter_x_;
};

inline std::size_t dataset_rank(const BenchmarkConfig& cfg, std::string_view name) {
  std::size_t rank = 0;
  for (auto g : cfg.datasets) {
    if (datagen::to_string(g) == name) return rank;
    rank += 2;
  }
  if (name == "dag_correlated")
    for (std::size_t i = 0; i < cfg.datasets.size(); ++i)
      if (cfg.datasets[i] == Generator::Dag) return 2 * i + 1;
  return rank;
}

}  // namespace detail

inline void sort_results(const BenchmarkConfig& cfg, std::vector<BenchmarkResult>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [&](const BenchmarkResult& a, const BenchmarkResult& b) {
    const auto ka = std::tuple(detail::dataset_rank(cfg, a.dataset), method_rank(a.method), a.m, a.fold);
    const auto kb = std::tuple(detail::dataset_rank(cfg, b.dataset), method_rank(b.method), b.m, b.fold);
    return ka < kb;
  });
}

using ProgressFn = std::function<void(const std::string&)>;

inline BenchmarkRun run_benchmark(const BenchmarkConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  BenchmarkRun run{cfg, {}, {}};
  const bool need_knockoffs = std::find(cfg.methods.begin(), cfg.methods.end(), "deeppink") != cfg.methods.end();
  std::vector<detail::Group> groups;
  for (auto g : cfg.datasets)
    for (std::size_t m : cfg.m_schedule(g)) {
      const std::uint64_t ds_seed = dataset_seed(cfg.base_seed, g, cfg.n);
      detail::Group grp{g, m, datagen::generate(g, cfg.n, m, ds_seed, cfg.dag), {}, {}, {}};
      grp.targets = scoring_targets(grp.data);
      for (const auto& t : grp.targets) run.relevant_count[t.name][m] = t.relevant.size();
      grp.folds = kfold_split(grp.data.labels, cfg.folds, derive_seed(ds_seed, "folds", m));
      const bool capped = m > cfg.nn_m_cap;
      if (need_knockoffs && !capped)
        grp.knockoffs = g == Generator::Dag ? knockoffs::gen_gaussian_knockoffs(grp.data.features, derive_seed(ds_seed, "knockoffs", m))
                                            : knockoffs::gen_uniform_knockoffs(grp.data.features, derive_seed(ds_seed, "knockoffs", m));
      groups.push_back(std::move(grp));
    }

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t f = 0; f < cfg.folds; ++f) cells.emplace_back(gi, f);
  std::vector<std::vector<BenchmarkResult>> per_cell(cells.size());
  std::mutex log_mutex;
  parallel_for(cells.size(), cfg.workers, [&](std::size_t c) {
    const auto& grp = groups[cells[c].first];
    detail::FoldRunner runner(cfg, grp, cells[c].second);
    per_cell[c] = runner.run(cfg.methods);
    if (progress) {
      std::lock_guard lock(log_mutex);
      std::ostringstream msg;
      msg << datagen::to_string(grp.generator) << " m=" << grp.m << " fold=" << cells[c].second << " done";
      for (const auto& r : per_cell[c])
        if (r.failed()) msg << "\n  " << r.method << " failed: " << r.error;
      progress(msg.str());
    }
  });
  for (auto& rows : per_cell)
    for (auto& r : rows) run.results.push_back(std::move(r));
  sort_results(cfg, run.results);
  return run;
}

// ---- aggregation ----

struct SummaryRow {
  std::string dataset;
  std::string method;
  std::size_t m = 0;
  std::size_t folds = 0;  // successful rows averaged
  std::optional<double> auroc, auprc, best_p, best_2p;
  std::optional<double> best_p_sd;
};

struct OverallRow {
  std::string dataset;
  std::string method;
  std::size_t m_count = 0;
  std::optional<double> auroc, auprc, best_p, best_2p;
};

namespace detail {

struct Mean {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (!v) return;
    sum += *v;
    sum_sq += *v * *v;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
  std::optional<double> sd() const {
    if (n < 2) return std::nullopt;
    const double mu = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, (sum_sq - static_cast<double>(n) * mu * mu) / static_cast<double>(n - 1)));
  }
};

}  // namespace detail

// Mean over folds per (dataset, method, m); failed rows are left out. Keeps
// the input order of first appearance.
inline std::vector<SummaryRow> aggregate(const std::vector<BenchmarkResult>& results) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> index;
  std::vector<std::array<detail::Mean, 4>> acc;
  for (const auto& r : results) {
    const auto key = std::tuple(r.dataset, r.method, r.m);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.dataset, r.method, r.m, 0, {}, {}, {}, {}, {}});
      acc.emplace_back();
    }
    if (r.failed()) continue;
    auto& a = acc[it->second];
    a[0].add(r.auroc);
    a[1].add(r.auprc);
    a[2].add(r.best_p);
    a[3].add(r.best_2p);
    ++out[it->second].folds;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].auroc = acc[i][0].mean();
    out[i].auprc = acc[i][1].mean();
    out[i].best_p = acc[i][2].mean();
    out[i].best_2p = acc[i][3].mean();
    out[i].best_p_sd = acc[i][2].sd();
  }
  return out;
}

// Mean over m of the per-m fold means, one row per (dataset, method).
inline std::vector<OverallRow> average_over_m(const std::vector<SummaryRow>& rows) {
  std::vector<OverallRow> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::array<detail::Mean, 4>> acc;
  for (const auto& r : rows) {
    const auto key = std::pair(r.dataset, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.dataset, r.method, 0, {}, {}, {}, {}});
      acc.emplace_back();
    }
    auto& a = acc[it->second];
    a[0].add(r.auroc);
    a[1].add(r.auprc);
    a[2].add(r.best_p);
    a[3].add(r.best_2p);
    ++out[it->second].m_count;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].auroc = acc[i][0].mean();
    out[i].auprc = acc[i][1].mean();
    out[i].best_p = acc[i][2].mean();
    out[i].best_2p = acc[i][3].mean();
  }
  return out;
}

// ---- report files ----

inline constexpr std::string_view kResultsHeader =
    "dataset,method,m,n,fold,auroc,auprc,best_p,best_2p,wall_time_ms,seed_trace";

namespace detail {
inline std::string cell(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }
inline std::optional<double> parse_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return io::parse_double(s);
}
inline io::Json json_value(const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); }
}  // namespace detail

// Failed rows leave every metric blank; their diagnostics go to the summary.
inline void write_results_csv(std::ostream& out, const std::vector<BenchmarkResult>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows)
    out << r.dataset << ',' << r.method << ',' << r.m << ',' << r.n << ',' << r.fold << ',' << detail::cell(r.auroc)
        << ',' << detail::cell(r.auprc) << ',' << detail::cell(r.best_p) << ',' << detail::cell(r.best_2p) << ','
        << io::format_double(r.wall_time_ms) << ',' << r.seed_trace << '\n';
}

inline std::vector<BenchmarkResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || io::split_csv_line(line) != io::split_csv_line(kResultsHeader))
    throw std::invalid_argument("results csv: unexpected header");
  std::vector<BenchmarkResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = io::split_csv_line(line);
    if (c.size() != 11) throw std::invalid_argument("results csv: expected 11 columns, got " + std::to_string(c.size()));
    BenchmarkResult r;
    r.dataset = c[0];
    r.method = c[1];
    r.m = std::stoull(c[2]);
    r.n = std::stoull(c[3]);
    r.fold = std::stoull(c[4]);
    r.auroc = detail::parse_cell(c[5]);
    r.auprc = detail::parse_cell(c[6]);
    r.best_p = detail::parse_cell(c[7]);
    r.best_2p = detail::parse_cell(c[8]);
    r.wall_time_ms = io::parse_double(c[9]);
    r.seed_trace = std::stoull(c[10]);
    const MethodInfo& info = method_info(r.method);
    const bool scored = info.family != Family::Network;
    if ((scored && !r.best_p) || (info.predictive && !r.auroc)) r.error = "failed (see summary)";
    rows.push_back(std::move(r));
  }
  return rows;
}

inline io::Json summary_json(const BenchmarkRun& run) {
  const auto per_m = aggregate(run.results);
  io::Json jm = io::Json::array();
  for (const auto& r : per_m)
    jm.push_back({{"dataset", r.dataset},
                  {"method", r.method},
                  {"m", r.m},
                  {"folds", r.folds},
                  {"auroc", detail::json_value(r.auroc)},
                  {"auprc", detail::json_value(r.auprc)},
                  {"best_p", detail::json_value(r.best_p)},
                  {"best_2p", detail::json_value(r.best_2p)},
                  {"best_p_sd", detail::json_value(r.best_p_sd)}});
  io::Json jo = io::Json::array();
  for (const auto& r : average_over_m(per_m))
    jo.push_back({{"dataset", r.dataset},
                  {"method", r.method},
                  {"m_count", r.m_count},
                  {"auroc", detail::json_value(r.auroc)},
                  {"auprc", detail::json_value(r.auprc)},
                  {"best_p", detail::json_value(r.best_p)},
                  {"best_2p", detail::json_value(r.best_2p)}});
  io::Json failures = io::Json::array();
  for (const auto& r : run.results)
    if (r.failed())
      failures.push_back({{"dataset", r.dataset}, {"method", r.method}, {"m", r.m}, {"fold", r.fold}, {"error", r.error}});
  io::Json rel = io::Json::object();
  for (const auto& [name, by_m] : run.relevant_count) {
    io::Json e = io::Json::object();
    for (const auto& [m, p] : by_m) e[std::to_string(m)] = p;
    rel[name] = e;
  }
  return io::Json{{"config", config_to_json(run.config)},
                  {"relevant_count", rel},
                  {"per_m", jm},
                  {"averaged_over_m", jo},
                  {"failures", failures}};
}

// Long-format plot data for one dataset: x = m, one series per method plus
// the random-ranking baseline.
inline void write_plot_csv(std::ostream& out, const std::vector<SummaryRow>& rows, std::string_view dataset,
                           const std::map<std::size_t, std::size_t>& relevant_by_m) {
  out << "m,series,best_p,best_2p,auroc,auprc\n";
  std::set<std::size_t> ms;
  for (const auto& r : rows)
    if (r.dataset == dataset) ms.insert(r.m);
  for (std::size_t m : ms) {
    const auto it = relevant_by_m.find(m);
    if (it != relevant_by_m.end() && it->second > 0)
      out << m << ",dummy_baseline," << io::format_double(metrics::random_best_p(it->second, m)) << ','
          << io::format_double(metrics::random_best_2p(it->second, m)) << ",0.5,\n";
    for (const auto& r : rows)
      if (r.dataset == dataset && r.m == m)
        out << m << ',' << r.method << ',' << detail::cell(r.best_p) << ',' << detail::cell(r.best_2p) << ','
            << detail::cell(r.auroc) << ',' << detail::cell(r.auprc) << '\n';
  }
}

// results.csv, summary.json and plot_<dataset>.csv under `dir`.
inline void write_report(const std::filesystem::path& dir, const BenchmarkRun& run) {
  std::filesystem::create_directories(dir);
  {
    auto f = io::open_out((dir / "results.csv").string());
    write_results_csv(f, run.results);
  }
  io::write_json((dir / "summary.json").string(), summary_json(run));
  const auto per_m = aggregate(run.results);
  std::vector<std::string> datasets;
  for (const auto& r : per_m)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  for (const auto& d : datasets) {
    auto f = io::open_out((dir / ("plot_" + d + ".csv")).string());
    const auto it = run.relevant_count.find(d);
    write_plot_csv(f, per_m, d, it == run.relevant_count.end() ? std::map<std::size_t, std::size_t>{} : it->second);
  }
}

// Rebuilds a run from results.csv plus the summary written next to it.
inline BenchmarkRun load_run(const std::filesystem::path& dir) {
  BenchmarkRun run;
  {
    auto f = io::open_in((dir / "results.csv").string());
    run.results = read_results_csv(f);
  }
  const auto summary_path = dir / "summary.json";
  if (std::filesystem::exists(summary_path)) {
    const auto j = io::read_json(summary_path.string());
    if (j.contains("relevant_count"))
      for (const auto& [name, by_m] : j.at("relevant_count").items())
        for (const auto& [m, p] : by_m.items()) run.relevant_count[name][std::stoull(m)] = p.get<std::size_t>();
    if (j.contains("failures"))
      for (const auto& f : j.at("failures"))
        for (auto& r : run.results)
          if (r.dataset == f.at("dataset") && r.method == f.at("method") && r.m == f.at("m").get<std::size_t>() &&
              r.fold == f.at("fold").get<std::size_t>())
            r.error = f.at("error").get<std::string>();
    if (j.contains("config")) {
      const auto& c = j.at("config");
      run.config.profile = c.value("profile", run.config.profile);
      run.config.n = c.value("n", run.config.n);
      run.config.base_seed = c.value("base_seed", run.config.base_seed);
    }
  }
  for (const auto& r : run.results) {
    if (r.dataset == "dag" || r.dataset == "dag_correlated") continue;
    auto& by_m = run.relevant_count[r.dataset];
    if (!by_m.contains(r.m)) by_m[r.m] = datagen::predictive_count(datagen::parse_generator(r.dataset));
  }
  return run;
}

}  // namespace fsbench::harness
