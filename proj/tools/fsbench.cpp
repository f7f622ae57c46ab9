#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "fsbench/fsbench.hpp"

namespace fs = std::filesystem;
using namespace fsbench;
using io::Json;

namespace {

std::string sidecar_path(const std::string& csv) { return fs::path(csv).replace_extension(".json").string(); }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string dashes_to_underscores(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

struct RunOptions {
  std::string config;
  std::string out = "results";
  std::string profile;
  std::size_t workers = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  bool omit_timing = false;
  bool quiet = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--profile", o.profile, "Preset")->check(CLI::IsMember({"full", "ci"}));
  cmd->add_option("--workers", o.workers, "Concurrent (dataset, m, fold) cells");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--datasets", o.datasets, "Subset of datasets");
  cmd->add_option("--methods", o.methods, "Subset of methods");
  cmd->add_flag("--omit-timing", o.omit_timing, "Write wall_time_ms as 0 for byte-comparable output");
  cmd->add_flag("--quiet", o.quiet, "No progress output");
}

harness::BenchmarkConfig build_config(const RunOptions& o) {
  Json j = o.config.empty() ? Json::object() : io::read_json(o.config);
  if (!o.profile.empty()) j["profile"] = o.profile;
  if (o.workers) j["workers"] = o.workers;
  if (o.seed) j["base_seed"] = *o.seed;
  if (!o.datasets.empty()) j["datasets"] = o.datasets;
  if (!o.methods.empty()) {
    Json names = Json::array();
    for (const auto& m : o.methods) names.push_back(dashes_to_underscores(m));
    j["methods"] = names;
  }
  if (o.omit_timing) j["omit_timing"] = true;
  return harness::config_from_json(j);
}

std::string fmt(const std::optional<double>& v, int precision = 1) {
  if (!v) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << *v;
  return s.str();
}

void print_table(const std::vector<harness::BenchmarkResult>& results) {
  const auto overall = harness::average_over_m(harness::aggregate(results));
  std::cout << std::left << std::setw(16) << "dataset" << std::setw(26) << "method" << std::right << std::setw(8)
            << "best_p" << std::setw(9) << "best_2p" << std::setw(8) << "auroc" << std::setw(8) << "auprc" << std::setw(5)
            << "m" << '\n';
  for (const auto& r : overall)
    std::cout << std::left << std::setw(16) << r.dataset << std::setw(26) << r.method << std::right << std::setw(8)
              << fmt(r.best_p) << std::setw(9) << fmt(r.best_2p) << std::setw(8) << fmt(r.auroc, 3) << std::setw(8)
              << fmt(r.auprc, 3) << std::setw(5) << r.m_count << '\n';
}

harness::ProgressFn progress_logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& msg) { std::clog << msg << '\n'; };
}

std::string results_text(const std::vector<harness::BenchmarkResult>& rows) {
  std::ostringstream s;
  harness::write_results_csv(s, rows);
  return s.str();
}

io::LabeledData load_data(const std::string& path) { return io::read_dataset_csv(path); }

// Per-row scores followed by a "global" row.
void write_scores_csv(const std::string& path, const Matrix& scores, std::span<const double> global,
                      const std::vector<std::string>& comments) {
  ensure_parent(path);
  auto f = io::open_out(path);
  for (const auto& c : comments) f << "# " << c << '\n';
  f << "row";
  for (const auto& h : io::feature_header(scores.cols())) f << ',' << h;
  f << '\n';
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    f << r;
    for (double v : scores.row(r)) f << ',' << io::format_double(v);
    f << '\n';
  }
  f << "global";
  for (double v : global) f << ',' << io::format_double(v);
  f << '\n';
}

void write_ranking(const std::string& path, const Json& j) {
  ensure_parent(path);
  io::write_json(path, j);
}

knockoffs::KnockoffMatrix read_knockoffs(const std::string& path, const Matrix& x) {
  auto f = io::open_in(path);
  auto t = io::read_matrix_csv(f);
  if (t.values.rows() != x.rows() || t.values.cols() != x.cols())
    throw std::invalid_argument("knockoff file '" + path + "' does not match the data shape");
  knockoffs::KnockoffMatrix k{std::move(t.values), knockoffs::Construction::Uniform, {}};
  for (const auto& c : t.comments)
    if (c == "construction: gaussian_modelx") k.construction = knockoffs::Construction::GaussianModelX;
  return k;
}

knockoffs::KnockoffMatrix make_knockoffs(const Matrix& x, const std::string& construction, std::uint64_t seed) {
  if (construction == "uniform") return knockoffs::gen_uniform_knockoffs(x, seed);
  return knockoffs::gen_gaussian_knockoffs(x, seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature selection and attribution benchmark on synthetic data"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset as CSV plus a JSON sidecar");
  std::string gen_dataset = "ring", gen_out;
  std::size_t gen_n = 1000, gen_m = 64, gen_irrelevant = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--dataset", gen_dataset, "ring, xor, ring_xor, ring_xor_sum or dag");
  gen->add_option("--n", gen_n, "Rows (even)");
  gen->add_option("--m", gen_m, "Columns");
  gen->add_option("--irrelevant", gen_irrelevant, "DAG: decoy columns (default m/2)");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // run / verify / report
  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run the benchmark and write results.csv, summary.json and plot data");
  add_run_options(run, run_opts);
  auto* verify = app.add_subcommand("verify", "Run twice and check the results are bit-identical");
  add_run_options(verify, run_opts);
  auto* report = app.add_subcommand("report", "Rebuild summary and plot files from an existing results.csv");
  std::string report_dir = "results";
  report->add_option("--out", report_dir, "Directory holding results.csv and summary.json");

  // train
  auto* train = app.add_subcommand("train", "Train an MLP on a dataset CSV");
  std::string train_data, train_out;
  std::uint64_t train_seed = 0;
  std::size_t train_epochs = 1000;
  train->add_option("--data", train_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Model JSON")->required();
  train->add_option("--seed", train_seed, "Seed");
  train->add_option("--epochs", train_epochs, "Maximum epochs");

  // attribute
  auto* attr = app.add_subcommand("attribute", "Per-instance and global attribution scores");
  std::string attr_method, attr_model, attr_data, attr_out;
  std::uint64_t attr_seed = 0;
  attr->add_option("--method", attr_method, "Attribution method")->required();
  attr->add_option("--model", attr_model, "Model JSON")->required()->check(CLI::ExistingFile);
  attr->add_option("--data", attr_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  attr->add_option("--out", attr_out, "Scores CSV")->required();
  attr->add_option("--seed", attr_seed, "Seed for stochastic methods");

  // fit-forest / shap
  auto* fit = app.add_subcommand("fit-forest", "Fit a random forest and report impurity importance");
  std::string fit_data, fit_out;
  forest::ForestConfig fit_cfg;
  fit->add_option("--data", fit_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_out, "Forest JSON")->required();
  fit->add_option("--trees", fit_cfg.n_trees, "Number of trees");
  fit->add_option("--mtry", fit_cfg.mtry, "Features per split (0: sqrt(m))");
  fit->add_option("--max-depth", fit_cfg.max_depth, "Depth limit (0: none)");
  fit->add_option("--threads", fit_cfg.threads, "Worker threads (0: all)");
  fit->add_option("--seed", fit_cfg.seed, "Seed");

  auto* shap = app.add_subcommand("shap", "TreeSHAP values of a fitted forest");
  std::string shap_forest, shap_data, shap_out;
  std::size_t shap_threads = 1;
  shap->add_option("--forest", shap_forest, "Forest JSON")->required()->check(CLI::ExistingFile);
  shap->add_option("--data", shap_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  shap->add_option("--out", shap_out, "SHAP CSV")->required();
  shap->add_option("--threads", shap_threads, "Worker threads");

  // filter
  auto* filt = app.add_subcommand("filter", "Rank features with mi, mrmr or relief");
  std::string filt_method, filt_data, filt_out;
  std::size_t filt_k = 0, filt_bins = filters::kDefaultBins, filt_neighbors = 10, filt_threads = 1;
  std::uint64_t filt_seed = 0;
  bool filt_minmax = false;
  filt->add_option("--method", filt_method, "mi, mrmr or relief")
      ->required()
      ->check(CLI::IsMember({"mi", "mrmr", "relief"}));
  filt->add_option("--data", filt_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  filt->add_option("--out", filt_out, "Ranking JSON")->required();
  filt->add_option("--k", filt_k, "mrmr: features to select (default all)");
  filt->add_option("--bins", filt_bins, "Histogram bins");
  filt->add_option("--neighbors", filt_neighbors, "relief: neighbours per class");
  filt->add_option("--threads", filt_threads, "relief: worker threads");
  filt->add_option("--seed", filt_seed, "Tie-break seed");
  filt->add_flag("--minmax", filt_minmax, "Min-max scale columns first (non-uniform data)");

  // embedded
  auto* emb = app.add_subcommand("embedded", "Train CancelOut or DeepPINK and report gate importance");
  std::string emb_method, emb_data, emb_out, emb_knockoffs, emb_construction = "gaussian";
  std::uint64_t emb_seed = 0;
  std::size_t emb_epochs = 0;
  emb->add_option("--method", emb_method, "cancelout-sigmoid, cancelout-softmax or deeppink")
      ->required()
      ->transform([](std::string s) { return dashes_to_underscores(std::move(s)); })
      ->check(CLI::IsMember({"cancelout_sigmoid", "cancelout_softmax", "deeppink"}));
  emb->add_option("--data", emb_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  emb->add_option("--out", emb_out, "Ranking JSON")->required();
  emb->add_option("--knockoffs", emb_knockoffs, "deeppink: cached knockoff CSV")->check(CLI::ExistingFile);
  emb->add_option("--construction", emb_construction, "deeppink: knockoffs to build when none are given")
      ->check(CLI::IsMember({"uniform", "gaussian"}));
  emb->add_option("--seed", emb_seed, "Seed");
  emb->add_option("--epochs", emb_epochs, "Epoch budget (default per method)");

  // knockoffs
  auto* knock = app.add_subcommand("knockoffs", "Build a knockoff matrix and cache it as CSV");
  std::string knock_data, knock_out, knock_construction = "gaussian";
  std::uint64_t knock_seed = 0;
  knock->add_option("--data", knock_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  knock->add_option("--out", knock_out, "Knockoff CSV")->required();
  knock->add_option("--construction", knock_construction, "uniform or gaussian")
      ->check(CLI::IsMember({"uniform", "gaussian"}));
  knock->add_option("--seed", knock_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto g = datagen::parse_generator(dashes_to_underscores(gen_dataset));
      datagen::DagParams dag;
      dag.n = gen_n;
      dag.m = gen_m;
      dag.n_irrelevant = gen_irrelevant ? gen_irrelevant : gen_m / 2;
      const auto d = datagen::generate(g, gen_n, gen_m, gen_seed, dag);
      ensure_parent(gen_out);
      io::write_dataset_csv(gen_out, d.features, d.labels);
      io::write_json(sidecar_path(gen_out), io::dataset_sidecar(d));
      std::cout << "wrote " << gen_out << " (" << d.n() << " x " << d.m() << ") and " << sidecar_path(gen_out) << '\n';
    } else if (run->parsed()) {
      const auto cfg = build_config(run_opts);
      const auto result = harness::run_benchmark(cfg, progress_logger(run_opts.quiet));
      harness::write_report(run_opts.out, result);
      print_table(result.results);
      std::cout << "wrote " << (fs::path(run_opts.out) / "results.csv").string() << '\n';
    } else if (verify->parsed()) {
      auto opts = run_opts;
      opts.omit_timing = true;
      const auto cfg = build_config(opts);
      const auto first = harness::run_benchmark(cfg, progress_logger(opts.quiet));
      const auto second = harness::run_benchmark(cfg, progress_logger(opts.quiet));
      harness::write_report(opts.out, first);
      const auto a = results_text(first.results), b = results_text(second.results);
      if (a != b) {
        std::istringstream sa(a), sb(b);
        std::string la, lb;
        for (std::size_t line = 1; std::getline(sa, la) && std::getline(sb, lb); ++line)
          if (la != lb) {
            std::cout << "MISMATCH at line " << line << "\n  first:  " << la << "\n  second: " << lb << '\n';
            break;
          }
        return 1;
      }
      std::cout << "bit-identical: " << first.results.size() << " rows\n";
    } else if (report->parsed()) {
      const auto loaded = harness::load_run(report_dir);
      harness::write_report(report_dir, loaded);
      print_table(loaded.results);
    } else if (train->parsed()) {
      const auto data = load_data(train_data);
      nn::TrainConfig cfg;
      cfg.seed = train_seed;
      cfg.max_epochs = train_epochs;
      const auto trained = nn::train_mlp(data.features, data.labels, cfg);
      Json j = io::to_json(trained.model);
      j["best_epoch"] = trained.history.best_epoch;
      j["epochs_run"] = trained.history.train_loss.size() - 1;
      j["seed"] = train_seed;
      ensure_parent(train_out);
      io::write_json(train_out, j);
      std::cout << "best epoch " << trained.history.best_epoch << ", wrote " << train_out << '\n';
    } else if (attr->parsed()) {
      const auto model = io::mlp_from_json(io::read_json(attr_model));
      const auto data = load_data(attr_data);
      attribution::AttributionConfig ac;
      ac.seed = attr_seed;
      const auto method = attribution::parse_method(dashes_to_underscores(attr_method));
      const auto res = attribution::attribute(model, nn::prepare_inputs(model, data.features), method, ac);
      write_scores_csv(attr_out, res.instance_scores, res.global_importance.scores,
                       {"method: " + std::string(attribution::to_string(method)), "seed: " + std::to_string(attr_seed)});
      std::cout << "wrote " << attr_out << '\n';
    } else if (fit->parsed()) {
      const auto data = load_data(fit_data);
      const auto f = forest::fit_forest(data.features, data.labels, fit_cfg);
      Json j = io::to_json(f);
      j["impurity_importance"] = forest::impurity_importance(f, fit_cfg.seed).scores;
      ensure_parent(fit_out);
      io::write_json(fit_out, j);
      std::cout << "wrote " << fit_out << '\n';
    } else if (shap->parsed()) {
      const auto f = io::forest_from_json(io::read_json(shap_forest));
      const auto data = load_data(shap_data);
      const auto sv = forest::tree_shap(f, data.features, shap_threads);
      std::vector<double> global(sv.phi.cols(), 0.0);
      for (std::size_t r = 0; r < sv.phi.rows(); ++r)
        for (std::size_t c = 0; c < sv.phi.cols(); ++c) global[c] += std::abs(sv.phi(r, c));
      for (double& g : global) g /= static_cast<double>(std::max<std::size_t>(1, sv.phi.rows()));
      write_scores_csv(shap_out, sv.phi, global,
                       {"expected_value: " + io::format_double(sv.base_value), "global: mean |phi|"});
      std::cout << "wrote " << shap_out << '\n';
    } else if (filt->parsed()) {
      const auto data = load_data(filt_data);
      const Matrix x = filt_minmax ? minmax_scale(data.features) : data.features;
      Json j;
      if (filt_method == "mi") {
        j = io::to_json(filters::mi_rank(x, data.labels, filt_bins, filt_seed), "mi");
      } else if (filt_method == "mrmr") {
        const auto res = filters::mrmr_select(x, data.labels, filt_k ? filt_k : x.cols(), filt_bins, filt_seed);
        j = io::to_json(res.importance, "mrmr");
        j["selected"] = res.selected;
      } else {
        filters::ReliefConfig rc;
        rc.k_neighbors = filt_neighbors;
        rc.seed = filt_seed;
        rc.threads = filt_threads;
        j = io::to_json(filters::relieff(x, data.labels, rc), "relief");
      }
      write_ranking(filt_out, j);
      std::cout << "wrote " << filt_out << '\n';
    } else if (emb->parsed()) {
      const auto data = load_data(emb_data);
      nn::TrainConfig tc;
      tc.seed = emb_seed;
      Json j;
      if (emb_method == "deeppink") {
        if (emb_epochs) tc.max_epochs = emb_epochs;
        const auto k = emb_knockoffs.empty() ? make_knockoffs(data.features, emb_construction, emb_seed)
                                             : read_knockoffs(emb_knockoffs, data.features);
        const auto res = embedded::train_deeppink(data.features, k, data.labels, tc);
        j = io::to_json(res.importance, "deeppink");
        j["knockoffs"] = std::string(knockoffs::to_string(k.construction));
      } else {
        embedded::CancelOutConfig co;
        co.variant = emb_method == "cancelout_sigmoid" ? embedded::CancelOutVariant::Sigmoid
                                                       : embedded::CancelOutVariant::Softmax;
        if (emb_epochs) co.epochs = emb_epochs;
        const auto res = embedded::train_cancelout(data.features, data.labels, tc, co);
        j = io::to_json(res.importance, emb_method);
        j["gates"] = res.model.gates();
      }
      write_ranking(emb_out, j);
      std::cout << "wrote " << emb_out << '\n';
    } else if (knock->parsed()) {
      const auto data = load_data(knock_data);
      const auto k = make_knockoffs(data.features, knock_construction, knock_seed);
      std::vector<std::string> provenance{"fsbench knockoffs",
                                          "construction: " + std::string(knockoffs::to_string(k.construction)),
                                          "seed: " + std::to_string(knock_seed), "source: " + knock_data,
                                          "shape: " + std::to_string(data.features.rows()) + "x" +
                                              std::to_string(data.features.cols())};
      if (!k.d_diag.empty()) provenance.push_back("s: " + io::format_double(k.d_diag.front()));
      ensure_parent(knock_out);
      auto f = io::open_out(knock_out);
      io::write_matrix_csv(f, k.x_tilde, io::feature_header(data.features.cols(), "k"), provenance);
      std::cout << "wrote " << knock_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
