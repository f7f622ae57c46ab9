#pragma once

// Persistence: round-trip CSV for matrices and datasets, JSON for models,
// forests, importance vectors and dataset sidecars.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fsbench/datagen.hpp"
#include "fsbench/forest.hpp"
#include "fsbench/importance.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/nn.hpp"

namespace fsbench::io {

using Json = nlohmann::json;

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("parse_double: not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  return f;
}

// Numeric CSV with a header row. Lines starting with '#' before the header
// are provenance comments and are returned separately by read_matrix_csv.
inline void write_matrix_csv(std::ostream& out, const Matrix& x, const std::vector<std::string>& header,
                             const std::vector<std::string>& comments = {}) {
  if (header.size() != x.cols()) throw std::invalid_argument("write_matrix_csv: header width mismatch");
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  Matrix values;
};

inline CsvTable read_matrix_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      t.comments.push_back(line.substr(2));
      continue;
    }
    t.header = split_csv_line(line);
    break;
  }
  if (t.header.empty()) throw std::invalid_argument("read_matrix_csv: missing header");
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw std::invalid_argument("read_matrix_csv: row " + std::to_string(rows + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " + std::to_string(t.header.size()));
    for (const auto& c : cells) flat.push_back(parse_double(c));
    ++rows;
  }
  t.values = Matrix(rows, t.header.size());
  std::copy(flat.begin(), flat.end(), t.values.values().begin());
  return t;
}

inline std::vector<std::string> feature_header(std::size_t m, std::string_view prefix = "f") {
  std::vector<std::string> h(m);
  for (std::size_t j = 0; j < m; ++j) h[j] = std::string(prefix) + std::to_string(j);
  return h;
}

// ---- datasets ----

// Features f0..f{m-1} then a trailing "label" column.
inline void write_dataset_csv(const std::string& path, const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw std::invalid_argument("write_dataset_csv: row/label count mismatch");
  Matrix joined = hstack(x, Matrix(x.rows(), 1));
  for (std::size_t r = 0; r < x.rows(); ++r) joined(r, x.cols()) = y[r];
  auto header = feature_header(x.cols());
  header.emplace_back("label");
  auto f = open_out(path);
  write_matrix_csv(f, joined, header);
}

struct LabeledData {
  Matrix features;
  Labels labels;
};

inline LabeledData read_dataset_csv(const std::string& path) {
  auto f = open_in(path);
  const CsvTable t = read_matrix_csv(f);
  if (t.header.size() < 2 || t.header.back() != "label")
    throw std::invalid_argument("read_dataset_csv: last column must be 'label'");
  const std::size_t m = t.header.size() - 1;
  LabeledData out{Matrix(t.values.rows(), m), Labels(t.values.rows())};
  for (std::size_t r = 0; r < t.values.rows(); ++r) {
    for (std::size_t c = 0; c < m; ++c) out.features(r, c) = t.values(r, c);
    const double v = t.values(r, m);
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("read_dataset_csv: labels must be 0 or 1");
    out.labels[r] = static_cast<int>(v);
  }
  return out;
}

inline Json dataset_sidecar(const datagen::SyntheticDataset& d) {
  Json j{{"generator", std::string(datagen::to_string(d.generator))},
         {"n", d.n()},
         {"m", d.m()},
         {"seed", d.seed},
         {"relevant_idx", d.relevant_idx}};
  Json params = Json::object();
  switch (d.generator) {
    case datagen::Generator::Ring:
      params = Json{{"radius", datagen::rules::kRingRadius}, {"ring_half_width", datagen::rules::kRingHalfWidth}};
      break;
    case datagen::Generator::Xor:
      params = Json{{"xor_threshold", 0.0}};
      break;
    case datagen::Generator::RingXor:
      params = Json{{"radius", datagen::rules::kRingRadius},
                {"ring_half_width", datagen::rules::kRingXorRingHalfWidth},
                {"xor_threshold", datagen::rules::kRingXorXorThreshold}};
      break;
    case datagen::Generator::RingXorSum:
      params = Json{{"radius", datagen::rules::kRingRadius},
                {"ring_half_width", datagen::rules::kSumRingHalfWidth},
                {"xor_threshold", datagen::rules::kSumXorThreshold},
                {"sum_threshold", datagen::rules::kSumThreshold},
                {"sum_noise_sd", datagen::rules::kSumNoiseSd}};
      break;
    case datagen::Generator::Dag:
      break;
  }
  j["parameters"] = params;
  if (!d.sum_noise.empty()) j["sum_noise"] = d.sum_noise;
  if (d.dag) {
    Json edges = Json::array();
    for (const auto& e : d.dag->edges) edges.push_back({e.from, e.to, e.weight});
    j["dag"] = {{"edges", edges},
                {"y_parents", d.dag->y_parents},
                {"y_weights", d.dag->y_weights},
                {"causal_idx", d.dag->causal_idx},
                {"correlated_idx", d.dag->correlated_idx},
                {"irrelevant_idx", d.dag->irrelevant_idx},
                {"noise_sigma", d.dag->noise_sigma},
                {"attempts", d.dag->attempts}};
  }
  return j;
}

inline void write_json(const std::string& path, const Json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  auto f = open_in(path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

// ---- models ----

inline Json to_json(const nn::MlpModel& model) {
  const auto p = model.parameters();
  return Json{{"kind", "mlp"},
              {"dims", model.layer_dims()},
              {"negative_slope", model.negative_slope()},
              {"centered_inputs", model.centered_inputs()},
              {"parameters", std::vector<double>(p.begin(), p.end())}};
}

inline nn::MlpModel mlp_from_json(const Json& j) {
  if (j.value("kind", "") != "mlp") throw std::invalid_argument("mlp_from_json: not an mlp document");
  nn::MlpModel model(j.at("dims").get<std::vector<std::size_t>>(), j.at("negative_slope").get<double>());
  model.set_centered_inputs(j.at("centered_inputs").get<bool>());
  const auto params = j.at("parameters").get<std::vector<double>>();
  auto dst = model.parameters();
  if (params.size() != dst.size()) throw std::invalid_argument("mlp_from_json: parameter count mismatch");
  std::copy(params.begin(), params.end(), dst.begin());
  return model;
}

inline Json to_json(const forest::RandomForest& f) {
  Json trees = Json::array();
  for (const auto& t : f.trees) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.cover, n.class_counts[0], n.class_counts[1], n.value});
    trees.push_back(std::move(nodes));
  }
  const auto& c = f.config;
  return Json{{"kind", "random_forest"},
              {"n_features", f.n_features},
              {"config",
               {{"n_trees", c.n_trees},
                {"mtry", c.mtry},
                {"max_depth", c.max_depth},
                {"min_samples_split", c.min_samples_split},
                {"bootstrap", c.bootstrap},
                {"seed", c.seed}}},
              {"node_fields", {"feature", "threshold", "left", "right", "cover", "count0", "count1", "value"}},
              {"trees", trees}};
}

inline forest::RandomForest forest_from_json(const Json& j) {
  if (j.value("kind", "") != "random_forest") throw std::invalid_argument("forest_from_json: not a forest document");
  forest::RandomForest f;
  f.n_features = j.at("n_features").get<std::size_t>();
  const auto& c = j.at("config");
  f.config.n_trees = c.at("n_trees").get<std::size_t>();
  f.config.mtry = c.at("mtry").get<std::size_t>();
  f.config.max_depth = c.at("max_depth").get<std::size_t>();
  f.config.min_samples_split = c.at("min_samples_split").get<std::size_t>();
  f.config.bootstrap = c.at("bootstrap").get<bool>();
  f.config.seed = c.at("seed").get<std::uint64_t>();
  for (const auto& tj : j.at("trees")) {
    forest::DecisionTree t;
    for (const auto& nj : tj) {
      forest::Node n;
      n.feature = nj.at(0).get<int>();
      n.threshold = nj.at(1).get<double>();
      n.left = nj.at(2).get<int>();
      n.right = nj.at(3).get<int>();
      n.cover = nj.at(4).get<double>();
      n.class_counts = {nj.at(5).get<double>(), nj.at(6).get<double>()};
      n.value = nj.at(7).get<double>();
      if (!n.is_leaf() && (n.feature >= static_cast<int>(f.n_features) || n.left <= 0 || n.right <= 0))
        throw std::invalid_argument("forest_from_json: malformed node");
      t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw std::invalid_argument("forest_from_json: empty tree");
    f.trees.push_back(std::move(t));
  }
  return f;
}

inline Json to_json(const ImportanceVector& imp, std::string_view method) {
  return Json{{"method", std::string(method)},
              {"scores", imp.scores},
              {"tie_break_seed", imp.tie_break_seed},
              {"ranking", imp.ranking()}};
}

}  // namespace fsbench::io
