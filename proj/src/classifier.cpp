#include "greybox/classifier.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "greybox/baselines.hpp"
#include "greybox/forest.hpp"
#include "greybox/mlp.hpp"
#include "greybox/tree.hpp"

namespace greybox {

using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::zero_r: return "zero_r";
    case ModelKind::naive_bayes: return "naive_bayes";
    case ModelKind::tree: return "tree";
    case ModelKind::forest: return "forest";
    case ModelKind::mlp: return "mlp";
  }
  throw error("to_string: unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "zero_r") return ModelKind::zero_r;
  if (s == "naive_bayes") return ModelKind::naive_bayes;
  if (s == "tree") return ModelKind::tree;
  if (s == "forest") return ModelKind::forest;
  if (s == "mlp") return ModelKind::mlp;
  throw config_error("unknown model kind '" + s + "'");
}

void TrainConfig::validate() const {
  if (forest.n_trees < 1) throw config_error("forest.n_trees must be >= 1");
  if (forest.features_per_split < 0) throw config_error("forest.features_per_split must be >= 0");
  if (forest.min_leaf_count < 1) throw config_error("forest.min_leaf_count must be >= 1");
  if (tree.min_leaf_count < 1) throw config_error("tree.min_leaf_count must be >= 1");
  if (mlp.hidden < 1) throw config_error("mlp.hidden must be >= 1");
  if (!(mlp.learning_rate > 0.0) || !std::isfinite(mlp.learning_rate))
    throw config_error("mlp.learning_rate must be positive and finite");
  if (mlp.epochs < 0) throw config_error("mlp.epochs must be >= 0");
  if (mlp.batch_size < 1) throw config_error("mlp.batch_size must be >= 1");
}

std::vector<int> Classifier::predict(const Matrix& X) const {
  std::vector<int> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
  return out;
}

Matrix Classifier::predict_proba(const Matrix& X) const {
  Matrix out(X.rows(), 2);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto p = predict_proba_row(X.row(i));
    out(i, 0) = p[0];
    out(i, 1) = p[1];
  }
  return out;
}

void Classifier::check_dimension(std::size_t got) const {
  if (got != dimension())
    throw error(to_string(kind()) + " expects " + std::to_string(dimension()) +
                " features, got " + std::to_string(got));
}

std::unique_ptr<Classifier> train_model(ModelKind kind, const Dataset& train,
                                        const TrainConfig& cfg) {
  switch (kind) {
    case ModelKind::zero_r: return fit_zero_r(train, cfg);
    case ModelKind::naive_bayes: return fit_naive_bayes(train, cfg);
    case ModelKind::tree: return fit_tree(train, cfg);
    case ModelKind::forest: return fit_forest(train, cfg);
    case ModelKind::mlp: return fit_mlp(train, cfg);
  }
  throw error("train_model: unknown model kind");
}

void require_schema(const Classifier& m, std::uint64_t fingerprint) {
  if (m.schema_fingerprint() == 0 || fingerprint == 0) return;
  if (m.schema_fingerprint() != fingerprint)
    throw error("model was trained against schema " + hex64(m.schema_fingerprint()) +
                ", data has schema " + hex64(fingerprint));
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t expect_cols) {
  Matrix m;
  for (const auto& row : j) {
    std::vector<double> vals;
    vals.reserve(row.size());
    for (const auto& v : row) vals.push_back(v.get<double>());
    m.push_row(vals);
  }
  if (expect_cols != 0 && m.cols() != expect_cols)
    throw error("matrix has " + std::to_string(m.cols()) + " columns, expected " +
                std::to_string(expect_cols));
  return m;
}

json nodes_to_json(const std::vector<TreeNode>& nodes) {
  json arr = json::array();
  for (const auto& n : nodes) {
    arr.push_back(json{{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"counts", {n.counts[0], n.counts[1]}}});
  }
  return arr;
}

std::vector<TreeNode> nodes_from_json(const json& arr) {
  std::vector<TreeNode> nodes;
  nodes.reserve(arr.size());
  for (const auto& j : arr) {
    TreeNode n;
    n.feature = j.at("feature").get<int>();
    n.threshold = j.at("threshold").get<double>();
    n.left = j.at("left").get<int>();
    n.right = j.at("right").get<int>();
    n.counts[0] = j.at("counts").at(0).get<std::int64_t>();
    n.counts[1] = j.at("counts").at(1).get<std::int64_t>();
    nodes.push_back(n);
  }
  return nodes;
}

json payload_for(const Classifier& m) {
  switch (m.kind()) {
    case ModelKind::zero_r: {
      const auto& z = dynamic_cast<const ZeroRModel&>(m);
      return json{{"dimension", z.dimension()}, {"priors", {z.priors()[0], z.priors()[1]}}};
    }
    case ModelKind::naive_bayes: {
      const auto& nb = dynamic_cast<const NaiveBayesModel&>(m);
      return json{{"priors", {nb.priors()[0], nb.priors()[1]}},
                  {"means", matrix_to_json(nb.means())},
                  {"variances", matrix_to_json(nb.variances())}};
    }
    case ModelKind::tree: {
      const auto& t = dynamic_cast<const DecisionTreeModel&>(m);
      return json{{"dimension", t.dimension()},
                  {"min_leaf_count", t.min_leaf_count()},
                  {"nodes", nodes_to_json(t.nodes())}};
    }
    case ModelKind::forest: {
      const auto& f = dynamic_cast<const RandomForestModel&>(m);
      json trees = json::array();
      for (const auto& t : f.trees()) trees.push_back(nodes_to_json(t));
      return json{{"dimension", f.dimension()},
                  {"n_trees", f.params().n_trees},
                  {"features_per_split", f.params().features_per_split},
                  {"bootstrap", f.params().bootstrap},
                  {"min_leaf_count", f.params().min_leaf_count},
                  {"trees", std::move(trees)}};
    }
    case ModelKind::mlp: {
      const auto& net = dynamic_cast<const MlpSurrogate&>(m);
      return json{{"dimension", net.dimension()},
                  {"hidden", net.hidden()},
                  {"w1", matrix_to_json(net.w1())},
                  {"b1", net.b1()},
                  {"w2", matrix_to_json(net.w2())},
                  {"b2", {net.b2()[0], net.b2()[1]}},
                  {"final_loss", net.final_loss()}};
    }
  }
  throw error("payload_for: unknown model kind");
}

std::unique_ptr<Classifier> model_from_payload(ModelKind kind, const json& p) {
  switch (kind) {
    case ModelKind::zero_r: {
      std::array<double, 2> priors{p.at("priors").at(0).get<double>(),
                                   p.at("priors").at(1).get<double>()};
      return std::make_unique<ZeroRModel>(p.at("dimension").get<std::size_t>(), priors);
    }
    case ModelKind::naive_bayes: {
      std::array<double, 2> priors{p.at("priors").at(0).get<double>(),
                                   p.at("priors").at(1).get<double>()};
      Matrix means = matrix_from_json(p.at("means"), 0);
      Matrix variances = matrix_from_json(p.at("variances"), means.cols());
      return std::make_unique<NaiveBayesModel>(priors, std::move(means), std::move(variances));
    }
    case ModelKind::tree: {
      return std::make_unique<DecisionTreeModel>(nodes_from_json(p.at("nodes")),
                                                 p.at("dimension").get<std::size_t>(),
                                                 p.at("min_leaf_count").get<int>());
    }
    case ModelKind::forest: {
      TrainConfig::Forest params;
      params.n_trees = p.at("n_trees").get<int>();
      params.features_per_split = p.at("features_per_split").get<int>();
      params.bootstrap = p.at("bootstrap").get<bool>();
      params.min_leaf_count = p.at("min_leaf_count").get<int>();
      std::vector<std::vector<TreeNode>> trees;
      for (const auto& t : p.at("trees")) trees.push_back(nodes_from_json(t));
      return std::make_unique<RandomForestModel>(std::move(trees),
                                                 p.at("dimension").get<std::size_t>(), params);
    }
    case ModelKind::mlp: {
      auto net = std::make_unique<MlpSurrogate>(p.at("dimension").get<std::size_t>(),
                                                p.at("hidden").get<int>());
      net->w1() = matrix_from_json(p.at("w1"), net->dimension());
      net->b1() = p.at("b1").get<std::vector<double>>();
      net->w2() = matrix_from_json(p.at("w2"), static_cast<std::size_t>(net->hidden()));
      net->b2() = {p.at("b2").at(0).get<double>(), p.at("b2").at(1).get<double>()};
      net->set_final_loss(p.at("final_loss").get<double>());
      if (net->w1().rows() != static_cast<std::size_t>(p.at("hidden").get<int>()) ||
          net->b1().size() != net->w1().rows() || net->w2().rows() != 2)
        throw error("mlp payload has inconsistent layer shapes");
      return net;
    }
  }
  throw error("model_from_payload: unknown model kind");
}

}  // namespace

std::string model_to_json(const Classifier& m) {
  json j{{"format_version", 1},
         {"kind", to_string(m.kind())},
         {"train_seed", hex64(m.train_seed())},
         {"schema_fingerprint", hex64(m.schema_fingerprint())},
         {"model", payload_for(m)}};
  return j.dump();
}

std::unique_ptr<Classifier> model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw error(std::string("model file is corrupt: ") + e.what());
  }
  try {
    int version = j.at("format_version").get<int>();
    if (version != 1)
      throw error("unsupported model format_version " + std::to_string(version));
    ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    auto m = model_from_payload(kind, j.at("model"));
    m->set_provenance(std::stoull(j.at("train_seed").get<std::string>(), nullptr, 16),
                      std::stoull(j.at("schema_fingerprint").get<std::string>(), nullptr, 16));
    return m;
  } catch (const config_error& e) {
    throw error(std::string("model file is corrupt: ") + e.what());
  } catch (const json::exception& e) {
    throw error(std::string("model file is corrupt: ") + e.what());
  }
}

void save_model(const Classifier& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << model_to_json(m);
  out << '\n';
  if (!out) throw io_error("failed writing " + path);
}

std::unique_ptr<Classifier> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace greybox
