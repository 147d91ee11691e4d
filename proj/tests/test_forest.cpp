#include <vector>

#include "doctest.h"

#include "greybox/forest.hpp"
#include "greybox/rng.hpp"

using namespace greybox;

namespace {

Dataset blob_dataset(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  Dataset ds;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    for (auto& v : row) v = 0.3 * rng.next_unit() + (label ? 0.65 : 0.05);
    ds.features.push_row(row);
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace

TEST_CASE("degenerate forest predicts exactly like a single tree") {
  Dataset ds = blob_dataset(31, 120, 5);
  TrainConfig cfg;
  cfg.seed = 8;
  cfg.forest.n_trees = 1;
  cfg.forest.bootstrap = false;
  cfg.forest.features_per_split = 5;
  cfg.tree.min_leaf_count = cfg.forest.min_leaf_count;
  auto forest = fit_forest(ds, cfg);
  auto tree = fit_tree(ds, cfg);

  Rng probe(91);
  std::vector<double> x(5);
  for (int i = 0; i < 200; ++i) {
    for (auto& v : x) v = probe.next_unit();
    auto pf = forest->predict_proba_row(x);
    auto pt = tree->predict_proba_row(x);
    CHECK(pf[0] == pt[0]);
    CHECK(pf[1] == pt[1]);
  }
}

TEST_CASE("forest separates well-spaced blobs") {
  Dataset ds = blob_dataset(44, 300, 6);
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.forest.n_trees = 25;
  auto forest = fit_forest(ds, cfg);
  auto pred = forest->predict(ds.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.labels[i];
  CHECK(static_cast<double>(correct) / static_cast<double>(pred.size()) > 0.98);
}

TEST_CASE("forest training is bitwise deterministic per seed") {
  Dataset ds = blob_dataset(12, 150, 4);
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.forest.n_trees = 10;
  auto a = fit_forest(ds, cfg);
  auto b = fit_forest(ds, cfg);
  CHECK(model_to_json(*a) == model_to_json(*b));

  cfg.seed = 78;
  auto c = fit_forest(ds, cfg);
  CHECK(model_to_json(*a) != model_to_json(*c));
}

TEST_CASE("forest proba is the tree vote fraction") {
  Dataset ds = blob_dataset(9, 100, 3);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.forest.n_trees = 8;
  auto forest = fit_forest(ds, cfg);
  REQUIRE(forest->trees().size() == 8);

  Rng probe(2);
  std::vector<double> x(3);
  for (int i = 0; i < 50; ++i) {
    for (auto& v : x) v = probe.next_unit();
    int votes = 0;
    for (const auto& nodes : forest->trees()) {
      auto leaf = DecisionTreeModel::walk(nodes, x);
      votes += leaf[1] > leaf[0] ? 1 : 0;
    }
    auto p = forest->predict_proba_row(x);
    CHECK(p[1] == doctest::Approx(votes / 8.0));
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("features_per_split zero resolves to floor(log2 d) + 1") {
  Dataset ds = blob_dataset(18, 80, 9);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.forest.n_trees = 3;
  cfg.forest.features_per_split = 0;
  auto forest = fit_forest(ds, cfg);
  CHECK(forest->params().features_per_split == 4);  // floor(log2 9) + 1
}

TEST_CASE("forest rejects invalid hyperparameters") {
  Dataset ds = blob_dataset(6, 40, 3);
  TrainConfig cfg;
  cfg.forest.n_trees = 0;
  CHECK_THROWS_AS(fit_forest(ds, cfg), config_error);
}
