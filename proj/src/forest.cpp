#include "greybox/forest.hpp"

#include <algorithm>
#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

std::array<double, 2> RandomForestModel::predict_proba_row(std::span<const double> x) const {
  check_dimension(x.size());
  int votes[2] = {0, 0};
  for (const auto& tree : trees_) {
    auto p = DecisionTreeModel::walk(tree, x);
    votes[p[1] > p[0] ? 1 : 0]++;
  }
  double n = static_cast<double>(trees_.size());
  return {votes[0] / n, votes[1] / n};
}

std::unique_ptr<RandomForestModel> fit_forest(const Dataset& train, const TrainConfig& cfg) {
  if (train.n() == 0) throw error("fit_forest: empty training set");
  cfg.validate();
  const std::size_t n = train.n();
  const int d = static_cast<int>(train.d());

  TrainConfig::Forest params = cfg.forest;
  if (params.features_per_split <= 0)
    params.features_per_split = static_cast<int>(std::floor(std::log2(static_cast<double>(d)))) + 1;
  params.features_per_split = std::min(params.features_per_split, d);

  std::vector<std::vector<TreeNode>> trees(params.n_trees);
  parallel_for(static_cast<std::size_t>(params.n_trees), [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, "forest-tree", t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.next_below(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    trees[t] = grow_tree(train.features, train.labels, std::move(rows),
                         params.min_leaf_count, params.features_per_split, &rng);
  });

  auto m = std::make_unique<RandomForestModel>(std::move(trees), train.d(), params);
  m->set_provenance(cfg.seed, train.schema_fingerprint);
  return m;
}

}  // namespace greybox
