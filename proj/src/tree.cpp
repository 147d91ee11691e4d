#include "greybox/tree.hpp"

#include <algorithm>
#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

namespace {

double entropy2(std::int64_t c0, std::int64_t c1) {
  std::int64_t n = c0 + c1;
  if (n == 0) return 0.0;
  double h = 0.0;
  for (std::int64_t c : {c0, c1}) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

std::optional<SplitChoice> best_split(const Matrix& X, const std::vector<int>& y,
                                      const std::vector<std::size_t>& rows,
                                      const std::vector<int>& features) {
  const std::size_t n = rows.size();
  if (n < 2) return std::nullopt;

  std::int64_t total[2] = {0, 0};
  for (std::size_t r : rows) total[y[r]]++;
  const double node_entropy = entropy2(total[0], total[1]);
  const double dn = static_cast<double>(n);

  std::optional<SplitChoice> best;
  std::vector<std::pair<double, int>> vals(n);

  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X(rows[i], f), y[rows[i]]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::int64_t left[2] = {0, 0};
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left[vals[i].second]++;
      if (vals[i].first == vals[i + 1].first) continue;
      double t = (vals[i].first + vals[i + 1].first) / 2.0;
      if (t >= vals[i + 1].first) t = vals[i].first;  // adjacent doubles

      std::int64_t nl = static_cast<std::int64_t>(i) + 1;
      std::int64_t nr = static_cast<std::int64_t>(n) - nl;
      double wl = static_cast<double>(nl) / dn;
      double wr = static_cast<double>(nr) / dn;
      double gain = node_entropy - wl * entropy2(left[0], left[1]) -
                    wr * entropy2(total[0] - left[0], total[1] - left[1]);
      if (gain <= 0.0) continue;
      double split_info = -(wl * std::log2(wl) + wr * std::log2(wr));
      double ratio = gain / split_info;
      if (!best || ratio > best->gain_ratio)
        best = SplitChoice{f, t, gain, ratio};
    }
  }
  return best;
}

std::vector<TreeNode> grow_tree(const Matrix& X, const std::vector<int>& y,
                                std::vector<std::size_t> rows, int min_leaf_count,
                                int features_per_split, Rng* rng) {
  const int d = static_cast<int>(X.cols());
  std::vector<TreeNode> nodes;
  std::vector<int> all_features(d);
  for (int f = 0; f < d; ++f) all_features[f] = f;
  const bool sample_features = features_per_split > 0 && features_per_split < d;

  // Recursive build; children are appended after their parent so indices
  // stay stable.
  auto build = [&](auto&& self, std::vector<std::size_t> node_rows) -> int {
    std::int64_t counts[2] = {0, 0};
    for (std::size_t r : node_rows) counts[y[r]]++;

    int idx = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});
    nodes[idx].counts[0] = counts[0];
    nodes[idx].counts[1] = counts[1];

    bool pure = counts[0] == 0 || counts[1] == 0;
    if (pure || node_rows.size() < static_cast<std::size_t>(2 * min_leaf_count))
      return idx;

    std::optional<SplitChoice> choice;
    if (sample_features) {
      // Partial Fisher-Yates, then sorted so enumeration order stays
      // ascending regardless of the draw.
      std::vector<int> pool = all_features;
      std::vector<int> chosen(features_per_split);
      for (int k = 0; k < features_per_split; ++k) {
        std::size_t j = k + rng->next_below(pool.size() - k);
        std::swap(pool[k], pool[j]);
        chosen[k] = pool[k];
      }
      std::sort(chosen.begin(), chosen.end());
      choice = best_split(X, y, node_rows, chosen);
    } else {
      choice = best_split(X, y, node_rows, all_features);
    }
    if (!choice) return idx;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : node_rows)
      (X(r, choice->feature) <= choice->threshold ? left_rows : right_rows).push_back(r);
    node_rows.clear();
    node_rows.shrink_to_fit();

    nodes[idx].feature = choice->feature;
    nodes[idx].threshold = choice->threshold;
    int left = self(self, std::move(left_rows));
    nodes[idx].left = left;
    int right = self(self, std::move(right_rows));
    nodes[idx].right = right;
    return idx;
  };

  build(build, std::move(rows));
  return nodes;
}

std::array<double, 2> DecisionTreeModel::walk(const std::vector<TreeNode>& nodes,
                                              std::span<const double> x) {
  int idx = 0;
  while (!nodes[idx].is_leaf())
    idx = x[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
  double total = static_cast<double>(nodes[idx].counts[0] + nodes[idx].counts[1]);
  return {static_cast<double>(nodes[idx].counts[0]) / total,
          static_cast<double>(nodes[idx].counts[1]) / total};
}

std::array<double, 2> DecisionTreeModel::predict_proba_row(std::span<const double> x) const {
  check_dimension(x.size());
  return walk(nodes_, x);
}

std::unique_ptr<DecisionTreeModel> fit_tree(const Dataset& train, const TrainConfig& cfg) {
  if (train.n() == 0) throw error("fit_tree: empty training set");
  cfg.validate();
  std::vector<std::size_t> rows(train.n());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto nodes = grow_tree(train.features, train.labels, std::move(rows),
                         cfg.tree.min_leaf_count, 0, nullptr);
  auto m = std::make_unique<DecisionTreeModel>(std::move(nodes), train.d(), cfg.tree.min_leaf_count);
  m->set_provenance(cfg.seed, train.schema_fingerprint);
  return m;
}

}  // namespace greybox
