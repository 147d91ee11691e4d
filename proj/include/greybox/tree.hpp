#pragma once

#include <optional>

#include "greybox/classifier.hpp"

namespace greybox {

/// Binary split node. Leaves have feature == -1 and carry class counts;
/// rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::int64_t counts[2] = {0, 0};

  bool is_leaf() const { return feature < 0; }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double gain_ratio = 0.0;
};

/// Maximum-gain-ratio binary split over the given rows and candidate
/// features. Thresholds are midpoints between consecutive distinct sorted
/// values; candidates with non-positive information gain are discarded.
/// Ties resolve to the lowest feature index, then the lowest threshold.
std::optional<SplitChoice> best_split(const Matrix& X, const std::vector<int>& y,
                                      const std::vector<std::size_t>& rows,
                                      const std::vector<int>& features);

class DecisionTreeModel : public Classifier {
 public:
  DecisionTreeModel(std::vector<TreeNode> nodes, std::size_t dimension, int min_leaf_count)
      : nodes_(std::move(nodes)), dimension_(dimension), min_leaf_count_(min_leaf_count) {}

  ModelKind kind() const override { return ModelKind::tree; }
  std::size_t dimension() const override { return dimension_; }
  std::array<double, 2> predict_proba_row(std::span<const double> x) const override;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int min_leaf_count() const { return min_leaf_count_; }

  /// Leaf proportions for a single point, shared with the forest's trees.
  static std::array<double, 2> walk(const std::vector<TreeNode>& nodes,
                                    std::span<const double> x);

 private:
  std::vector<TreeNode> nodes_;
  std::size_t dimension_ = 0;
  int min_leaf_count_ = 2;
};

/// Unpruned greedy induction: recursion stops at pure nodes, nodes smaller
/// than 2 * min_leaf_count, or when no split has positive gain.
std::unique_ptr<DecisionTreeModel> fit_tree(const Dataset& train, const TrainConfig& cfg);

/// Internal grower shared by fit_tree and the forest: features_per_split
/// <= 0 or >= d means "consider every feature"; otherwise a fresh random
/// subset per node, drawn from rng.
std::vector<TreeNode> grow_tree(const Matrix& X, const std::vector<int>& y,
                                std::vector<std::size_t> rows, int min_leaf_count,
                                int features_per_split, class Rng* rng);

}  // namespace greybox
