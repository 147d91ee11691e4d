#pragma once

#include "greybox/tree.hpp"

namespace greybox {

/// Bagged trees voting by majority; predict_proba is the vote fraction.
class RandomForestModel : public Classifier {
 public:
  RandomForestModel(std::vector<std::vector<TreeNode>> trees, std::size_t dimension,
                    TrainConfig::Forest params)
      : trees_(std::move(trees)), dimension_(dimension), params_(params) {}

  ModelKind kind() const override { return ModelKind::forest; }
  std::size_t dimension() const override { return dimension_; }
  std::array<double, 2> predict_proba_row(std::span<const double> x) const override;

  const std::vector<std::vector<TreeNode>>& trees() const { return trees_; }
  const TrainConfig::Forest& params() const { return params_; }

 private:
  std::vector<std::vector<TreeNode>> trees_;
  std::size_t dimension_ = 0;
  TrainConfig::Forest params_;
};

/// Each tree gets a seed derived from (cfg.seed, tree index), a bootstrap
/// resample when enabled, and a fresh feature subset per node. Trees are
/// built in parallel; results are ordered by tree index.
std::unique_ptr<RandomForestModel> fit_forest(const Dataset& train, const TrainConfig& cfg);

}  // namespace greybox
