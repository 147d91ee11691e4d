#pragma once

#include <vector>

#include "greybox/classifier.hpp"
#include "greybox/metrics.hpp"

namespace greybox {

/// Per-fold reports plus a pooled-confusion aggregate: fold confusion
/// matrices are summed first, then prf runs once on the pooled counts.
struct CvResult {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsReport> fold_reports;
  MetricsReport aggregate;

  std::string to_json_string(int indent = -1) const;
};

/// Seeded shuffle dealt into k folds whose sizes differ by at most 1.
/// Every index in [0, n) lands in exactly one fold; folds come back sorted.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed);

/// Trains on k-1 folds and scores the held-out fold, k times. Fold i's
/// model uses a seed derived from (seed, i) so folds are order-independent.
CvResult cross_validate(ModelKind kind, const TrainConfig& cfg, const Dataset& ds, int k,
                        std::uint64_t seed);

}  // namespace greybox
