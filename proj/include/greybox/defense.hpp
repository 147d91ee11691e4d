#pragma once

#include "greybox/attack.hpp"
#include "greybox/cross_validation.hpp"

namespace greybox {

struct DefenseConfig {
  double sample_fraction = 0.2;
  /// (theta, gamma) cells whose adversarial sets feed the sample. The
  /// pipeline resolves an unspecified list to each victim's worst cell
  /// before constructing this; an explicitly empty list is invalid.
  std::vector<std::pair<double, double>> source_cells;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sampled perturbed rows, keeping their original malicious labels.
struct AdversarialSample {
  Dataset rows;
  std::vector<std::size_t> row_ids;  // indices into the source set, sorted
};

/// Uniform seeded sample of round(fraction * |perturbed rows|) perturbed
/// rows. Untouched rows are never sampled.
AdversarialSample sample_adversarial(const AdversarialSet& adv, double fraction,
                                     std::uint64_t seed);

/// Retrains from scratch on train + augment with cfg's hyperparameters and
/// seed. An empty augment reproduces plain training with the same seed.
std::unique_ptr<Classifier> adversarial_train(const Dataset& train, const Dataset& augment,
                                              ModelKind kind, const TrainConfig& cfg);

/// One victim's generations: the baseline model, its retrained successor,
/// and the test-row mask of points the defender trained on (excluded from
/// headline metrics so they stay "unseen").
struct DefenseSubject {
  std::string name;
  const Classifier* before = nullptr;
  const Classifier* after = nullptr;
  std::vector<char> exclude_rows;
};

struct DefenseReport {
  SweepGrid pre_grid;   // sampled rows excluded (headline)
  SweepGrid post_grid;  // same exclusion, same adversarial sets
  SweepGrid pre_grid_inclusive;
  SweepGrid post_grid_inclusive;
  std::vector<Matrix> delta;  // per victim: post - pre, headline grids
  std::vector<CvResult> cv_before;
  std::vector<CvResult> cv_after;
  std::vector<std::vector<std::size_t>> sampled_row_ids;  // per victim
};

/// Runs the full grid once per cell (adversarial sets crafted from the
/// original test partition with the same seeds for both generations) and
/// scores before/after models on each set. CV fields are left for the
/// caller, which owns the training data.
DefenseReport evaluate_defense(const std::vector<DefenseSubject>& subjects,
                               const MlpSurrogate& m, const Dataset& test,
                               const std::vector<double>& thetas,
                               const std::vector<double>& gammas, std::uint64_t seed);

}  // namespace greybox
