#pragma once

#include "greybox/metrics.hpp"
#include "greybox/mlp.hpp"

namespace greybox {

struct AttackConfig {
  enum class Method { fgsm, jsma };

  Method method = Method::jsma;
  double theta = 0.1;    // jsma: fraction of features allowed to change
  double gamma = 0.1;    // jsma: per-feature perturbation magnitude
  double epsilon = 0.1;  // fgsm: step size
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(AttackConfig::Method m);
AttackConfig::Method attack_method_from_string(const std::string& s);

/// Per-feature desirability of perturbing toward target_class. Features
/// whose partial derivatives fail the sign conditions score exactly 0;
/// direction records which way a helpful change moves the feature.
struct SaliencyMap {
  std::vector<double> scores;
  std::vector<int> direction;  // +1 or -1
  int target_class = 0;
};

/// x* = clamp(x + epsilon * sign(dLoss/dx), 0, 1), with sign(0) = 0.
std::vector<double> fgsm(const MlpSurrogate& m, std::span<const double> x, int y_true,
                         double epsilon);

/// Saliency from a 2 x d Jacobian of class probabilities: feature i scores
/// |J[target][i]| * |J[other][i]| when the target derivative and the other
/// class's derivative disagree in sign; the direction is the sign of
/// J[target][i]. Excluded features score 0.
SaliencyMap saliency_map(const Matrix& jac, int target, const std::vector<char>& excluded);

/// As above, but also zeroes features that cannot move any further in
/// their helpful direction (x_i already at the box edge).
SaliencyMap saliency_map(const Matrix& jac, int target, const std::vector<char>& excluded,
                         std::span<const double> x);

struct JsmaResult {
  std::vector<double> x;             // perturbed point
  std::vector<int> changed_features; // in modification order
  double l1_change = 0.0;
  bool flipped = false;  // surrogate predicts the target class at the end
};

/// Greedy iterative attack toward target = 1 - y_true: per iteration the
/// Jacobian is recomputed at the current point and the argmax-saliency
/// feature moves by gamma in its direction (clamped to [0,1]). Stops when
/// the surrogate predicts the target, the budget ceil(theta * d) is spent,
/// or the saliency map is all-zero. Each feature moves at most once.
JsmaResult jsma(const MlpSurrogate& m, std::span<const double> x, int y_true, double theta,
                double gamma);

/// Test set with every malicious row replaced by its attack output; benign
/// rows are copied bit-for-bit and labels stay the originals.
struct AdversarialSet {
  struct RowLog {
    std::vector<int> changed_features;
    double l1_change = 0.0;
    bool flipped = false;
  };

  Matrix features;
  std::vector<int> labels;
  std::vector<char> perturbed;  // 1 where the row was attacked
  AttackConfig config;
  std::vector<RowLog> logs;  // one per row; untouched rows log nothing
  std::uint64_t schema_fingerprint = 0;

  std::size_t n() const { return features.rows(); }
  std::size_t d() const { return features.cols(); }
};

AdversarialSet craft_adversarial_testset(const MlpSurrogate& m, const Dataset& test,
                                         const AttackConfig& cfg);

/// Victim predictions on the adversarial features, scored against the
/// ORIGINAL labels.
MetricsReport transfer_evaluate(const Classifier& victim, const AdversarialSet& adv);

/// Same, skipping rows flagged in exclude_rows (used to hold out points
/// the defender trained on).
MetricsReport transfer_evaluate(const Classifier& victim, const AdversarialSet& adv,
                                const std::vector<char>& exclude_rows);

/// Weighted F1 per (theta, gamma) cell per victim, plus each victim's
/// clean-test baseline. cells[v](ti, gi) indexes theta row ti, gamma
/// column gi.
struct SweepGrid {
  std::vector<double> thetas;
  std::vector<double> gammas;
  std::vector<std::string> victim_names;
  std::vector<Matrix> cells;
  std::vector<double> baseline;

  /// Grid argmin for one victim; ties resolve to the lowest theta index,
  /// then the lowest gamma index.
  std::pair<std::size_t, std::size_t> worst_cell(std::size_t victim) const;
  double grid_average(std::size_t victim) const;
};

/// Default sweep axis: 0.1 .. 0.9 in steps of 0.1.
std::vector<double> default_grid_axis();

/// One adversarial set per cell (crafted once, shared by every victim).
SweepGrid sweep(const std::vector<const Classifier*>& victims,
                const std::vector<std::string>& victim_names, const MlpSurrogate& m,
                const Dataset& test, const std::vector<double>& thetas,
                const std::vector<double>& gammas, std::uint64_t seed);

}  // namespace greybox
