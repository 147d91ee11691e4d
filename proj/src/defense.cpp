#include "greybox/defense.hpp"

#include <algorithm>
#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

void DefenseConfig::validate() const {
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
    throw config_error("defense sample_fraction must be in (0,1]");
  if (source_cells.empty()) throw config_error("defense source_cells must be non-empty");
  for (auto [theta, gamma] : source_cells) {
    if (!(theta > 0.0 && theta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0))
      throw config_error("defense source cell (theta, gamma) must lie in (0,1] x (0,1]");
  }
}

AdversarialSample sample_adversarial(const AdversarialSet& adv, double fraction,
                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw error("sample_adversarial: fraction must be in (0,1]");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < adv.n(); ++i)
    if (adv.perturbed[i]) pool.push_back(i);
  if (pool.empty()) throw error("sample_adversarial: set has no perturbed rows");

  auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(pool.size())));
  if (count == 0)
    throw error("sample_adversarial: fraction " + format_double(fraction) + " of " +
                std::to_string(pool.size()) + " perturbed rows rounds to zero");

  Rng rng(derive_seed(seed, "defense-sample"));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.next_below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());

  AdversarialSample sample;
  sample.row_ids = pool;
  sample.rows.schema_fingerprint = adv.schema_fingerprint;
  for (std::size_t i : pool) {
    sample.rows.features.push_row(adv.features.row(i));
    sample.rows.labels.push_back(adv.labels[i]);
  }
  return sample;
}

std::unique_ptr<Classifier> adversarial_train(const Dataset& train, const Dataset& augment,
                                              ModelKind kind, const TrainConfig& cfg) {
  if (augment.n() > 0 && train.schema_fingerprint != 0 && augment.schema_fingerprint != 0 &&
      train.schema_fingerprint != augment.schema_fingerprint)
    throw error("adversarial_train: train and augment come from different schemas");
  return train_model(kind, concat(train, augment), cfg);
}

namespace {

double masked_weighted_f1(const Classifier& model, const Matrix& X, const std::vector<int>& y,
                          const std::vector<char>& exclude) {
  std::vector<int> y_true;
  std::vector<int> y_pred;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (!exclude.empty() && exclude[i]) continue;
    y_true.push_back(y[i]);
    y_pred.push_back(model.predict_row(X.row(i)));
  }
  return prf(confusion(y_true, y_pred)).weighted_f1;
}

SweepGrid empty_grid(const std::vector<DefenseSubject>& subjects,
                     const std::vector<double>& thetas, const std::vector<double>& gammas) {
  SweepGrid g;
  g.thetas = thetas;
  g.gammas = gammas;
  for (const auto& s : subjects) g.victim_names.push_back(s.name);
  g.cells.assign(subjects.size(), Matrix(thetas.size(), gammas.size()));
  g.baseline.resize(subjects.size());
  return g;
}

}  // namespace

DefenseReport evaluate_defense(const std::vector<DefenseSubject>& subjects,
                               const MlpSurrogate& m, const Dataset& test,
                               const std::vector<double>& thetas,
                               const std::vector<double>& gammas, std::uint64_t seed) {
  if (subjects.empty()) throw error("evaluate_defense: no subjects");
  if (thetas.empty() || gammas.empty())
    throw error("evaluate_defense: parameter axes must be non-empty");
  for (const auto& s : subjects) {
    if (!s.before || !s.after) throw error("evaluate_defense: subject missing a model");
    if (!s.exclude_rows.empty() && s.exclude_rows.size() != test.n())
      throw error("evaluate_defense: exclusion mask size mismatch for " + s.name);
    require_schema(*s.before, test.schema_fingerprint);
    require_schema(*s.after, test.schema_fingerprint);
  }

  DefenseReport report;
  report.pre_grid = empty_grid(subjects, thetas, gammas);
  report.post_grid = empty_grid(subjects, thetas, gammas);
  report.pre_grid_inclusive = empty_grid(subjects, thetas, gammas);
  report.post_grid_inclusive = empty_grid(subjects, thetas, gammas);

  for (std::size_t v = 0; v < subjects.size(); ++v) {
    const auto& s = subjects[v];
    report.pre_grid.baseline[v] =
        masked_weighted_f1(*s.before, test.features, test.labels, s.exclude_rows);
    report.post_grid.baseline[v] =
        masked_weighted_f1(*s.after, test.features, test.labels, s.exclude_rows);
    report.pre_grid_inclusive.baseline[v] =
        masked_weighted_f1(*s.before, test.features, test.labels, {});
    report.post_grid_inclusive.baseline[v] =
        masked_weighted_f1(*s.after, test.features, test.labels, {});
  }

  const std::size_t n_cells = thetas.size() * gammas.size();
  parallel_for(n_cells, [&](std::size_t c) {
    std::size_t ti = c / gammas.size();
    std::size_t gi = c % gammas.size();
    AttackConfig cfg;
    cfg.method = AttackConfig::Method::jsma;
    cfg.theta = thetas[ti];
    cfg.gamma = gammas[gi];
    cfg.seed = derive_seed(seed, "sweep-cell", c);
    AdversarialSet adv = craft_adversarial_testset(m, test, cfg);
    for (std::size_t v = 0; v < subjects.size(); ++v) {
      const auto& s = subjects[v];
      report.pre_grid.cells[v](ti, gi) =
          transfer_evaluate(*s.before, adv, s.exclude_rows).weighted_f1;
      report.post_grid.cells[v](ti, gi) =
          transfer_evaluate(*s.after, adv, s.exclude_rows).weighted_f1;
      report.pre_grid_inclusive.cells[v](ti, gi) = transfer_evaluate(*s.before, adv).weighted_f1;
      report.post_grid_inclusive.cells[v](ti, gi) = transfer_evaluate(*s.after, adv).weighted_f1;
    }
  });

  report.delta.resize(subjects.size());
  for (std::size_t v = 0; v < subjects.size(); ++v) {
    Matrix d(thetas.size(), gammas.size());
    for (std::size_t t = 0; t < thetas.size(); ++t)
      for (std::size_t g = 0; g < gammas.size(); ++g)
        d(t, g) = report.post_grid.cells[v](t, g) - report.pre_grid.cells[v](t, g);
    report.delta[v] = std::move(d);
  }
  return report;
}

}  // namespace greybox
