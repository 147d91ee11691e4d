#include "greybox/baselines.hpp"

#include <cmath>

namespace greybox {

namespace {
constexpr double kVarianceFloor = 1e-9;
constexpr double kLog2Pi = 1.8378770664093453;
}  // namespace

std::array<double, 2> ZeroRModel::predict_proba_row(std::span<const double> x) const {
  check_dimension(x.size());
  return priors_;
}

std::array<double, 2> NaiveBayesModel::predict_proba_row(std::span<const double> x) const {
  check_dimension(x.size());
  double logp[2];
  for (int c = 0; c < 2; ++c) {
    double s = priors_[c] > 0.0 ? std::log(priors_[c]) : -1e300;
    for (std::size_t j = 0; j < x.size(); ++j) {
      double var = variances_(c, j);
      double diff = x[j] - means_(c, j);
      s -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
    }
    logp[c] = s;
  }
  double m = std::max(logp[0], logp[1]);
  double e0 = std::exp(logp[0] - m);
  double e1 = std::exp(logp[1] - m);
  double z = e0 + e1;
  return {e0 / z, e1 / z};
}

std::unique_ptr<ZeroRModel> fit_zero_r(const Dataset& train, const TrainConfig& cfg) {
  if (train.n() == 0) throw error("fit_zero_r: empty training set");
  double n1 = 0.0;
  for (int y : train.labels) n1 += y;
  double n = static_cast<double>(train.n());
  auto m = std::make_unique<ZeroRModel>(train.d(),
                                        std::array<double, 2>{(n - n1) / n, n1 / n});
  m->set_provenance(cfg.seed, train.schema_fingerprint);
  return m;
}

std::unique_ptr<NaiveBayesModel> fit_naive_bayes(const Dataset& train, const TrainConfig& cfg) {
  if (train.n() == 0) throw error("fit_naive_bayes: empty training set");
  const std::size_t d = train.d();
  std::int64_t counts[2] = {0, 0};
  Matrix means(2, d);
  Matrix variances(2, d);
  for (std::size_t i = 0; i < train.n(); ++i) {
    int c = train.labels[i];
    counts[c]++;
    auto xi = train.features.row(i);
    for (std::size_t j = 0; j < d; ++j) means(c, j) += xi[j];
  }
  for (int c = 0; c < 2; ++c) {
    if (counts[c] == 0) throw error("fit_naive_bayes: class " + std::to_string(c) + " has no rows");
    for (std::size_t j = 0; j < d; ++j) means(c, j) /= static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < train.n(); ++i) {
    int c = train.labels[i];
    auto xi = train.features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      double diff = xi[j] - means(c, j);
      variances(c, j) += diff * diff;
    }
  }
  for (int c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < d; ++j)
      variances(c, j) = std::max(variances(c, j) / static_cast<double>(counts[c]), kVarianceFloor);

  double n = static_cast<double>(train.n());
  auto m = std::make_unique<NaiveBayesModel>(
      std::array<double, 2>{counts[0] / n, counts[1] / n}, std::move(means), std::move(variances));
  m->set_provenance(cfg.seed, train.schema_fingerprint);
  return m;
}

}  // namespace greybox
