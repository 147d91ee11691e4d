#pragma once

#include "greybox/classifier.hpp"

namespace greybox {

/// Majority-class baseline. predict_proba is the constant class prior.
class ZeroRModel : public Classifier {
 public:
  ZeroRModel(std::size_t dimension, std::array<double, 2> priors)
      : dimension_(dimension), priors_(priors) {}

  ModelKind kind() const override { return ModelKind::zero_r; }
  std::size_t dimension() const override { return dimension_; }
  std::array<double, 2> predict_proba_row(std::span<const double> x) const override;

  const std::array<double, 2>& priors() const { return priors_; }

 private:
  std::size_t dimension_ = 0;
  std::array<double, 2> priors_{0.5, 0.5};
};

/// Gaussian naive Bayes with per-class feature means and variances.
/// Variances are floored at 1e-9 so constant features stay finite.
class NaiveBayesModel : public Classifier {
 public:
  NaiveBayesModel(std::array<double, 2> priors, Matrix means, Matrix variances)
      : priors_(priors), means_(std::move(means)), variances_(std::move(variances)) {}

  ModelKind kind() const override { return ModelKind::naive_bayes; }
  std::size_t dimension() const override { return means_.cols(); }
  std::array<double, 2> predict_proba_row(std::span<const double> x) const override;

  const std::array<double, 2>& priors() const { return priors_; }
  const Matrix& means() const { return means_; }      // 2 x d
  const Matrix& variances() const { return variances_; }  // 2 x d

 private:
  std::array<double, 2> priors_{0.5, 0.5};
  Matrix means_;
  Matrix variances_;
};

std::unique_ptr<ZeroRModel> fit_zero_r(const Dataset& train, const TrainConfig& cfg);
std::unique_ptr<NaiveBayesModel> fit_naive_bayes(const Dataset& train, const TrainConfig& cfg);

}  // namespace greybox
