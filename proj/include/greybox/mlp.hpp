#pragma once

#include "greybox/classifier.hpp"

namespace greybox {

/// One-hidden-layer network [d, h, 2]: ReLU hidden, softmax output,
/// trained with mini-batch SGD on cross-entropy. Doubles as the gradient
/// source for the attacks, so the input gradient and the softmax Jacobian
/// are exposed analytically.
class MlpSurrogate : public Classifier {
 public:
  MlpSurrogate(std::size_t dimension, int hidden)
      : w1_(hidden, dimension), b1_(hidden, 0.0), w2_(2, hidden), b2_{0.0, 0.0} {}

  ModelKind kind() const override { return ModelKind::mlp; }
  std::size_t dimension() const override { return w1_.cols(); }
  std::array<double, 2> predict_proba_row(std::span<const double> x) const override;

  int hidden() const { return static_cast<int>(w1_.rows()); }

  /// d(cross-entropy(softmax, y)) / dx. ReLU's derivative at 0 is 0.
  std::vector<double> input_gradient(std::span<const double> x, int y) const;

  /// 2 x d Jacobian of the softmax probabilities with respect to x.
  /// Its columns sum to zero because the two probabilities sum to one.
  Matrix jacobian(std::span<const double> x) const;

  /// Mean cross-entropy over the training set with the final weights.
  double final_loss() const { return final_loss_; }
  void set_final_loss(double v) { final_loss_ = v; }

  // Mutable weight access for training, serialization and hand-built nets.
  Matrix& w1() { return w1_; }
  const Matrix& w1() const { return w1_; }
  std::vector<double>& b1() { return b1_; }
  const std::vector<double>& b1() const { return b1_; }
  Matrix& w2() { return w2_; }
  const Matrix& w2() const { return w2_; }
  std::array<double, 2>& b2() { return b2_; }
  const std::array<double, 2>& b2() const { return b2_; }

 private:
  Matrix w1_;               // h x d
  std::vector<double> b1_;  // h
  Matrix w2_;               // 2 x h
  std::array<double, 2> b2_{0.0, 0.0};
  double final_loss_ = 0.0;
};

/// Glorot-uniform init, then cfg.mlp.epochs passes of mini-batch SGD with
/// a fresh shuffle per epoch. Throws when the loss leaves the finite range
/// (learning rate too high for the data).
std::unique_ptr<MlpSurrogate> fit_mlp(const Dataset& train, const TrainConfig& cfg);

}  // namespace greybox
