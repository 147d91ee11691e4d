#include <cmath>
#include <vector>

#include "doctest.h"

#include "greybox/mlp.hpp"
#include "greybox/rng.hpp"

using namespace greybox;

namespace {

// 2-2-2 net with hand-auditable weights. Identity-ish hidden layer keeps
// forward arithmetic small enough to redo by hand.
MlpSurrogate hand_net() {
  MlpSurrogate m(2, 2);
  m.w1()(0, 0) = 1.0;
  m.w1()(0, 1) = 0.0;
  m.w1()(1, 0) = 0.0;
  m.w1()(1, 1) = 1.0;
  m.b1() = {0.0, 0.0};
  m.w2()(0, 0) = 1.0;
  m.w2()(0, 1) = -1.0;
  m.w2()(1, 0) = -1.0;
  m.w2()(1, 1) = 1.0;
  m.b2() = {0.0, 0.0};
  return m;
}

Dataset xor_dataset() {
  Dataset ds;
  const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int rep = 0; rep < 25; ++rep) {
    for (int k = 0; k < 4; ++k) {
      ds.features.push_row(std::vector<double>{pts[k][0], pts[k][1]});
      ds.labels.push_back(static_cast<int>(pts[k][0]) ^ static_cast<int>(pts[k][1]));
    }
  }
  return ds;
}

double loss_at(const MlpSurrogate& m, std::span<const double> x, int y) {
  auto p = m.predict_proba_row(x);
  return -std::log(p[y]);
}

MlpSurrogate random_net(std::uint64_t seed, std::size_t d, int h) {
  Rng rng(seed);
  MlpSurrogate m(d, h);
  for (auto& v : m.w1().data()) v = rng.next_range(-1.0, 1.0);
  for (auto& v : m.b1()) v = rng.next_range(-0.5, 0.5);
  for (auto& v : m.w2().data()) v = rng.next_range(-1.0, 1.0);
  m.b2() = {rng.next_range(-0.5, 0.5), rng.next_range(-0.5, 0.5)};
  return m;
}

}  // namespace

TEST_CASE("forward pass matches hand arithmetic") {
  MlpSurrogate m = hand_net();
  // x = (0.6, 0.2): hidden = relu(0.6, 0.2) = (0.6, 0.2),
  // logits = (0.6 - 0.2, -0.6 + 0.2) = (0.4, -0.4),
  // p1 = exp(-0.4) / (exp(0.4) + exp(-0.4)) = 1 / (1 + exp(0.8)).
  auto p = m.predict_proba_row(std::vector<double>{0.6, 0.2});
  double want1 = 1.0 / (1.0 + std::exp(0.8));
  CHECK(p[1] == doctest::Approx(want1).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(1.0 - want1).epsilon(1e-12));
}

TEST_CASE("all-zero weights give the uniform distribution") {
  MlpSurrogate m(3, 4);
  auto p = m.predict_proba_row(std::vector<double>{0.3, 0.7, 0.1});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(m.predict_row(std::vector<double>{0.3, 0.7, 0.1}) == 0);  // tie -> benign
}

TEST_CASE("input gradient matches the closed form on the hand net") {
  MlpSurrogate m = hand_net();
  std::vector<double> x{0.6, 0.2};
  // Both hidden units are active, so dL/dx = W1^T W2^T (p - onehot(y)).
  auto p = m.predict_proba_row(x);
  for (int y = 0; y < 2; ++y) {
    auto g = m.input_gradient(x, y);
    double d0 = p[0] - (y == 0 ? 1.0 : 0.0);
    double d1 = p[1] - (y == 1 ? 1.0 : 0.0);
    CHECK(g[0] == doctest::Approx(d0 - d1).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(d1 - d0).epsilon(1e-12));
  }
}

TEST_CASE("input gradient matches central finite differences") {
  MlpSurrogate m = random_net(17, 5, 7);
  Rng rng(23);
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.next_unit();
    int y = static_cast<int>(rng.next_below(2));
    auto g = m.input_gradient(x, y);
    for (std::size_t j = 0; j < x.size(); ++j) {
      std::vector<double> hi = x, lo = x;
      hi[j] += h;
      lo[j] -= h;
      double fd = (loss_at(m, hi, y) - loss_at(m, lo, y)) / (2.0 * h);
      // Relative 1e-4 with an absolute floor of 1e-6 for near-zero slopes.
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-4).scale(1e-2));
    }
  }
}

TEST_CASE("jacobian matches finite differences and its columns sum to zero") {
  MlpSurrogate m = random_net(29, 4, 6);
  Rng rng(31);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.next_unit();
    Matrix J = m.jacobian(x);
    REQUIRE(J.rows() == 2);
    REQUIRE(J.cols() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(J(0, j) + J(1, j)) < 1e-12);
      std::vector<double> hi = x, lo = x;
      hi[j] += h;
      lo[j] -= h;
      auto phi = m.predict_proba_row(hi);
      auto plo = m.predict_proba_row(lo);
      for (int c = 0; c < 2; ++c) {
        double fd = (phi[c] - plo[c]) / (2.0 * h);
        CHECK(J(c, j) == doctest::Approx(fd).epsilon(1e-4).scale(1e-2));
      }
    }
  }
}

TEST_CASE("zero-epoch training reproduces the seeded initialization") {
  Dataset ds = xor_dataset();
  TrainConfig cfg;
  cfg.seed = 13;
  cfg.mlp.hidden = 6;
  cfg.mlp.epochs = 0;
  auto a = fit_mlp(ds, cfg);
  auto b = fit_mlp(ds, cfg);
  CHECK(a->w1() == b->w1());
  CHECK(a->w2() == b->w2());
  CHECK(a->b1() == b->b1());
  CHECK(a->final_loss() == b->final_loss());
  CHECK(a->final_loss() > 0.0);

  cfg.seed = 14;
  auto c = fit_mlp(ds, cfg);
  CHECK(a->w1() != c->w1());
}

TEST_CASE("training is bitwise deterministic per seed") {
  Dataset ds = xor_dataset();
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.mlp.hidden = 8;
  cfg.mlp.epochs = 20;
  cfg.mlp.learning_rate = 0.3;
  cfg.mlp.batch_size = 16;
  auto a = fit_mlp(ds, cfg);
  auto b = fit_mlp(ds, cfg);
  CHECK(model_to_json(*a) == model_to_json(*b));
}

TEST_CASE("mlp learns xor") {
  Dataset ds = xor_dataset();
  TrainConfig cfg;
  cfg.seed = 2;
  cfg.mlp.hidden = 8;
  cfg.mlp.epochs = 400;
  cfg.mlp.learning_rate = 0.5;
  cfg.mlp.batch_size = 16;
  auto m = fit_mlp(ds, cfg);
  auto pred = m->predict(ds.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.labels[i];
  CHECK(correct == ds.n());
  CHECK(m->final_loss() < 0.2);
}

TEST_CASE("training lowers the loss on separable data") {
  Rng rng(41);
  Dataset ds;
  for (int i = 0; i < 200; ++i) {
    int label = i % 2;
    std::vector<double> row{0.2 * rng.next_unit() + (label ? 0.7 : 0.1),
                            0.2 * rng.next_unit() + (label ? 0.7 : 0.1)};
    ds.features.push_row(row);
    ds.labels.push_back(label);
  }
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.mlp.hidden = 8;
  cfg.mlp.learning_rate = 0.2;

  cfg.mlp.epochs = 0;
  double before = fit_mlp(ds, cfg)->final_loss();
  cfg.mlp.epochs = 60;
  double after = fit_mlp(ds, cfg)->final_loss();
  CHECK(after < before);
  CHECK(after < 0.3);
}

TEST_CASE("diverging training reports the epoch") {
  Dataset ds = xor_dataset();
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.mlp.hidden = 8;
  cfg.mlp.epochs = 200;
  cfg.mlp.learning_rate = 1e12;
  CHECK_THROWS_WITH_AS(fit_mlp(ds, cfg), doctest::Contains("diverged"), error);
}
