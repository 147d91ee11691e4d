#include "greybox/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

namespace {

struct Activations {
  std::vector<double> z1;  // pre-ReLU hidden
  std::vector<double> a1;  // post-ReLU hidden
  std::array<double, 2> p{0.0, 0.0};
};

Activations run_forward(const Matrix& w1, const std::vector<double>& b1, const Matrix& w2,
                        const std::array<double, 2>& b2, std::span<const double> x) {
  const std::size_t h = w1.rows();
  Activations act;
  act.z1.resize(h);
  act.a1.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    double s = b1[i];
    auto wr = w1.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) s += wr[j] * x[j];
    act.z1[i] = s;
    act.a1[i] = s > 0.0 ? s : 0.0;
  }
  double z2[2];
  for (int c = 0; c < 2; ++c) {
    double s = b2[c];
    auto wr = w2.row(c);
    for (std::size_t i = 0; i < h; ++i) s += wr[i] * act.a1[i];
    z2[c] = s;
  }
  double m = std::max(z2[0], z2[1]);
  double e0 = std::exp(z2[0] - m);
  double e1 = std::exp(z2[1] - m);
  double z = e0 + e1;
  act.p = {e0 / z, e1 / z};
  return act;
}

}  // namespace

std::array<double, 2> MlpSurrogate::predict_proba_row(std::span<const double> x) const {
  check_dimension(x.size());
  return run_forward(w1_, b1_, w2_, b2_, x).p;
}

std::vector<double> MlpSurrogate::input_gradient(std::span<const double> x, int y) const {
  check_dimension(x.size());
  if (y != 0 && y != 1) throw error("input_gradient: label must be 0 or 1");
  auto act = run_forward(w1_, b1_, w2_, b2_, x);
  const std::size_t h = w1_.rows();
  double dz2[2] = {act.p[0] - (y == 0 ? 1.0 : 0.0), act.p[1] - (y == 1 ? 1.0 : 0.0)};
  std::vector<double> dz1(h);
  for (std::size_t i = 0; i < h; ++i) {
    if (act.z1[i] <= 0.0) continue;
    dz1[i] = w2_(0, i) * dz2[0] + w2_(1, i) * dz2[1];
  }
  std::vector<double> dx(x.size(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    if (dz1[i] == 0.0) continue;
    auto wr = w1_.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) dx[j] += wr[j] * dz1[i];
  }
  return dx;
}

Matrix MlpSurrogate::jacobian(std::span<const double> x) const {
  check_dimension(x.size());
  auto act = run_forward(w1_, b1_, w2_, b2_, x);
  const std::size_t h = w1_.rows();
  const std::size_t d = x.size();
  // dz2/dx = W2 * diag(relu'(z1)) * W1, then softmax's (diag(p) - p p^T).
  Matrix dz2_dx(2, d);
  for (std::size_t i = 0; i < h; ++i) {
    if (act.z1[i] <= 0.0) continue;
    auto wr = w1_.row(i);
    for (int c = 0; c < 2; ++c) {
      double w = w2_(c, i);
      for (std::size_t j = 0; j < d; ++j) dz2_dx(c, j) += w * wr[j];
    }
  }
  Matrix jac(2, d);
  for (std::size_t j = 0; j < d; ++j) {
    double g0 = dz2_dx(0, j);
    double g1 = dz2_dx(1, j);
    jac(0, j) = act.p[0] * (1.0 - act.p[0]) * g0 - act.p[0] * act.p[1] * g1;
    jac(1, j) = act.p[1] * (1.0 - act.p[1]) * g1 - act.p[0] * act.p[1] * g0;
  }
  return jac;
}

std::unique_ptr<MlpSurrogate> fit_mlp(const Dataset& train, const TrainConfig& cfg) {
  if (train.n() == 0) throw error("fit_mlp: empty training set");
  cfg.validate();
  const std::size_t n = train.n();
  const std::size_t d = train.d();
  const std::size_t h = static_cast<std::size_t>(cfg.mlp.hidden);

  auto net = std::make_unique<MlpSurrogate>(d, cfg.mlp.hidden);
  Rng init_rng(derive_seed(cfg.seed, "mlp-init"));
  double lim1 = std::sqrt(6.0 / static_cast<double>(d + h));
  for (double& w : net->w1().data()) w = init_rng.next_range(-lim1, lim1);
  double lim2 = std::sqrt(6.0 / static_cast<double>(h + 2));
  for (double& w : net->w2().data()) w = init_rng.next_range(-lim2, lim2);

  Matrix& w1 = net->w1();
  std::vector<double>& b1 = net->b1();
  Matrix& w2 = net->w2();
  std::array<double, 2>& b2 = net->b2();

  Rng order_rng(derive_seed(cfg.seed, "mlp-order"));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const double lr = cfg.mlp.learning_rate;
  const std::size_t batch = static_cast<std::size_t>(cfg.mlp.batch_size);
  Matrix gw1(h, d);
  std::vector<double> gb1(h);
  Matrix gw2(2, h);
  double gb2[2];

  for (int epoch = 0; epoch < cfg.mlp.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      std::size_t stop = std::min(start + batch, n);
      double inv = 1.0 / static_cast<double>(stop - start);
      std::fill(gw1.data().begin(), gw1.data().end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.data().begin(), gw2.data().end(), 0.0);
      gb2[0] = gb2[1] = 0.0;

      for (std::size_t k = start; k < stop; ++k) {
        auto x = train.features.row(order[k]);
        int y = train.labels[order[k]];
        auto act = run_forward(w1, b1, w2, b2, x);
        // Unclamped log: a saturated wrong prediction (p == 0) must register as
        // infinite loss so the divergence check below can fire.
        epoch_loss += -std::log(act.p[y]);

        double dz2[2] = {act.p[0] - (y == 0 ? 1.0 : 0.0), act.p[1] - (y == 1 ? 1.0 : 0.0)};
        for (int c = 0; c < 2; ++c) {
          gb2[c] += dz2[c];
          auto gr = gw2.row(c);
          for (std::size_t i = 0; i < h; ++i) gr[i] += dz2[c] * act.a1[i];
        }
        for (std::size_t i = 0; i < h; ++i) {
          if (act.z1[i] <= 0.0) continue;
          double dz1 = w2(0, i) * dz2[0] + w2(1, i) * dz2[1];
          gb1[i] += dz1;
          auto gr = gw1.row(i);
          for (std::size_t j = 0; j < d; ++j) gr[j] += dz1 * x[j];
        }
      }

      double step = lr * inv;
      for (std::size_t i = 0; i < w1.data().size(); ++i) w1.data()[i] -= step * gw1.data()[i];
      for (std::size_t i = 0; i < h; ++i) b1[i] -= step * gb1[i];
      for (std::size_t i = 0; i < w2.data().size(); ++i) w2.data()[i] -= step * gw2.data()[i];
      b2[0] -= step * gb2[0];
      b2[1] -= step * gb2[1];
    }
    if (!std::isfinite(epoch_loss))
      throw error("fit_mlp: loss diverged at epoch " + std::to_string(epoch) +
                  "; learning rate too high");
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto act = run_forward(w1, b1, w2, b2, train.features.row(i));
    total += -std::log(std::max(act.p[train.labels[i]], 1e-300));
  }
  net->set_final_loss(total / static_cast<double>(n));
  if (!std::isfinite(net->final_loss()))
    throw error("fit_mlp: loss diverged; learning rate too high");

  net->set_provenance(cfg.seed, train.schema_fingerprint);
  return net;
}

}  // namespace greybox
