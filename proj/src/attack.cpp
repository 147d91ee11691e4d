#include "greybox/attack.hpp"

#include <algorithm>
#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

void AttackConfig::validate() const {
  if (method == Method::jsma) {
    if (!(theta > 0.0 && theta <= 1.0)) throw config_error("jsma theta must be in (0,1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw config_error("jsma gamma must be in (0,1]");
  } else {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw config_error("fgsm epsilon must be positive and finite");
  }
}

std::string to_string(AttackConfig::Method m) {
  return m == AttackConfig::Method::fgsm ? "fgsm" : "jsma";
}

AttackConfig::Method attack_method_from_string(const std::string& s) {
  if (s == "fgsm") return AttackConfig::Method::fgsm;
  if (s == "jsma") return AttackConfig::Method::jsma;
  throw config_error("unknown attack method '" + s + "'");
}

std::vector<double> fgsm(const MlpSurrogate& m, std::span<const double> x, int y_true,
                         double epsilon) {
  std::vector<double> grad = m.input_gradient(x, y_true);
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
    out[j] = std::clamp(out[j] + epsilon * s, 0.0, 1.0);
  }
  return out;
}

SaliencyMap saliency_map(const Matrix& jac, int target, const std::vector<char>& excluded) {
  if (jac.rows() != 2) throw error("saliency_map: Jacobian must have 2 rows");
  if (target != 0 && target != 1) throw error("saliency_map: target must be 0 or 1");
  const std::size_t d = jac.cols();
  if (!excluded.empty() && excluded.size() != d)
    throw error("saliency_map: excluded mask size mismatch");

  SaliencyMap map;
  map.target_class = target;
  map.scores.assign(d, 0.0);
  map.direction.assign(d, 1);
  const int other = 1 - target;
  for (std::size_t i = 0; i < d; ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    double jt = jac(target, i);
    double jo = jac(other, i);
    if (jt > 0.0 && jo < 0.0) {
      map.scores[i] = jt * -jo;
      map.direction[i] = 1;
    } else if (jt < 0.0 && jo > 0.0) {
      map.scores[i] = -jt * jo;
      map.direction[i] = -1;
    }
  }
  return map;
}

SaliencyMap saliency_map(const Matrix& jac, int target, const std::vector<char>& excluded,
                         std::span<const double> x) {
  SaliencyMap map = saliency_map(jac, target, excluded);
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    if (map.scores[i] == 0.0) continue;
    if ((map.direction[i] > 0 && x[i] >= 1.0) || (map.direction[i] < 0 && x[i] <= 0.0))
      map.scores[i] = 0.0;
  }
  return map;
}

JsmaResult jsma(const MlpSurrogate& m, std::span<const double> x, int y_true, double theta,
                double gamma) {
  if (x.size() != m.dimension())
    throw error("jsma: point has " + std::to_string(x.size()) + " features, surrogate expects " +
                std::to_string(m.dimension()));
  if (y_true != 0 && y_true != 1) throw error("jsma: label must be 0 or 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw error("jsma: theta must be in (0,1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw error("jsma: gamma must be in (0,1]");

  const std::size_t d = x.size();
  const int target = 1 - y_true;
  const std::size_t budget =
      static_cast<std::size_t>(std::ceil(theta * static_cast<double>(d)));

  JsmaResult res;
  res.x.assign(x.begin(), x.end());
  std::vector<char> touched(d, 0);

  for (;;) {
    if (m.predict_row(res.x) == target) {
      res.flipped = true;
      break;
    }
    if (res.changed_features.size() >= budget) break;

    SaliencyMap map = saliency_map(m.jacobian(res.x), target, touched, res.x);
    std::size_t best = d;
    double best_score = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (map.scores[i] > best_score) {
        best_score = map.scores[i];
        best = i;
      }
    }
    if (best == d) break;  // all-zero map

    res.x[best] = std::clamp(res.x[best] + gamma * map.direction[best], 0.0, 1.0);
    touched[best] = 1;
    res.changed_features.push_back(static_cast<int>(best));
  }

  for (int f : res.changed_features) res.l1_change += std::abs(res.x[f] - x[f]);
  return res;
}

AdversarialSet craft_adversarial_testset(const MlpSurrogate& m, const Dataset& test,
                                         const AttackConfig& cfg) {
  cfg.validate();
  if (test.d() != m.dimension())
    throw error("craft_adversarial_testset: test set has " + std::to_string(test.d()) +
                " features, surrogate expects " + std::to_string(m.dimension()));
  std::size_t malicious = 0;
  for (int y : test.labels) malicious += y;
  if (malicious == 0)
    throw error("craft_adversarial_testset: test set has no malicious rows to perturb");

  AdversarialSet adv;
  adv.features = test.features;
  adv.labels = test.labels;
  adv.perturbed.assign(test.n(), 0);
  adv.config = cfg;
  adv.logs.resize(test.n());
  adv.schema_fingerprint = test.schema_fingerprint;

  parallel_for(test.n(), [&](std::size_t i) {
    if (test.labels[i] != 1) return;
    adv.perturbed[i] = 1;
    auto row = adv.features.row(i);
    if (cfg.method == AttackConfig::Method::jsma) {
      JsmaResult r = jsma(m, test.features.row(i), 1, cfg.theta, cfg.gamma);
      std::copy(r.x.begin(), r.x.end(), row.begin());
      adv.logs[i].changed_features = std::move(r.changed_features);
      adv.logs[i].l1_change = r.l1_change;
      adv.logs[i].flipped = r.flipped;
    } else {
      std::vector<double> out = fgsm(m, test.features.row(i), 1, cfg.epsilon);
      auto orig = test.features.row(i);
      for (std::size_t j = 0; j < out.size(); ++j) {
        if (out[j] != orig[j]) {
          adv.logs[i].changed_features.push_back(static_cast<int>(j));
          adv.logs[i].l1_change += std::abs(out[j] - orig[j]);
        }
      }
      std::copy(out.begin(), out.end(), row.begin());
      adv.logs[i].flipped = m.predict_row(out) == 0;
    }
  });
  return adv;
}

MetricsReport transfer_evaluate(const Classifier& victim, const AdversarialSet& adv) {
  return transfer_evaluate(victim, adv, {});
}

MetricsReport transfer_evaluate(const Classifier& victim, const AdversarialSet& adv,
                                const std::vector<char>& exclude_rows) {
  require_schema(victim, adv.schema_fingerprint);
  if (!exclude_rows.empty() && exclude_rows.size() != adv.n())
    throw error("transfer_evaluate: exclusion mask size mismatch");
  std::vector<int> y_true;
  std::vector<int> y_pred;
  y_true.reserve(adv.n());
  y_pred.reserve(adv.n());
  for (std::size_t i = 0; i < adv.n(); ++i) {
    if (!exclude_rows.empty() && exclude_rows[i]) continue;
    y_true.push_back(adv.labels[i]);
    y_pred.push_back(victim.predict_row(adv.features.row(i)));
  }
  return prf(confusion(y_true, y_pred));
}

std::pair<std::size_t, std::size_t> SweepGrid::worst_cell(std::size_t victim) const {
  const Matrix& grid = cells.at(victim);
  std::size_t bt = 0, bg = 0;
  double best = grid(0, 0);
  for (std::size_t t = 0; t < grid.rows(); ++t)
    for (std::size_t g = 0; g < grid.cols(); ++g)
      if (grid(t, g) < best) {
        best = grid(t, g);
        bt = t;
        bg = g;
      }
  return {bt, bg};
}

double SweepGrid::grid_average(std::size_t victim) const {
  const Matrix& grid = cells.at(victim);
  double sum = 0.0;
  for (double v : grid.data()) sum += v;
  return sum / static_cast<double>(grid.rows() * grid.cols());
}

std::vector<double> default_grid_axis() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

SweepGrid sweep(const std::vector<const Classifier*>& victims,
                const std::vector<std::string>& victim_names, const MlpSurrogate& m,
                const Dataset& test, const std::vector<double>& thetas,
                const std::vector<double>& gammas, std::uint64_t seed) {
  if (victims.empty() || victims.size() != victim_names.size())
    throw error("sweep: victims and victim_names must be non-empty and equal-length");
  if (thetas.empty() || gammas.empty()) throw error("sweep: parameter axes must be non-empty");

  SweepGrid grid;
  grid.thetas = thetas;
  grid.gammas = gammas;
  grid.victim_names = victim_names;
  grid.cells.assign(victims.size(), Matrix(thetas.size(), gammas.size()));
  grid.baseline.resize(victims.size());

  for (std::size_t v = 0; v < victims.size(); ++v) {
    require_schema(*victims[v], test.schema_fingerprint);
    grid.baseline[v] =
        prf(confusion(test.labels, victims[v]->predict(test.features))).weighted_f1;
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
    for (std::size_t v = 0; v < victims.size(); ++v)
      grid.cells[v](ti, gi) = transfer_evaluate(*victims[v], adv).weighted_f1;
  });
  return grid;
}

}  // namespace greybox
