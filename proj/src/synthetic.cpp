#include "greybox/synthetic.hpp"

#include <cmath>

#include "greybox/rng.hpp"

namespace greybox {

RawTable make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n < 2 || cfg.d == 0) throw config_error("synthetic: need n >= 2 and d >= 1");
  if (cfg.malicious_fraction <= 0.0 || cfg.malicious_fraction >= 1.0)
    throw config_error("synthetic: malicious_fraction must lie in (0, 1)");

  Rng rng(cfg.seed);

  // Random unit direction separating the class means.
  std::vector<double> dir(cfg.d);
  double norm = 0.0;
  for (auto& v : dir) {
    v = rng.next_normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : dir) v /= norm;

  RawTable t;
  for (std::size_t j = 0; j < cfg.d; ++j) t.feature_names.push_back("s" + std::to_string(j));

  std::vector<double> row(cfg.d);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    bool malicious = rng.next_bool(cfg.malicious_fraction);
    double offset = (malicious ? 1.0 : -1.0) * cfg.separation / 2.0;
    for (std::size_t j = 0; j < cfg.d; ++j) row[j] = offset * dir[j] + rng.next_normal();
    if (rng.next_bool(cfg.label_noise)) malicious = !malicious;
    t.rows.push_row(row);
    t.raw_labels.push_back(malicious ? "attack" : "natural");
  }
  return t;
}

}  // namespace greybox
