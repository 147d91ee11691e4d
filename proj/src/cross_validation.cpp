#include "greybox/cross_validation.hpp"

#include <algorithm>

#include "json.hpp"

#include "greybox/rng.hpp"

namespace greybox {

using nlohmann::json;

std::string CvResult::to_json_string(int indent) const {
  json folds = json::array();
  for (const auto& r : fold_reports) folds.push_back(json::parse(r.to_json_string()));
  json j{{"k", k},
         {"seed", hex64(seed)},
         {"fold_reports", std::move(folds)},
         {"aggregate", json::parse(aggregate.to_json_string())}};
  return j.dump(indent);
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw error("kfold_indices: k must be >= 2");
  if (static_cast<std::size_t>(k) > n)
    throw error("kfold_indices: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  Rng rng(derive_seed(seed, "kfold"));
  std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t base = n / static_cast<std::size_t>(k);
  std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t at = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    folds[f].assign(order.begin() + at, order.begin() + at + len);
    std::sort(folds[f].begin(), folds[f].end());
    at += len;
  }
  return folds;
}

CvResult cross_validate(ModelKind kind, const TrainConfig& cfg, const Dataset& ds, int k,
                        std::uint64_t seed) {
  auto folds = kfold_indices(ds.n(), k, seed);
  CvResult result;
  result.k = k;
  result.seed = seed;
  result.fold_reports.resize(k);

  std::vector<ConfusionMatrix> fold_cms(k);
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
    std::vector<char> held(ds.n(), 0);
    for (std::size_t i : folds[f]) held[i] = 1;
    std::vector<std::size_t> train_rows;
    train_rows.reserve(ds.n() - folds[f].size());
    for (std::size_t i = 0; i < ds.n(); ++i)
      if (!held[i]) train_rows.push_back(i);

    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(seed, "cv-fold", f);
    auto model = train_model(kind, take_rows(ds, train_rows), fold_cfg);

    Dataset held_out = take_rows(ds, folds[f]);
    fold_cms[f] = confusion(held_out.labels, model->predict(held_out.features));
  });

  ConfusionMatrix pooled;
  for (int f = 0; f < k; ++f) {
    pooled += fold_cms[f];
    result.fold_reports[f] = prf(fold_cms[f]);
  }
  result.aggregate = prf(pooled);
  return result;
}

}  // namespace greybox
