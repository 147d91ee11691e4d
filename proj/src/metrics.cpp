#include "greybox/metrics.hpp"

#include "json.hpp"

#include "greybox/common.hpp"

namespace greybox {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw error("confusion: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                std::to_string(y_pred.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int a = y_true[i], p = y_pred[i];
    if ((a != 0 && a != 1) || (p != 0 && p != 1))
      throw error("confusion: label out of range at index " + std::to_string(i));
    cm.counts[a][p]++;
  }
  return cm;
}

namespace {
double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

MetricsReport prf(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.cm = cm;
  for (int c = 0; c < 2; ++c) {
    int o = 1 - c;
    std::int64_t tp = cm.counts[c][c];
    std::int64_t fp = cm.counts[o][c];
    std::int64_t fn = cm.counts[c][o];
    r.precision[c] = ratio(tp, tp + fp);
    r.recall[c] = ratio(tp, tp + fn);
    double psum = r.precision[c] + r.recall[c];
    r.f1[c] = psum == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / psum;
    r.support[c] = cm.counts[c][0] + cm.counts[c][1];
  }
  std::int64_t total = r.support[0] + r.support[1];
  for (int c = 0; c < 2; ++c) {
    double w = total == 0 ? 0.0 : static_cast<double>(r.support[c]) / static_cast<double>(total);
    r.weighted_precision += w * r.precision[c];
    r.weighted_recall += w * r.recall[c];
    r.weighted_f1 += w * r.f1[c];
  }
  r.macro_precision = (r.precision[0] + r.precision[1]) / 2.0;
  r.macro_recall = (r.recall[0] + r.recall[1]) / 2.0;
  r.macro_f1 = (r.f1[0] + r.f1[1]) / 2.0;
  return r;
}

std::string MetricsReport::to_json_string(int indent) const {
  nlohmann::json j;
  j["precision_0"] = precision[0];
  j["recall_0"] = recall[0];
  j["f1_0"] = f1[0];
  j["precision_1"] = precision[1];
  j["recall_1"] = recall[1];
  j["f1_1"] = f1[1];
  j["weighted_precision"] = weighted_precision;
  j["weighted_recall"] = weighted_recall;
  j["weighted_f1"] = weighted_f1;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["support_0"] = support[0];
  j["support_1"] = support[1];
  j["confusion"] = {{cm.counts[0][0], cm.counts[0][1]}, {cm.counts[1][0], cm.counts[1][1]}};
  return j.dump(indent);
}

}  // namespace greybox
