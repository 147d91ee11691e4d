#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace greybox {

/// counts[actual][predicted] for the two-class task (0 benign, 1 malicious).
struct ConfusionMatrix {
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};

  std::int64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    for (int a = 0; a < 2; ++a)
      for (int p = 0; p < 2; ++p) counts[a][p] += other.counts[a][p];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

/// Per-class precision/recall/F1 plus support-weighted and macro averages.
/// Zero-denominator metrics are 0 by convention.
struct MetricsReport {
  double precision[2] = {0, 0};
  double recall[2] = {0, 0};
  double f1[2] = {0, 0};
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  std::int64_t support[2] = {0, 0};
  ConfusionMatrix cm;

  std::string to_json_string(int indent = -1) const;
};

MetricsReport prf(const ConfusionMatrix& cm);

}  // namespace greybox
