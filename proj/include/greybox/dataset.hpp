#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "greybox/matrix.hpp"

namespace greybox {

enum class SanitizePolicy { drop_row, clamp_to_column_extremes };

SanitizePolicy sanitize_policy_from_string(const std::string& s);
std::string to_string(SanitizePolicy p);

/// Per-feature min/max statistics, fitted on a training partition only.
/// Columns with min == max are flagged degenerate and normalize to 0.
struct FeatureSchema {
  std::vector<std::string> feature_names;
  std::vector<double> mins;
  std::vector<double> maxes;
  std::vector<bool> degenerate;

  std::size_t dimension() const { return feature_names.size(); }
  std::uint64_t fingerprint() const;
  std::string to_json_string() const;
  static FeatureSchema from_json_string(const std::string& text);
};

/// Raw readings straight from disk; may contain NaN/inf until sanitized.
struct RawTable {
  std::vector<std::string> feature_names;
  Matrix rows;
  std::vector<std::string> raw_labels;
  std::string sanitize_policy;  // provenance, empty until sanitize() ran

  std::size_t n() const { return rows.rows(); }
  std::size_t d() const { return rows.cols(); }
};

/// Binary-labeled feature table, not yet normalized.
struct LabeledTable {
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<int> labels;

  std::size_t n() const { return features.rows(); }
  std::size_t d() const { return features.cols(); }
};

/// Normalized dataset: every feature finite in [0,1], labels in {0,1}.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::uint64_t schema_fingerprint = 0;

  std::size_t n() const { return features.rows(); }
  std::size_t d() const { return features.cols(); }
};

struct SplitSpec {
  double train_fraction = 0.6;
  std::uint64_t seed = 0;
  bool stratified = false;
};

struct ClassCounts {
  std::int64_t benign = 0;
  std::int64_t malicious = 0;
};

/// Comma-delimited numeric columns plus one label column (last by default,
/// or named via label_column when the file has a header). Unparseable cells
/// become NaN for sanitize() to deal with; ragged rows are rejected.
RawTable load_csv(const std::string& path, bool has_header,
                  const std::optional<std::string>& label_column = std::nullopt);

/// Concatenates several files with identical column layout.
RawTable load_csv_many(const std::vector<std::string>& paths, bool has_header,
                       const std::optional<std::string>& label_column = std::nullopt);

/// Removes non-finite entries. drop_row discards offending rows;
/// clamp_to_column_extremes maps +inf to the column's finite max and
/// -inf/NaN to its finite min, so no value leaves the observed range.
RawTable sanitize(const RawTable& t, SanitizePolicy policy);

/// Tag -> class mapping with benign = 0, malicious = 1. Lookups are
/// case-insensitive and ignore spaces, underscores and hyphens.
std::map<std::string, int> default_label_mapping();

LabeledTable binarize_labels(const RawTable& t, const std::map<std::string, int>& mapping);

FeatureSchema fit_normalizer(const LabeledTable& train);

/// clamp((x - min) / (max - min), 0, 1) per column; degenerate columns -> 0.
Dataset normalize(const LabeledTable& t, const FeatureSchema& schema);

/// Inverse of normalize for non-degenerate, non-clamped values.
double denormalize_value(double v, const FeatureSchema& schema, std::size_t feature);

/// Seeded partition of [0, n): same (n, spec) always yields the same index
/// sets. Train size is round(train_fraction * n); both sides are returned
/// sorted ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const std::vector<int>& labels, const SplitSpec& spec);

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

ClassCounts class_distribution(const Dataset& ds);

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& indices);
LabeledTable take_rows(const LabeledTable& t, const std::vector<std::size_t>& indices);

/// Concatenates rows of two datasets with identical dimension.
Dataset concat(const Dataset& a, const Dataset& b);

// Exact round-trip persistence: doubles are written as shortest strings
// that parse back bit-identically.
void save_dataset_csv(const Dataset& ds, const std::vector<std::string>& feature_names,
                      const std::string& path);
Dataset load_dataset_csv(const std::string& path);

}  // namespace greybox
