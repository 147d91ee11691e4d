#include "greybox/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "greybox/rng.hpp"

namespace greybox {

SanitizePolicy sanitize_policy_from_string(const std::string& s) {
  if (s == "drop_row") return SanitizePolicy::drop_row;
  if (s == "clamp_to_column_extremes") return SanitizePolicy::clamp_to_column_extremes;
  throw config_error("unknown sanitize policy: " + s);
}

std::string to_string(SanitizePolicy p) {
  return p == SanitizePolicy::drop_row ? "drop_row" : "clamp_to_column_extremes";
}

std::uint64_t FeatureSchema::fingerprint() const {
  std::uint64_t h = kFnvInit;
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    h = fnv1a(feature_names[i], h);
    h = fnv1a_double(mins[i], h);
    h = fnv1a_double(maxes[i], h);
    h = fnv1a_u64(degenerate[i] ? 1 : 0, h);
  }
  return h;
}

std::string FeatureSchema::to_json_string() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["feature_names"] = feature_names;
  j["mins"] = mins;
  j["maxes"] = maxes;
  j["degenerate"] = std::vector<int>(degenerate.begin(), degenerate.end());
  j["fingerprint"] = hex64(fingerprint());
  return j.dump(2);
}

FeatureSchema FeatureSchema::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("schema parse failure: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw io_error("schema: unsupported format version");
  FeatureSchema s;
  s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  s.mins = j.at("mins").get<std::vector<double>>();
  s.maxes = j.at("maxes").get<std::vector<double>>();
  auto deg = j.at("degenerate").get<std::vector<int>>();
  s.degenerate.assign(deg.begin(), deg.end());
  if (s.mins.size() != s.feature_names.size() || s.maxes.size() != s.feature_names.size() ||
      s.degenerate.size() != s.feature_names.size())
    throw io_error("schema: inconsistent field lengths");
  return s;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

double parse_cell(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

std::string canonical_tag(const std::string& tag) {
  std::string out;
  for (char c : tag) {
    if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

RawTable load_csv(const std::string& path, bool has_header,
                  const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);

  RawTable t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  std::size_t label_index = 0;
  bool have_layout = false;

  auto establish_layout = [&](std::size_t n_fields, const std::vector<std::string>* header) {
    if (n_fields < 2) throw io_error(path + ": need at least one feature column plus a label column");
    expected_fields = n_fields;
    label_index = n_fields - 1;
    if (label_column) {
      if (!header) throw io_error(path + ": label column by name requires a header");
      auto it = std::find(header->begin(), header->end(), *label_column);
      if (it == header->end()) throw io_error(path + ": label column '" + *label_column + "' not in header");
      label_index = static_cast<std::size_t>(it - header->begin());
    }
    if (header) {
      for (std::size_t i = 0; i < n_fields; ++i)
        if (i != label_index) t.feature_names.push_back((*header)[i]);
    } else {
      for (std::size_t i = 0; i + 1 < n_fields; ++i) t.feature_names.push_back("f" + std::to_string(i));
    }
    have_layout = true;
  };

  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_layout) {
      if (has_header) {
        establish_layout(fields.size(), &fields);
        continue;
      }
      establish_layout(fields.size(), nullptr);
    }
    if (fields.size() != expected_fields)
      throw io_error(path + ": data row " + std::to_string(data_row + 1) + " (line " +
                     std::to_string(line_no) + ") has " + std::to_string(fields.size()) +
                     " fields, expected " + std::to_string(expected_fields));
    std::vector<double> row;
    row.reserve(expected_fields - 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_index) continue;
      row.push_back(parse_cell(fields[i]));
    }
    t.rows.push_row(row);
    t.raw_labels.push_back(fields[label_index]);
    ++data_row;
  }
  if (t.n() == 0) throw io_error(path + ": no data rows");
  return t;
}

RawTable load_csv_many(const std::vector<std::string>& paths, bool has_header,
                       const std::optional<std::string>& label_column) {
  if (paths.empty()) throw io_error("no input files given");
  RawTable all = load_csv(paths[0], has_header, label_column);
  for (std::size_t p = 1; p < paths.size(); ++p) {
    RawTable t = load_csv(paths[p], has_header, label_column);
    if (t.d() != all.d())
      throw io_error(paths[p] + ": has " + std::to_string(t.d()) + " feature columns, expected " +
                     std::to_string(all.d()));
    for (std::size_t i = 0; i < t.n(); ++i) all.rows.push_row(t.rows.row(i));
    all.raw_labels.insert(all.raw_labels.end(), t.raw_labels.begin(), t.raw_labels.end());
  }
  return all;
}

RawTable sanitize(const RawTable& t, SanitizePolicy policy) {
  const std::size_t n = t.n(), d = t.d();
  RawTable out;
  out.feature_names = t.feature_names;
  out.sanitize_policy = to_string(policy);

  if (policy == SanitizePolicy::drop_row) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = t.rows.row(i);
      bool ok = std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
      if (!ok) continue;
      out.rows.push_row(row);
      out.raw_labels.push_back(t.raw_labels[i]);
    }
    if (out.rows.rows() == 0) out.rows = Matrix(0, d);
    return out;
  }

  // clamp_to_column_extremes
  std::vector<double> col_min(d, std::numeric_limits<double>::infinity());
  std::vector<double> col_max(d, -std::numeric_limits<double>::infinity());
  std::vector<bool> has_finite(d, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = t.rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(row[j])) continue;
      has_finite[j] = true;
      col_min[j] = std::min(col_min[j], row[j]);
      col_max[j] = std::max(col_max[j], row[j]);
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    if (!has_finite[j])
      throw error("sanitize: column '" + t.feature_names[j] + "' has no finite values, cannot clamp");

  out.rows = t.rows;
  out.raw_labels = t.raw_labels;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      double v = row[j];
      if (std::isfinite(v)) continue;
      // +inf -> finite max; -inf and NaN -> finite min.
      row[j] = (v == std::numeric_limits<double>::infinity()) ? col_max[j] : col_min[j];
    }
  }
  return out;
}

std::map<std::string, int> default_label_mapping() {
  return {
      {"natural", 0},
      {"noevents", 0},
      {"noevent", 0},
      {"attack", 1},
  };
}

LabeledTable binarize_labels(const RawTable& t, const std::map<std::string, int>& mapping) {
  std::map<std::string, int> canon;
  for (const auto& [tag, cls] : mapping) {
    if (cls != 0 && cls != 1)
      throw config_error("label mapping for '" + tag + "' must be 0 or 1");
    canon[canonical_tag(tag)] = cls;
  }

  std::set<std::string> unknown;
  LabeledTable out;
  out.feature_names = t.feature_names;
  out.features = t.rows;
  out.labels.reserve(t.n());
  for (const auto& tag : t.raw_labels) {
    auto it = canon.find(canonical_tag(tag));
    if (it == canon.end()) {
      unknown.insert(tag);
      continue;
    }
    out.labels.push_back(it->second);
  }
  if (!unknown.empty()) {
    std::string msg = "binarize_labels: unmapped tags:";
    for (const auto& tag : unknown) msg += " '" + tag + "'";
    throw error(msg);
  }
  return out;
}

FeatureSchema fit_normalizer(const LabeledTable& train) {
  const std::size_t n = train.n(), d = train.d();
  if (n == 0) throw error("fit_normalizer: empty table");
  FeatureSchema s;
  s.feature_names = train.feature_names;
  s.mins.assign(d, std::numeric_limits<double>::infinity());
  s.maxes.assign(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = train.features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(row[j]))
        throw error("fit_normalizer: non-finite value in column '" + train.feature_names[j] +
                    "'; sanitize first");
      s.mins[j] = std::min(s.mins[j], row[j]);
      s.maxes[j] = std::max(s.maxes[j], row[j]);
    }
  }
  s.degenerate.resize(d);
  for (std::size_t j = 0; j < d; ++j) s.degenerate[j] = (s.mins[j] == s.maxes[j]);
  return s;
}

Dataset normalize(const LabeledTable& t, const FeatureSchema& schema) {
  const std::size_t n = t.n(), d = t.d();
  if (d != schema.dimension())
    throw error("normalize: table has " + std::to_string(d) + " features, schema expects " +
                std::to_string(schema.dimension()));
  Dataset ds;
  ds.features = Matrix(n, d);
  ds.labels = t.labels;
  ds.schema_fingerprint = schema.fingerprint();
  for (std::size_t i = 0; i < n; ++i) {
    auto src = t.features.row(i);
    auto dst = ds.features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (schema.degenerate[j]) {
        dst[j] = 0.0;
        continue;
      }
      double v = (src[j] - schema.mins[j]) / (schema.maxes[j] - schema.mins[j]);
      dst[j] = std::clamp(v, 0.0, 1.0);
    }
  }
  return ds;
}

double denormalize_value(double v, const FeatureSchema& schema, std::size_t feature) {
  if (schema.degenerate[feature]) return schema.mins[feature];
  return schema.mins[feature] + v * (schema.maxes[feature] - schema.mins[feature]);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const std::vector<int>& labels, const SplitSpec& spec) {
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
    throw config_error("train_fraction must lie in (0, 1)");
  if (n < 2) throw error("split: need at least 2 rows");

  Rng rng(spec.seed);
  std::vector<std::size_t> train_idx, test_idx;

  if (!spec.stratified) {
    std::size_t n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) throw error("split: train_fraction produces an empty partition");
    auto perm = rng.permutation(n);
    train_idx.assign(perm.begin(), perm.begin() + n_train);
    test_idx.assign(perm.begin() + n_train, perm.end());
  } else {
    // Per-class sampling; per-side sizes are rounded per class.
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i] ? 1 : 0].push_back(i);
    for (auto& cls : by_class) {
      rng.shuffle(cls);
      std::size_t k = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(cls.size())));
      train_idx.insert(train_idx.end(), cls.begin(), cls.begin() + k);
      test_idx.insert(test_idx.end(), cls.begin() + k, cls.end());
    }
    if (train_idx.empty() || test_idx.empty())
      throw error("split: train_fraction produces an empty partition");
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {std::move(train_idx), std::move(test_idx)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  auto [train_idx, test_idx] = split_indices(ds.n(), ds.labels, spec);
  return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

ClassCounts class_distribution(const Dataset& ds) {
  ClassCounts c;
  for (int y : ds.labels) (y == 0 ? c.benign : c.malicious)++;
  return c;
}

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.features = Matrix(indices.size(), ds.d());
  out.labels.reserve(indices.size());
  out.schema_fingerprint = ds.schema_fingerprint;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = ds.features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(ds.labels[indices[i]]);
  }
  return out;
}

LabeledTable take_rows(const LabeledTable& t, const std::vector<std::size_t>& indices) {
  LabeledTable out;
  out.feature_names = t.feature_names;
  out.features = Matrix(indices.size(), t.d());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = t.features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(t.labels[indices[i]]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (b.n() == 0) return a;
  if (a.n() == 0) return b;
  if (a.d() != b.d()) throw error("concat: dimension mismatch");
  Dataset out = a;
  for (std::size_t i = 0; i < b.n(); ++i) out.features.push_row(b.features.row(i));
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

void save_dataset_csv(const Dataset& ds, const std::vector<std::string>& feature_names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (std::size_t j = 0; j < ds.d(); ++j)
    out << (j < feature_names.size() ? feature_names[j] : "f" + std::to_string(j)) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    auto row = ds.features.row(i);
    for (double v : row) out << format_double(v) << ',';
    out << ds.labels[i] << '\n';
  }
  if (!out) throw io_error("write failure on " + path);
}

Dataset load_dataset_csv(const std::string& path) {
  RawTable t = load_csv(path, /*has_header=*/true);
  Dataset ds;
  ds.features = t.rows;
  ds.labels.reserve(t.n());
  for (const auto& tag : t.raw_labels) {
    if (tag == "0")
      ds.labels.push_back(0);
    else if (tag == "1")
      ds.labels.push_back(1);
    else
      throw io_error(path + ": label '" + tag + "' is not 0/1");
  }
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (double v : ds.features.row(i))
      if (!(v >= 0.0 && v <= 1.0))
        throw io_error(path + ": feature value " + format_double(v) + " outside [0,1]");
  return ds;
}

}  // namespace greybox
