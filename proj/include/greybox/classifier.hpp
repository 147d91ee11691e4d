#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "greybox/dataset.hpp"
#include "greybox/matrix.hpp"

namespace greybox {

enum class ModelKind { zero_r, naive_bayes, tree, forest, mlp };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

/// Hyperparameters for every model family plus the shared training seed.
struct TrainConfig {
  std::uint64_t seed = 0;

  struct Forest {
    int n_trees = 100;
    int features_per_split = 0;  // 0 = floor(log2 d) + 1
    bool bootstrap = true;
    int min_leaf_count = 2;
  } forest;

  struct Tree {
    int min_leaf_count = 2;  // pruning is always off
  } tree;

  struct Mlp {
    int hidden = 128;
    double learning_rate = 0.01;
    int epochs = 50;
    int batch_size = 64;
  } mlp;

  void validate() const;
};

/// Trained two-class model. predict_proba rows are non-negative and sum to
/// 1 within 1e-9; argmax ties resolve to class 0 (benign).
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::array<double, 2> predict_proba_row(std::span<const double> x) const = 0;

  int predict_row(std::span<const double> x) const {
    auto p = predict_proba_row(x);
    return p[1] > p[0] ? 1 : 0;
  }

  std::vector<int> predict(const Matrix& X) const;
  Matrix predict_proba(const Matrix& X) const;

  std::uint64_t train_seed() const { return train_seed_; }
  std::uint64_t schema_fingerprint() const { return schema_fingerprint_; }
  void set_provenance(std::uint64_t seed, std::uint64_t fingerprint) {
    train_seed_ = seed;
    schema_fingerprint_ = fingerprint;
  }

 protected:
  void check_dimension(std::size_t got) const;

  std::uint64_t train_seed_ = 0;
  std::uint64_t schema_fingerprint_ = 0;
};

std::unique_ptr<Classifier> train_model(ModelKind kind, const Dataset& train,
                                        const TrainConfig& cfg);

/// Throws when the model was trained against a different feature schema.
/// Fingerprint 0 means "unknown" and is never rejected.
void require_schema(const Classifier& m, std::uint64_t fingerprint);

// Versioned JSON container; load(save(m)) predicts bit-identically.
std::string model_to_json(const Classifier& m);
std::unique_ptr<Classifier> model_from_json(const std::string& text);
void save_model(const Classifier& m, const std::string& path);
std::unique_ptr<Classifier> load_model(const std::string& path);

}  // namespace greybox
