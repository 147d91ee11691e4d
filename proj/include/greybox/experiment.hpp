#pragma once

#include <map>
#include <optional>
#include <ostream>

#include "greybox/attack.hpp"
#include "greybox/defense.hpp"
#include "greybox/synthetic.hpp"

namespace greybox {

/// Fully resolved experiment description. out_dir and threads are
/// execution parameters: they never enter the config hash, so the same
/// experiment rerun elsewhere produces bitwise-identical artifacts.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  unsigned threads = 0;  // 0 = hardware concurrency

  struct Data {
    std::string source = "synthetic";  // "synthetic" or "csv"
    std::vector<std::string> paths;
    bool has_header = true;
    std::optional<std::string> label_column;
    SanitizePolicy sanitize = SanitizePolicy::clamp_to_column_extremes;
    std::map<std::string, int> label_mapping;  // empty = built-in default
    double train_fraction = 0.6;
    bool stratified = false;
    SyntheticConfig synthetic;  // used when source == "synthetic"
  } data;

  struct Train {
    std::vector<ModelKind> models{ModelKind::zero_r, ModelKind::naive_bayes, ModelKind::tree,
                                  ModelKind::forest};
    std::vector<ModelKind> victims{ModelKind::forest, ModelKind::tree};
    int cv_folds = 10;
    TrainConfig params;  // stage seeds are derived from the global seed
  } train;

  struct Attack {
    std::vector<double> thetas = default_grid_axis();
    std::vector<double> gammas = default_grid_axis();
    std::vector<std::pair<double, double>> report_cells;  // full metrics emitted here
    std::vector<std::pair<double, double>> save_cells;    // adversarial CSVs persisted here
  } attack;

  struct Defense {
    double sample_fraction = 0.2;
    /// Unset = each victim's worst sweep cell; an explicit empty list is
    /// rejected by validate().
    std::optional<std::vector<std::pair<double, double>>> source_cells;
    int cv_folds = 10;
  } defense;

  void validate() const;

  /// Deterministic resolved form (defaults filled in, execution parameters
  /// stripped); its FNV-1a hash names the experiment in every manifest.
  std::string canonical_json() const;
  std::uint64_t config_hash() const;

  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig load_file(const std::string& path);
};

// Stage runners. Each consumes only the config plus prior stages' on-disk
// artifacts, writes its outputs and a manifest under cfg.out_dir, and logs
// a human-readable summary to log.
void run_ingest(const ExperimentConfig& cfg, std::ostream& log);
void run_train(const ExperimentConfig& cfg, std::ostream& log);
void run_attack(const ExperimentConfig& cfg, std::ostream& log);
void run_defend(const ExperimentConfig& cfg, std::ostream& log);
void run_report(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace greybox
