#include "greybox/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "greybox/cross_validation.hpp"
#include "greybox/mlp.hpp"
#include "greybox/rng.hpp"

namespace greybox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("cannot open " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw io_error("cannot write " + p.string());
  out << bytes;
  if (!out) throw io_error("failed writing " + p.string());
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

/// Collects artifacts and their content hashes for the stage manifest.
struct StageWriter {
  fs::path root;
  json artifacts = json::object();
  json extra = json::object();

  void put(const std::string& rel, const std::string& bytes) {
    write_file(root / rel, bytes);
    artifacts[rel] = hex64(fnv1a(bytes));
  }
  /// Records a file some other writer already produced.
  void note(const std::string& rel) { artifacts[rel] = hex64(fnv1a(read_file(root / rel))); }
};

struct StageClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

const char* stage_dir(const std::string& stage) {
  if (stage == "ingest") return "data";
  if (stage == "train") return "models";
  if (stage == "attack") return "attack";
  if (stage == "defend") return "defense";
  throw error("unknown stage " + stage);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& stage, StageWriter& w,
                    double seconds) {
  json m{{"stage", stage},
         {"config_hash", hex64(cfg.config_hash())},
         {"seed", cfg.seed},
         {"artifacts", w.artifacts},
         {"wall_clock_seconds", seconds}};
  for (auto it = w.extra.begin(); it != w.extra.end(); ++it) m[it.key()] = it.value();
  write_file(w.root / stage_dir(stage) / "manifest.json", m.dump(2) + "\n");
}

json require_stage(const ExperimentConfig& cfg, const std::string& stage) {
  fs::path p = fs::path(cfg.out_dir) / stage_dir(stage) / "manifest.json";
  if (!fs::exists(p))
    throw error("missing artifacts for stage '" + stage + "' (" + p.string() + "); run '" +
                stage + "' first");
  json m = json::parse(read_file(p));
  std::string have = m.at("config_hash").get<std::string>();
  std::string want = hex64(cfg.config_hash());
  if (have != want)
    throw error("stage '" + stage + "' artifacts were produced by config " + have +
                ", current config is " + want + "; re-run from ingest");
  return m;
}

FeatureSchema load_schema(const ExperimentConfig& cfg) {
  return FeatureSchema::from_json_string(
      read_file(fs::path(cfg.out_dir) / "data" / "schema.json"));
}

Dataset load_partition(const ExperimentConfig& cfg, const char* name,
                       const FeatureSchema& schema) {
  Dataset ds = load_dataset_csv((fs::path(cfg.out_dir) / "data" / name).string());
  if (ds.d() != schema.dimension())
    throw error(std::string(name) + " has " + std::to_string(ds.d()) +
                " features, schema says " + std::to_string(schema.dimension()));
  ds.schema_fingerprint = schema.fingerprint();
  return ds;
}

std::string cell_tag(double theta, double gamma) {
  return "theta" + format_double(theta) + "_gamma" + format_double(gamma);
}

std::string grid_csv(const std::vector<double>& thetas, const std::vector<double>& gammas,
                     const Matrix& cells) {
  std::string out = "theta\\gamma";
  for (double g : gammas) out += "," + format_double(g);
  out += "\n";
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    out += format_double(thetas[t]);
    for (std::size_t g = 0; g < gammas.size(); ++g) out += "," + format_double(cells(t, g));
    out += "\n";
  }
  return out;
}

json grid_to_json(const SweepGrid& grid) {
  json cells = json::object();
  json baseline = json::object();
  for (std::size_t v = 0; v < grid.victim_names.size(); ++v) {
    json rows = json::array();
    for (std::size_t t = 0; t < grid.thetas.size(); ++t) {
      json row = json::array();
      for (std::size_t g = 0; g < grid.gammas.size(); ++g) row.push_back(grid.cells[v](t, g));
      rows.push_back(std::move(row));
    }
    cells[grid.victim_names[v]] = std::move(rows);
    baseline[grid.victim_names[v]] = grid.baseline[v];
  }
  return json{{"thetas", grid.thetas},
              {"gammas", grid.gammas},
              {"victims", grid.victim_names},
              {"baseline", std::move(baseline)},
              {"cells", std::move(cells)}};
}

std::string adversarial_csv(const AdversarialSet& adv,
                            const std::vector<std::string>& feature_names) {
  std::string out;
  for (std::size_t j = 0; j < adv.d(); ++j)
    out += (j < feature_names.size() ? feature_names[j] : "f" + std::to_string(j)) + ",";
  out += "label,origin_mask\n";
  for (std::size_t i = 0; i < adv.n(); ++i) {
    auto row = adv.features.row(i);
    for (double v : row) out += format_double(v) + ",";
    out += std::to_string(adv.labels[i]) + "," + (adv.perturbed[i] ? "perturbed" : "untouched") +
           "\n";
  }
  return out;
}

json attack_config_to_json(const AttackConfig& cfg) {
  json j{{"method", to_string(cfg.method)}, {"seed", cfg.seed}};
  if (cfg.method == AttackConfig::Method::jsma) {
    j["theta"] = cfg.theta;
    j["gamma"] = cfg.gamma;
  } else {
    j["epsilon"] = cfg.epsilon;
  }
  return j;
}

json adversarial_sidecar(const AdversarialSet& adv) {
  json rows = json::array();
  for (std::size_t i = 0; i < adv.n(); ++i) {
    if (!adv.perturbed[i]) continue;
    rows.push_back(json{{"row", i},
                        {"changed_features", adv.logs[i].changed_features},
                        {"l1_change", adv.logs[i].l1_change},
                        {"flipped", adv.logs[i].flipped}});
  }
  return json{{"format_version", 1},
              {"config", attack_config_to_json(adv.config)},
              {"perturbed_rows", std::move(rows)}};
}

/// Models the train stage produces: the configured list, any victims not
/// already in it, then the surrogate.
std::vector<ModelKind> stage_model_list(const ExperimentConfig& cfg) {
  std::vector<ModelKind> kinds = cfg.train.models;
  auto add = [&](ModelKind k) {
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  };
  for (ModelKind v : cfg.train.victims) add(v);
  add(ModelKind::mlp);
  return kinds;
}

std::unique_ptr<Classifier> load_stage_model(const ExperimentConfig& cfg, ModelKind kind) {
  fs::path p = fs::path(cfg.out_dir) / "models" / (to_string(kind) + ".json");
  if (!fs::exists(p)) throw error("missing model artifact " + p.string() + "; run 'train' first");
  return load_model(p.string());
}

void check_cells_in_range(const std::vector<std::pair<double, double>>& cells,
                          const char* where) {
  for (auto [theta, gamma] : cells) {
    if (!(theta > 0.0 && theta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0))
      throw config_error(std::string(where) + " cells must lie in (0,1] x (0,1]");
  }
}

void check_keys(const json& j, const char* where,
                std::initializer_list<std::string_view> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw config_error("config: unknown key '" + it.key() + "' in " + where);
  }
}

std::vector<std::pair<double, double>> parse_cells(const json& arr, const char* where) {
  if (!arr.is_array()) throw config_error(std::string(where) + " must be an array of [theta, gamma] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& c : arr) {
    if (!c.is_array() || c.size() != 2)
      throw config_error(std::string(where) + " entries must be [theta, gamma] pairs");
    out.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  }
  return out;
}

std::vector<ModelKind> parse_kinds(const json& arr, const char* where) {
  if (!arr.is_array()) throw config_error(std::string(where) + " must be an array of model names");
  std::vector<ModelKind> out;
  for (const auto& s : arr) out.push_back(model_kind_from_string(s.get<std::string>()));
  return out;
}

json cells_to_json(const std::vector<std::pair<double, double>>& cells) {
  json arr = json::array();
  for (auto [t, g] : cells) arr.push_back(json::array({t, g}));
  return arr;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    check_keys(j, "config root", {"seed", "out_dir", "threads", "data", "train", "attack",
                                  "defense"});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = j.value("out_dir", std::string("out"));
    cfg.threads = j.value("threads", 0u);

    if (j.contains("data")) {
      const json& d = j["data"];
      check_keys(d, "data", {"source", "paths", "has_header", "label_column", "sanitize_policy",
                             "label_mapping", "train_fraction", "stratified", "synthetic"});
      cfg.data.source = d.value("source", std::string("synthetic"));
      if (d.contains("paths")) cfg.data.paths = d["paths"].get<std::vector<std::string>>();
      cfg.data.has_header = d.value("has_header", true);
      if (d.contains("label_column"))
        cfg.data.label_column = d["label_column"].get<std::string>();
      if (d.contains("sanitize_policy"))
        cfg.data.sanitize = sanitize_policy_from_string(d["sanitize_policy"].get<std::string>());
      if (d.contains("label_mapping"))
        cfg.data.label_mapping = d["label_mapping"].get<std::map<std::string, int>>();
      cfg.data.train_fraction = d.value("train_fraction", 0.6);
      cfg.data.stratified = d.value("stratified", false);
      if (d.contains("synthetic")) {
        const json& s = d["synthetic"];
        check_keys(s, "data.synthetic",
                   {"n", "d", "malicious_fraction", "separation", "label_noise"});
        cfg.data.synthetic.n = s.value("n", cfg.data.synthetic.n);
        cfg.data.synthetic.d = s.value("d", cfg.data.synthetic.d);
        cfg.data.synthetic.malicious_fraction =
            s.value("malicious_fraction", cfg.data.synthetic.malicious_fraction);
        cfg.data.synthetic.separation = s.value("separation", cfg.data.synthetic.separation);
        cfg.data.synthetic.label_noise = s.value("label_noise", cfg.data.synthetic.label_noise);
      }
    }

    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t, "train", {"models", "victims", "cv_folds", "forest", "tree", "mlp"});
      if (t.contains("models")) cfg.train.models = parse_kinds(t["models"], "train.models");
      if (t.contains("victims")) cfg.train.victims = parse_kinds(t["victims"], "train.victims");
      cfg.train.cv_folds = t.value("cv_folds", 10);
      TrainConfig& p = cfg.train.params;
      if (t.contains("forest")) {
        const json& f = t["forest"];
        check_keys(f, "train.forest",
                   {"n_trees", "features_per_split", "bootstrap", "min_leaf_count"});
        p.forest.n_trees = f.value("n_trees", p.forest.n_trees);
        p.forest.features_per_split = f.value("features_per_split", p.forest.features_per_split);
        p.forest.bootstrap = f.value("bootstrap", p.forest.bootstrap);
        p.forest.min_leaf_count = f.value("min_leaf_count", p.forest.min_leaf_count);
      }
      if (t.contains("tree")) {
        const json& tr = t["tree"];
        check_keys(tr, "train.tree", {"min_leaf_count"});
        p.tree.min_leaf_count = tr.value("min_leaf_count", p.tree.min_leaf_count);
      }
      if (t.contains("mlp")) {
        const json& m = t["mlp"];
        check_keys(m, "train.mlp", {"hidden", "learning_rate", "epochs", "batch_size"});
        p.mlp.hidden = m.value("hidden", p.mlp.hidden);
        p.mlp.learning_rate = m.value("learning_rate", p.mlp.learning_rate);
        p.mlp.epochs = m.value("epochs", p.mlp.epochs);
        p.mlp.batch_size = m.value("batch_size", p.mlp.batch_size);
      }
    }

    if (j.contains("attack")) {
      const json& a = j["attack"];
      check_keys(a, "attack", {"thetas", "gammas", "report_cells", "save_cells"});
      if (a.contains("thetas")) cfg.attack.thetas = a["thetas"].get<std::vector<double>>();
      if (a.contains("gammas")) cfg.attack.gammas = a["gammas"].get<std::vector<double>>();
      if (a.contains("report_cells"))
        cfg.attack.report_cells = parse_cells(a["report_cells"], "attack.report_cells");
      if (a.contains("save_cells"))
        cfg.attack.save_cells = parse_cells(a["save_cells"], "attack.save_cells");
    }

    if (j.contains("defense")) {
      const json& d = j["defense"];
      check_keys(d, "defense", {"sample_fraction", "source_cells", "cv_folds"});
      cfg.defense.sample_fraction = d.value("sample_fraction", 0.2);
      if (d.contains("source_cells") && !d["source_cells"].is_null())
        cfg.defense.source_cells = parse_cells(d["source_cells"], "defense.source_cells");
      cfg.defense.cv_folds = d.value("cv_folds", 10);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void ExperimentConfig::validate() const {
  if (data.source != "synthetic" && data.source != "csv")
    throw config_error("data.source must be 'synthetic' or 'csv'");
  if (data.source == "csv" && data.paths.empty())
    throw config_error("data.paths must list at least one CSV for source 'csv'");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
    throw config_error("data.train_fraction must lie in (0,1)");
  for (const auto& [tag, cls] : data.label_mapping)
    if (cls != 0 && cls != 1)
      throw config_error("data.label_mapping['" + tag + "'] must be 0 or 1");
  if (data.source == "synthetic") {
    const auto& s = data.synthetic;
    if (s.n < 2) throw config_error("synthetic.n must be >= 2");
    if (s.d < 1) throw config_error("synthetic.d must be >= 1");
    if (!(s.malicious_fraction > 0.0 && s.malicious_fraction < 1.0))
      throw config_error("synthetic.malicious_fraction must lie in (0,1)");
    if (!(s.separation >= 0.0)) throw config_error("synthetic.separation must be >= 0");
    if (!(s.label_noise >= 0.0 && s.label_noise < 1.0))
      throw config_error("synthetic.label_noise must lie in [0,1)");
  }

  if (train.models.empty()) throw config_error("train.models must be non-empty");
  std::set<ModelKind> seen(train.models.begin(), train.models.end());
  if (seen.size() != train.models.size())
    throw config_error("train.models contains duplicates");
  if (train.victims.empty()) throw config_error("train.victims must be non-empty");
  std::set<ModelKind> vseen(train.victims.begin(), train.victims.end());
  if (vseen.size() != train.victims.size())
    throw config_error("train.victims contains duplicates");
  if (train.cv_folds < 2) throw config_error("train.cv_folds must be >= 2");
  train.params.validate();

  if (attack.thetas.empty() || attack.gammas.empty())
    throw config_error("attack.thetas and attack.gammas must be non-empty");
  for (double t : attack.thetas)
    if (!(t > 0.0 && t <= 1.0)) throw config_error("attack.thetas values must lie in (0,1]");
  for (double g : attack.gammas)
    if (!(g > 0.0 && g <= 1.0)) throw config_error("attack.gammas values must lie in (0,1]");
  check_cells_in_range(attack.report_cells, "attack.report_cells");
  check_cells_in_range(attack.save_cells, "attack.save_cells");

  if (!(defense.sample_fraction > 0.0 && defense.sample_fraction <= 1.0))
    throw config_error("defense.sample_fraction must lie in (0,1]");
  if (defense.source_cells) {
    if (defense.source_cells->empty())
      throw config_error("defense.source_cells must be non-empty when given");
    check_cells_in_range(*defense.source_cells, "defense.source_cells");
  }
  if (defense.cv_folds < 2) throw config_error("defense.cv_folds must be >= 2");
}

std::string ExperimentConfig::canonical_json() const {
  json d;
  d["source"] = data.source;
  d["paths"] = data.paths;
  d["has_header"] = data.has_header;
  d["label_column"] = data.label_column ? json(*data.label_column) : json(nullptr);
  d["sanitize_policy"] = to_string(data.sanitize);
  d["label_mapping"] = data.label_mapping.empty() ? default_label_mapping() : data.label_mapping;
  d["train_fraction"] = data.train_fraction;
  d["stratified"] = data.stratified;
  if (data.source == "synthetic") {
    d["synthetic"] = json{{"n", data.synthetic.n},
                          {"d", data.synthetic.d},
                          {"malicious_fraction", data.synthetic.malicious_fraction},
                          {"separation", data.synthetic.separation},
                          {"label_noise", data.synthetic.label_noise}};
  }

  json models = json::array();
  for (ModelKind k : train.models) models.push_back(to_string(k));
  json victims = json::array();
  for (ModelKind k : train.victims) victims.push_back(to_string(k));
  const TrainConfig& p = train.params;
  json t{{"models", std::move(models)},
         {"victims", std::move(victims)},
         {"cv_folds", train.cv_folds},
         {"forest",
          {{"n_trees", p.forest.n_trees},
           {"features_per_split", p.forest.features_per_split},
           {"bootstrap", p.forest.bootstrap},
           {"min_leaf_count", p.forest.min_leaf_count}}},
         {"tree", {{"min_leaf_count", p.tree.min_leaf_count}}},
         {"mlp",
          {{"hidden", p.mlp.hidden},
           {"learning_rate", p.mlp.learning_rate},
           {"epochs", p.mlp.epochs},
           {"batch_size", p.mlp.batch_size}}}};

  json a{{"thetas", attack.thetas},
         {"gammas", attack.gammas},
         {"report_cells", cells_to_json(attack.report_cells)},
         {"save_cells", cells_to_json(attack.save_cells)}};

  json def{{"sample_fraction", defense.sample_fraction},
           {"source_cells",
            defense.source_cells ? cells_to_json(*defense.source_cells) : json(nullptr)},
           {"cv_folds", defense.cv_folds}};

  json j{{"seed", seed},
         {"data", std::move(d)},
         {"train", std::move(t)},
         {"attack", std::move(a)},
         {"defense", std::move(def)}};
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a(canonical_json()); }

void run_ingest(const ExperimentConfig& cfg, std::ostream& log) {
  StageClock clock;
  RawTable raw;
  if (cfg.data.source == "csv") {
    raw = load_csv_many(cfg.data.paths, cfg.data.has_header, cfg.data.label_column);
  } else {
    SyntheticConfig sc = cfg.data.synthetic;
    sc.seed = derive_seed(cfg.seed, "synthetic");
    raw = make_synthetic(sc);
  }
  std::size_t raw_rows = raw.n();
  RawTable clean = sanitize(raw, cfg.data.sanitize);
  LabeledTable labeled = binarize_labels(
      clean, cfg.data.label_mapping.empty() ? default_label_mapping() : cfg.data.label_mapping);

  SplitSpec split;
  split.train_fraction = cfg.data.train_fraction;
  split.seed = derive_seed(cfg.seed, "split");
  split.stratified = cfg.data.stratified;
  auto [train_idx, test_idx] = split_indices(labeled.n(), labeled.labels, split);
  LabeledTable train_t = take_rows(labeled, train_idx);
  LabeledTable test_t = take_rows(labeled, test_idx);

  FeatureSchema schema = fit_normalizer(train_t);
  Dataset train = normalize(train_t, schema);
  Dataset test = normalize(test_t, schema);

  auto counts = [&](const std::vector<int>& labels) {
    ClassCounts c;
    for (int y : labels) (y == 1 ? c.malicious : c.benign)++;
    return c;
  };
  ClassCounts all = counts(labeled.labels);
  ClassCounts tr = counts(train.labels);
  ClassCounts te = counts(test.labels);

  StageWriter w{fs::path(cfg.out_dir)};
  w.put("data/schema.json", schema.to_json_string() + "\n");
  save_dataset_csv(train, schema.feature_names, (fs::path(cfg.out_dir) / "data/train.csv").string());
  w.note("data/train.csv");
  save_dataset_csv(test, schema.feature_names, (fs::path(cfg.out_dir) / "data/test.csv").string());
  w.note("data/test.csv");

  json summary{{"source", cfg.data.source},
               {"raw_rows", raw_rows},
               {"rows", labeled.n()},
               {"dimension", labeled.d()},
               {"sanitize_policy", to_string(cfg.data.sanitize)},
               {"counts", {{"benign", all.benign}, {"malicious", all.malicious}}},
               {"train",
                {{"rows", train.n()}, {"benign", tr.benign}, {"malicious", tr.malicious}}},
               {"test", {{"rows", test.n()}, {"benign", te.benign}, {"malicious", te.malicious}}},
               {"schema_fingerprint", hex64(schema.fingerprint())}};
  w.put("data/summary.json", summary.dump(2) + "\n");
  write_manifest(cfg, "ingest", w, clock.seconds());

  log << "ingest: " << labeled.n() << " rows (" << all.malicious << " malicious, " << all.benign
      << " benign), " << labeled.d() << " features\n";
  log << "  train: " << train.n() << " rows (" << tr.malicious << " malicious, " << tr.benign
      << " benign)\n";
  log << "  test:  " << test.n() << " rows (" << te.malicious << " malicious, " << te.benign
      << " benign)\n";
  log << "  schema fingerprint " << hex64(schema.fingerprint()) << "\n";
}

void run_train(const ExperimentConfig& cfg, std::ostream& log) {
  StageClock clock;
  require_stage(cfg, "ingest");
  FeatureSchema schema = load_schema(cfg);
  Dataset train = load_partition(cfg, "train.csv", schema);
  Dataset test = load_partition(cfg, "test.csv", schema);
  Dataset full = concat(train, test);  // cross-validation population

  StageWriter w{fs::path(cfg.out_dir)};
  std::vector<ModelKind> kinds = stage_model_list(cfg);
  bool cv_requested = false;
  std::string csv = "model,weighted_precision,weighted_recall,weighted_f1\n";
  json timings = json::object();

  log << "model            weighted_P  weighted_R  weighted_F1  seconds\n";
  for (ModelKind kind : kinds) {
    StageClock model_clock;
    std::string name = to_string(kind);
    TrainConfig tc = cfg.train.params;
    tc.seed = derive_seed(cfg.seed, "train-" + name);
    std::unique_ptr<Classifier> model;
    try {
      model = train_model(kind, train, tc);
    } catch (const std::exception& e) {
      throw error(name + ": " + e.what());
    }
    w.put("models/" + name + ".json", model_to_json(*model) + "\n");

    bool in_table =
        std::find(cfg.train.models.begin(), cfg.train.models.end(), kind) != cfg.train.models.end();
    std::string p = "-", r = "-", f = "-";
    if (in_table) {
      cv_requested = true;
      CvResult cv;
      try {
        cv = cross_validate(kind, cfg.train.params, full, cfg.train.cv_folds,
                            derive_seed(cfg.seed, "cv-" + name));
      } catch (const std::exception& e) {
        throw error(name + " cross-validation: " + e.what());
      }
      w.put("models/cv_" + name + ".json", cv.to_json_string(2) + "\n");
      csv += name + "," + format_double(cv.aggregate.weighted_precision) + "," +
             format_double(cv.aggregate.weighted_recall) + "," +
             format_double(cv.aggregate.weighted_f1) + "\n";
      p = fmt4(cv.aggregate.weighted_precision);
      r = fmt4(cv.aggregate.weighted_recall);
      f = fmt4(cv.aggregate.weighted_f1);
    }
    double secs = model_clock.seconds();
    timings[name] = secs;
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %-11s %-11s %-12s %.3f\n", name.c_str(), p.c_str(),
                  r.c_str(), f.c_str(), secs);
    log << line;
  }
  if (cv_requested) w.put("models/cv_table.csv", csv);
  w.extra["timings_seconds"] = std::move(timings);
  write_manifest(cfg, "train", w, clock.seconds());
}

void run_attack(const ExperimentConfig& cfg, std::ostream& log) {
  StageClock clock;
  require_stage(cfg, "ingest");
  require_stage(cfg, "train");
  FeatureSchema schema = load_schema(cfg);
  Dataset test = load_partition(cfg, "test.csv", schema);

  auto surrogate_any = load_stage_model(cfg, ModelKind::mlp);
  auto* surrogate = dynamic_cast<MlpSurrogate*>(surrogate_any.get());
  if (!surrogate) throw error("models/mlp.json does not contain an mlp surrogate");

  std::vector<std::unique_ptr<Classifier>> victim_models;
  std::vector<const Classifier*> victims;
  std::vector<std::string> names;
  for (ModelKind kind : cfg.train.victims) {
    victim_models.push_back(load_stage_model(cfg, kind));
    victims.push_back(victim_models.back().get());
    names.push_back(to_string(kind));
  }

  std::uint64_t sweep_seed = derive_seed(cfg.seed, "attack-sweep");
  SweepGrid grid =
      sweep(victims, names, *surrogate, test, cfg.attack.thetas, cfg.attack.gammas, sweep_seed);

  StageWriter w{fs::path(cfg.out_dir)};
  json sweep_json = grid_to_json(grid);
  sweep_json["format_version"] = 1;
  w.put("attack/sweep.json", sweep_json.dump(2) + "\n");
  for (std::size_t v = 0; v < victims.size(); ++v) {
    w.put("attack/heatmap_" + names[v] + ".csv",
          grid_csv(grid.thetas, grid.gammas, grid.cells[v]));
    auto [ti, gi] = grid.worst_cell(v);
    log << names[v] << ": clean F1 " << fmt4(grid.baseline[v]) << ", worst cell theta="
        << format_double(grid.thetas[ti]) << " gamma=" << format_double(grid.gammas[gi]) << " F1 "
        << fmt4(grid.cells[v](ti, gi)) << "\n";
  }

  for (std::size_t c = 0; c < cfg.attack.report_cells.size(); ++c) {
    auto [theta, gamma] = cfg.attack.report_cells[c];
    AttackConfig ac;
    ac.theta = theta;
    ac.gamma = gamma;
    ac.seed = derive_seed(sweep_seed, "report-cell", c);
    AdversarialSet adv = craft_adversarial_testset(*surrogate, test, ac);
    for (std::size_t v = 0; v < victims.size(); ++v) {
      MetricsReport report = transfer_evaluate(*victims[v], adv);
      w.put("attack/cell_" + cell_tag(theta, gamma) + "_" + names[v] + ".json",
            report.to_json_string(2) + "\n");
    }
  }

  for (std::size_t c = 0; c < cfg.attack.save_cells.size(); ++c) {
    auto [theta, gamma] = cfg.attack.save_cells[c];
    AttackConfig ac;
    ac.theta = theta;
    ac.gamma = gamma;
    ac.seed = derive_seed(sweep_seed, "save-cell", c);
    AdversarialSet adv = craft_adversarial_testset(*surrogate, test, ac);
    std::string base = "attack/adv_" + cell_tag(theta, gamma);
    w.put(base + ".csv", adversarial_csv(adv, schema.feature_names));
    w.put(base + ".meta.json", adversarial_sidecar(adv).dump(2) + "\n");
  }

  write_manifest(cfg, "attack", w, clock.seconds());
}

void run_defend(const ExperimentConfig& cfg, std::ostream& log) {
  StageClock clock;
  require_stage(cfg, "ingest");
  require_stage(cfg, "train");
  require_stage(cfg, "attack");
  FeatureSchema schema = load_schema(cfg);
  Dataset train = load_partition(cfg, "train.csv", schema);
  Dataset test = load_partition(cfg, "test.csv", schema);

  auto surrogate_any = load_stage_model(cfg, ModelKind::mlp);
  auto* surrogate = dynamic_cast<MlpSurrogate*>(surrogate_any.get());
  if (!surrogate) throw error("models/mlp.json does not contain an mlp surrogate");

  json sweep_json =
      json::parse(read_file(fs::path(cfg.out_dir) / "attack" / "sweep.json"));

  std::uint64_t sweep_seed = derive_seed(cfg.seed, "attack-sweep");
  std::uint64_t defense_seed = derive_seed(cfg.seed, "defend");

  DefenseConfig dc;
  dc.sample_fraction = cfg.defense.sample_fraction;
  dc.seed = defense_seed;

  struct VictimState {
    ModelKind kind;
    std::string name;
    std::unique_ptr<Classifier> before;
    std::unique_ptr<Classifier> after;
    std::vector<std::pair<double, double>> cells;
    std::vector<std::size_t> sampled_ids;
    std::size_t sample_size = 0;
    Dataset augmented;
  };
  std::vector<VictimState> states;

  for (std::size_t v = 0; v < cfg.train.victims.size(); ++v) {
    VictimState st;
    st.kind = cfg.train.victims[v];
    st.name = to_string(st.kind);
    st.before = load_stage_model(cfg, st.kind);

    if (cfg.defense.source_cells) {
      st.cells = *cfg.defense.source_cells;
    } else {
      const json& rows = sweep_json.at("cells").at(st.name);
      auto thetas = sweep_json.at("thetas").get<std::vector<double>>();
      auto gammas = sweep_json.at("gammas").get<std::vector<double>>();
      std::size_t bt = 0, bg = 0;
      double best = rows.at(0).at(0).get<double>();
      for (std::size_t t = 0; t < thetas.size(); ++t)
        for (std::size_t g = 0; g < gammas.size(); ++g) {
          double val = rows.at(t).at(g).get<double>();
          if (val < best) {
            best = val;
            bt = t;
            bg = g;
          }
        }
      st.cells = {{thetas[bt], gammas[bg]}};
    }
    dc.source_cells = st.cells;
    dc.validate();

    std::uint64_t victim_seed = derive_seed(defense_seed, "victim", v);
    Dataset augment;
    std::set<std::size_t> ids;
    for (std::size_t c = 0; c < st.cells.size(); ++c) {
      AttackConfig ac;
      ac.theta = st.cells[c].first;
      ac.gamma = st.cells[c].second;
      ac.seed = derive_seed(victim_seed, "craft", c);
      AdversarialSet adv = craft_adversarial_testset(*surrogate, test, ac);
      AdversarialSample sample =
          sample_adversarial(adv, dc.sample_fraction, derive_seed(victim_seed, "sample", c));
      augment = concat(augment, sample.rows);
      ids.insert(sample.row_ids.begin(), sample.row_ids.end());
    }
    st.sampled_ids.assign(ids.begin(), ids.end());
    st.sample_size = augment.n();

    TrainConfig rc = cfg.train.params;
    rc.seed = derive_seed(defense_seed, "retrain", v);
    st.after = adversarial_train(train, augment, st.kind, rc);
    st.augmented = concat(train, augment);
    states.push_back(std::move(st));
  }

  std::vector<DefenseSubject> subjects;
  for (auto& st : states) {
    DefenseSubject s;
    s.name = st.name;
    s.before = st.before.get();
    s.after = st.after.get();
    s.exclude_rows.assign(test.n(), 0);
    for (std::size_t i : st.sampled_ids) s.exclude_rows[i] = 1;
    subjects.push_back(std::move(s));
  }

  DefenseReport report = evaluate_defense(subjects, *surrogate, test, cfg.attack.thetas,
                                          cfg.attack.gammas, sweep_seed);
  for (std::size_t v = 0; v < states.size(); ++v) {
    auto& st = states[v];
    report.cv_before.push_back(cross_validate(st.kind, cfg.train.params, train,
                                              cfg.defense.cv_folds,
                                              derive_seed(defense_seed, "cv-before", v)));
    report.cv_after.push_back(cross_validate(st.kind, cfg.train.params, st.augmented,
                                             cfg.defense.cv_folds,
                                             derive_seed(defense_seed, "cv-after", v)));
    report.sampled_row_ids.push_back(st.sampled_ids);
  }

  StageWriter w{fs::path(cfg.out_dir)};
  json out{{"format_version", 1},
           {"sample_fraction", cfg.defense.sample_fraction},
           {"thetas", cfg.attack.thetas},
           {"gammas", cfg.attack.gammas}};
  json victims_json = json::array();
  for (std::size_t v = 0; v < states.size(); ++v) {
    auto& st = states[v];
    w.put("defense/models/" + st.name + "_after.json", model_to_json(*st.after) + "\n");
    w.put("defense/pre_" + st.name + ".csv",
          grid_csv(cfg.attack.thetas, cfg.attack.gammas, report.pre_grid.cells[v]));
    w.put("defense/post_" + st.name + ".csv",
          grid_csv(cfg.attack.thetas, cfg.attack.gammas, report.post_grid.cells[v]));
    w.put("defense/delta_" + st.name + ".csv",
          grid_csv(cfg.attack.thetas, cfg.attack.gammas, report.delta[v]));

    double pre_avg = report.pre_grid.grid_average(v);
    double post_avg = report.post_grid.grid_average(v);
    json vj{{"name", st.name},
            {"source_cells", cells_to_json(st.cells)},
            {"sample_size", st.sample_size},
            {"sampled_row_ids", st.sampled_ids},
            {"baseline_pre", report.pre_grid.baseline[v]},
            {"baseline_post", report.post_grid.baseline[v]},
            {"baseline_pre_inclusive", report.pre_grid_inclusive.baseline[v]},
            {"baseline_post_inclusive", report.post_grid_inclusive.baseline[v]},
            {"grid_average",
             {{"pre", pre_avg},
              {"post", post_avg},
              {"delta", post_avg - pre_avg},
              {"pre_inclusive", report.pre_grid_inclusive.grid_average(v)},
              {"post_inclusive", report.post_grid_inclusive.grid_average(v)}}},
            {"cv_before", json::parse(report.cv_before[v].to_json_string())},
            {"cv_after", json::parse(report.cv_after[v].to_json_string())}};
    victims_json.push_back(std::move(vj));

    log << st.name << ": sampled " << st.sample_size << " adversarial rows; grid average "
        << fmt4(pre_avg) << " -> " << fmt4(post_avg) << " (delta " << fmt4(post_avg - pre_avg)
        << "), cv weighted F1 " << fmt4(report.cv_before[v].aggregate.weighted_f1) << " -> "
        << fmt4(report.cv_after[v].aggregate.weighted_f1) << "\n";
  }
  out["victims"] = std::move(victims_json);
  out["grids"] = json{{"pre", grid_to_json(report.pre_grid)},
                      {"post", grid_to_json(report.post_grid)},
                      {"pre_inclusive", grid_to_json(report.pre_grid_inclusive)},
                      {"post_inclusive", grid_to_json(report.post_grid_inclusive)}};
  w.put("defense/report.json", out.dump(2) + "\n");
  write_manifest(cfg, "defend", w, clock.seconds());
}

void run_report(const ExperimentConfig& cfg, std::ostream& log) {
  const std::vector<std::string> stages{"ingest", "train", "attack", "defend"};
  fs::path root(cfg.out_dir);

  std::vector<std::string> missing;
  std::vector<json> manifests;
  for (const auto& stage : stages) {
    fs::path mp = root / stage_dir(stage) / "manifest.json";
    if (!fs::exists(mp)) {
      missing.push_back(mp.string());
      manifests.emplace_back();
      continue;
    }
    json m = json::parse(read_file(mp));
    for (auto it = m.at("artifacts").begin(); it != m.at("artifacts").end(); ++it)
      if (!fs::exists(root / it.key())) missing.push_back((root / it.key()).string());
    manifests.push_back(std::move(m));
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& p : missing) msg += "\n  " + p;
    throw error(msg);
  }

  std::string want = hex64(cfg.config_hash());
  std::vector<std::string> tampered;
  json stages_json = json::object();
  json wall_clock = json::object();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const json& m = manifests[i];
    std::string have = m.at("config_hash").get<std::string>();
    if (have != want)
      throw error("stage '" + stages[i] + "' artifacts were produced by config " + have +
                  ", current config is " + want);
    for (auto it = m.at("artifacts").begin(); it != m.at("artifacts").end(); ++it) {
      std::string actual = hex64(fnv1a(read_file(root / it.key())));
      if (actual != it.value().get<std::string>()) tampered.push_back(it.key());
    }
    stages_json[stages[i]] = json{{"manifest", std::string(stage_dir(stages[i])) + "/manifest.json"},
                                  {"artifacts", m.at("artifacts")}};
    wall_clock[stages[i]] = m.at("wall_clock_seconds");
  }
  std::sort(tampered.begin(), tampered.end());
  auto intact = [&tampered](const char* key) {
    return !std::binary_search(tampered.begin(), tampered.end(), std::string(key));
  };

  // A hash-verified artifact is byte-identical to what its stage wrote, so it
  // parses cleanly; tampered ones are flagged and left out of the summary.
  json summary_data =
      intact("data/summary.json") ? json::parse(read_file(root / "data" / "summary.json")) : json();
  json sweep_json =
      intact("attack/sweep.json") ? json::parse(read_file(root / "attack" / "sweep.json")) : json();
  json defense_json = intact("defense/report.json")
                          ? json::parse(read_file(root / "defense" / "report.json"))
                          : json();

  json references{{"cv_results", json::array()},
                  {"sweep_grids", json::array({"attack/sweep.json"})},
                  {"defense_reports", json::array({"defense/report.json"})}};
  for (auto it = manifests[1].at("artifacts").begin(); it != manifests[1].at("artifacts").end();
       ++it)
    if (it.key().rfind("models/cv_", 0) == 0 && it.key().size() > 5 &&
        it.key().substr(it.key().size() - 5) == ".json")
      references["cv_results"].push_back(it.key());

  // Worst cell per victim from the sweep grid.
  json victims_summary = json::array();
  std::vector<double> thetas, gammas;
  if (!sweep_json.is_null()) {
    thetas = sweep_json.at("thetas").get<std::vector<double>>();
    gammas = sweep_json.at("gammas").get<std::vector<double>>();
  }
  if (!sweep_json.is_null()) {
    for (const auto& name : sweep_json.at("victims")) {
      const json& rows = sweep_json.at("cells").at(name.get<std::string>());
      std::size_t bt = 0, bg = 0;
      double best = rows.at(0).at(0).get<double>();
      for (std::size_t t = 0; t < thetas.size(); ++t)
        for (std::size_t g = 0; g < gammas.size(); ++g) {
          double val = rows.at(t).at(g).get<double>();
          if (val < best) {
            best = val;
            bt = t;
            bg = g;
          }
        }
      victims_summary.push_back(
          json{{"name", name},
               {"clean_f1", sweep_json.at("baseline").at(name.get<std::string>())},
               {"worst_cell", {{"theta", thetas[bt]}, {"gamma", gammas[bg]}, {"f1", best}}}});
    }
  }

  json defense_summary = json::array();
  if (!defense_json.is_null()) {
    for (const auto& vj : defense_json.at("victims")) {
      defense_summary.push_back(
          json{{"name", vj.at("name")},
               {"grid_average", vj.at("grid_average")},
               {"cv_before_f1", vj.at("cv_before").at("aggregate").at("weighted_f1")},
               {"cv_after_f1", vj.at("cv_after").at("aggregate").at("weighted_f1")}});
    }
  }

  json index{{"format_version", 1},
             {"config_hash", want},
             {"stages", std::move(stages_json)},
             {"references", std::move(references)},
             {"tampered", tampered},
             {"summary",
              {{"data", summary_data},
               {"attack", std::move(victims_summary)},
               {"defense", std::move(defense_summary)}}}};

  std::ostringstream text;
  text << "experiment " << want << "\n\n";
  if (summary_data.is_null()) {
    text << "data: skipped, data/summary.json failed hash verification\n\n";
  } else {
    text << "data: " << summary_data.at("rows").get<std::size_t>() << " rows ("
         << summary_data.at("counts").at("malicious").get<std::int64_t>() << " malicious, "
         << summary_data.at("counts").at("benign").get<std::int64_t>() << " benign), "
         << summary_data.at("dimension").get<std::size_t>() << " features\n";
    text << "  train " << summary_data.at("train").at("rows").get<std::size_t>() << " rows, test "
         << summary_data.at("test").at("rows").get<std::size_t>() << " rows\n\n";
  }

  if (fs::exists(root / "models" / "cv_table.csv") && intact("models/cv_table.csv")) {
    text << "cross-validation (pooled, weighted):\n";
    std::istringstream table(read_file(root / "models" / "cv_table.csv"));
    std::string line;
    std::getline(table, line);  // header
    while (std::getline(table, line)) {
      auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
      auto c3 = line.rfind(',');
      text << "  " << line.substr(0, c1) << ": P=" << fmt4(std::stod(line.substr(c1 + 1, c2 - c1)))
           << " R=" << fmt4(std::stod(line.substr(c2 + 1, c3 - c2)))
           << " F1=" << fmt4(std::stod(line.substr(c3 + 1))) << "\n";
    }
    text << "\n";
  }

  if (sweep_json.is_null()) {
    text << "attack sweep: skipped, attack/sweep.json failed hash verification\n";
  } else {
    text << "attack sweep (" << thetas.size() << "x" << gammas.size() << " jsma grid):\n";
    for (const auto& vj : index["summary"]["attack"]) {
      text << "  " << vj.at("name").get<std::string>() << ": clean F1 "
           << fmt4(vj.at("clean_f1").get<double>()) << ", worst cell theta="
           << format_double(vj.at("worst_cell").at("theta").get<double>()) << " gamma="
           << format_double(vj.at("worst_cell").at("gamma").get<double>()) << " F1 "
           << fmt4(vj.at("worst_cell").at("f1").get<double>()) << "\n";
    }
  }
  if (defense_json.is_null()) {
    text << "\ndefense: skipped, defense/report.json failed hash verification\n";
  } else {
    text << "\ndefense (sample fraction "
         << format_double(defense_json.at("sample_fraction").get<double>()) << "):\n";
    for (const auto& vj : index["summary"]["defense"]) {
      const auto& ga = vj.at("grid_average");
      text << "  " << vj.at("name").get<std::string>() << ": grid average "
           << fmt4(ga.at("pre").get<double>()) << " -> " << fmt4(ga.at("post").get<double>())
           << " (delta " << fmt4(ga.at("delta").get<double>()) << "), cv F1 "
           << fmt4(vj.at("cv_before_f1").get<double>()) << " -> "
           << fmt4(vj.at("cv_after_f1").get<double>()) << "\n";
    }
  }
  text << "\ntampered artifacts: ";
  if (tampered.empty()) {
    text << "none\n";
  } else {
    text << "\n";
    for (const auto& t : tampered) text << "  " << t << "\n";
  }

  write_file(root / "report" / "index.json", index.dump(2) + "\n");
  write_file(root / "report" / "summary.txt", text.str());

  auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
  json run_info{{"generated_unix_ms", now_ms}, {"stage_wall_clock_seconds", wall_clock}};
  write_file(root / "report" / "run_info.json", run_info.dump(2) + "\n");

  log << text.str();
}

}  // namespace greybox
