#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "greybox/experiment.hpp"

using namespace greybox;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(GREYBOX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json small_config() {
  json j;
  j["seed"] = 21;
  j["data"] = {{"source", "synthetic"},
               {"train_fraction", 0.6},
               {"synthetic", {{"n", 240}, {"d", 6}, {"malicious_fraction", 0.5},
                              {"separation", 3.0}, {"label_noise", 0.02}}}};
  j["train"] = {{"models", {"zero_r", "tree"}},
                {"victims", {"tree"}},
                {"cv_folds", 3},
                {"forest", {{"n_trees", 6}}},
                {"mlp", {{"hidden", 8}, {"epochs", 25}, {"learning_rate", 0.3},
                         {"batch_size", 32}}}};
  j["attack"] = {{"thetas", {0.3, 0.7}}, {"gammas", {0.3, 0.7}}};
  j["defense"] = {{"sample_fraction", 0.3}, {"cv_folds", 2}};
  return j;
}

std::string write_config(const fs::path& dir, const json& j, const char* name = "config.json") {
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_all_stages(const std::string& cfg, const std::string& out) {
  for (const char* stage : {"ingest", "train", "attack", "defend", "report"}) {
    int rc = run_cli(std::string(stage) + " --config " + cfg + " --out " + out);
    if (rc != 0) return rc;
  }
  return 0;
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const char* name) : dir(fs::path("pipe_scratch") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
};

}  // namespace

TEST_CASE("all five stages succeed and leave their artifacts") {
  Scratch s("happy");
  std::string cfg = write_config(s.dir, small_config());
  std::string out = (s.dir / "out").string();
  CHECK(run_all_stages(cfg, out) == 0);

  for (const char* rel :
       {"data/manifest.json", "data/schema.json", "data/train.csv", "data/test.csv",
        "data/summary.json", "models/manifest.json", "models/tree.json", "models/zero_r.json",
        "models/mlp.json", "models/cv_tree.json", "models/cv_table.csv", "attack/manifest.json",
        "attack/sweep.json", "attack/heatmap_tree.csv", "defense/manifest.json",
        "defense/report.json", "defense/models/tree_after.json", "defense/pre_tree.csv",
        "defense/post_tree.csv", "defense/delta_tree.csv", "report/index.json",
        "report/summary.txt", "report/run_info.json"}) {
    CHECK_MESSAGE(fs::exists(fs::path(out) / rel), "missing ", rel);
  }

  auto index = json::parse(slurp(fs::path(out) / "report/index.json"));
  CHECK(index["tampered"].empty());
  CHECK(index["stages"].contains("defend"));

  auto sweep = json::parse(slurp(fs::path(out) / "attack/sweep.json"));
  CHECK(sweep["thetas"].size() == 2);
  CHECK(sweep["cells"]["tree"].size() == 2);
  CHECK(sweep["cells"]["tree"][0].size() == 2);
}

TEST_CASE("heatmap CSV has one theta row per grid line") {
  Scratch s("heatmap");
  std::string cfg = write_config(s.dir, small_config());
  std::string out = (s.dir / "out").string();
  REQUIRE(run_cli("ingest --config " + cfg + " --out " + out) == 0);
  REQUIRE(run_cli("train --config " + cfg + " --out " + out) == 0);
  REQUIRE(run_cli("attack --config " + cfg + " --out " + out) == 0);

  std::ifstream in(fs::path(out) / "attack/heatmap_tree.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == 3);  // header + 2 theta rows
  CHECK(lines[0].rfind("theta", 0) == 0);
  for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), ',') == 2);
}

TEST_CASE("config problems exit with code 2") {
  Scratch s("badcfg");
  std::string out = (s.dir / "out").string();

  std::string missing = (s.dir / "nope.json").string();
  CHECK(run_cli("ingest --config " + missing + " --out " + out) == 2);

  fs::path broken = s.dir / "broken.json";
  std::ofstream(broken) << "{ not json";
  CHECK(run_cli("ingest --config " + broken.string() + " --out " + out) == 2);

  json unknown = small_config();
  unknown["data"]["typo_key"] = 1;
  std::string cfg1 = write_config(s.dir, unknown, "unknown.json");
  CHECK(run_cli("ingest --config " + cfg1 + " --out " + out) == 2);

  json csv_no_paths = small_config();
  csv_no_paths["data"]["source"] = "csv";
  std::string cfg2 = write_config(s.dir, csv_no_paths, "nopaths.json");
  CHECK(run_cli("ingest --config " + cfg2 + " --out " + out) == 2);

  json empty_cells = small_config();
  empty_cells["defense"]["source_cells"] = json::array();
  std::string cfg3 = write_config(s.dir, empty_cells, "cells.json");
  CHECK(run_cli("ingest --config " + cfg3 + " --out " + out) == 2);

  json bad_fraction = small_config();
  bad_fraction["data"]["train_fraction"] = 1.5;
  std::string cfg4 = write_config(s.dir, bad_fraction, "fraction.json");
  CHECK(run_cli("ingest --config " + cfg4 + " --out " + out) == 2);
}

TEST_CASE("running a stage before its inputs exist exits with code 1") {
  Scratch s("order");
  std::string cfg = write_config(s.dir, small_config());
  std::string out = (s.dir / "out").string();
  CHECK(run_cli("train --config " + cfg + " --out " + out) == 1);
  CHECK(run_cli("attack --config " + cfg + " --out " + out) == 1);
  CHECK(run_cli("report --config " + cfg + " --out " + out) == 1);
}

TEST_CASE("a missing input file fails without leaving stage artifacts") {
  Scratch s("noinput");
  json j = small_config();
  j["data"]["source"] = "csv";
  j["data"]["paths"] = {(s.dir / "absent.csv").string()};
  j["data"].erase("synthetic");
  std::string cfg = write_config(s.dir, j);
  std::string out = (s.dir / "out").string();
  CHECK(run_cli("ingest --config " + cfg + " --out " + out) == 1);
  CHECK_FALSE(fs::exists(fs::path(out) / "data/manifest.json"));
}

TEST_CASE("reruns with the same config produce identical artifacts") {
  Scratch s("rerun");
  std::string cfg = write_config(s.dir, small_config());
  std::string out1 = (s.dir / "out1").string();
  std::string out2 = (s.dir / "out2").string();
  REQUIRE(run_all_stages(cfg, out1) == 0);
  REQUIRE(run_all_stages(cfg, out2) == 0);

  for (const char* rel :
       {"data/train.csv", "data/test.csv", "data/schema.json", "data/summary.json",
        "models/tree.json", "models/mlp.json", "models/cv_table.csv", "attack/sweep.json",
        "attack/heatmap_tree.csv", "defense/report.json", "defense/models/tree_after.json"}) {
    CHECK_MESSAGE(slurp(fs::path(out1) / rel) == slurp(fs::path(out2) / rel),
                  rel, " differs between reruns");
  }
}

TEST_CASE("a seed override changes the data partition") {
  Scratch s("seed");
  std::string cfg = write_config(s.dir, small_config());
  std::string out1 = (s.dir / "out1").string();
  std::string out2 = (s.dir / "out2").string();
  REQUIRE(run_cli("ingest --config " + cfg + " --out " + out1) == 0);
  REQUIRE(run_cli("ingest --config " + cfg + " --out " + out2 + " --seed 999") == 0);
  CHECK(slurp(fs::path(out1) / "data/train.csv") != slurp(fs::path(out2) / "data/train.csv"));
}

TEST_CASE("report flags tampered artifacts but still exits 0") {
  Scratch s("tamper");
  std::string cfg = write_config(s.dir, small_config());
  std::string out = (s.dir / "out").string();
  REQUIRE(run_all_stages(cfg, out) == 0);

  std::ofstream(fs::path(out) / "models/cv_table.csv", std::ios::app) << "tampered line\n";
  CHECK(run_cli("report --config " + cfg + " --out " + out) == 0);

  auto index = json::parse(slurp(fs::path(out) / "report/index.json"));
  REQUIRE_FALSE(index["tampered"].empty());
  bool found = false;
  for (const auto& t : index["tampered"])
    found |= t.get<std::string>().find("cv_table.csv") != std::string::npos;
  CHECK(found);
}

TEST_CASE("stages reject a config hash mismatch") {
  Scratch s("hash");
  std::string cfg = write_config(s.dir, small_config());
  std::string out = (s.dir / "out").string();
  REQUIRE(run_cli("ingest --config " + cfg + " --out " + out) == 0);

  json changed = small_config();
  changed["seed"] = 22;
  std::string cfg2 = write_config(s.dir, changed, "changed.json");
  CHECK(run_cli("train --config " + cfg2 + " --out " + out) == 1);
}

TEST_CASE("unknown subcommands and missing flags are CLI errors") {
  Scratch s("cli");
  std::string cfg = write_config(s.dir, small_config());
  CHECK(run_cli("explode --config " + cfg) != 0);
  CHECK(run_cli("ingest") != 0);  // --config is required
}

TEST_CASE("experiment config parses, validates and hashes deterministically") {
  ExperimentConfig a = ExperimentConfig::from_json_string(small_config().dump());
  a.validate();
  ExperimentConfig b = ExperimentConfig::from_json_string(small_config().dump());
  CHECK(a.config_hash() == b.config_hash());
  CHECK(a.canonical_json() == b.canonical_json());

  json changed = small_config();
  changed["attack"]["thetas"] = {0.1};
  ExperimentConfig c = ExperimentConfig::from_json_string(changed.dump());
  CHECK(a.config_hash() != c.config_hash());

  CHECK_THROWS_AS(ExperimentConfig::from_json_string("{\"seed\": []}"), config_error);
  CHECK_THROWS_AS(ExperimentConfig::from_json_string("{\"nonsense\": 1}"), config_error);

  json dup = small_config();
  dup["train"]["models"] = {"tree", "tree"};
  CHECK_THROWS_AS(
      [&] {
        ExperimentConfig d = ExperimentConfig::from_json_string(dup.dump());
        d.validate();
      }(),
      config_error);
}

TEST_CASE("out_dir and threads do not affect the config hash") {
  json j = small_config();
  ExperimentConfig a = ExperimentConfig::from_json_string(j.dump());
  j["out_dir"] = "elsewhere";
  j["threads"] = 4;
  ExperimentConfig b = ExperimentConfig::from_json_string(j.dump());
  CHECK(a.config_hash() == b.config_hash());
}
