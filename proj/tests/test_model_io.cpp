#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "greybox/baselines.hpp"
#include "greybox/forest.hpp"
#include "greybox/mlp.hpp"
#include "greybox/rng.hpp"
#include "greybox/tree.hpp"

using namespace greybox;

namespace {

Dataset training_blobs(std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  std::vector<double> row(5);
  for (int i = 0; i < 150; ++i) {
    int label = i % 2;
    for (auto& v : row) v = 0.35 * rng.next_unit() + (label ? 0.6 : 0.05);
    ds.features.push_row(row);
    ds.labels.push_back(label);
  }
  ds.schema_fingerprint = 0x1234abcd5678ef90ull;
  return ds;
}

void check_roundtrip(const Classifier& m) {
  auto back = model_from_json(model_to_json(m));
  REQUIRE(back != nullptr);
  CHECK(back->kind() == m.kind());
  CHECK(back->dimension() == m.dimension());
  CHECK(back->train_seed() == m.train_seed());
  CHECK(back->schema_fingerprint() == m.schema_fingerprint());

  Rng probe(404);
  std::vector<double> x(m.dimension());
  for (int i = 0; i < 1000; ++i) {
    for (auto& v : x) v = probe.next_unit();
    auto pa = m.predict_proba_row(x);
    auto pb = back->predict_proba_row(x);
    CHECK(pa[0] == pb[0]);
    CHECK(pa[1] == pb[1]);
  }
}

}  // namespace

TEST_CASE("every model kind round-trips through JSON bit-exactly") {
  Dataset ds = training_blobs(7);
  TrainConfig cfg;
  cfg.seed = 99;
  cfg.forest.n_trees = 12;
  cfg.mlp.hidden = 6;
  cfg.mlp.epochs = 15;

  SUBCASE("zero_r") { check_roundtrip(*train_model(ModelKind::zero_r, ds, cfg)); }
  SUBCASE("naive_bayes") { check_roundtrip(*train_model(ModelKind::naive_bayes, ds, cfg)); }
  SUBCASE("tree") { check_roundtrip(*train_model(ModelKind::tree, ds, cfg)); }
  SUBCASE("forest") { check_roundtrip(*train_model(ModelKind::forest, ds, cfg)); }
  SUBCASE("mlp") { check_roundtrip(*train_model(ModelKind::mlp, ds, cfg)); }
}

TEST_CASE("mlp JSON preserves final_loss and exact weights") {
  Dataset ds = training_blobs(8);
  TrainConfig cfg;
  cfg.mlp.hidden = 5;
  cfg.mlp.epochs = 10;
  auto m = fit_mlp(ds, cfg);
  auto back = model_from_json(model_to_json(*m));
  auto* mb = dynamic_cast<MlpSurrogate*>(back.get());
  REQUIRE(mb != nullptr);
  CHECK(mb->final_loss() == m->final_loss());
  CHECK(mb->w1() == m->w1());
  CHECK(mb->w2() == m->w2());
  CHECK(mb->b1() == m->b1());
  CHECK(mb->b2() == m->b2());
}

TEST_CASE("serialization is stable: same model, same bytes") {
  Dataset ds = training_blobs(9);
  TrainConfig cfg;
  cfg.forest.n_trees = 5;
  auto m = train_model(ModelKind::forest, ds, cfg);
  CHECK(model_to_json(*m) == model_to_json(*m));
  auto back = model_from_json(model_to_json(*m));
  CHECK(model_to_json(*back) == model_to_json(*m));
}

TEST_CASE("save_model and load_model work through files") {
  Dataset ds = training_blobs(10);
  TrainConfig cfg;
  auto m = train_model(ModelKind::tree, ds, cfg);
  const char* path = "greybox_model_io.json";
  save_model(*m, path);
  auto back = load_model(path);
  std::remove(path);
  CHECK(model_to_json(*back) == model_to_json(*m));
}

TEST_CASE("corrupt model files are rejected as runtime errors") {
  CHECK_THROWS_WITH_AS(model_from_json("not json at all"), doctest::Contains("corrupt"), error);
  CHECK_THROWS_AS(model_from_json("{\"format_version\":1}"), error);
  CHECK_THROWS_AS(model_from_json("{\"format_version\":99,\"kind\":\"tree\"}"), error);

  Dataset ds = training_blobs(11);
  TrainConfig cfg;
  auto m = train_model(ModelKind::naive_bayes, ds, cfg);
  std::string text = model_to_json(*m);
  CHECK_THROWS_AS(model_from_json(text.substr(0, text.size() / 2)), error);

  // Unknown kind strings must not surface as config errors.
  auto j = nlohmann::json::parse(text);
  j["kind"] = "flux_capacitor";
  CHECK_THROWS_AS(model_from_json(j.dump()), error);
  try {
    model_from_json(j.dump());
    FAIL("expected a throw");
  } catch (const config_error&) {
    FAIL("corrupt file must not raise config_error");
  } catch (const error&) {
  }
}

TEST_CASE("require_schema enforces matching fingerprints") {
  Dataset ds = training_blobs(12);
  TrainConfig cfg;
  auto m = train_model(ModelKind::zero_r, ds, cfg);
  CHECK(m->schema_fingerprint() == ds.schema_fingerprint);
  CHECK_NOTHROW(require_schema(*m, ds.schema_fingerprint));
  CHECK_THROWS_AS(require_schema(*m, 0xdeadbeefull), error);
  CHECK_NOTHROW(require_schema(*m, 0));  // 0 = unknown, never rejected

  m->set_provenance(m->train_seed(), 0);
  CHECK_NOTHROW(require_schema(*m, 0xdeadbeefull));
}

TEST_CASE("model JSON container carries kind, seed and fingerprint") {
  Dataset ds = training_blobs(13);
  TrainConfig cfg;
  cfg.seed = 0xfeedfaceull;
  auto m = train_model(ModelKind::tree, ds, cfg);
  auto j = nlohmann::json::parse(model_to_json(*m));
  CHECK(j["format_version"] == 1);
  CHECK(j["kind"] == "tree");
  CHECK(j["train_seed"] == "00000000feedface");
  CHECK(j["schema_fingerprint"] == "1234abcd5678ef90");
  CHECK(j.contains("model"));
}
