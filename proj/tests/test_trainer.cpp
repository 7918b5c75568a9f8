#include "doctest.h"

#include <cmath>
#include <vector>

#include "lptgnn/checkpoint.hpp"
#include "lptgnn/errors.hpp"
#include "lptgnn/runconfig.hpp"
#include "lptgnn/trainer.hpp"

#include "test_support.hpp"

using namespace lptgnn;
using testsupport::TempDir;
using testsupport::make_graph;

namespace {

ModelConfig tiny_model(EncoderKind encoder = EncoderKind::Tgnn) {
  ModelConfig mc;
  mc.encoder = encoder;
  mc.feature_dim = 1;
  mc.class_count = 2;
  mc.rep_dim = 4;
  mc.dropout = 0.0;
  mc.gcn_layers = 2;
  mc.reshape_base = 2;
  mc.topology.filtrations = {FiltrationKind::Degree};
  mc.topology.q = 1;
  mc.topology.resolution = 6;
  mc.conv_channels = 2;
  mc.topo_ttl_out = {2, 2};
  mc.gin_layers = 2;
  mc.gin_hidden = 4;
  return mc;
}

TrainConfig tiny_train() {
  TrainConfig tc;
  tc.learning_rate = 0.02;
  tc.batch_size = 4;
  tc.max_epochs = 8;
  tc.patience = 100;
  tc.confidence_threshold = 0.6;
  tc.seed = 1;
  return tc;
}

// Structurally separable classes: sparse paths versus dense cliques.
AttributedGraph labeled_graph(int label, std::int64_t n) {
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  if (label == 0) {
    for (std::int64_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  } else {
    for (std::int64_t u = 0; u < n; ++u)
      for (std::int64_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  }
  return make_graph(n, std::move(edges), label);
}

DomainDataset structured_dataset(DomainRole role, int per_class, std::uint64_t salt) {
  DomainDataset d;
  d.role = role;
  d.class_count = 2;
  d.name = role == DomainRole::Source ? "src" : "tgt";
  for (int i = 0; i < per_class; ++i) {
    std::int64_t n = 4 + static_cast<std::int64_t>((i + salt) % 3);
    d.graphs.push_back(labeled_graph(0, n));
    d.graphs.push_back(labeled_graph(1, n));
  }
  return d;
}

}  // namespace

TEST_CASE("train config validation") {
  ModelConfig mc = tiny_model();
  TrainConfig ok = tiny_train();
  CHECK_NOTHROW(validate_train_config(ok, mc));

  TrainConfig bad = ok;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);
  bad = ok;
  bad.batch_size = 1;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);
  bad = ok;
  bad.max_epochs = 0;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);
  bad = ok;
  bad.patience = 0;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);
  bad = ok;
  bad.confidence_threshold = 0.0;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);

  bad = ok;
  bad.disable_conv = true;
  bad.disable_topo = true;
  CHECK_THROWS_AS(validate_train_config(bad, mc), ConfigError);
  bad.disable_topo = false;
  CHECK_NOTHROW(validate_train_config(bad, mc));

  ModelConfig gin = tiny_model(EncoderKind::Gin);
  TrainConfig flagged = ok;
  flagged.disable_topo = true;
  CHECK_THROWS_AS(validate_train_config(flagged, gin), ConfigError);
  flagged = ok;
  flagged.disable_conv = true;
  CHECK_THROWS_AS(validate_train_config(flagged, gin), ConfigError);
}

TEST_CASE("trainer learns a structurally separable task") {
  DomainDataset source = structured_dataset(DomainRole::Source, 6, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 6, 1);

  TrainConfig tc = tiny_train();
  tc.learning_rate = 0.05;
  tc.max_epochs = 60;
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  TrainResult result = trainer.fit(store, source, target);

  REQUIRE(result.epochs_run >= 1);
  CHECK(static_cast<int>(result.history.size()) == result.epochs_run);
  CHECK(result.final_accuracy >= 0.9);
  CHECK(trainer.evaluate(store, target) == result.final_accuracy);
  CHECK(result.history.front().loss_sup > result.history.back().loss_sup);
  for (const EpochMetrics& m : result.history) {
    CHECK(m.loss_sup >= 0.0);
    CHECK(m.filtered_fraction >= 0.0);
    CHECK(m.filtered_fraction <= 1.0);
    CHECK(m.target_acc >= 0.0);
    CHECK(m.target_acc <= 1.0);
  }

  int callbacks = 0;
  ParamStore store2;
  TrainResult r2 = trainer.fit(store2, source, target,
                               [&](const EpochMetrics& m) { callbacks = m.epoch; });
  CHECK(callbacks == r2.epochs_run);
}

TEST_CASE("gin trainer learns the same task") {
  DomainDataset source = structured_dataset(DomainRole::Source, 6, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 6, 1);

  TrainConfig tc = tiny_train();
  tc.learning_rate = 0.1;
  tc.max_epochs = 80;
  tc.confidence_threshold = 0.9;
  Trainer trainer(Model(tiny_model(EncoderKind::Gin)), tc);
  ParamStore store;
  TrainResult result = trainer.fit(store, source, target);
  CHECK(result.final_accuracy >= 0.9);
  // The single-encoder variant logs its one regularizer in the conv slot.
  for (const EpochMetrics& m : result.history) CHECK(m.loss_reg_topo == 0.0);
}

TEST_CASE("fit is bitwise deterministic for a fixed seed") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);
  Trainer trainer(Model(tiny_model()), tiny_train());

  ParamStore a, b;
  TrainResult ra = trainer.fit(a, source, target);
  TrainResult rb = trainer.fit(b, source, target);

  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].loss_sup == rb.history[i].loss_sup);
    CHECK(ra.history[i].loss_reg_conv == rb.history[i].loss_reg_conv);
    CHECK(ra.history[i].loss_reg_topo == rb.history[i].loss_reg_topo);
    CHECK(ra.history[i].target_acc == rb.history[i].target_acc);
  }
  for (const std::string& name : a.names())
    CHECK(a.value(name).vec() == b.value(name).vec());
  CHECK(a.step_count() == b.step_count());

  TrainConfig other = tiny_train();
  other.seed = 2;
  Trainer shifted(Model(tiny_model()), other);
  ParamStore c;
  TrainResult rc = shifted.fit(c, source, target);
  bool differs = false;
  for (std::size_t i = 0; i < std::min(ra.history.size(), rc.history.size()); ++i)
    differs = differs || ra.history[i].loss_sup != rc.history[i].loss_sup;
  CHECK(differs);
}

TEST_CASE("disable_lp ignores the target domain for training") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target_a = structured_dataset(DomainRole::Target, 4, 1);
  // Same sizes, different graphs: swap the class of every even entry.
  DomainDataset target_b = target_a;
  for (std::size_t i = 0; i < target_b.graphs.size(); i += 2)
    target_b.graphs[i] = labeled_graph(1 - target_b.graphs[i].graph_label, 6);

  TrainConfig tc = tiny_train();
  tc.disable_lp = true;
  Trainer trainer(Model(tiny_model()), tc);

  ParamStore a, b;
  TrainResult ra = trainer.fit(a, source, target_a);
  TrainResult rb = trainer.fit(b, source, target_b);

  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].loss_sup == rb.history[i].loss_sup);
    CHECK(ra.history[i].loss_reg_conv == 0.0);
    CHECK(ra.history[i].loss_reg_topo == 0.0);
    CHECK(ra.history[i].filtered_fraction == 0.0);
  }
  for (const std::string& name : a.names())
    CHECK(a.value(name).vec() == b.value(name).vec());
}

TEST_CASE("an unreachable confidence threshold zeroes the regularizers") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);

  TrainConfig tc = tiny_train();
  tc.confidence_threshold = 5.0;
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  TrainResult result = trainer.fit(store, source, target);
  for (const EpochMetrics& m : result.history) {
    CHECK(m.loss_reg_conv == 0.0);
    CHECK(m.loss_reg_topo == 0.0);
    CHECK(m.filtered_fraction == 0.0);
    CHECK(m.pseudo_acc == 0.0);
  }
}

TEST_CASE("disable_topo freezes the topological branch parameters") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);

  TrainConfig tc = tiny_train();
  tc.max_epochs = 3;
  tc.disable_topo = true;
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  trainer.fit(store, source, target);

  ParamStore fresh;
  SplitRng rng(tc.seed, 1);
  trainer.model().init_params(fresh, rng);
  bool conv_moved = false;
  for (const std::string& name : store.names()) {
    if (name.rfind("topo.", 0) == 0) {
      CHECK(store.value(name).vec() == fresh.value(name).vec());
    } else if (name.rfind("conv.", 0) == 0) {
      for (std::int64_t i = 0; i < store.value(name).numel(); ++i)
        conv_moved = conv_moved || store.value(name)[i] != fresh.value(name)[i];
    }
  }
  CHECK(conv_moved);
}

TEST_CASE("disable_sup drops the supervised term") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);

  TrainConfig tc = tiny_train();
  tc.max_epochs = 3;
  tc.disable_sup = true;
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  TrainResult result = trainer.fit(store, source, target);
  for (const EpochMetrics& m : result.history) CHECK(m.loss_sup == 0.0);
}

TEST_CASE("patience restores the best parameters when it triggers") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);

  TrainConfig tc = tiny_train();
  tc.max_epochs = 60;
  tc.patience = 2;
  tc.learning_rate = 0.15;  // noisy enough to stall target accuracy
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  TrainResult result = trainer.fit(store, source, target);

  double best = 0.0;
  int best_epoch = 0;
  for (const EpochMetrics& m : result.history)
    if (m.target_acc > best) {
      best = m.target_acc;
      best_epoch = m.epoch;
    }
  CHECK(result.best_accuracy == best);
  CHECK(result.best_epoch == best_epoch);
  if (result.stopped_early) {
    CHECK(result.epochs_run < tc.max_epochs);
    CHECK(result.final_accuracy == result.best_accuracy);
    CHECK(trainer.evaluate(store, target) == result.best_accuracy);
    CHECK(result.epochs_run == best_epoch + tc.patience);
  } else {
    CHECK(result.epochs_run == tc.max_epochs);
    CHECK(result.final_accuracy == result.history.back().target_acc);
  }
}

TEST_CASE("a divergent learning rate aborts with a training error") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);

  TrainConfig tc = tiny_train();
  tc.learning_rate = 1e155;
  tc.max_epochs = 50;
  Trainer trainer(Model(tiny_model()), tc);
  ParamStore store;
  CHECK_THROWS_AS(trainer.fit(store, source, target), TrainingError);
}

TEST_CASE("fit requires an empty store and labeled data") {
  DomainDataset source = structured_dataset(DomainRole::Source, 4, 0);
  DomainDataset target = structured_dataset(DomainRole::Target, 4, 1);
  Trainer trainer(Model(tiny_model()), tiny_train());

  ParamStore dirty;
  dirty.create("extra", Tensor::scalar(1));
  CHECK_THROWS_AS(trainer.fit(dirty, source, target), TrainingError);

  DomainDataset unlabeled = source;
  unlabeled.graphs[0].graph_label = -1;
  ParamStore s1;
  CHECK_THROWS_AS(trainer.fit(s1, unlabeled, target), DataError);

  DomainDataset overrange = source;
  overrange.graphs[0].graph_label = 2;
  ParamStore s2;
  CHECK_THROWS_AS(trainer.fit(s2, overrange, target), DataError);
}

TEST_CASE("evaluate scores argmax predictions") {
  DomainDataset data;
  data.class_count = 2;
  data.name = "eval";
  for (int i = 0; i < 3; ++i) data.graphs.push_back(labeled_graph(0, 4));
  data.graphs.push_back(labeled_graph(1, 4));

  Trainer trainer(Model(tiny_model()), tiny_train());
  ParamStore store;
  SplitRng rng(0, 1);
  trainer.model().init_params(store, rng);
  for (const std::string& name : store.names()) store.value(name).fill(0.0);
  store.value("mlp.bn.gamma").fill(1.0);

  // Uniform logits tie-break to class 0: accuracy equals its frequency.
  CHECK(trainer.evaluate(store, data) == doctest::Approx(0.75));

  DomainDataset bad = data;
  bad.graphs[0].graph_label = 7;
  CHECK_THROWS_AS(trainer.evaluate(store, bad), DataError);
}

TEST_CASE("checkpoints round-trip parameters, buffers, and step count") {
  Trainer trainer(Model(tiny_model()), tiny_train());
  ParamStore store;
  SplitRng rng(11, 1);
  trainer.model().init_params(store, rng);
  store.buffer("mlp.bn.running_mean")[0] = 0.25;
  store.set_step_count(17);

  TempDir dir("ckpt");
  std::string path = (dir.path() / "checkpoint.json").string();
  nlohmann::ordered_json manifest;
  manifest["config"] = {{"seed", 1}};
  save_checkpoint(path, manifest, store);

  ParamStore loaded;
  nlohmann::json back = load_checkpoint(path, loaded);
  CHECK(back["config"]["seed"] == 1);
  CHECK(loaded.step_count() == 17);
  REQUIRE(loaded.names() == store.names());
  for (const std::string& name : store.names()) {
    CHECK(loaded.value(name).shape() == store.value(name).shape());
    CHECK(loaded.value(name).vec() == store.value(name).vec());
  }
  REQUIRE(loaded.buffer_names() == store.buffer_names());
  CHECK(loaded.buffer("mlp.bn.running_mean")[0] == 0.25);

  ParamStore dirty;
  dirty.create("x", Tensor::scalar(0));
  CHECK_THROWS_AS(load_checkpoint(path, dirty), DataError);

  testsupport::write_file(dir.path() / "garbage.json", "{\"format\": \"other\"}");
  ParamStore empty;
  CHECK_THROWS_AS(load_checkpoint((dir.path() / "garbage.json").string(), empty), DataError);
  CHECK_THROWS_AS(load_checkpoint((dir.path() / "missing.json").string(), empty), DataError);
}

TEST_CASE("run config json round-trip with defaults") {
  nlohmann::json j = {{"split", "subpopulation"}, {"dataset", "MUTAG"}};
  RunConfig rc = run_config_from_json(j);
  CHECK(rc.split == "subpopulation");
  CHECK(rc.dataset == "MUTAG");
  CHECK(rc.model.rep_dim == 32);
  CHECK(rc.model.topology.resolution == 50);
  CHECK(rc.train.batch_size == 32);
  CHECK(rc.train.confidence_threshold == 0.8);
  CHECK(rc.out_dir == "run");

  nlohmann::ordered_json out = run_config_to_json(rc);
  RunConfig again = run_config_from_json(out);
  CHECK(run_config_to_json(again) == out);
  CHECK(out["model"]["rep_dim"] == 32);
  CHECK(out["train"]["max_epochs"] == 200);
  CHECK(out["topology"]["resolution"] == 50);
}

TEST_CASE("run config rejects unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(run_config_from_json({{"lr", 0.1}}),
                       doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"model", {{"banana", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"split", "pair"}, {"source_dataset", "A"}}),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"split", "nonsense"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", "zero"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(
                      {{"split", "quartiles"}, {"dataset", "M"}, {"source_quartile", 2},
                       {"target_quartile", 2}}),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(
                      {{"split", "quartiles"}, {"dataset", "M"}, {"target_quartile", 4}}),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"confidence_threshold", 1.5}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json({{"topology", {{"filtrations", {"degree", "degree"}}}}}),
      ConfigError);
}

TEST_CASE("dataset codes and task names") {
  CHECK(dataset_code("COX2") == "C");
  CHECK(dataset_code("COX2_MD") == "CM");
  CHECK(dataset_code("BZR") == "B");
  CHECK(dataset_code("BZR_MD") == "BM");
  CHECK(dataset_code("Mutagenicity") == "M");
  CHECK(dataset_code("PROTEINS") == "P");
  CHECK(dataset_code("DD") == "D");
  CHECK(dataset_code("Unknown17") == "Unknown17");

  RunConfig pair;
  pair.split = "pair";
  pair.source_dataset = "COX2";
  pair.target_dataset = "COX2_MD";
  CHECK(derived_task_name(pair) == "C→CM");

  RunConfig quartiles;
  quartiles.split = "quartiles";
  quartiles.dataset = "Mutagenicity";
  quartiles.source_quartile = 0;
  quartiles.target_quartile = 3;
  CHECK(derived_task_name(quartiles) == "M0→M3");

  RunConfig subpop;
  subpop.split = "subpopulation";
  subpop.dataset = "MUTAG";
  CHECK(derived_task_name(subpop) == "MUTAG-subpop");

  RunConfig named = subpop;
  named.task = "custom";
  CHECK(run_config_to_json(named)["task"] == "custom");
  CHECK(run_config_to_json(subpop)["task"] == "MUTAG-subpop");
}

TEST_CASE("build_manifest materializes config and realized data") {
  RunConfig rc;
  rc.split = "subpopulation";
  rc.dataset = "MUTAG";
  RunRealized realized;
  realized.feature_dim = 7;
  realized.class_count = 2;
  realized.source_size = 63;
  realized.target_size = 125;
  realized.source_class_counts = {21, 42};
  realized.target_class_counts = {42, 83};
  realized.has_subpopulation = true;
  realized.subpopulation = {21, 42, 42, 83};
  realized.parameter_count = 1234;

  nlohmann::ordered_json m = build_manifest(rc, realized);
  CHECK(m["config"]["split"] == "subpopulation");
  CHECK(m["data"]["feature_dim"] == 7);
  CHECK(m["data"]["parameter_count"] == 1234);
  CHECK(m["data"]["source_class_counts"][1] == 42);
  CHECK(m["data"]["subpopulation"]["target_pos"] == 83);
  CHECK(m["conventions"]["batchnorm_momentum"] == 0.9);
  CHECK(m["conventions"].contains("rng_streams"));
}
