#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lptgnn/checkpoint.hpp"
#include "lptgnn/errors.hpp"
#include "lptgnn/filtration.hpp"
#include "lptgnn/persistence_image.hpp"
#include "lptgnn/runconfig.hpp"
#include "lptgnn/splits.hpp"
#include "lptgnn/topology.hpp"
#include "lptgnn/trainer.hpp"
#include "lptgnn/tudataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace lptgnn;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out.good()) throw DataError("failed writing '" + path.string() + "'");
}

std::string variant_name(const RunConfig& config) {
  std::string name = config.model.encoder == EncoderKind::Gin ? "lpgin" : "lptgnn";
  if (config.train.disable_topo) name += "/topo";
  if (config.train.disable_conv) name += "/conv";
  if (config.train.disable_sup) name += "/sup";
  if (config.train.disable_lp) name += "/lp";
  return name;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string path_slug(const std::string& name) {
  return replace_all(replace_all(name, "→", "_to_"), "/", "_");
}

struct LoadedRun {
  DomainDataset source;
  DomainDataset target;
  RunRealized realized;
};

LoadedRun resolve_datasets(const RunConfig& config) {
  const std::string root = resolved_data_root(config);
  LoadedRun run;
  if (config.split == "pair") {
    run.source = parse_tudataset(root, config.source_dataset);
    run.target = parse_tudataset(root, config.target_dataset);
  } else {
    DomainDataset whole = parse_tudataset(root, config.dataset);
    if (config.split == "quartiles") {
      auto quartiles = split_by_edge_density(whole);
      run.source = std::move(quartiles[static_cast<std::size_t>(config.source_quartile)]);
      run.target = std::move(quartiles[static_cast<std::size_t>(config.target_quartile)]);
    } else {
      auto halves =
          split_subpopulation_shift(whole, config.train.seed, &run.realized.subpopulation);
      run.realized.has_subpopulation = true;
      run.source = std::move(halves.first);
      run.target = std::move(halves.second);
    }
  }
  run.source.role = DomainRole::Source;
  run.target.role = DomainRole::Target;
  align_feature_widths(run.source, run.target);
  if (run.source.graphs.empty() || run.target.graphs.empty()) {
    throw DataError("both domains need at least one graph");
  }
  run.realized.feature_dim = run.source.graphs[0].node_features.dim(1);
  run.realized.class_count = std::max(run.source.class_count, run.target.class_count);
  run.realized.source_size = static_cast<std::int64_t>(run.source.graphs.size());
  run.realized.target_size = static_cast<std::int64_t>(run.target.graphs.size());
  run.realized.source_class_counts = class_counts(run.source);
  run.realized.target_class_counts = class_counts(run.target);
  return run;
}

void pad_features(DomainDataset& dataset, std::int64_t width) {
  for (AttributedGraph& g : dataset.graphs) {
    const std::int64_t n = g.node_features.dim(0);
    const std::int64_t f = g.node_features.dim(1);
    if (f == width) continue;
    if (f > width) {
      std::ostringstream msg;
      msg << "feature width mismatch: dataset has " << f << " columns, model expects " << width;
      throw DataError(msg.str());
    }
    Tensor wide({n, width});
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < f; ++j) wide.at({i, j}) = g.node_features.at({i, j});
    }
    g.node_features = std::move(wide);
  }
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              const std::string& out_override) {
  RunConfig config = load_run_config(config_path);
  if (seed_override) config.train.seed = *seed_override;
  if (!out_override.empty()) config.out_dir = out_override;
  if (config.task.empty()) config.task = derived_task_name(config);

  LoadedRun run = resolve_datasets(config);
  config.model.feature_dim = run.realized.feature_dim;
  config.model.class_count = run.realized.class_count;

  Model model(config.model);
  Trainer trainer(std::move(model), config.train);
  {
    ParamStore probe;
    SplitRng rng(config.train.seed, 1);
    trainer.model().init_params(probe, rng);
    run.realized.parameter_count = probe.scalar_count();
  }

  fs::create_directories(config.out_dir);
  const ordered_json manifest = build_manifest(config, run.realized);
  write_text(fs::path(config.out_dir) / "manifest.json", manifest.dump(1, '\t') + "\n");

  std::ofstream metrics(fs::path(config.out_dir) / "metrics.jsonl");
  if (!metrics) throw DataError("cannot write '" + config.out_dir + "/metrics.jsonl'");
  auto on_epoch = [&](const EpochMetrics& m) {
    ordered_json line;
    line["epoch"] = m.epoch;
    line["loss_sup"] = m.loss_sup;
    line["loss_reg_conv"] = m.loss_reg_conv;
    line["loss_reg_topo"] = m.loss_reg_topo;
    line["filtered_fraction"] = m.filtered_fraction;
    line["pseudo_acc"] = m.pseudo_acc;
    line["target_acc"] = m.target_acc;
    metrics << line.dump() << "\n";
    metrics.flush();
    std::cout << "epoch " << m.epoch << " loss_sup " << m.loss_sup << " reg_conv "
              << m.loss_reg_conv << " reg_topo " << m.loss_reg_topo << " target_acc "
              << m.target_acc << "\n";
  };

  ParamStore store;
  const TrainResult result = trainer.fit(store, run.source, run.target, on_epoch);
  save_checkpoint((fs::path(config.out_dir) / "checkpoint.json").string(), manifest, store);
  const double source_accuracy = trainer.evaluate(store, run.source);

  ordered_json res;
  res["task"] = config.task;
  res["variant"] = variant_name(config);
  res["seed"] = config.train.seed;
  res["accuracy"] = result.final_accuracy;
  res["source_accuracy"] = source_accuracy;
  res["best_epoch"] = result.best_epoch;
  res["best_accuracy"] = result.best_accuracy;
  res["epochs_run"] = result.epochs_run;
  res["stopped_early"] = result.stopped_early;
  write_text(fs::path(config.out_dir) / "result.json", res.dump(1, '\t') + "\n");

  std::cout << "task " << config.task << " variant " << variant_name(config) << " seed "
            << config.train.seed << " target_acc " << result.final_accuracy << " source_acc "
            << source_accuracy << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_arg,
             const std::string& data_root) {
  ParamStore store;
  const json manifest = load_checkpoint(checkpoint_path, store);
  if (!manifest.is_object() || !manifest.contains("config")) {
    throw DataError("checkpoint manifest lacks a config section");
  }
  RunConfig config = run_config_from_json(manifest.at("config"));
  if (!data_root.empty()) config.data_root = data_root;

  Model model(config.model);
  Trainer trainer(std::move(model), config.train);

  DomainDataset dataset;
  if (dataset_arg == "source" || dataset_arg == "target") {
    LoadedRun run = resolve_datasets(config);
    if (run.realized.feature_dim != config.model.feature_dim) {
      std::ostringstream msg;
      msg << "feature width mismatch: split has " << run.realized.feature_dim
          << " columns, model expects " << config.model.feature_dim;
      throw DataError(msg.str());
    }
    dataset = dataset_arg == "source" ? std::move(run.source) : std::move(run.target);
  } else {
    dataset = parse_tudataset(resolved_data_root(config), dataset_arg);
    pad_features(dataset, config.model.feature_dim);
  }

  const double accuracy = trainer.evaluate(store, dataset);
  ordered_json out;
  out["dataset"] = dataset_arg;
  out["graphs"] = dataset.graphs.size();
  out["accuracy"] = accuracy;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_inspect(const std::string& dataset_name, std::int64_t index,
                const std::string& filtration, int q, int resolution, const std::string& weight,
                const std::string& data_root) {
  const std::string root = data_root.empty() ? default_data_root() : data_root;
  const DomainDataset dataset = parse_tudataset(root, dataset_name);
  if (index < 0 || index >= static_cast<std::int64_t>(dataset.graphs.size())) {
    std::ostringstream msg;
    msg << "graph index " << index << " out of range: dataset has " << dataset.graphs.size()
        << " graphs";
    throw DataError(msg.str());
  }
  TopologyConfig topology;
  if (filtration != "all") topology.filtrations = {filtration_from_string(filtration)};
  topology.q = q;
  topology.resolution = resolution;
  topology.weight = pi_weight_from_string(weight);
  validate_topology(topology);

  const AttributedGraph& graph = dataset.graphs[static_cast<std::size_t>(index)];
  ordered_json out;
  out["dataset"] = dataset_name;
  out["graph_index"] = index;
  out["node_count"] = graph.node_count;
  out["edge_count"] = graph.edges.size();
  ordered_json blocks = ordered_json::array();
  for (FiltrationKind kind : topology.filtrations) {
    const std::vector<double> values = compute_filtration(graph, kind);
    const PIConfig pi = pi_config_for(values, topology);
    const std::vector<PersistenceDiagram> diagrams = diagrams_for(graph, values, topology.q);
    ordered_json block;
    block["filtration"] = to_string(kind);
    block["values"] = values;
    block["window"] = {{"x_min", pi.x_min},
                       {"x_max", pi.x_max},
                       {"y_min", pi.y_min},
                       {"y_max", pi.y_max},
                       {"bandwidth_x", pi.bandwidth_x},
                       {"bandwidth_y", pi.bandwidth_y}};
    ordered_json diagram = ordered_json::array();
    for (const PersistenceDiagram& d : diagrams) {
      for (const DiagramPoint& p : d.points) {
        diagram.push_back({p.birth, p.death, d.homology_dimension});
      }
    }
    block["diagram"] = diagram;
    ordered_json images = ordered_json::array();
    for (const PersistenceDiagram& d : diagrams) {
      const Tensor image = persistence_image(d, pi);
      ordered_json img;
      img["homology_dimension"] = d.homology_dimension;
      img["resolution"] = resolution;
      img["pixels"] = image.vec();
      images.push_back(img);
    }
    block["images"] = images;
    blocks.push_back(block);
  }
  out["blocks"] = blocks;
  std::cout << out.dump(1, '\t') << "\n";
  return 0;
}

struct SuiteTask {
  std::string name;
  RunConfig base;
};

RunConfig pair_config(const std::string& source, const std::string& target) {
  RunConfig c;
  c.split = "pair";
  c.source_dataset = source;
  c.target_dataset = target;
  return c;
}

RunConfig quartile_config(const std::string& dataset, int si, int ti) {
  RunConfig c;
  c.split = "quartiles";
  c.dataset = dataset;
  c.source_quartile = si;
  c.target_quartile = ti;
  return c;
}

std::vector<SuiteTask> suite_tasks(const std::string& suite) {
  std::vector<SuiteTask> tasks;
  auto add = [&](RunConfig c) {
    SuiteTask t;
    t.name = derived_task_name(c);
    t.base = std::move(c);
    tasks.push_back(std::move(t));
  };
  if (suite == "benchmarks") {
    add(pair_config("COX2", "COX2_MD"));
    add(pair_config("COX2_MD", "COX2"));
    add(pair_config("BZR", "BZR_MD"));
    add(pair_config("BZR_MD", "BZR"));
    add(pair_config("PROTEINS", "DD"));
    add(pair_config("DD", "PROTEINS"));
  } else if (suite == "mutagenicity") {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) add(quartile_config("Mutagenicity", i, j));
      }
    }
  } else if (suite == "ablations") {
    add(quartile_config("Mutagenicity", 0, 1));
    add(quartile_config("Mutagenicity", 1, 2));
    add(quartile_config("Mutagenicity", 2, 1));
    add(quartile_config("Mutagenicity", 3, 2));
  } else if (suite == "synthetic") {
    RunConfig c;
    c.split = "subpopulation";
    c.dataset = "MUTAG";
    add(std::move(c));
  } else {
    throw ConfigError("unknown suite '" + suite +
                      "' (expected benchmarks, mutagenicity, ablations, or synthetic)");
  }
  return tasks;
}

std::vector<std::string> suite_variants(const std::string& suite) {
  if (suite == "benchmarks") return {"lpgin", "lptgnn"};
  if (suite == "mutagenicity") return {"lptgnn"};
  return {"lpgin", "lptgnn/topo", "lptgnn/conv", "lptgnn/sup", "lptgnn/lp", "lptgnn"};
}

void apply_variant(RunConfig& config, const std::string& variant) {
  config.model.encoder = variant.rfind("lpgin", 0) == 0 ? EncoderKind::Gin : EncoderKind::Tgnn;
  config.train.disable_topo = variant.find("/topo") != std::string::npos;
  config.train.disable_conv = variant.find("/conv") != std::string::npos;
  config.train.disable_sup = variant.find("/sup") != std::string::npos;
  config.train.disable_lp = variant.find("/lp") != std::string::npos;
}

int cmd_reproduce(const std::string& suite, const std::string& data_root,
                  const std::string& out_dir, int jobs) {
  const std::vector<SuiteTask> tasks = suite_tasks(suite);
  const std::vector<std::string> variants = suite_variants(suite);
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  const fs::path base = fs::path(out_dir) / suite;
  fs::create_directories(base);

  struct Job {
    std::string task;
    std::string variant;
    std::uint64_t seed = 0;
    fs::path dir;
    std::string command;
  };
  std::vector<Job> queue;
  for (const SuiteTask& task : tasks) {
    for (const std::string& variant : variants) {
      for (std::uint64_t seed : seeds) {
        RunConfig config = task.base;
        apply_variant(config, variant);
        config.train.seed = seed;
        config.task = task.name;
        if (!data_root.empty()) config.data_root = data_root;
        Job job;
        job.task = task.name;
        job.variant = variant;
        job.seed = seed;
        job.dir = base / path_slug(task.name) / path_slug(variant) / ("seed" + std::to_string(seed));
        fs::create_directories(job.dir);
        config.out_dir = job.dir.string();
        write_text(job.dir / "config.json", run_config_to_json(config).dump(1, '\t') + "\n");
        job.command = "'" + self + "' train --config '" + (job.dir / "config.json").string() +
                      "' > '" + (job.dir / "log.txt").string() + "' 2>&1";
        queue.push_back(std::move(job));
      }
    }
  }

  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(queue.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= queue.size()) return;
      const Job& job = queue[i];
      const int rc = std::system(job.command.c_str());
      if (rc != 0) {
        ++failures;
        std::cerr << "FAILED " << job.task << " " << job.variant << " seed " << job.seed
                  << " (see " << (job.dir / "log.txt").string() << ")\n";
      } else {
        std::cout << "done " << job.task << " " << job.variant << " seed " << job.seed << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  ordered_json summary;
  std::ostringstream csv;
  csv << "method";
  for (const SuiteTask& task : tasks) csv << "," << task.name << " mean," << task.name << " std";
  csv << "\n";
  for (const std::string& variant : variants) {
    csv << variant;
    for (const SuiteTask& task : tasks) {
      std::vector<double> accs;
      ordered_json per_seed;
      for (std::uint64_t seed : seeds) {
        const fs::path result_path = base / path_slug(task.name) / path_slug(variant) /
                                     ("seed" + std::to_string(seed)) / "result.json";
        std::ifstream in(result_path);
        if (!in) continue;
        json result;
        try {
          in >> result;
        } catch (const json::parse_error&) {
          continue;
        }
        if (!result.contains("accuracy")) continue;
        const double acc = result.at("accuracy").get<double>();
        accs.push_back(acc);
        per_seed[std::to_string(seed)] = acc;
      }
      if (accs.size() == seeds.size()) {
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        var /= static_cast<double>(accs.size());
        char cell[64];
        std::snprintf(cell, sizeof(cell), ",%.1f,%.1f", 100.0 * mean, 100.0 * std::sqrt(var));
        csv << cell;
        summary[task.name][variant] = {{"seeds", per_seed},
                                       {"mean", mean},
                                       {"std", std::sqrt(var)}};
      } else {
        csv << ",n/a,n/a";
        summary[task.name][variant] = {{"seeds", per_seed}, {"incomplete", true}};
      }
    }
    csv << "\n";
  }
  write_text(base / "table.csv", csv.str());
  write_text(base / "summary.json", summary.dump(1, '\t') + "\n");
  std::cout << "wrote " << (base / "table.csv").string() << "\n";
  return failures.load() == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive graph classification with tensorized two-branch encoders"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_value = 0;
  std::string out_override;
  CLI::App* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", config_path, "JSON run configuration file")->required();
  CLI::Option* seed_opt = train->add_option("--seed", seed_value, "Override the config seed");
  train->add_option("--out", out_override, "Override the output directory");

  std::string checkpoint_path;
  std::string eval_dataset;
  std::string eval_data_root;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file from train")->required();
  eval->add_option("--dataset", eval_dataset,
                   "Dataset name, or 'source'/'target' for the run's own splits")
      ->required();
  eval->add_option("--data-root", eval_data_root, "Override the dataset root directory");

  std::string inspect_dataset;
  std::int64_t inspect_index = 0;
  std::string inspect_filtration = "all";
  int inspect_q = 1;
  int inspect_resolution = 50;
  std::string inspect_weight = "linear";
  std::string inspect_data_root;
  CLI::App* inspect = app.add_subcommand(
      "inspect-topology", "Print filtration values, diagrams, and images for one graph");
  inspect->add_option("--dataset", inspect_dataset, "Dataset name")->required();
  inspect->add_option("--index", inspect_index, "Graph index within the dataset")->required();
  inspect->add_option("--filtration", inspect_filtration,
                      "degree|betweenness|eigenvector|closeness|all");
  inspect->add_option("--q", inspect_q, "Homology dimensions (1 or 2)");
  inspect->add_option("--resolution", inspect_resolution, "Image resolution per axis");
  inspect->add_option("--weight", inspect_weight, "linear|constant");
  inspect->add_option("--data-root", inspect_data_root, "Override the dataset root directory");

  std::string suite;
  std::string repro_data_root;
  std::string repro_out = "reproduce";
  int repro_jobs = 0;
  CLI::App* repro = app.add_subcommand("reproduce", "Run a result suite and write its table");
  repro->add_option("--suite", suite, "benchmarks|mutagenicity|ablations|synthetic")->required();
  repro->add_option("--data-root", repro_data_root, "Override the dataset root directory");
  repro->add_option("--out", repro_out, "Directory for suite outputs");
  repro->add_option("--jobs", repro_jobs, "Parallel training processes (default: CPU count)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count() > 0) seed = seed_value;
      return cmd_train(config_path, seed, out_override);
    }
    if (eval->parsed()) return cmd_eval(checkpoint_path, eval_dataset, eval_data_root);
    if (inspect->parsed()) {
      return cmd_inspect(inspect_dataset, inspect_index, inspect_filtration, inspect_q,
                         inspect_resolution, inspect_weight, inspect_data_root);
    }
    if (repro->parsed()) return cmd_reproduce(suite, repro_data_root, repro_out, repro_jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
