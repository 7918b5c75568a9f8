#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "lptgnn/encoders.hpp"
#include "lptgnn/splits.hpp"
#include "lptgnn/trainer.hpp"

namespace lptgnn {

// Everything a training run needs, loadable from a JSON file. Unknown keys
// are rejected; omitted keys take the defaults below and are materialized
// back into the emitted manifest.
struct RunConfig {
  std::string task;         // display name; derived from the split when empty
  std::string data_root;    // empty → $LPTGNN_DATA_ROOT, else "data"
  std::string split = "pair";  // pair | quartiles | subpopulation
  std::string dataset;         // quartiles and subpopulation splits
  std::string source_dataset;  // pair split
  std::string target_dataset;  // pair split
  int source_quartile = 0;
  int target_quartile = 1;
  std::string out_dir = "run";
  ModelConfig model;
  TrainConfig train;
};

std::string default_data_root();
std::string resolved_data_root(const RunConfig& config);

// Short display code used in task names and result tables.
std::string dataset_code(const std::string& dataset_name);
std::string derived_task_name(const RunConfig& config);

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

// Split sizes and data-derived dimensions realized for one run.
struct RunRealized {
  std::int64_t feature_dim = 0;
  int class_count = 0;
  std::int64_t source_size = 0;
  std::int64_t target_size = 0;
  std::vector<std::int64_t> source_class_counts;
  std::vector<std::int64_t> target_class_counts;
  bool has_subpopulation = false;
  SubpopulationCounts subpopulation;
  std::int64_t parameter_count = 0;
};

nlohmann::ordered_json build_manifest(const RunConfig& config, const RunRealized& realized);

}  // namespace lptgnn
