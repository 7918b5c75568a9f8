#include "lptgnn/tudataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lptgnn/errors.hpp"

namespace fs = std::filesystem;

namespace lptgnn {

namespace {

// Non-empty lines of a text file with line numbers (1-based); CR stripped.
std::vector<std::pair<int, std::string>> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing dataset file: " + path.string());
  std::vector<std::pair<int, std::string>> lines;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (!blank) lines.emplace_back(number, line);
  }
  return lines;
}

std::int64_t parse_int(const std::string& token, const fs::path& path, int line) {
  std::string trimmed = token;
  trimmed.erase(0, trimmed.find_first_not_of(" \t"));
  trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(trimmed, &used);
    if (used != trimmed.size()) throw std::invalid_argument(trimmed);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": expected integer, got '" +
                    token + "'");
  }
}

fs::path locate(const std::string& root, const std::string& name, const std::string& suffix,
                bool required) {
  fs::path flat = fs::path(root) / (name + suffix);
  fs::path nested = fs::path(root) / name / (name + suffix);
  if (fs::exists(flat)) return flat;
  if (fs::exists(nested)) return nested;
  if (required) throw DataError("missing dataset file: " + nested.string());
  return {};
}

}  // namespace

DomainDataset parse_tudataset(const std::string& root, const std::string& dataset_name) {
  fs::path indicator_path = locate(root, dataset_name, "_graph_indicator.txt", true);
  fs::path adjacency_path = locate(root, dataset_name, "_A.txt", true);
  fs::path graph_labels_path = locate(root, dataset_name, "_graph_labels.txt", true);
  fs::path node_labels_path = locate(root, dataset_name, "_node_labels.txt", false);

  // Node -> graph assignment; node ids are 1-based and global.
  std::vector<std::int64_t> node_graph;
  std::int64_t graph_count = 0;
  for (const auto& [line, text] : read_lines(indicator_path)) {
    std::int64_t gid = parse_int(text, indicator_path, line);
    if (gid < 1)
      throw DataError(indicator_path.string() + ":" + std::to_string(line) +
                      ": graph id " + std::to_string(gid) + " out of range");
    node_graph.push_back(gid - 1);
    graph_count = std::max(graph_count, gid);
  }
  if (node_graph.empty()) throw DataError("empty indicator file: " + indicator_path.string());
  std::int64_t total_nodes = static_cast<std::int64_t>(node_graph.size());

  // Local node index within each graph, in order of global id.
  std::vector<std::int64_t> local_index(node_graph.size());
  std::vector<std::int64_t> graph_sizes(static_cast<std::size_t>(graph_count), 0);
  for (std::size_t i = 0; i < node_graph.size(); ++i)
    local_index[i] = graph_sizes[static_cast<std::size_t>(node_graph[i])]++;

  // Optional node labels -> one-hot columns over the collection-wide label set.
  std::vector<std::int64_t> node_labels;
  std::int64_t feature_dim = 1;
  std::map<std::int64_t, std::int64_t> node_label_map;
  if (!node_labels_path.empty()) {
    for (const auto& [line, text] : read_lines(node_labels_path))
      node_labels.push_back(parse_int(text, node_labels_path, line));
    if (static_cast<std::int64_t>(node_labels.size()) != total_nodes)
      throw DataError(node_labels_path.string() + ": " + std::to_string(node_labels.size()) +
                      " node labels for " + std::to_string(total_nodes) + " nodes");
    for (std::int64_t raw : node_labels) node_label_map.emplace(raw, 0);
    std::int64_t next = 0;
    for (auto& [raw, idx] : node_label_map) idx = next++;
    feature_dim = next;
  }

  // Graph labels, remapped ascending to 0..C-1.
  std::vector<std::int64_t> raw_graph_labels;
  for (const auto& [line, text] : read_lines(graph_labels_path))
    raw_graph_labels.push_back(parse_int(text, graph_labels_path, line));
  if (static_cast<std::int64_t>(raw_graph_labels.size()) != graph_count)
    throw DataError(graph_labels_path.string() + ": " + std::to_string(raw_graph_labels.size()) +
                    " labels for " + std::to_string(graph_count) + " graphs");
  std::map<std::int64_t, int> graph_label_map;
  for (std::int64_t raw : raw_graph_labels) graph_label_map.emplace(raw, 0);
  int next_class = 0;
  for (auto& [raw, idx] : graph_label_map) idx = next_class++;

  DomainDataset ds;
  ds.name = dataset_name;
  ds.class_count = next_class;
  ds.graphs.resize(static_cast<std::size_t>(graph_count));
  for (std::int64_t g = 0; g < graph_count; ++g) {
    AttributedGraph& graph = ds.graphs[static_cast<std::size_t>(g)];
    std::int64_t n = graph_sizes[static_cast<std::size_t>(g)];
    if (n == 0)
      throw DataError(indicator_path.string() + ": graph " + std::to_string(g + 1) + " has no nodes");
    graph.node_count = n;
    graph.graph_label = graph_label_map.at(raw_graph_labels[static_cast<std::size_t>(g)]);
    graph.node_features = Tensor(Shape{n, feature_dim});
  }
  for (std::int64_t v = 0; v < total_nodes; ++v) {
    AttributedGraph& graph = ds.graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(v)])];
    std::int64_t col = node_labels.empty()
                           ? 0
                           : node_label_map.at(node_labels[static_cast<std::size_t>(v)]);
    graph.node_features[local_index[static_cast<std::size_t>(v)] * feature_dim + col] = 1.0;
  }

  // Edges: 1-based global ids, directed duplicates collapse, self-loops dropped.
  std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> edge_sets(
      static_cast<std::size_t>(graph_count));
  for (const auto& [line, text] : read_lines(adjacency_path)) {
    std::size_t comma = text.find(',');
    if (comma == std::string::npos)
      throw DataError(adjacency_path.string() + ":" + std::to_string(line) +
                      ": expected 'row, col', got '" + text + "'");
    std::int64_t u = parse_int(text.substr(0, comma), adjacency_path, line);
    std::int64_t v = parse_int(text.substr(comma + 1), adjacency_path, line);
    if (u < 1 || u > total_nodes || v < 1 || v > total_nodes)
      throw DataError(adjacency_path.string() + ":" + std::to_string(line) + ": node id " +
                      std::to_string(std::max(u, v)) + " out of range");
    std::int64_t gu = node_graph[static_cast<std::size_t>(u - 1)];
    std::int64_t gv = node_graph[static_cast<std::size_t>(v - 1)];
    if (gu != gv)
      throw DataError(adjacency_path.string() + ":" + std::to_string(line) +
                      ": edge crosses graphs " + std::to_string(gu + 1) + " and " +
                      std::to_string(gv + 1));
    if (u == v) continue;
    std::int64_t lu = local_index[static_cast<std::size_t>(u - 1)];
    std::int64_t lv = local_index[static_cast<std::size_t>(v - 1)];
    edge_sets[static_cast<std::size_t>(gu)].emplace(std::min(lu, lv), std::max(lu, lv));
  }
  for (std::int64_t g = 0; g < graph_count; ++g) {
    auto& set = edge_sets[static_cast<std::size_t>(g)];
    ds.graphs[static_cast<std::size_t>(g)].edges.assign(set.begin(), set.end());
    validate_graph(ds.graphs[static_cast<std::size_t>(g)]);
  }
  return ds;
}

void write_tudataset(const std::string& root, const std::string& dataset_name,
                     const DomainDataset& dataset) {
  fs::path dir = fs::path(root) / dataset_name;
  fs::create_directories(dir);
  std::ofstream a(dir / (dataset_name + "_A.txt"));
  std::ofstream indicator(dir / (dataset_name + "_graph_indicator.txt"));
  std::ofstream labels(dir / (dataset_name + "_graph_labels.txt"));
  if (!a || !indicator || !labels)
    throw DataError("cannot write dataset files under " + dir.string());

  // One-hot features invert to node labels; anything else is the constant
  // fallback and emits no node-label file.
  bool one_hot = true;
  for (const AttributedGraph& g : dataset.graphs) {
    std::int64_t f = g.node_features.dim(1);
    if (f < 2) {
      one_hot = false;
      break;
    }
    for (std::int64_t i = 0; i < g.node_count && one_hot; ++i) {
      int ones = 0;
      for (std::int64_t j = 0; j < f; ++j) {
        double v = g.node_features[i * f + j];
        if (v == 1.0)
          ++ones;
        else if (v != 0.0)
          ones = 2;
      }
      one_hot = ones == 1;
    }
    if (!one_hot) break;
  }
  std::ofstream node_labels;
  if (one_hot) {
    node_labels.open(dir / (dataset_name + "_node_labels.txt"));
    if (!node_labels) throw DataError("cannot write dataset files under " + dir.string());
  }

  std::int64_t node_base = 0;
  for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
    const AttributedGraph& g = dataset.graphs[gi];
    labels << g.graph_label << "\n";
    for (std::int64_t v = 0; v < g.node_count; ++v) {
      indicator << (gi + 1) << "\n";
      if (one_hot) {
        std::int64_t f = g.node_features.dim(1);
        for (std::int64_t j = 0; j < f; ++j)
          if (g.node_features[v * f + j] == 1.0) {
            node_labels << j << "\n";
            break;
          }
      }
    }
    for (auto [u, v] : g.edges) {
      a << (node_base + u + 1) << ", " << (node_base + v + 1) << "\n";
      a << (node_base + v + 1) << ", " << (node_base + u + 1) << "\n";
    }
    node_base += g.node_count;
  }
}

}  // namespace lptgnn
