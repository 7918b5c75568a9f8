#pragma once

#include <string>

#include "lptgnn/graph.hpp"

namespace lptgnn {

// Reads the plain-text format: `<DS>_A.txt` (1-indexed "row, col" edge
// lines), `<DS>_graph_indicator.txt`, `<DS>_graph_labels.txt`, and the
// optional `<DS>_node_labels.txt`. Files are looked up in `root` and then in
// `root/<DS>/`. Node labels become one-hot features; without them every node
// gets a single constant-1 feature. Raw graph labels are remapped to 0..C-1
// in ascending order.
DomainDataset parse_tudataset(const std::string& root, const std::string& dataset_name);

// Writes the same file set under `root/<DS>/`. Node labels are emitted when
// every feature row is one-hot (the parser's inverse); each undirected edge
// becomes two directed lines.
void write_tudataset(const std::string& root, const std::string& dataset_name,
                     const DomainDataset& dataset);

}  // namespace lptgnn
