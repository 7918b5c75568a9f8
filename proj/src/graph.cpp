#include "lptgnn/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "lptgnn/errors.hpp"

namespace lptgnn {

void validate_graph(const AttributedGraph& g) {
  if (g.node_count <= 0) throw ShapeError("graph must have at least one node");
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (auto [u, v] : g.edges) {
    if (u < 0 || u >= g.node_count || v < 0 || v >= g.node_count)
      throw ShapeError("edge endpoint out of range");
    if (u == v) throw ShapeError("self-loop on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
    if (!seen.emplace(u, v).second)
      throw ShapeError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
  }
  if (g.node_features.rank() != 2 || g.node_features.dim(0) != g.node_count)
    throw ShapeError("node feature matrix must have one row per node");
}

std::vector<std::vector<std::int64_t>> adjacency_list(const AttributedGraph& g) {
  std::vector<std::vector<std::int64_t>> adj(static_cast<std::size_t>(g.node_count));
  for (auto [u, v] : g.edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::vector<std::int64_t> node_degrees(const AttributedGraph& g) {
  std::vector<std::int64_t> deg(static_cast<std::size_t>(g.node_count), 0);
  for (auto [u, v] : g.edges) {
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  }
  return deg;
}

Tensor adjacency_plus_identity(const AttributedGraph& g) {
  std::int64_t n = g.node_count;
  Tensor a(Shape{n, n});
  for (std::int64_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
  for (auto [u, v] : g.edges) {
    a[u * n + v] = 1.0;
    a[v * n + u] = 1.0;
  }
  return a;
}

Tensor normalized_adjacency(const AttributedGraph& g) {
  std::int64_t n = g.node_count;
  Tensor a = adjacency_plus_identity(g);
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::int64_t j = 0; j < n; ++j) d += a[i * n + j];
    inv_sqrt_deg[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(d);
  }
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      a[i * n + j] *= inv_sqrt_deg[static_cast<std::size_t>(i)] * inv_sqrt_deg[static_cast<std::size_t>(j)];
  return a;
}

Tensor matrix_power(const Tensor& m, int power) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1))
    throw ShapeError("matrix_power expects a square matrix, got " + shape_str(m.shape()));
  if (power < 1) throw ShapeError("matrix_power expects power >= 1");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::int64_t n = m.dim(0);
  Eigen::Map<const RowMat> base(m.data(), n, n);
  Tensor out = m;
  Eigen::Map<RowMat> acc(out.data(), n, n);
  for (int i = 1; i < power; ++i) acc = (acc * base).eval();
  return out;
}

double edge_density(const AttributedGraph& g) {
  if (g.node_count < 2) return 0.0;
  double pairs = static_cast<double>(g.node_count) * static_cast<double>(g.node_count - 1) / 2.0;
  return static_cast<double>(g.edges.size()) / pairs;
}

void align_feature_widths(DomainDataset& a, DomainDataset& b) {
  auto width = [](const DomainDataset& d) -> std::int64_t {
    return d.graphs.empty() ? 0 : d.graphs.front().node_features.dim(1);
  };
  std::int64_t target = std::max(width(a), width(b));
  auto pad = [target](DomainDataset& d) {
    for (AttributedGraph& g : d.graphs) {
      std::int64_t n = g.node_features.dim(0), f = g.node_features.dim(1);
      if (f == target) continue;
      Tensor wide(Shape{n, target});
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < f; ++j) wide[i * target + j] = g.node_features[i * f + j];
      g.node_features = std::move(wide);
    }
  };
  pad(a);
  pad(b);
}

std::vector<std::int64_t> class_counts(const DomainDataset& d) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(d.class_count), 0);
  for (const AttributedGraph& g : d.graphs) {
    if (g.graph_label < 0 || g.graph_label >= d.class_count)
      throw ShapeError("graph label outside {0.." + std::to_string(d.class_count - 1) + "}");
    ++counts[static_cast<std::size_t>(g.graph_label)];
  }
  return counts;
}

}  // namespace lptgnn
