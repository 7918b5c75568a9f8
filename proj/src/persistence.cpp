#include "lptgnn/persistence.hpp"

#include <algorithm>
#include <tuple>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

struct WeightedEdge {
  double weight;
  std::int64_t u, v;
};

void check_inputs(const AttributedGraph& graph, const std::vector<double>& filtration) {
  if (static_cast<std::int64_t>(filtration.size()) != graph.node_count)
    throw ShapeError("filtration length " + std::to_string(filtration.size()) +
                     " does not match node count " + std::to_string(graph.node_count));
}

std::vector<WeightedEdge> sorted_edges(const AttributedGraph& graph,
                                       const std::vector<double>& filtration) {
  std::vector<WeightedEdge> edges;
  edges.reserve(graph.edges.size());
  for (auto [u, v] : graph.edges)
    edges.push_back({std::max(filtration[static_cast<std::size_t>(u)],
                              filtration[static_cast<std::size_t>(v)]),
                     u, v});
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return std::tie(a.weight, a.u, a.v) < std::tie(b.weight, b.u, b.v);
  });
  return edges;
}

double max_filtration(const std::vector<double>& filtration) {
  double m = filtration[0];
  for (double v : filtration) m = std::max(m, v);
  return m;
}

class UnionFind {
public:
  explicit UnionFind(std::int64_t n) : parent_(static_cast<std::size_t>(n)) {
    for (std::int64_t i = 0; i < n; ++i) parent_[static_cast<std::size_t>(i)] = i;
  }

  std::int64_t find(std::int64_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void link(std::int64_t child, std::int64_t root) { parent_[static_cast<std::size_t>(child)] = root; }

private:
  std::vector<std::int64_t> parent_;
};

void sort_points(PersistenceDiagram& dg) {
  std::sort(dg.points.begin(), dg.points.end(), [](const DiagramPoint& a, const DiagramPoint& b) {
    return std::tie(a.birth, a.death) < std::tie(b.birth, b.death);
  });
}

}  // namespace

PersistenceDiagram sublevel_persistence_h0(const AttributedGraph& graph,
                                           const std::vector<double>& filtration) {
  check_inputs(graph, filtration);
  std::int64_t n = graph.node_count;
  double cap = max_filtration(filtration);

  UnionFind uf(n);
  // Per root: the component's birth and the node realizing it (elder-rule
  // tie-break witness).
  std::vector<double> birth(filtration);
  std::vector<std::int64_t> birth_node(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) birth_node[static_cast<std::size_t>(i)] = i;

  PersistenceDiagram dg;
  dg.homology_dimension = 0;
  for (const WeightedEdge& e : sorted_edges(graph, filtration)) {
    std::int64_t ru = uf.find(e.u), rv = uf.find(e.v);
    if (ru == rv) continue;
    std::int64_t survivor = ru, victim = rv;
    double bu = birth[static_cast<std::size_t>(ru)], bv = birth[static_cast<std::size_t>(rv)];
    if (bv < bu || (bv == bu && birth_node[static_cast<std::size_t>(rv)] <
                                    birth_node[static_cast<std::size_t>(ru)])) {
      survivor = rv;
      victim = ru;
    }
    dg.points.push_back({birth[static_cast<std::size_t>(victim)], e.weight});
    uf.link(victim, survivor);
  }
  for (std::int64_t i = 0; i < n; ++i)
    if (uf.find(i) == i) dg.points.push_back({birth[static_cast<std::size_t>(i)], cap});
  sort_points(dg);
  return dg;
}

PersistenceDiagram sublevel_persistence_h1(const AttributedGraph& graph,
                                           const std::vector<double>& filtration) {
  check_inputs(graph, filtration);
  double cap = max_filtration(filtration);

  UnionFind uf(graph.node_count);
  PersistenceDiagram dg;
  dg.homology_dimension = 1;
  for (const WeightedEdge& e : sorted_edges(graph, filtration)) {
    std::int64_t ru = uf.find(e.u), rv = uf.find(e.v);
    if (ru == rv)
      dg.points.push_back({e.weight, cap});
    else
      uf.link(ru, rv);
  }
  sort_points(dg);
  return dg;
}

}  // namespace lptgnn
