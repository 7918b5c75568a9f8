#pragma once

#include <vector>

#include "lptgnn/graph.hpp"

namespace lptgnn {

struct DiagramPoint {
  double birth = 0.0;
  double death = 0.0;
};

struct PersistenceDiagram {
  std::vector<DiagramPoint> points;
  int homology_dimension = 0;
};

// Sublevel-set filtration: vertex v enters at f(v), edge (u,v) at
// max(f(u), f(v)).
//
// H0: union-find components under the elder rule: on a merge the component
// with the smaller birth survives (birth ties: the smaller node index
// survives) and the younger one dies at the edge value. Each surviving
// component yields an essential bar capped at the maximum filtration value.
// Every vertex contributes exactly one point.
PersistenceDiagram sublevel_persistence_h0(const AttributedGraph& graph,
                                           const std::vector<double>& filtration);

// H1: every edge that closes a cycle (its endpoints already connected)
// births a feature at the edge value; graphs carry no 2-cells, so all bars
// are essential and capped at the maximum filtration value. Point count
// equals the circuit rank.
PersistenceDiagram sublevel_persistence_h1(const AttributedGraph& graph,
                                           const std::vector<double>& filtration);

}  // namespace lptgnn
