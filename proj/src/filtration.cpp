#include "lptgnn/filtration.hpp"

#include <cmath>
#include <deque>
#include <stack>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

std::vector<double> degree_values(const AttributedGraph& g) {
  std::vector<std::int64_t> deg = node_degrees(g);
  return std::vector<double>(deg.begin(), deg.end());
}

// Brandes' algorithm; the per-source pass double-counts unordered pairs on
// an undirected graph, hence the final halving.
std::vector<double> betweenness_values(const AttributedGraph& g) {
  std::int64_t n = g.node_count;
  auto adj = adjacency_list(g);
  std::vector<double> centrality(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int64_t> dist(static_cast<std::size_t>(n));
  std::vector<double> sigma(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(n));
  std::vector<std::vector<std::int64_t>> preds(static_cast<std::size_t>(n));

  for (std::int64_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    std::vector<std::int64_t> order;
    std::deque<std::int64_t> queue{s};
    dist[static_cast<std::size_t>(s)] = 0;
    sigma[static_cast<std::size_t>(s)] = 1.0;
    while (!queue.empty()) {
      std::int64_t v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (std::int64_t w : adj[static_cast<std::size_t>(v)]) {
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
          queue.push_back(w);
        }
        if (dist[static_cast<std::size_t>(w)] == dist[static_cast<std::size_t>(v)] + 1) {
          sigma[static_cast<std::size_t>(w)] += sigma[static_cast<std::size_t>(v)];
          preds[static_cast<std::size_t>(w)].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      std::int64_t w = *it;
      for (std::int64_t v : preds[static_cast<std::size_t>(w)])
        delta[static_cast<std::size_t>(v)] += sigma[static_cast<std::size_t>(v)] /
                                              sigma[static_cast<std::size_t>(w)] *
                                              (1.0 + delta[static_cast<std::size_t>(w)]);
      if (w != s) centrality[static_cast<std::size_t>(w)] += delta[static_cast<std::size_t>(w)];
    }
  }
  for (double& c : centrality) c /= 2.0;
  return centrality;
}

std::vector<double> closeness_values(const AttributedGraph& g) {
  std::int64_t n = g.node_count;
  auto adj = adjacency_list(g);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int64_t> dist(static_cast<std::size_t>(n));
  for (std::int64_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<std::int64_t> queue{s};
    dist[static_cast<std::size_t>(s)] = 0;
    std::int64_t total = 0;
    while (!queue.empty()) {
      std::int64_t v = queue.front();
      queue.pop_front();
      total += dist[static_cast<std::size_t>(v)];
      for (std::int64_t w : adj[static_cast<std::size_t>(v)])
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
          queue.push_back(w);
        }
    }
    if (total > 0) out[static_cast<std::size_t>(s)] = static_cast<double>(n - 1) / static_cast<double>(total);
  }
  return out;
}

std::vector<double> eigenvector_values(const AttributedGraph& g) {
  std::int64_t n = g.node_count;
  auto adj = adjacency_list(g);
  std::vector<double> v(static_cast<std::size_t>(n), 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> next(static_cast<std::size_t>(n));
  for (int iter = 0; iter < 1000; ++iter) {
    for (std::int64_t i = 0; i < n; ++i) {
      double acc = v[static_cast<std::size_t>(i)];
      for (std::int64_t j : adj[static_cast<std::size_t>(i)]) acc += v[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = acc;
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    double shift = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      next[static_cast<std::size_t>(i)] /= norm;
      shift = std::max(shift, std::abs(next[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]));
    }
    v.swap(next);
    if (shift < 1e-13) break;
  }
  return v;
}

}  // namespace

FiltrationKind filtration_from_string(const std::string& s) {
  if (s == "degree") return FiltrationKind::Degree;
  if (s == "betweenness") return FiltrationKind::Betweenness;
  if (s == "eigenvector") return FiltrationKind::Eigenvector;
  if (s == "closeness") return FiltrationKind::Closeness;
  throw ConfigError("unknown filtration: " + s +
                    " (expected degree|betweenness|eigenvector|closeness)");
}

std::string to_string(FiltrationKind kind) {
  switch (kind) {
    case FiltrationKind::Degree: return "degree";
    case FiltrationKind::Betweenness: return "betweenness";
    case FiltrationKind::Eigenvector: return "eigenvector";
    case FiltrationKind::Closeness: return "closeness";
  }
  return "?";
}

std::vector<double> compute_filtration(const AttributedGraph& graph, FiltrationKind kind) {
  if (graph.node_count <= 0) throw ShapeError("filtration of an empty graph");
  switch (kind) {
    case FiltrationKind::Degree: return degree_values(graph);
    case FiltrationKind::Betweenness: return betweenness_values(graph);
    case FiltrationKind::Eigenvector: return eigenvector_values(graph);
    case FiltrationKind::Closeness: return closeness_values(graph);
  }
  throw ShapeError("unhandled filtration kind");
}

}  // namespace lptgnn
