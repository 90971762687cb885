#include "fixgcn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace fixgcn {

std::vector<Index> Graph::degrees() const {
  std::vector<Index> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& e : edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

bool Graph::has_edge(Index a, Index b) const {
  if (a == b) return false;
  return std::binary_search(edges.begin(), edges.end(), make_edge(a, b));
}

namespace {

void canonicalize(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

Graph build_graph(Index num_nodes, const std::vector<std::pair<Index, Index>>& edges,
                  Matrix features, std::vector<int> labels, int num_classes) {
  if (num_nodes < 0) throw Error("build_graph: negative node count");
  if (features.rows() != num_nodes)
    throw Error("build_graph: feature matrix has " + std::to_string(features.rows()) +
                " rows, expected " + std::to_string(num_nodes));
  if (static_cast<Index>(labels.size()) != num_nodes)
    throw Error("build_graph: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(num_nodes) + " nodes");
  if (!features.allFinite()) throw Error("build_graph: non-finite feature value");

  Graph g;
  g.num_nodes = num_nodes;
  g.edges.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes)
      throw Error("build_graph: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                  ") out of range for N=" + std::to_string(num_nodes));
    if (a == b) throw Error("build_graph: self-loop at node " + std::to_string(a));
    g.edges.push_back(make_edge(a, b));
  }
  canonicalize(g.edges);

  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw Error("build_graph: negative label " + std::to_string(y));
    max_label = std::max(max_label, y);
  }
  if (num_classes < 0) num_classes = max_label + 1;
  if (max_label >= num_classes)
    throw Error("build_graph: label " + std::to_string(max_label) + " outside [0, " +
                std::to_string(num_classes) + ")");
  g.num_classes = num_classes;
  g.features = std::move(features);
  g.labels = std::move(labels);
  return g;
}

Graph with_edges(const Graph& g, std::vector<Edge> edges) {
  for (auto& e : edges) {
    if (e.u == e.v) throw Error("with_edges: self-loop at node " + std::to_string(e.u));
    if (e.u < 0 || e.v < 0 || e.u >= g.num_nodes || e.v >= g.num_nodes)
      throw Error("with_edges: edge index out of range");
    e = make_edge(e.u, e.v);
  }
  canonicalize(edges);
  Graph out;
  out.num_nodes = g.num_nodes;
  out.edges = std::move(edges);
  out.features = g.features;
  out.labels = g.labels;
  out.num_classes = g.num_classes;
  return out;
}

namespace {

std::vector<std::vector<Index>> adjacency_lists(const Graph& g) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(g.num_nodes));
  for (const auto& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  return adj;
}

// Component id per node, numbered in order of each component's smallest node.
std::vector<Index> label_components(const Graph& g, Index& count) {
  const auto adj = adjacency_lists(g);
  std::vector<Index> comp(static_cast<std::size_t>(g.num_nodes), -1);
  count = 0;
  std::queue<Index> frontier;
  for (Index start = 0; start < g.num_nodes; ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = count;
    frontier.push(start);
    while (!frontier.empty()) {
      const Index u = frontier.front();
      frontier.pop();
      for (Index v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = count;
          frontier.push(v);
        }
      }
    }
    ++count;
  }
  return comp;
}

}  // namespace

std::vector<Index> component_sizes(const Graph& g) {
  Index count = 0;
  const auto comp = label_components(g, count);
  std::vector<Index> sizes(static_cast<std::size_t>(count), 0);
  for (Index c : comp) ++sizes[c];
  return sizes;
}

ComponentExtraction largest_connected_component(const Graph& g) {
  if (g.num_nodes == 0) throw Error("largest_connected_component: empty graph");
  Index count = 0;
  const auto comp = label_components(g, count);
  std::vector<Index> sizes(static_cast<std::size_t>(count), 0);
  for (Index c : comp) ++sizes[c];
  const Index keep = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();

  ComponentExtraction out;
  out.old_to_new.assign(static_cast<std::size_t>(g.num_nodes), -1);
  for (Index i = 0; i < g.num_nodes; ++i) {
    if (comp[i] == keep) {
      out.old_to_new[i] = static_cast<Index>(out.new_to_old.size());
      out.new_to_old.push_back(i);
    }
  }

  Graph& lcc = out.graph;
  lcc.num_nodes = static_cast<Index>(out.new_to_old.size());
  lcc.num_classes = g.num_classes;
  lcc.features.resize(lcc.num_nodes, g.features.cols());
  lcc.labels.resize(out.new_to_old.size());
  for (Index i = 0; i < lcc.num_nodes; ++i) {
    lcc.features.row(i) = g.features.row(out.new_to_old[i]);
    lcc.labels[i] = g.labels[out.new_to_old[i]];
  }
  for (const auto& e : g.edges)
    if (comp[e.u] == keep) lcc.edges.push_back(make_edge(out.old_to_new[e.u], out.old_to_new[e.v]));
  std::sort(lcc.edges.begin(), lcc.edges.end());
  return out;
}

}  // namespace fixgcn
