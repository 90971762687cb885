#ifndef FIXGCN_GRAPH_HPP
#define FIXGCN_GRAPH_HPP

#include <compare>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fixgcn/types.hpp"

namespace fixgcn {

/// Undirected edge stored with u < v.
struct Edge {
  Index u = 0;
  Index v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(Index a, Index b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Attributed undirected graph. Edges are deduplicated, sorted and free of
/// self-loops; features has one row per node; labels lie in [0, num_classes).
struct Graph {
  Index num_nodes = 0;
  std::vector<Edge> edges;
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  Index num_edges() const { return static_cast<Index>(edges.size()); }
  Index num_features() const { return features.cols(); }
  std::vector<Index> degrees() const;
  bool has_edge(Index a, Index b) const;
};

/// Validates and canonicalizes raw input. Reversed and repeated pairs collapse
/// to one undirected edge; self-loops and out-of-range indices throw.
/// num_classes < 0 infers C as max(label) + 1.
Graph build_graph(Index num_nodes, const std::vector<std::pair<Index, Index>>& edges,
                  Matrix features, std::vector<int> labels, int num_classes = -1);

/// Same graph with its edge set replaced. The node set and attributes are kept.
Graph with_edges(const Graph& g, std::vector<Edge> edges);

struct ComponentExtraction {
  Graph graph;
  std::vector<Index> old_to_new;  // -1 for nodes outside the component
  std::vector<Index> new_to_old;
};

/// Largest connected component with compacted indices. Equal-sized components
/// are resolved toward the one holding the smallest node index.
ComponentExtraction largest_connected_component(const Graph& g);

/// Sizes of all connected components, in order of their smallest node.
std::vector<Index> component_sizes(const Graph& g);

template <typename Scalar = double>
SparseMatrix<Scalar> adjacency_matrix(const Graph& g) {
  std::vector<Eigen::Triplet<Scalar, int>> trips;
  trips.reserve(2 * g.edges.size());
  for (const auto& e : g.edges) {
    trips.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), Scalar(1));
    trips.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), Scalar(1));
  }
  SparseMatrix<Scalar> a(g.num_nodes, g.num_nodes);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

/// D^{-1/2} A D^{-1/2} on the raw adjacency (no self-loops). Isolated nodes
/// get a zero row and column.
template <typename Scalar = double>
SparseMatrix<Scalar> normalized_adjacency(const Graph& g) {
  const auto deg = g.degrees();
  std::vector<Scalar> inv_sqrt(deg.size(), Scalar(0));
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] > 0) inv_sqrt[i] = Scalar(1) / std::sqrt(static_cast<Scalar>(deg[i]));

  std::vector<Eigen::Triplet<Scalar, int>> trips;
  trips.reserve(2 * g.edges.size());
  for (const auto& e : g.edges) {
    const Scalar w = inv_sqrt[e.u] * inv_sqrt[e.v];
    trips.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), w);
    trips.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), w);
  }
  SparseMatrix<Scalar> a(g.num_nodes, g.num_nodes);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

/// Kipf-style renormalization D~^{-1/2}(A + I)D~^{-1/2}, used by the GCN baseline.
template <typename Scalar = double>
SparseMatrix<Scalar> normalized_adjacency_with_self_loops(const Graph& g) {
  const auto deg = g.degrees();
  std::vector<Scalar> inv_sqrt(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i)
    inv_sqrt[i] = Scalar(1) / std::sqrt(static_cast<Scalar>(deg[i] + 1));

  std::vector<Eigen::Triplet<Scalar, int>> trips;
  trips.reserve(2 * g.edges.size() + static_cast<std::size_t>(g.num_nodes));
  for (Index i = 0; i < g.num_nodes; ++i)
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), inv_sqrt[i] * inv_sqrt[i]);
  for (const auto& e : g.edges) {
    const Scalar w = inv_sqrt[e.u] * inv_sqrt[e.v];
    trips.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), w);
    trips.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), w);
  }
  SparseMatrix<Scalar> a(g.num_nodes, g.num_nodes);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

/// L = I - Â with an explicit unit diagonal.
template <typename Scalar = double>
SparseMatrix<Scalar> normalized_laplacian(const Graph& g) {
  SparseMatrix<Scalar> eye(g.num_nodes, g.num_nodes);
  eye.setIdentity();
  SparseMatrix<Scalar> lap = eye - normalized_adjacency<Scalar>(g);
  lap.prune(Scalar(0));
  lap.makeCompressed();
  return lap;
}

template <typename Scalar = double>
struct SpectralDecomposition {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eigenvalues;  // ascending
  DenseMatrix<Scalar> eigenvectors;                      // orthonormal columns
};

inline constexpr Index kDenseSpectralCap = 2000;

/// Dense symmetric eigensolve. Meant for tests and analysis; large operators
/// should use power iteration instead.
template <typename Scalar = double>
SpectralDecomposition<Scalar> spectral_decomposition(const SparseMatrix<Scalar>& m,
                                                     Index cap = kDenseSpectralCap) {
  if (m.rows() != m.cols()) throw Error("spectral_decomposition: matrix is not square");
  if (m.rows() > cap)
    throw Error("spectral_decomposition: N=" + std::to_string(m.rows()) +
                " exceeds the dense cap of " + std::to_string(cap) +
                "; use spectral_radius_estimate (power iteration) instead");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = DenseMatrix<Scalar>(m);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> solver(dense);
  if (solver.info() != Eigen::Success) throw Error("spectral_decomposition: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace fixgcn

#endif  // FIXGCN_GRAPH_HPP
