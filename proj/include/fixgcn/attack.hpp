#ifndef FIXGCN_ATTACK_HPP
#define FIXGCN_ATTACK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fixgcn/graph.hpp"

namespace fixgcn {

enum class AttackKind { none, random_edges, feature_flip, dice, external };

std::string to_string(AttackKind k);
/// Accepts "random"/"random-edges", "feature"/"feature-flip", "dice",
/// "external", "none".
AttackKind parse_attack_kind(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::string source;  // edge-list path for external poisoned graphs

  /// Evasion attacks perturb the graph after training; the rest poison it.
  bool is_evasion() const { return kind == AttackKind::dice; }
  void validate() const;
};

struct PerturbationDelta {
  std::vector<Edge> added;
  std::vector<Edge> removed;
  Index flipped = 0;
  bool pool_exhausted = false;  // DICE fell back to the other pool at least once

  std::string summary() const;
};

struct PerturbedGraph {
  Graph graph;
  std::string provenance;
  PerturbationDelta delta;
};

/// Raised when a budget cannot be met; carries what was done before failing.
class AttackBudgetError : public Error {
 public:
  AttackBudgetError(const std::string& what, PerturbationDelta delta) : Error(what), delta_(std::move(delta)) {}
  const PerturbationDelta& delta() const { return delta_; }

 private:
  PerturbationDelta delta_;
};

/// Adds floor(rate * |E|) edges drawn uniformly from the absent pairs.
PerturbedGraph random_edge_attack(const Graph& g, double rate, std::uint64_t seed);

/// Flips floor(rate * nnz(X)) distinct cells of a binary feature matrix,
/// drawn uniformly from all N * F cells.
PerturbedGraph feature_flip_attack(const Graph& g, double rate, std::uint64_t seed);

/// DICE: floor(rate * |E|) perturbations, each a fair coin between adding an
/// absent cross-label edge and removing an existing same-label edge. An empty
/// pool falls back to the other one.
PerturbedGraph dice_attack(const Graph& g, const std::vector<int>& labels, double rate, std::uint64_t seed);

/// Replaces the structure of base with an externally produced edge list.
PerturbedGraph load_perturbed_adjacency(const std::string& path, const Graph& base);

PerturbedGraph apply_attack(const Graph& g, const AttackSpec& spec);

/// Edge-set difference of two graphs over the same node set.
PerturbationDelta edge_delta(const Graph& before, const Graph& after);

}  // namespace fixgcn

#endif  // FIXGCN_ATTACK_HPP
