#include "fixgcn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "fixgcn/dataset.hpp"
#include "fixgcn/text.hpp"

namespace fixgcn {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::random_edges: return "random";
    case AttackKind::feature_flip: return "feature";
    case AttackKind::dice: return "dice";
    case AttackKind::external: return "external";
  }
  return "none";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none" || name == "clean") return AttackKind::none;
  if (name == "random" || name == "random-edges") return AttackKind::random_edges;
  if (name == "feature" || name == "feature-flip") return AttackKind::feature_flip;
  if (name == "dice") return AttackKind::dice;
  if (name == "external") return AttackKind::external;
  throw Error("unknown attack kind '" + name + "' (expected random, feature, dice or external)");
}

void AttackSpec::validate() const {
  if (kind == AttackKind::external) {
    if (source.empty()) throw Error("external attack needs a source edge list");
    return;
  }
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("attack rate " + std::to_string(rate) + " outside [0, 1]");
}

std::string PerturbationDelta::summary() const {
  std::string s = "added=" + std::to_string(added.size()) + " removed=" + std::to_string(removed.size()) +
                  " flipped=" + std::to_string(flipped);
  if (pool_exhausted) s += " pool_exhausted=1";
  return s;
}

namespace {

Index budget_of(double rate, Index base) {
  return static_cast<Index>(std::floor(rate * static_cast<double>(base) + 1e-9));
}

void check_rate(double rate, const char* who) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(std::string(who) + ": rate outside [0, 1]");
}

struct EdgeKeys {
  explicit EdgeKeys(Index n) : n(static_cast<std::uint64_t>(n)) {}
  std::uint64_t operator()(Edge e) const { return static_cast<std::uint64_t>(e.u) * n + static_cast<std::uint64_t>(e.v); }
  std::uint64_t n;
};

// Draws an unordered pair {u, v}, u != v, uniformly.
Edge random_pair(Rng& rng, Index n) {
  for (;;) {
    const Index a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Index b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (a != b) return make_edge(a, b);
  }
}

Graph apply_delta(const Graph& g, const PerturbationDelta& delta) {
  std::vector<Edge> removed = delta.removed;
  std::sort(removed.begin(), removed.end());
  std::vector<Edge> edges;
  edges.reserve(g.edges.size() + delta.added.size());
  std::set_difference(g.edges.begin(), g.edges.end(), removed.begin(), removed.end(), std::back_inserter(edges));
  edges.insert(edges.end(), delta.added.begin(), delta.added.end());
  return with_edges(g, std::move(edges));
}

}  // namespace

PerturbedGraph random_edge_attack(const Graph& g, double rate, std::uint64_t seed) {
  check_rate(rate, "random_edge_attack");
  const Index budget = budget_of(rate, g.num_edges());
  const std::uint64_t n = static_cast<std::uint64_t>(g.num_nodes);
  const std::uint64_t total_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::uint64_t absent = total_pairs - static_cast<std::uint64_t>(g.num_edges());

  PerturbationDelta delta;
  if (static_cast<std::uint64_t>(budget) > absent)
    throw AttackBudgetError("random_edge_attack: only " + std::to_string(absent) + " absent pairs for a budget of " +
                                std::to_string(budget),
                            delta);

  Rng rng(seed);
  if (budget > 0 && (absent <= 4 * static_cast<std::uint64_t>(budget) || total_pairs <= 2'000'000)) {
    std::vector<Edge> pool;
    pool.reserve(absent);
    for (Index u = 0; u < g.num_nodes; ++u)
      for (Index v = u + 1; v < g.num_nodes; ++v)
        if (!g.has_edge(u, v)) pool.push_back({u, v});
    for (Index k = 0; k < budget; ++k) {
      const std::size_t pick = static_cast<std::size_t>(k) + rng.below(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[k], pool[pick]);
      delta.added.push_back(pool[k]);
    }
  } else {
    const EdgeKeys key(g.num_nodes);
    std::unordered_set<std::uint64_t> taken;
    for (const auto& e : g.edges) taken.insert(key(e));
    while (static_cast<Index>(delta.added.size()) < budget) {
      const Edge e = random_pair(rng, g.num_nodes);
      if (taken.insert(key(e)).second) delta.added.push_back(e);
    }
  }

  PerturbedGraph out{apply_delta(g, delta), "random-edges rate=" + text::format_double(rate) + " seed=" + std::to_string(seed), {}};
  out.delta = std::move(delta);
  return out;
}

PerturbedGraph feature_flip_attack(const Graph& g, double rate, std::uint64_t seed) {
  check_rate(rate, "feature_flip_attack");
  const Matrix& x = g.features;
  if (!(x.array() == 0.0 || x.array() == 1.0).all()) throw Error("feature_flip_attack: features are not binary");

  const Index nnz = static_cast<Index>((x.array() != 0.0).count());
  const Index budget = budget_of(rate, nnz);
  const std::uint64_t cells = static_cast<std::uint64_t>(x.size());

  Rng rng(seed);
  std::vector<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(budget));
  if (2 * static_cast<std::uint64_t>(budget) > cells) {
    std::vector<std::uint64_t> pool(cells);
    for (std::uint64_t i = 0; i < cells; ++i) pool[i] = i;
    for (Index k = 0; k < budget; ++k) {
      const std::size_t pick = static_cast<std::size_t>(k) + rng.below(cells - static_cast<std::uint64_t>(k));
      std::swap(pool[k], pool[pick]);
      chosen.push_back(pool[k]);
    }
  } else {
    std::unordered_set<std::uint64_t> seen;
    while (static_cast<Index>(chosen.size()) < budget) {
      const std::uint64_t c = rng.below(cells);
      if (seen.insert(c).second) chosen.push_back(c);
    }
  }

  PerturbedGraph out;
  out.graph = g;
  Matrix& xp = out.graph.features;
  const std::uint64_t cols = static_cast<std::uint64_t>(x.cols());
  for (std::uint64_t c : chosen) {
    double& v = xp(static_cast<Index>(c / cols), static_cast<Index>(c % cols));
    v = 1.0 - v;
  }
  out.delta.flipped = budget;
  out.provenance = "feature-flip rate=" + text::format_double(rate) + " seed=" + std::to_string(seed);
  return out;
}

PerturbedGraph dice_attack(const Graph& g, const std::vector<int>& labels, double rate, std::uint64_t seed) {
  check_rate(rate, "dice_attack");
  if (static_cast<Index>(labels.size()) != g.num_nodes) throw Error("dice_attack: one label per node required");

  const Index budget = budget_of(rate, g.num_edges());
  const EdgeKeys key(g.num_nodes);
  std::unordered_set<std::uint64_t> present;
  std::vector<Edge> removable;
  std::uint64_t existing_cross = 0;
  for (const auto& e : g.edges) {
    present.insert(key(e));
    if (labels[e.u] == labels[e.v])
      removable.push_back(e);
    else
      ++existing_cross;
  }

  std::unordered_map<int, std::uint64_t> class_sizes;
  for (int y : labels) ++class_sizes[y];
  const std::uint64_t n = static_cast<std::uint64_t>(g.num_nodes);
  std::uint64_t same_pairs_ordered = 0;
  for (const auto& [y, c] : class_sizes) same_pairs_ordered += c * c;
  const std::uint64_t cross_pairs = (n * n - same_pairs_ordered) / 2;
  std::uint64_t addable = cross_pairs - existing_cross;

  Rng rng(seed);
  PerturbationDelta delta;
  std::vector<Edge> add_pool;  // built on demand when rejection sampling stalls
  bool pool_built = false;

  auto add_one = [&]() {
    if (!pool_built) {
      for (int attempt = 0; attempt < 256; ++attempt) {
        const Edge e = random_pair(rng, g.num_nodes);
        if (labels[e.u] == labels[e.v]) continue;
        if (!present.insert(key(e)).second) continue;
        delta.added.push_back(e);
        return;
      }
      for (Index u = 0; u < g.num_nodes; ++u)
        for (Index v = u + 1; v < g.num_nodes; ++v)
          if (labels[u] != labels[v] && !present.count(key({u, v}))) add_pool.push_back({u, v});
      pool_built = true;
    }
    const std::size_t pick = rng.below(add_pool.size());
    const Edge e = add_pool[pick];
    add_pool[pick] = add_pool.back();
    add_pool.pop_back();
    present.insert(key(e));
    delta.added.push_back(e);
  };

  auto remove_one = [&]() {
    const std::size_t pick = rng.below(removable.size());
    const Edge e = removable[pick];
    removable[pick] = removable.back();
    removable.pop_back();
    present.erase(key(e));
    delta.removed.push_back(e);
  };

  for (Index k = 0; k < budget; ++k) {
    const bool want_add = rng.uniform() < 0.5;
    const bool can_add = addable > 0;
    const bool can_remove = !removable.empty();
    if (!can_add && !can_remove)
      throw AttackBudgetError("dice_attack: both pools exhausted after " + std::to_string(k) + " of " +
                                  std::to_string(budget) + " perturbations",
                              delta);
    if ((want_add && can_add) || !can_remove) {
      if (!want_add) delta.pool_exhausted = true;
      add_one();
      --addable;
    } else {
      if (want_add) delta.pool_exhausted = true;
      remove_one();
    }
  }

  PerturbedGraph out{apply_delta(g, delta), "dice rate=" + text::format_double(rate) + " seed=" + std::to_string(seed), {}};
  out.delta = std::move(delta);
  return out;
}

PerturbationDelta edge_delta(const Graph& before, const Graph& after) {
  if (before.num_nodes != after.num_nodes) throw Error("edge_delta: node counts differ");
  PerturbationDelta d;
  std::set_difference(after.edges.begin(), after.edges.end(), before.edges.begin(), before.edges.end(),
                      std::back_inserter(d.added));
  std::set_difference(before.edges.begin(), before.edges.end(), after.edges.begin(), after.edges.end(),
                      std::back_inserter(d.removed));
  return d;
}

PerturbedGraph load_perturbed_adjacency(const std::string& path, const Graph& base) {
  const auto raw = read_edge_list(path);
  std::unordered_map<std::uint64_t, unsigned> orientation;
  const EdgeKeys key(base.num_nodes);
  Index max_index = -1;
  for (const auto& [a, b] : raw) {
    if (a < 0 || b < 0) throw Error(path + ": negative node index");
    max_index = std::max({max_index, a, b});
    if (a >= base.num_nodes || b >= base.num_nodes)
      throw Error(path + ": node index " + std::to_string(std::max(a, b)) + " exceeds the base graph's " +
                  std::to_string(base.num_nodes) + " nodes (node-count mismatch)");
    if (a == b) throw Error(path + ": self-loop at node " + std::to_string(a));
    const unsigned bit = a < b ? 1u : 2u;
    unsigned& seen = orientation[key(make_edge(a, b))];
    if (seen & bit) throw Error(path + ": duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    seen |= bit;
  }
  bool any_both = false;
  bool any_single = false;
  for (const auto& [k, bits] : orientation) {
    any_both = any_both || bits == 3u;
    any_single = any_single || bits != 3u;
  }
  if (any_both && any_single)
    throw Error(path + ": asymmetric edge list (some pairs listed in both directions, others in one)");

  std::vector<Edge> edges;
  edges.reserve(orientation.size());
  for (const auto& [a, b] : raw)
    if (a < b || orientation[key(make_edge(a, b))] != 3u) edges.push_back(make_edge(a, b));

  PerturbedGraph out;
  out.graph = with_edges(base, std::move(edges));
  out.delta = edge_delta(base, out.graph);
  out.provenance = "external " + path;
  return out;
}

PerturbedGraph apply_attack(const Graph& g, const AttackSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::none: return {g, "clean", {}};
    case AttackKind::random_edges: return random_edge_attack(g, spec.rate, spec.seed);
    case AttackKind::feature_flip: return feature_flip_attack(g, spec.rate, spec.seed);
    case AttackKind::dice: return dice_attack(g, g.labels, spec.rate, spec.seed);
    case AttackKind::external: return load_perturbed_adjacency(spec.source, g);
  }
  throw Error("apply_attack: unknown kind");
}

}  // namespace fixgcn
