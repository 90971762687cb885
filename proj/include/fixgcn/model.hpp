#ifndef FIXGCN_MODEL_HPP
#define FIXGCN_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fixgcn/autodiff.hpp"
#include "fixgcn/graph.hpp"

namespace fixgcn {

enum class Variant { fixgcn, gcn_baseline };
enum class Mode { train, eval };
enum class Activation { identity, relu };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  int layers = 2;
  Index hidden = 64;
  double s = 0.2;
  double dropout = 0.6;
  Variant variant = Variant::fixgcn;

  void validate() const;
};

/// weights[l] is F_l x F_{l+1}. residual[l] is F x F_{l+1} and always reads the
/// original features; it is empty for the GCN baseline.
struct ModelParams {
  std::vector<Matrix> weights;
  std::vector<Matrix> residual;

  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;
};

/// Layer widths F_0 = in_features, hidden..., F_L = num_classes.
std::vector<Index> layer_dims(const ModelConfig& cfg, Index in_features, int num_classes);

/// Glorot-uniform parameters for the configured architecture.
ModelParams init_params(const ModelConfig& cfg, Index in_features, int num_classes, std::uint64_t seed);

/// Checks every matrix shape against the config; throws on mismatch.
void check_params(const ModelParams& params, const ModelConfig& cfg, Index in_features, int num_classes);

/// Per-graph operators, computed once and reused across epochs.
struct GraphOperators {
  Sparse propagation;  // Â for Fix-GCN, Â with self-loops for the baseline
  Sparse features;     // X in sparse form
  Variant variant = Variant::fixgcn;
};

GraphOperators prepare_operators(const Graph& g, Variant variant);

/// A layer input: either a dense tape variable or a constant sparse matrix
/// (the feature matrix, possibly after dropout).
struct LayerInput {
  const Sparse* sparse = nullptr;
  Var dense;

  static LayerInput of(Var v) { return {nullptr, v}; }
  static LayerInput of(const Sparse& s) { return {&s, {}}; }
};

/// Product of a layer input with a weight variable.
Var project(const LayerInput& in, Var w);

/// σ(P·(H·W) + X·W_res) with P = ((1-s)I + sÂ)Â applied as two sparse
/// products, right to left.
Var fixgcn_layer(const LayerInput& h, const LayerInput& x, const Sparse& ahat, Var w, Var w_res,
                 double s, Activation act);

/// σ(Â_loop·(H·W)).
Var gcn_layer(const LayerInput& h, const Sparse& ahat_loop, Var w, Activation act);

struct ForwardResult {
  Var logits;
  std::vector<Var> weights;
  std::vector<Var> residual;
};

/// Records the full network on a tape. Parameters are copied onto the tape as
/// leaves with gradients. ReLU on hidden layers, identity at the output;
/// dropout on each layer's input in train mode, with the dropped feature
/// matrix shared by the first layer and every residual branch.
ForwardResult forward(Tape& tape, const GraphOperators& ops, const ModelParams& params,
                      const ModelConfig& cfg, Mode mode, std::uint64_t seed);

/// Logits for a graph, N x C.
Matrix forward(const Graph& g, const ModelParams& params, const ModelConfig& cfg, Mode mode,
               std::uint64_t seed);

/// Baseline entry point; cfg.variant is forced to gcn_baseline.
Matrix gcn_baseline_forward(const Graph& g, const ModelParams& params, ModelConfig cfg, Mode mode,
                            std::uint64_t seed);

/// Row-wise argmax, ties toward the lowest class index.
std::vector<int> predict(const Matrix& logits);

/// Text checkpoint:
///   fixgcn-checkpoint 1
///   variant <fixgcn|gcn>
///   layers <L>, hidden <H>, s <s>, dropout <p>   (one key per line)
///   matrix <name> <rows> <cols>   followed by <rows> lines of values
/// Values are written in shortest round-trip decimal form.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fixgcn

#endif  // FIXGCN_MODEL_HPP
