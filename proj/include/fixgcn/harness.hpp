#ifndef FIXGCN_HARNESS_HPP
#define FIXGCN_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fixgcn/attack.hpp"
#include "fixgcn/dataset.hpp"
#include "fixgcn/model.hpp"

namespace fixgcn {

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-2;
  double weight_decay = 5e-4;
  double dropout = 0.6;
  Index hidden = 64;
  int layers = 2;
  double s = 0.2;
  std::uint64_t seed = 0;
  Variant variant = Variant::fixgcn;
  std::string dataset = "";  // label copied into metrics records

  ModelConfig model() const;
  void validate() const;
};

struct TrainResult {
  ModelParams params;  // weights from the best-validation epoch
  MetricsRecord record;
};

/// Full-batch training. Each epoch runs forward in train mode, the mean
/// cross-entropy over split.train, backward and one Adam step, then scores the
/// validation set in eval mode. The parameters of the first epoch reaching the
/// highest validation accuracy are kept; test accuracy is measured with them.
TrainResult train(const Graph& g, const SplitSpec& split, const TrainConfig& cfg);

/// Fraction of indices whose eval-mode prediction matches the label.
double evaluate(const ModelParams& params, const ModelConfig& cfg, const Graph& g, std::span<const Index> indices);

double accuracy(std::span<const int> predicted, std::span<const int> labels, std::span<const Index> indices);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be
/// written to per-index slots; ordering is therefore independent of threads.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

struct CurveCell {
  AttackSpec spec;
  std::uint64_t seed = 0;
  MetricsRecord record;
};

struct CurveSummary {
  AttackKind kind = AttackKind::none;
  double rate = 0.0;
  std::string source;
  std::string model;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  std::size_t runs = 0;
};

/// Poisoning kinds perturb then train and test on the perturbed graph.
/// DICE (evasion) trains on the clean graph and evaluates on the perturbed one.
/// Seed k uses split make_split(N, ratios, k), training seed k and attack seed
/// derive_seed(spec.seed, k).
std::vector<CurveCell> robustness_curve(const Graph& g, const TrainConfig& cfg, const std::vector<AttackSpec>& specs,
                                        const std::vector<std::uint64_t>& seeds, int threads = 1,
                                        SplitRatios ratios = kDefaultSplitRatios);

/// Mean and (population) standard deviation of test accuracy per spec.
std::vector<CurveSummary> summarize(const std::vector<CurveCell>& cells);

struct SweepRow {
  double s = 0.0;
  std::uint64_t seed = 0;
  double test_acc = 0.0;
  double val_acc = 0.0;
};

struct SweepSummary {
  double s = 0.0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
};

std::vector<SweepRow> sweep_s(const Graph& g, const TrainConfig& cfg, const std::vector<double>& s_values,
                              const std::vector<std::uint64_t>& seeds, int threads = 1,
                              SplitRatios ratios = kDefaultSplitRatios);
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);

/// Planted-partition graph with roughly avg_degree neighbours per node, a
/// fraction `homophily` of edges inside classes, and sparse binary features
/// whose active words are biased toward a per-class vocabulary.
Graph synthetic_graph(Index num_nodes, double avg_degree, Index num_features, int num_classes, std::uint64_t seed,
                      double homophily = 0.8);

struct ScalingRow {
  Index num_nodes = 0;
  Index num_edges = 0;
  Index num_features = 0;
  double seconds_per_epoch = 0.0;
};

struct ScalingProbeOptions {
  double avg_degree = 8.0;
  Index num_features = 64;
  int num_classes = 4;
  int timed_epochs = 5;
  std::uint64_t seed = 0;
};

/// Median per-epoch training time on synthetic fixed-degree graphs.
std::vector<ScalingRow> scaling_probe(const std::vector<Index>& sizes, const TrainConfig& cfg,
                                      const ScalingProbeOptions& opts = {});

}  // namespace fixgcn

#endif  // FIXGCN_HARNESS_HPP
