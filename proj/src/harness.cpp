#include "fixgcn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "fixgcn/filter.hpp"

namespace fixgcn {

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.layers = layers;
  m.hidden = hidden;
  m.s = s;
  m.dropout = dropout;
  m.variant = variant;
  return m;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("TrainConfig: epochs must be positive");
  if (!(lr > 0.0)) throw Error("TrainConfig: learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw Error("TrainConfig: weight decay must be non-negative");
  model().validate();
}

double accuracy(std::span<const int> predicted, std::span<const int> labels, std::span<const Index> indices) {
  if (indices.empty()) throw Error("accuracy: empty index set");
  std::size_t hits = 0;
  for (Index i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= predicted.size() || static_cast<std::size_t>(i) >= labels.size())
      throw Error("accuracy: index out of range");
    if (predicted[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

namespace {

std::vector<Matrix> flatten(const ModelParams& p) {
  std::vector<Matrix> out;
  for (const Matrix* m : p.all()) out.push_back(*m);
  return out;
}

void unflatten(const std::vector<Matrix>& flat, ModelParams& p) {
  std::size_t k = 0;
  for (Matrix* m : p.all()) *m = flat[k++];
}

double eval_accuracy(const GraphOperators& ops, const ModelParams& params, const ModelConfig& mc, const Graph& g,
                     std::span<const Index> indices) {
  Tape tape;
  const auto fr = forward(tape, ops, params, mc, Mode::eval, 0);
  return accuracy(predict(fr.logits.value()), g.labels, indices);
}

// One training run's mutable state; train() and scaling_probe() drive it.
class Trainer {
 public:
  Trainer(const Graph& g, const SplitSpec& split, const TrainConfig& cfg)
      : g_(g),
        split_(split),
        cfg_(cfg),
        mc_(cfg.model()),
        ops_(prepare_operators(g, cfg.variant)),
        params_(init_params(mc_, g.num_features(), g.num_classes, derive_seed(cfg.seed, 1))),
        adam_(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}, flatten(params_)) {
    if (split.train.empty()) throw Error("train: the labelled training set is empty");
  }

  // Returns the training loss of this epoch (before the update).
  double step(int epoch) {
    Tape tape;
    const auto fr = forward(tape, ops_, params_, mc_, Mode::train, derive_seed(cfg_.seed, 1000 + epoch));
    const Var loss = softmax_cross_entropy(fr.logits, g_.labels, split_.train);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value))
      throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + " (seed " + std::to_string(cfg_.seed) + ")");
    tape.backward(loss);

    std::vector<Matrix> grads;
    for (const Var& v : fr.weights) grads.push_back(v.grad());
    for (const Var& v : fr.residual) grads.push_back(v.grad());
    auto flat = flatten(params_);
    adam_step(flat, grads, adam_);
    unflatten(flat, params_);
    return value;
  }

  double accuracy_on(std::span<const Index> indices) const {
    return eval_accuracy(ops_, params_, mc_, g_, indices);
  }

  const ModelParams& params() const { return params_; }
  const ModelConfig& model_config() const { return mc_; }
  const GraphOperators& operators() const { return ops_; }

 private:
  const Graph& g_;
  const SplitSpec& split_;
  TrainConfig cfg_;
  ModelConfig mc_;
  GraphOperators ops_;
  ModelParams params_;
  AdamState adam_;
};

}  // namespace

TrainResult train(const Graph& g, const SplitSpec& split, const TrainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(g, split, cfg);
  // Without a validation set, model selection falls back to training accuracy.
  const std::vector<Index>& select_on = split.val.empty() ? split.train : split.val;

  TrainResult result;
  MetricsRecord& rec = result.record;
  rec.dataset = cfg.dataset;
  rec.model = to_string(cfg.variant);
  rec.s = cfg.s;
  rec.seed = cfg.seed;
  double best_val = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rec.train_loss.push_back(trainer.step(epoch));
    const double val = trainer.accuracy_on(select_on);
    rec.val_acc.push_back(val);
    if (val > best_val) {
      best_val = val;
      rec.best_epoch = epoch;
      result.params = trainer.params();
    }
  }
  rec.test_acc = split.test.empty()
                     ? 0.0
                     : eval_accuracy(trainer.operators(), result.params, trainer.model_config(), g, split.test);
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double evaluate(const ModelParams& params, const ModelConfig& cfg, const Graph& g, std::span<const Index> indices) {
  if (indices.empty()) throw Error("evaluate: empty index set");
  return accuracy(predict(forward(g, params, cfg, Mode::eval, 0)), g.labels, indices);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<CurveCell> robustness_curve(const Graph& g, const TrainConfig& cfg, const std::vector<AttackSpec>& specs,
                                        const std::vector<std::uint64_t>& seeds, int threads, SplitRatios ratios) {
  cfg.validate();
  for (const auto& spec : specs) spec.validate();
  const bool any_evasion = std::any_of(specs.begin(), specs.end(), [](const AttackSpec& s) { return s.is_evasion(); });

  auto run_config = [&](std::uint64_t seed) {
    TrainConfig c = cfg;
    c.seed = seed;
    return c;
  };

  // Clean runs per seed, shared by every evasion cell of that seed.
  std::vector<TrainResult> clean(seeds.size());
  if (any_evasion) {
    parallel_for(seeds.size(), threads, [&](std::size_t k) {
      clean[k] = train(g, make_split(g.num_nodes, ratios, seeds[k]), run_config(seeds[k]));
    });
  }

  std::vector<CurveCell> cells(specs.size() * seeds.size());
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    const AttackSpec& base_spec = specs[idx / seeds.size()];
    const std::size_t k = idx % seeds.size();
    const std::uint64_t seed = seeds[k];
    AttackSpec spec = base_spec;
    spec.seed = derive_seed(base_spec.seed, seed);
    const SplitSpec split = make_split(g.num_nodes, ratios, seed);
    const PerturbedGraph attacked = apply_attack(g, spec);

    CurveCell& cell = cells[idx];
    cell.spec = spec;
    cell.seed = seed;
    if (spec.is_evasion()) {
      cell.record = clean[k].record;
      cell.record.test_acc = split.test.empty()
                                 ? 0.0
                                 : evaluate(clean[k].params, run_config(seed).model(), attacked.graph, split.test);
    } else {
      cell.record = train(attacked.graph, split, run_config(seed)).record;
    }
    cell.record.attack_kind = to_string(spec.kind);
    cell.record.attack_rate = spec.rate;
    cell.record.attack_seed = spec.seed;
  });
  return cells;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace

std::vector<CurveSummary> summarize(const std::vector<CurveCell>& cells) {
  std::vector<CurveSummary> out;
  std::vector<std::vector<double>> accs;
  for (const auto& cell : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CurveSummary& s) {
      return s.kind == cell.spec.kind && s.rate == cell.spec.rate && s.source == cell.spec.source &&
             s.model == cell.record.model;
    });
    if (it == out.end()) {
      out.push_back({cell.spec.kind, cell.spec.rate, cell.spec.source, cell.record.model, 0.0, 0.0, 0});
      accs.emplace_back();
      it = out.end() - 1;
    }
    accs[static_cast<std::size_t>(it - out.begin())].push_back(cell.record.test_acc);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::tie(out[i].mean_acc, out[i].std_acc) = mean_std(accs[i]);
    out[i].runs = accs[i].size();
  }
  return out;
}

std::vector<SweepRow> sweep_s(const Graph& g, const TrainConfig& cfg, const std::vector<double>& s_values,
                              const std::vector<std::uint64_t>& seeds, int threads, SplitRatios ratios) {
  for (double s : s_values) FilterParam{s};
  std::vector<SweepRow> rows(s_values.size() * seeds.size());
  parallel_for(rows.size(), threads, [&](std::size_t idx) {
    TrainConfig c = cfg;
    c.s = s_values[idx / seeds.size()];
    c.seed = seeds[idx % seeds.size()];
    const auto result = train(g, make_split(g.num_nodes, ratios, c.seed), c);
    rows[idx] = {c.s, c.seed, result.record.test_acc, result.record.val_acc[result.record.best_epoch]};
  });
  return rows;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::map<double, std::vector<double>> by_s;
  std::vector<double> order;
  for (const auto& r : rows) {
    if (!by_s.count(r.s)) order.push_back(r.s);
    by_s[r.s].push_back(r.test_acc);
  }
  std::vector<SweepSummary> out;
  for (double s : order) {
    const auto [mean, sd] = mean_std(by_s[s]);
    out.push_back({s, mean, sd});
  }
  return out;
}

Graph synthetic_graph(Index num_nodes, double avg_degree, Index num_features, int num_classes, std::uint64_t seed,
                      double homophily) {
  if (num_nodes < 2 || num_classes < 1 || num_features < 1) throw Error("synthetic_graph: degenerate size");
  Rng rng(seed);
  std::vector<int> labels(static_cast<std::size_t>(num_nodes));
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_classes));
  for (Index i = 0; i < num_nodes; ++i) {
    labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
    members[labels[i]].push_back(i);
  }

  const std::uint64_t n = static_cast<std::uint64_t>(num_nodes);
  const std::uint64_t max_edges = n * (n - 1) / 2;
  const std::uint64_t target =
      std::min<std::uint64_t>(max_edges, static_cast<std::uint64_t>(std::llround(avg_degree * num_nodes / 2.0)));
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::pair<Index, Index>> edges;
  while (edges.size() < target) {
    const Index u = static_cast<Index>(rng.below(n));
    Index v;
    const auto& own = members[labels[u]];
    if (rng.uniform() < homophily && own.size() > 1)
      v = own[rng.below(own.size())];
    else
      v = static_cast<Index>(rng.below(n));
    if (u == v) continue;
    const Edge e = make_edge(u, v);
    if (seen.insert(static_cast<std::uint64_t>(e.u) * n + static_cast<std::uint64_t>(e.v)).second)
      edges.emplace_back(e.u, e.v);
  }

  // Each class owns a contiguous block of the vocabulary.
  const Index block = std::max<Index>(1, num_features / num_classes);
  const Index words = std::max<Index>(2, num_features / 16);
  Matrix x = Matrix::Zero(num_nodes, num_features);
  for (Index i = 0; i < num_nodes; ++i) {
    const Index offset = std::min<Index>(labels[i] * block, num_features - 1);
    for (Index w = 0; w < words; ++w) {
      Index col;
      if (rng.uniform() < 0.6)
        col = std::min<Index>(offset + static_cast<Index>(rng.below(static_cast<std::uint64_t>(block))), num_features - 1);
      else
        col = static_cast<Index>(rng.below(static_cast<std::uint64_t>(num_features)));
      x(i, col) = 1.0;
    }
  }
  return build_graph(num_nodes, edges, std::move(x), std::move(labels), num_classes);
}

std::vector<ScalingRow> scaling_probe(const std::vector<Index>& sizes, const TrainConfig& cfg,
                                      const ScalingProbeOptions& opts) {
  cfg.validate();
  if (opts.timed_epochs < 1) throw Error("scaling_probe: timed_epochs must be positive");
  std::vector<ScalingRow> rows;
  for (Index n : sizes) {
    const Graph g = synthetic_graph(n, opts.avg_degree, opts.num_features, opts.num_classes, derive_seed(opts.seed, n));
    const SplitSpec split = make_split(n, kDefaultSplitRatios, opts.seed);
    Trainer trainer(g, split, cfg);
    trainer.step(0);  // warm-up
    std::vector<double> times;
    for (int e = 1; e <= opts.timed_epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      trainer.step(e);
      trainer.accuracy_on(split.val);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    rows.push_back({n, g.num_edges(), g.num_features(), times[times.size() / 2]});
  }
  return rows;
}

}  // namespace fixgcn
