// fixgcn: command-line front end for training, attacks, sweeps and filter
// analysis. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixgcn/attack.hpp"
#include "fixgcn/cli_support.hpp"
#include "fixgcn/dataset.hpp"
#include "fixgcn/harness.hpp"
#include "fixgcn/model.hpp"
#include "fixgcn/text.hpp"

namespace fs = std::filesystem;
using namespace fixgcn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct TrainingFlags {
  std::string model = "fixgcn";
  double s = 0.2;
  int epochs = 200;
  double lr = 1e-2;
  double weight_decay = 5e-4;
  double dropout = 0.6;
  Index hidden = 64;
  int layers = 2;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--model", model, "Model variant")->check(CLI::IsMember({"fixgcn", "gcn"}))->capture_default_str();
    cmd.add_option("--s", s, "Filter parameter s")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    cmd.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--weight-decay", weight_decay, "L2 weight decay")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd.add_option("--dropout", dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999999))->capture_default_str();
    cmd.add_option("--hidden", hidden, "Hidden width")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--layers", layers, "Number of layers")->check(CLI::Range(1, 4))->capture_default_str();
  }

  TrainConfig config(std::uint64_t seed, const std::string& dataset) const {
    TrainConfig c;
    c.variant = parse_variant(model);
    c.s = s;
    c.epochs = epochs;
    c.lr = lr;
    c.weight_decay = weight_decay;
    c.dropout = dropout;
    c.hidden = hidden;
    c.layers = layers;
    c.seed = seed;
    c.dataset = dataset;
    return c;
  }
};

// Relative dataset paths that do not exist locally are looked up under
// $FIXGCN_DATA_ROOT.
std::string resolve_data_dir(const std::string& dir) {
  if (fs::exists(dir)) return dir;
  const char* root = std::getenv("FIXGCN_DATA_ROOT");
  if (root && fs::path(dir).is_relative()) {
    const fs::path candidate = fs::path(root) / dir;
    if (fs::exists(candidate)) return candidate.string();
  }
  return dir;
}

std::string dataset_name(const std::string& dir) {
  auto name = fs::path(dir).lexically_normal().filename().string();
  if (name.empty()) name = fs::path(dir).lexically_normal().parent_path().filename().string();
  return name;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  std::iota(seeds.begin(), seeds.end(), first);
  return seeds;
}

SplitSpec split_for(const LoadedDataset& data, std::uint64_t seed) {
  return data.split ? *data.split : make_split(data.graph.num_nodes, kDefaultSplitRatios, seed);
}

// Moves "--config PATH" out of argv and splices the file's key=value pairs in
// right after the subcommand, ahead of the user's own flags so those win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty()) return args;

  std::vector<std::string> extra = config_file_arguments(config_path);
  if (std::getenv("FIXGCN_THREADS")) {
    for (std::size_t i = 0; i + 1 < extra.size();) {
      if (extra[i] == "--threads")
        extra.erase(extra.begin() + static_cast<std::ptrdiff_t>(i), extra.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      else
        i += 2;
    }
  }
  std::size_t insert_at = 1;
  while (insert_at < args.size() && args[insert_at].rfind("-", 0) == 0) insert_at += 2;
  insert_at = std::min(insert_at + 1, args.size());
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), extra.begin(), extra.end());
  return args;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write '" + path + "'");
  f << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fix-GCN: spectral modulation filtering and robust node classification"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for independent runs")
      ->envname("FIXGCN_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--config", "key=value file; command-line flags take precedence");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model and write metrics and a checkpoint");
  train_cmd->fallthrough();
  std::string train_data, train_out, train_ckpt;
  std::uint64_t train_seed = 0;
  TrainingFlags train_flags;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_flags.add_to(*train_cmd);
  train_cmd->add_option("--seed", train_seed, "Seed for split, init and dropout")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Metrics CSV path")->required();
  train_cmd->add_option("--ckpt", train_ckpt, "Checkpoint path");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Perturb a dataset and write the result as a dataset directory");
  attack_cmd->fallthrough();
  std::string attack_data, attack_kind, attack_out;
  double attack_rate = 0.0;
  std::uint64_t attack_seed = 0;
  attack_cmd->add_option("--data", attack_data, "Dataset directory")->required();
  attack_cmd->add_option("--kind", attack_kind, "Attack kind")
      ->required()
      ->check(CLI::IsMember({"random", "feature", "dice"}));
  attack_cmd->add_option("--rate", attack_rate, "Perturbation rate")->required()->check(CLI::Range(0.0, 1.0));
  attack_cmd->add_option("--seed", attack_seed, "Attack seed")->capture_default_str();
  attack_cmd->add_option("--out", attack_out, "Output directory")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy over a grid of filter parameters s");
  sweep_cmd->fallthrough();
  std::string sweep_data, sweep_grid = "0.1:0.9:0.1", sweep_out;
  int sweep_seeds = 10;
  TrainingFlags sweep_flags;
  sweep_cmd->add_option("--data", sweep_data, "Dataset directory")->required();
  sweep_cmd->add_option("--s-grid", sweep_grid, "start:stop:step or comma list")->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_seeds, "Number of seeds (0..n-1)")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Sweep CSV path")->required();
  sweep_flags.add_to(*sweep_cmd);

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "Robustness curves over a list of attacks");
  curve_cmd->fallthrough();
  std::string curve_data, curve_specs, curve_out, curve_metrics, curve_models = "fixgcn,gcn";
  int curve_seeds = 10;
  TrainingFlags curve_flags;
  curve_cmd->add_option("--data", curve_data, "Dataset directory")->required();
  curve_cmd->add_option("--attacks", curve_specs, "Attack spec file")->required();
  curve_cmd->add_option("--seeds", curve_seeds, "Number of seeds (0..n-1)")->check(CLI::PositiveNumber)->capture_default_str();
  curve_cmd->add_option("--models", curve_models, "Comma-separated model variants")->capture_default_str();
  curve_cmd->add_option("--out", curve_out, "Summary CSV path")->required();
  curve_cmd->add_option("--metrics", curve_metrics, "Optional per-run metrics CSV path");
  curve_flags.add_to(*curve_cmd);

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "Sample the filter response h_s over (0, 2]");
  filter_cmd->fallthrough();
  double filter_s = 0.2;
  std::string filter_out;
  filter_cmd->add_option("--s", filter_s, "Filter parameter s")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  filter_cmd->add_option("--out", filter_out, "Response CSV path")->required();

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Per-epoch training time on synthetic fixed-degree graphs");
  probe_cmd->fallthrough();
  std::vector<Index> probe_sizes{5000, 10000, 20000};
  std::string probe_out;
  ScalingProbeOptions probe_opts;
  TrainingFlags probe_flags;
  probe_cmd->add_option("--sizes", probe_sizes, "Node counts")->delimiter(',')->capture_default_str();
  probe_cmd->add_option("--degree", probe_opts.avg_degree, "Average degree")->capture_default_str();
  probe_cmd->add_option("--features", probe_opts.num_features, "Feature dimension")->capture_default_str();
  probe_cmd->add_option("--out", probe_out, "Timing CSV path")->required();
  probe_flags.add_to(*probe_cmd);

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), const_cast<char**>(cargs.data()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const CLI::App* selected = app.get_subcommands().front();
  std::cout << "# resolved configuration\nthreads=" << threads << '\n'
            << "[" << selected->get_name() << "]\n"
            << selected->config_to_str(true, false) << std::flush;

  // Malformed grids, spec files and model lists are usage errors.
  std::vector<double> grid;
  std::vector<AttackSpec> specs;
  std::vector<Variant> variants;
  try {
    if (*sweep_cmd) {
      grid = parse_grid(sweep_grid);
      for (double s : grid)
        if (!(s >= 0.0 && s <= 1.0)) throw Error("--s-grid value " + text::format_double(s) + " outside [0, 1]");
    }
    if (*curve_cmd) {
      specs = parse_attack_specs(curve_specs);
      for (auto name : text::split(curve_models, ',')) variants.push_back(parse_variant(std::string(name)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      const auto data = load_dataset_full(resolve_data_dir(train_data));
      const TrainConfig cfg = train_flags.config(train_seed, dataset_name(train_data));
      const auto result = train(data.graph, split_for(data, train_seed), cfg);
      write_metrics_csv({result.record}, train_out);
      if (!train_ckpt.empty()) save_checkpoint(train_ckpt, cfg.model(), result.params);
      std::cout << "test_acc=" << text::format_double(result.record.test_acc)
                << " best_epoch=" << result.record.best_epoch << '\n';
    } else if (*attack_cmd) {
      const Graph g = load_dataset(resolve_data_dir(attack_data));
      AttackSpec spec;
      spec.kind = parse_attack_kind(attack_kind);
      spec.rate = attack_rate;
      spec.seed = attack_seed;
      fs::create_directories(attack_out);
      try {
        const PerturbedGraph p = apply_attack(g, spec);
        write_dataset(attack_out, p.graph);
        write_text((fs::path(attack_out) / "delta.txt").string(), p.delta.summary() + '\n');
        std::cout << p.delta.summary() << '\n';
      } catch (const AttackBudgetError& e) {
        write_text((fs::path(attack_out) / "delta.txt").string(), e.delta().summary() + " incomplete=1\n");
        std::cerr << "error: " << e.what() << " (delta so far: " << e.delta().summary() << ")\n";
        return kExitRuntime;
      }
    } else if (*sweep_cmd) {
      const Graph g = load_dataset(resolve_data_dir(sweep_data));
      const auto rows = sweep_s(g, sweep_flags.config(0, dataset_name(sweep_data)), grid, seed_range(0, sweep_seeds), threads);
      write_csv(sweep_out, sweep_table(rows));
      for (const auto& r : summarize(rows))
        std::cout << "s=" << text::format_double(r.s) << " mean_acc=" << text::format_double(r.mean_acc)
                  << " std=" << text::format_double(r.std_acc) << '\n';
    } else if (*curve_cmd) {
      const Graph g = load_dataset(resolve_data_dir(curve_data));
      std::vector<CurveCell> cells;
      for (Variant v : variants) {
        TrainConfig cfg = curve_flags.config(0, dataset_name(curve_data));
        cfg.variant = v;
        auto part = robustness_curve(g, cfg, specs, seed_range(0, curve_seeds), threads);
        cells.insert(cells.end(), part.begin(), part.end());
      }
      const auto summary = summarize(cells);
      write_csv(curve_out, curve_summary_table(summary));
      if (!curve_metrics.empty()) {
        std::vector<MetricsRecord> records;
        for (const auto& c : cells) records.push_back(c.record);
        write_metrics_csv(records, curve_metrics);
      }
      for (const auto& r : summary)
        std::cout << to_string(r.kind) << " rate=" << text::format_double(r.rate) << " model=" << r.model
                  << " mean_acc=" << text::format_double(r.mean_acc) << " std=" << text::format_double(r.std_acc) << '\n';
    } else if (*filter_cmd) {
      write_csv(filter_out, filter_response_table(filter_s));
    } else if (*probe_cmd) {
      const auto rows = scaling_probe(probe_sizes, probe_flags.config(0, "synthetic"), probe_opts);
      write_csv(probe_out, scaling_table(rows));
      for (const auto& r : rows)
        std::cout << "N=" << r.num_nodes << " seconds_per_epoch=" << text::format_double(r.seconds_per_epoch) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
