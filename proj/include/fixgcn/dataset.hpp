#ifndef FIXGCN_DATASET_HPP
#define FIXGCN_DATASET_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fixgcn/graph.hpp"

// On-disk dataset layout (one directory per corpus):
//   edges.tsv     "i<TAB>j" per line, 0-based, one line per undirected edge
//   features.tsv  N lines of F space-separated reals, or a "sparse N F" header
//                 followed by "row col value" triplets
//   labels.tsv    one integer class per line
//   splits.tsv    optional, "node<TAB>{train|val|test}" per line

namespace fixgcn {

std::vector<std::pair<Index, Index>> read_edge_list(const std::string& path);
/// Sorted, one "u<TAB>v" line per edge with u < v.
void write_edge_list(const std::string& path, const std::vector<Edge>& edges);

Matrix read_features(const std::string& path);
void write_features(const std::string& path, const Matrix& features, bool sparse);

std::vector<int> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<int>& labels);

struct SplitSpec {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplitRatios{0.1, 0.1, 0.8};

/// Uniform random permutation partition. Train and val get floor(r * N)
/// nodes; test gets floor(r_test * N) plus the rounding remainder when the
/// ratios sum to 1. Index lists are sorted.
SplitSpec make_split(Index num_nodes, SplitRatios ratios, std::uint64_t seed);

SplitSpec read_splits(const std::string& path, Index num_nodes);
void write_splits(const std::string& path, const SplitSpec& split);

struct LoadedDataset {
  Graph graph;                     // largest connected component
  std::vector<Index> new_to_old;   // LCC index -> file index
  Index raw_nodes = 0;
  std::optional<SplitSpec> split;  // from splits.tsv, remapped to LCC indices
};

LoadedDataset load_dataset_full(const std::string& dir);

/// Warning text when a corpus named cora or citeseer has the reference node
/// count but exactly twice or half the reference undirected edge count, which
/// points to a directed (both-orientation) count on one side.
std::optional<std::string> edge_count_warning(const std::string& name, Index num_nodes, Index num_edges);
/// Loads a corpus directory and reduces it to its largest connected component.
Graph load_dataset(const std::string& dir);

/// Writes edges.tsv, features.tsv and labels.tsv (and splits.tsv if given).
/// Binary feature matrices are written in the sparse triplet form.
void write_dataset(const std::string& dir, const Graph& g, const SplitSpec* split = nullptr);

struct MetricsRecord {
  std::string dataset;
  std::string model;
  double s = 0.0;
  std::string attack_kind = "none";
  double attack_rate = 0.0;
  std::uint64_t attack_seed = 0;
  std::uint64_t seed = 0;
  long best_epoch = -1;
  std::vector<double> train_loss;  // one per epoch
  std::vector<double> val_acc;     // one per epoch
  double test_acc = 0.0;
  double wall_time_s = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// Long format: one row per (record, epoch) with the record-level fields
/// repeated; records with no epochs get one row with an empty epoch column.
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
/// Written to a temporary sibling and renamed, so a failure leaves no partial file.
void write_csv(const std::string& path, const CsvTable& table);

}  // namespace fixgcn

#endif  // FIXGCN_DATASET_HPP
