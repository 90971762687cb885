#include "fixgcn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "fixgcn/text.hpp"

namespace fs = std::filesystem;

namespace fixgcn {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return f;
}

bool skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

void write_atomically(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + path + "'");
    f << content;
    f.flush();
    if (!f) throw Error("error writing '" + path + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot write '" + path + "': " + ec.message());
  }
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

}  // namespace

std::vector<std::pair<Index, Index>> read_edge_list(const std::string& path) {
  auto f = open_input(path);
  std::vector<std::pair<Index, Index>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = text::split_ws(line);
    if (fields.size() != 2) throw Error(where(path, line_no) + ": expected 'i<TAB>j'");
    try {
      edges.emplace_back(text::parse_int<Index>(fields[0]), text::parse_int<Index>(fields[1]));
    } catch (const Error& e) {
      throw Error(where(path, line_no) + ": " + e.what());
    }
  }
  return edges;
}

void write_edge_list(const std::string& path, const std::vector<Edge>& edges) {
  std::vector<Edge> sorted;
  sorted.reserve(edges.size());
  for (const auto& e : edges) sorted.push_back(make_edge(e.u, e.v));
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& e : sorted) out += std::to_string(e.u) + '\t' + std::to_string(e.v) + '\n';
  write_atomically(path, out);
}

Matrix read_features(const std::string& path) {
  auto f = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;

  while (std::getline(f, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = text::split_ws(line);
    if (rows.empty() && !fields.empty() && fields[0] == "sparse") {
      if (fields.size() != 3) throw Error(where(path, line_no) + ": expected 'sparse N F'");
      const Index n = text::parse_int<Index>(fields[1]);
      const Index cols = text::parse_int<Index>(fields[2]);
      if (n < 0 || cols < 0) throw Error(where(path, line_no) + ": negative dimension");
      Matrix x = Matrix::Zero(n, cols);
      while (std::getline(f, line)) {
        ++line_no;
        if (skippable(line)) continue;
        const auto t = text::split_ws(line);
        if (t.size() != 3) throw Error(where(path, line_no) + ": expected 'row col value'");
        const Index r = text::parse_int<Index>(t[0]);
        const Index c = text::parse_int<Index>(t[1]);
        if (r < 0 || r >= n || c < 0 || c >= cols) throw Error(where(path, line_no) + ": index out of range");
        x(r, c) = text::parse_double(t[2]);
      }
      return x;
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto v : fields) row.push_back(text::parse_double(v));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(where(path, line_no) + ": ragged feature row (" + std::to_string(row.size()) + " values, expected " +
                  std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  const Index cols = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Matrix x(static_cast<Index>(rows.size()), cols);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < cols; ++j) x(i, j) = rows[i][j];
  return x;
}

void write_features(const std::string& path, const Matrix& features, bool sparse) {
  std::string out;
  if (sparse) {
    out = "sparse " + std::to_string(features.rows()) + ' ' + std::to_string(features.cols()) + '\n';
    for (Index i = 0; i < features.rows(); ++i)
      for (Index j = 0; j < features.cols(); ++j)
        if (features(i, j) != 0.0)
          out += std::to_string(i) + ' ' + std::to_string(j) + ' ' + text::format_double(features(i, j)) + '\n';
  } else {
    for (Index i = 0; i < features.rows(); ++i) {
      for (Index j = 0; j < features.cols(); ++j) {
        if (j) out += ' ';
        out += text::format_double(features(i, j));
      }
      out += '\n';
    }
  }
  write_atomically(path, out);
}

std::vector<int> read_labels(const std::string& path) {
  auto f = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (skippable(line)) continue;
    try {
      labels.push_back(text::parse_int<int>(line));
    } catch (const Error& e) {
      throw Error(where(path, line_no) + ": " + e.what());
    }
  }
  return labels;
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::string out;
  for (int y : labels) out += std::to_string(y) + '\n';
  write_atomically(path, out);
}

SplitSpec make_split(Index num_nodes, SplitRatios ratios, std::uint64_t seed) {
  if (num_nodes < 1) throw Error("make_split: degenerate node count " + std::to_string(num_nodes));
  for (double r : ratios)
    if (!(r >= 0.0)) throw Error("make_split: negative split ratio");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (total > 1.0 + 1e-12) throw Error("make_split: ratios sum to more than 1");

  std::vector<Index> perm(static_cast<std::size_t>(num_nodes));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  const auto count = [&](double r) { return static_cast<Index>(std::floor(r * static_cast<double>(num_nodes) + 1e-9)); };
  const Index n_train = count(ratios[0]);
  const Index n_val = count(ratios[1]);
  Index n_test = count(ratios[2]);
  if (total >= 1.0 - 1e-12) n_test = num_nodes - n_train - n_val;

  SplitSpec split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  split.test.assign(perm.begin() + n_train + n_val, perm.begin() + n_train + n_val + n_test);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SplitSpec read_splits(const std::string& path, Index num_nodes) {
  auto f = open_input(path);
  SplitSpec split;
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = text::split_ws(line);
    if (fields.size() != 2) throw Error(where(path, line_no) + ": expected 'node<TAB>{train|val|test}'");
    const Index node = text::parse_int<Index>(fields[0]);
    if (node < 0 || node >= num_nodes) throw Error(where(path, line_no) + ": node out of range");
    if (seen[node]++) throw Error(where(path, line_no) + ": node listed twice");
    if (fields[1] == "train")
      split.train.push_back(node);
    else if (fields[1] == "val")
      split.val.push_back(node);
    else if (fields[1] == "test")
      split.test.push_back(node);
    else
      throw Error(where(path, line_no) + ": unknown split '" + std::string(fields[1]) + "'");
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void write_splits(const std::string& path, const SplitSpec& split) {
  std::vector<std::pair<Index, const char*>> rows;
  for (Index i : split.train) rows.emplace_back(i, "train");
  for (Index i : split.val) rows.emplace_back(i, "val");
  for (Index i : split.test) rows.emplace_back(i, "test");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [i, name] : rows) out += std::to_string(i) + '\t' + name + '\n';
  write_atomically(path, out);
}

std::optional<std::string> edge_count_warning(const std::string& name, Index num_nodes, Index num_edges) {
  struct Reference {
    const char* name;
    Index nodes;
    Index edges;
  };
  static constexpr Reference kReferences[] = {{"cora", 2485, 5069}, {"citeseer", 2110, 3668}};
  for (const auto& ref : kReferences) {
    if (name != ref.name || num_nodes != ref.nodes) continue;
    if (num_edges == 2 * ref.edges || 2 * num_edges == ref.edges)
      return name + ": " + std::to_string(num_edges) + " edges vs reference " + std::to_string(ref.edges) +
             " (factor 2; directed vs undirected counting?)";
  }
  return std::nullopt;
}

LoadedDataset load_dataset_full(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error("dataset directory '" + dir + "' does not exist");
  for (const char* name : {"edges.tsv", "features.tsv", "labels.tsv"})
    if (!fs::exists(root / name)) throw Error("dataset '" + dir + "' is missing " + name);

  auto edges = read_edge_list((root / "edges.tsv").string());
  Matrix features = read_features((root / "features.tsv").string());
  auto labels = read_labels((root / "labels.tsv").string());
  const Index n = static_cast<Index>(labels.size());
  if (features.rows() != n)
    throw Error("dataset '" + dir + "': " + std::to_string(features.rows()) + " feature rows for " +
                std::to_string(n) + " labels");
  Graph raw = build_graph(n, edges, std::move(features), std::move(labels));

  LoadedDataset out;
  out.raw_nodes = raw.num_nodes;
  auto lcc = largest_connected_component(raw);
  out.graph = std::move(lcc.graph);
  out.new_to_old = std::move(lcc.new_to_old);

  if (fs::exists(root / "splits.tsv")) {
    const SplitSpec raw_split = read_splits((root / "splits.tsv").string(), raw.num_nodes);
    SplitSpec split;
    auto remap = [&](const std::vector<Index>& in, std::vector<Index>& dst) {
      for (Index i : in)
        if (lcc.old_to_new[i] >= 0) dst.push_back(lcc.old_to_new[i]);
    };
    remap(raw_split.train, split.train);
    remap(raw_split.val, split.val);
    remap(raw_split.test, split.test);
    out.split = std::move(split);
  }

  std::clog << "loaded " << dir << ": N=" << out.graph.num_nodes << " |E|=" << out.graph.num_edges()
            << " F=" << out.graph.num_features() << " C=" << out.graph.num_classes;
  if (out.graph.num_nodes != raw.num_nodes) std::clog << " (LCC of " << raw.num_nodes << " nodes)";
  std::clog << '\n';
  if (auto warning = edge_count_warning((root / "").parent_path().filename().string(), out.graph.num_nodes, out.graph.num_edges()))
    std::clog << "warning: " << *warning << '\n';
  return out;
}

Graph load_dataset(const std::string& dir) { return load_dataset_full(dir).graph; }

void write_dataset(const std::string& dir, const Graph& g, const SplitSpec* split) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  const fs::path root(dir);
  const bool binary = (g.features.array() == 0.0 || g.features.array() == 1.0).all();
  write_edge_list((root / "edges.tsv").string(), g.edges);
  write_features((root / "features.tsv").string(), g.features, binary);
  write_labels((root / "labels.tsv").string(), g.labels);
  if (split) write_splits((root / "splits.tsv").string(), *split);
}

// ---------------------------------------------------------------------------
// CSV

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  auto f = open_input(path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw Error("'" + path + "' is empty (no CSV header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto h : text::split(line, ',')) t.header.emplace_back(h);
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != t.header.size())
      throw Error(where(path, line_no) + ": " + std::to_string(fields.size()) + " fields, header has " +
                  std::to_string(t.header.size()));
    t.rows.emplace_back(fields.begin(), fields.end());
  }
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  auto check = [](const std::string& cell) {
    if (cell.find_first_of(",\n\r") != std::string::npos)
      throw Error("CSV cell '" + cell + "' contains a separator");
  };
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      check(row[i]);
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error("write_csv: row width differs from header");
    emit(row);
  }
  write_atomically(path, out);
}

namespace {

const std::vector<std::string> kMetricsHeader{"dataset",   "model",       "s",        "attack_kind", "attack_rate",
                                              "attack_seed", "seed",      "best_epoch", "test_acc",  "wall_time_s",
                                              "epoch",     "train_loss",  "val_acc"};

}  // namespace

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  CsvTable t;
  t.header = kMetricsHeader;
  for (const auto& r : records) {
    if (r.train_loss.size() != r.val_acc.size())
      throw Error("write_metrics_csv: per-epoch series have different lengths");
    std::vector<std::string> base{r.dataset,
                                  r.model,
                                  text::format_double(r.s),
                                  r.attack_kind,
                                  text::format_double(r.attack_rate),
                                  std::to_string(r.attack_seed),
                                  std::to_string(r.seed),
                                  std::to_string(r.best_epoch),
                                  text::format_double(r.test_acc),
                                  text::format_double(r.wall_time_s)};
    if (r.train_loss.empty()) {
      auto row = base;
      row.insert(row.end(), {"", "", ""});
      t.rows.push_back(std::move(row));
    }
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
      auto row = base;
      row.push_back(std::to_string(e));
      row.push_back(text::format_double(r.train_loss[e]));
      row.push_back(text::format_double(r.val_acc[e]));
      t.rows.push_back(std::move(row));
    }
  }
  write_csv(path, t);
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kMetricsHeader) throw Error("'" + path + "' is not a metrics CSV");
  std::vector<MetricsRecord> out;
  for (const auto& row : t.rows) {
    const bool no_epochs = row[10].empty();
    const long epoch = no_epochs ? -1 : text::parse_int<long>(row[10]);
    if (no_epochs || epoch == 0) {
      MetricsRecord r;
      r.dataset = row[0];
      r.model = row[1];
      r.s = text::parse_double(row[2]);
      r.attack_kind = row[3];
      r.attack_rate = text::parse_double(row[4]);
      r.attack_seed = text::parse_int<std::uint64_t>(row[5]);
      r.seed = text::parse_int<std::uint64_t>(row[6]);
      r.best_epoch = text::parse_int<long>(row[7]);
      r.test_acc = text::parse_double(row[8]);
      r.wall_time_s = text::parse_double(row[9]);
      out.push_back(std::move(r));
      if (no_epochs) continue;
    }
    if (out.empty() || static_cast<long>(out.back().train_loss.size()) != epoch)
      throw Error("'" + path + "': epoch rows out of sequence");
    out.back().train_loss.push_back(text::parse_double(row[11]));
    out.back().val_acc.push_back(text::parse_double(row[12]));
  }
  return out;
}

}  // namespace fixgcn
