#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixgcn/dataset.hpp"
#include "fixgcn/harness.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace fixgcn;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& body) { std::ofstream(path) << body; }

void write_fixture(const TempDir& dir) {
  write_text(dir.file("edges.tsv"), "0\t1\n1\t2\n");
  write_text(dir.file("features.tsv"), "1 0\n0 1\n1 1\n");
  write_text(dir.file("labels.tsv"), "0\n1\n0\n");
}

MetricsRecord record(const std::string& name, std::size_t epochs) {
  MetricsRecord r;
  r.dataset = name;
  r.model = "fixgcn";
  r.s = 0.2;
  r.attack_kind = "random";
  r.attack_rate = 0.6;
  r.attack_seed = 12345678901234567ULL;
  r.seed = 3;
  r.best_epoch = epochs ? static_cast<long>(epochs) - 1 : -1;
  for (std::size_t e = 0; e < epochs; ++e) {
    r.train_loss.push_back(1.0 / (1.0 + static_cast<double>(e)) + 1e-17 * static_cast<double>(e));
    r.val_acc.push_back(0.1 * static_cast<double>(e % 10));
  }
  r.test_acc = 0.848;
  r.wall_time_s = 0.123456789;
  return r;
}

}  // namespace

TEST_CASE("three-node fixture loads") {
  TempDir dir;
  write_fixture(dir);
  const LoadedDataset d = load_dataset_full(dir.path().string());
  CHECK(d.graph.num_nodes == 3);
  CHECK(d.graph.num_edges() == 2);
  CHECK(d.graph.num_features() == 2);
  CHECK(d.graph.num_classes == 2);
  CHECK(d.graph.features(2, 1) == 1.0);
  CHECK(d.raw_nodes == 3);
  CHECK_FALSE(d.split.has_value());
}

TEST_CASE("dataset write/read round trip") {
  TempDir dir;
  const Graph g = synthetic_graph(40, 4.0, 9, 3, 2);
  const auto lcc = largest_connected_component(g).graph;
  const SplitSpec split = make_split(lcc.num_nodes, kDefaultSplitRatios, 5);
  write_dataset(dir.path().string(), lcc, &split);
  CHECK(slurp(dir.file("features.tsv")).rfind("sparse ", 0) == 0);
  const LoadedDataset back = load_dataset_full(dir.path().string());
  CHECK(back.graph.edges == lcc.edges);
  CHECK(back.graph.features == lcc.features);
  CHECK(back.graph.labels == lcc.labels);
  REQUIRE(back.split.has_value());
  CHECK(back.split->train == split.train);
  CHECK(back.split->val == split.val);
  CHECK(back.split->test == split.test);
}

TEST_CASE("dense real-valued features round trip exactly") {
  TempDir dir;
  const Matrix x = oracle::random_matrix(4, 3, 1) * 1e-3;
  write_features(dir.file("f.tsv"), x, false);
  CHECK(read_features(dir.file("f.tsv")) == x);
  write_features(dir.file("s.tsv"), x, true);
  CHECK(read_features(dir.file("s.tsv")) == x);
}

TEST_CASE("LCC is applied on load and splits are remapped") {
  TempDir dir;
  write_text(dir.file("edges.tsv"), "0\t1\n1\t2\n3\t4\n");
  write_text(dir.file("features.tsv"), "0\n1\n2\n3\n4\n");
  write_text(dir.file("labels.tsv"), "0\n1\n0\n1\n0\n");
  write_text(dir.file("splits.tsv"), "0\ttrain\n1\tval\n2\ttest\n3\ttrain\n4\ttest\n");
  const LoadedDataset d = load_dataset_full(dir.path().string());
  CHECK(d.graph.num_nodes == 3);
  CHECK(d.raw_nodes == 5);
  CHECK(d.new_to_old == std::vector<Index>{0, 1, 2});
  REQUIRE(d.split.has_value());
  CHECK(d.split->train == std::vector<Index>{0});
  CHECK(d.split->test == std::vector<Index>{2});
}

TEST_CASE("edge order and orientation do not matter") {
  TempDir a, b;
  write_fixture(a);
  write_fixture(b);
  write_text(b.file("edges.tsv"), "2\t1\n# comment\n\n1\t0\n0\t1\n");
  CHECK(load_dataset(a.path().string()).edges == load_dataset(b.path().string()).edges);
}

TEST_CASE("malformed inputs") {
  TempDir dir;
  write_fixture(dir);
  SUBCASE("ragged feature rows") {
    write_text(dir.file("features.tsv"), "1 0\n0\n1 1\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path().string()), doctest::Contains("ragged"), Error);
  }
  SUBCASE("feature/label count mismatch") {
    write_text(dir.file("labels.tsv"), "0\n1\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
  SUBCASE("missing file") {
    std::filesystem::remove(dir.file("labels.tsv"));
    CHECK_THROWS_WITH_AS(load_dataset(dir.path().string()), doctest::Contains("labels.tsv"), Error);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_dataset(dir.file("nope")), Error); }
  SUBCASE("bad edge line") {
    write_text(dir.file("edges.tsv"), "0\t1\t2\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
  SUBCASE("self-loop") {
    write_text(dir.file("edges.tsv"), "1\t1\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
  SUBCASE("non-numeric label") {
    write_text(dir.file("labels.tsv"), "0\nx\n0\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
  SUBCASE("sparse triplet out of range") {
    write_text(dir.file("features.tsv"), "sparse 3 2\n0 5 1\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
  SUBCASE("split file errors") {
    write_text(dir.file("splits.tsv"), "0\ttrain\n0\tval\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
    write_text(dir.file("splits.tsv"), "0\tholdout\n");
    CHECK_THROWS_AS(load_dataset(dir.path().string()), Error);
  }
}

TEST_CASE("edge count factor-two flag") {
  CHECK_FALSE(edge_count_warning("cora", 2485, 5069).has_value());
  CHECK(edge_count_warning("cora", 2485, 10138).has_value());
  CHECK(edge_count_warning("citeseer", 2110, 1834).has_value());
  CHECK_FALSE(edge_count_warning("cora", 2000, 10138).has_value());
  CHECK_FALSE(edge_count_warning("pubmed", 2485, 10138).has_value());
}

TEST_CASE("split sizes") {
  const SplitSpec ten = make_split(10, kDefaultSplitRatios, 0);
  CHECK(ten.train.size() == 1);
  CHECK(ten.val.size() == 1);
  CHECK(ten.test.size() == 8);
  const SplitSpec cora = make_split(2485, kDefaultSplitRatios, 0);
  CHECK(cora.train.size() == 248);
  CHECK(cora.val.size() == 248);
  CHECK(cora.test.size() == 1989);
  const SplitSpec partial = make_split(100, {0.2, 0.1, 0.3}, 1);
  CHECK(partial.test.size() == 30);
  CHECK_THROWS_AS(make_split(0, kDefaultSplitRatios, 0), Error);
  CHECK_THROWS_AS(make_split(10, {0.6, 0.6, 0.0}, 0), Error);
  CHECK_THROWS_AS(make_split(10, {-0.1, 0.5, 0.5}, 0), Error);
}

TEST_CASE("splits partition the nodes and depend on the seed") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index n = 20 + static_cast<Index>(seed);
    const SplitSpec s = make_split(n, kDefaultSplitRatios, seed);
    std::vector<Index> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      CHECK(std::is_sorted(part->begin(), part->end()));
      all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    std::vector<Index> expected(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) expected[i] = i;
    CHECK(all == expected);
    CHECK(make_split(n, kDefaultSplitRatios, seed).train == s.train);
  }
  CHECK(make_split(200, kDefaultSplitRatios, 1).train != make_split(200, kDefaultSplitRatios, 2).train);
}

TEST_CASE("metrics CSV round trip") {
  TempDir dir;
  SUBCASE("empty list") {
    write_metrics_csv({}, dir.file("m.csv"));
    CHECK(read_metrics_csv(dir.file("m.csv")).empty());
  }
  SUBCASE("records with and without epochs") {
    const std::vector<MetricsRecord> records{record("cora", 5), record("citeseer", 0), record("toy", 200)};
    write_metrics_csv(records, dir.file("m.csv"));
    const auto back = read_metrics_csv(dir.file("m.csv"));
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == records[i]);
    CHECK(back[0].test_acc == 0.848);
    CHECK(slurp(dir.file("m.csv")).find(",0.848,") != std::string::npos);
    CHECK(read_csv(dir.file("m.csv")).rows.size() == 5 + 1 + 200);
  }
  SUBCASE("foreign CSV is rejected") {
    write_text(dir.file("x.csv"), "a,b\n1,2\n");
    CHECK_THROWS_AS(read_metrics_csv(dir.file("x.csv")), Error);
  }
}

TEST_CASE("generic CSV") {
  TempDir dir;
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2", ""}};
  write_csv(dir.file("t.csv"), t);
  const CsvTable back = read_csv(dir.file("t.csv"));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), Error);
  t.rows.push_back({"3,4", "y"});
  CHECK_THROWS_AS(write_csv(dir.file("bad.csv"), t), Error);
  CHECK_FALSE(std::filesystem::exists(dir.file("bad.csv")));
  write_text(dir.file("ragged.csv"), "a,b\n1\n");
  CHECK_THROWS_AS(read_csv(dir.file("ragged.csv")), Error);
}
