#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixgcn/dataset.hpp"
#include "fixgcn/harness.hpp"
#include "fixgcn/model.hpp"
#include "fixgcn/text.hpp"
#include "temp_dir.hpp"

using namespace fixgcn;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const std::string out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + std::string(FIXGCN_CLI_PATH) + "' " + args + " >'" +
                          out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Connected synthetic corpus written in the on-disk layout.
std::string make_toy(const TempDir& dir, const std::string& name = "toy", int classes = 3) {
  const Graph g = largest_connected_component(synthetic_graph(60, 5.0, 16, classes, 11)).graph;
  const std::string path = dir.file(name);
  write_dataset(path, g);
  return path;
}

}  // namespace

TEST_CASE("train writes metrics and a checkpoint") {
  TempDir dir;
  const std::string data = make_toy(dir);
  const RunResult r = run(dir, "train --data '" + data + "' --seed 1 --hidden 8 --out '" + dir.file("m.csv") +
                                   "' --ckpt '" + dir.file("model.ckpt") + "'");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("# resolved configuration") != std::string::npos);
  CHECK(r.out.find("epochs=200") != std::string::npos);
  const auto records = read_metrics_csv(dir.file("m.csv"));
  REQUIRE(records.size() == 1);
  CHECK(records[0].train_loss.size() == 200);
  CHECK(records[0].dataset == "toy");
  CHECK(read_csv(dir.file("m.csv")).rows.size() == 200);
  const Checkpoint ck = load_checkpoint(dir.file("model.ckpt"));
  CHECK(ck.config.hidden == 8);
}

TEST_CASE("train failures") {
  TempDir dir;
  const std::string data = make_toy(dir);
  SUBCASE("missing dataset directory") {
    const RunResult r = run(dir, "train --data '" + dir.file("absent") + "' --out '" + dir.file("m.csv") + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("does not exist") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.file("m.csv")));
    CHECK_FALSE(fs::exists(dir.file("m.csv.tmp")));
  }
  SUBCASE("s outside [0, 1] is a usage error") {
    const RunResult r = run(dir, "train --data '" + data + "' --s 1.5 --out '" + dir.file("m.csv") + "'");
    CHECK(r.code == 1);
    CHECK_FALSE(fs::exists(dir.file("m.csv")));
  }
  SUBCASE("unknown flag") {
    const RunResult r = run(dir, "train --data '" + data + "' --bogus 3 --out '" + dir.file("m.csv") + "'");
    CHECK(r.code == 1);
  }
  SUBCASE("no subcommand") { CHECK(run(dir, "").code == 1); }
  SUBCASE("unknown model") {
    CHECK(run(dir, "train --data '" + data + "' --model gat --out '" + dir.file("m.csv") + "'").code == 1);
  }
}

TEST_CASE("config file and environment") {
  TempDir dir;
  const std::string data = make_toy(dir);
  std::ofstream(dir.file("run.cfg")) << "# quick run\nepochs=3\ns=0.4\nhidden = 4\n";
  SUBCASE("flags override the config file") {
    const RunResult r = run(dir, "--config '" + dir.file("run.cfg") + "' train --data '" + data + "' --s 0.5 --out '" +
                                     dir.file("m.csv") + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("s=0.5") != std::string::npos);
    CHECK(r.out.find("epochs=3") != std::string::npos);
    const auto records = read_metrics_csv(dir.file("m.csv"));
    REQUIRE(records.size() == 1);
    CHECK(records[0].train_loss.size() == 3);
    CHECK(records[0].s == 0.5);
  }
  SUBCASE("missing config file") {
    CHECK(run(dir, "--config '" + dir.file("nope.cfg") + "' filter --out '" + dir.file("f.csv") + "'").code == 1);
  }
  SUBCASE("data root lookup") {
    const RunResult r = run(dir, "train --data toy --epochs 2 --out '" + dir.file("m.csv") + "'",
                            "FIXGCN_DATA_ROOT='" + dir.path().string() + "'");
    CHECK_MESSAGE(r.code == 0, r.err);
  }
  SUBCASE("thread count from the environment") {
    const RunResult r = run(dir, "filter --out '" + dir.file("f.csv") + "'", "FIXGCN_THREADS=3");
    CHECK(r.out.find("threads=3") != std::string::npos);
  }
}

TEST_CASE("attack subcommand") {
  TempDir dir;
  const std::string data = make_toy(dir);
  SUBCASE("rate 0 reproduces the input edge file") {
    const RunResult r =
        run(dir, "attack --data '" + data + "' --kind random --rate 0 --seed 3 --out '" + dir.file("out") + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(dir.file("out/edges.tsv")) == slurp(data + "/edges.tsv"));
    CHECK(slurp(dir.file("out/delta.txt")) == "added=0 removed=0 flipped=0\n");
  }
  SUBCASE("random budget") {
    const Graph g = load_dataset(data);
    const RunResult r =
        run(dir, "attack --data '" + data + "' --kind random --rate 0.2 --seed 3 --out '" + dir.file("out") + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const Index budget = static_cast<Index>(0.2 * static_cast<double>(g.num_edges()));
    CHECK(slurp(dir.file("out/delta.txt")) == "added=" + std::to_string(budget) + " removed=0 flipped=0\n");
    CHECK(load_dataset(dir.file("out")).num_edges() == g.num_edges() + budget);
  }
  SUBCASE("feature flips are written") {
    const RunResult r =
        run(dir, "attack --data '" + data + "' --kind feature --rate 0.5 --seed 1 --out '" + dir.file("out") + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(load_dataset(dir.file("out")).features != load_dataset(data).features);
  }
  SUBCASE("DICE on a single-label corpus adds nothing") {
    const std::string single = make_toy(dir, "single", 1);
    const RunResult r =
        run(dir, "attack --data '" + single + "' --kind dice --rate 0.5 --seed 1 --out '" + dir.file("out") + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(dir.file("out/delta.txt")).rfind("added=0 ", 0) == 0);
  }
  SUBCASE("exhausted budget reports the partial delta") {
    const std::string tiny = dir.file("tiny");
    write_dataset(tiny, build_graph(2, {{0, 1}}, Matrix::Identity(2, 2), {0, 1}));
    const RunResult r = run(dir, "attack --data '" + tiny + "' --kind dice --rate 1 --out '" + dir.file("out") + "'");
    CHECK(r.code == 2);
    CHECK(slurp(dir.file("out/delta.txt")).find("incomplete=1") != std::string::npos);
  }
  SUBCASE("unknown kind") {
    CHECK(run(dir, "attack --data '" + data + "' --kind mettack --rate 0.1 --out '" + dir.file("out") + "'").code == 1);
  }
}

TEST_CASE("filter subcommand") {
  TempDir dir;
  const RunResult r = run(dir, "filter --s 0.2 --out '" + dir.file("f.csv") + "'");
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv(dir.file("f.csv"));
  CHECK(t.header == std::vector<std::string>{"lambda", "h"});
  CHECK(t.rows.size() == 200);
  bool has_unit = false;
  double previous = std::numeric_limits<double>::infinity();
  for (const auto& row : t.rows) {
    const double lambda = text::parse_double(row[0]);
    const double h = text::parse_double(row[1]);
    if (lambda == 1.0) has_unit = h == 1.0;
    if (lambda >= 1.0) {
      CHECK(h < previous);
      previous = h;
    }
  }
  CHECK(has_unit);
  CHECK(text::parse_double(t.rows.front()[0]) == 0.01);
  CHECK(text::parse_double(t.rows.back()[0]) == 2.0);
}

TEST_CASE("sweep subcommand") {
  TempDir dir;
  const std::string data = make_toy(dir);
  const RunResult r = run(dir, "sweep --data '" + data + "' --s-grid 0.1:0.3:0.1 --seeds 2 --epochs 3 --out '" +
                                   dir.file("sweep.csv") + "'");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const CsvTable t = read_csv(dir.file("sweep.csv"));
  CHECK(t.header == std::vector<std::string>{"s", "seed", "test_acc", "val_acc"});
  CHECK(t.rows.size() == 3 * 2);
  CHECK(t.rows[2][0] == "0.2");
  CHECK(run(dir, "sweep --data '" + data + "' --s-grid 0.1:x --out '" + dir.file("bad.csv") + "'").code == 1);
  CHECK(run(dir, "sweep --data '" + data + "' --s-grid 0.5,1.5 --out '" + dir.file("bad.csv") + "'").code == 1);
}

TEST_CASE("curve subcommand") {
  TempDir dir;
  const std::string data = make_toy(dir);
  std::ofstream(dir.file("attacks.txt")) << "# kind rate\nrandom 0.0\nrandom 0.5\ndice 0.25\n";
  const std::string common = "curve --data '" + data + "' --attacks '" + dir.file("attacks.txt") +
                             "' --seeds 2 --epochs 3 --hidden 8";
  const RunResult one =
      run(dir, common + " --out '" + dir.file("c1.csv") + "' --metrics '" + dir.file("runs.csv") + "' --threads 1");
  REQUIRE_MESSAGE(one.code == 0, one.err);
  const RunResult two = run(dir, common + " --out '" + dir.file("c2.csv") + "' --threads 2");
  REQUIRE_MESSAGE(two.code == 0, two.err);
  CHECK(slurp(dir.file("c1.csv")) == slurp(dir.file("c2.csv")));

  const CsvTable t = read_csv(dir.file("c1.csv"));
  CHECK(t.rows.size() == 3 * 2);
  CHECK(t.rows[0][t.column("model")] == "fixgcn");
  CHECK(t.rows[3][t.column("model")] == "gcn");
  CHECK(t.rows[0][t.column("runs")] == "2");
  const auto runs = read_metrics_csv(dir.file("runs.csv"));
  CHECK(runs.size() == 3 * 2 * 2);

  std::ofstream(dir.file("bad.txt")) << "random\n";
  CHECK(run(dir, "curve --data '" + data + "' --attacks '" + dir.file("bad.txt") + "' --out '" + dir.file("x.csv") + "'")
            .code == 1);
  CHECK(run(dir, common + " --models fixgcn,gat --out '" + dir.file("x.csv") + "'").code == 1);
}

TEST_CASE("probe subcommand") {
  TempDir dir;
  const RunResult r = run(dir, "probe --sizes 100,200 --features 16 --hidden 8 --out '" + dir.file("p.csv") + "'");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const CsvTable t = read_csv(dir.file("p.csv"));
  CHECK(t.header == std::vector<std::string>{"num_nodes", "num_edges", "num_features", "seconds_per_epoch"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == "200");
}
