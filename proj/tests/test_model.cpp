#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "fixgcn/filter.hpp"
#include "fixgcn/model.hpp"
#include "gradient_checks.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace fixgcn;

namespace {

ModelConfig small_config(int layers, double s, Variant variant = Variant::fixgcn) {
  ModelConfig cfg;
  cfg.layers = layers;
  cfg.hidden = 5;
  cfg.s = s;
  cfg.variant = variant;
  return cfg;
}

Matrix relu_dense(const Matrix& m) { return m.cwiseMax(0.0); }

// Eval-mode logits computed densely from the edge list.
Matrix dense_forward(const Graph& g, const ModelParams& p, const ModelConfig& cfg) {
  const Matrix& x = g.features;
  Matrix h = x;
  for (int l = 0; l < cfg.layers; ++l) {
    Matrix z;
    if (cfg.variant == Variant::fixgcn)
      z = oracle::dense_propagation(oracle::dense_ahat(g), cfg.s) * (h * p.weights[l]) + x * p.residual[l];
    else
      z = oracle::dense_ahat_loop(g) * (h * p.weights[l]);
    h = l + 1 < cfg.layers ? relu_dense(z) : z;
  }
  return h;
}

}  // namespace

TEST_CASE("layer dimensions and parameter shapes") {
  ModelConfig cfg = small_config(3, 0.2);
  CHECK(layer_dims(cfg, 7, 3) == std::vector<Index>{7, 5, 5, 3});
  const ModelParams p = init_params(cfg, 7, 3, 1);
  REQUIRE(p.weights.size() == 3);
  REQUIRE(p.residual.size() == 3);
  CHECK(p.residual[1].rows() == 7);
  CHECK(p.residual[1].cols() == 5);
  CHECK_NOTHROW(check_params(p, cfg, 7, 3));
  CHECK_THROWS_AS(check_params(p, cfg, 8, 3), Error);
  CHECK(init_params(small_config(2, 0.2, Variant::gcn_baseline), 7, 3, 1).residual.empty());

  ModelConfig bad = cfg;
  bad.s = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.layers = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Fix-GCN layer against dense oracles") {
  const Graph g = oracle::random_graph(12, 0.3, 5, 4);
  const Sparse ahat = normalized_adjacency(g);
  const Sparse xs = Matrix(g.features).sparseView();
  const Matrix h = oracle::random_matrix(12, 6, 1);
  const Matrix w = oracle::random_matrix(6, 3, 2);
  const Matrix wr = oracle::random_matrix(4, 3, 3);

  SUBCASE("general s") {
    for (double s : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      Tape t;
      Var out = fixgcn_layer(LayerInput::of(t.constant(h)), LayerInput::of(xs), ahat, t.parameter(w), t.parameter(wr), s,
                             Activation::relu);
      const Matrix expected = relu_dense(oracle::dense_propagation(oracle::dense_ahat(g), s) * h * w + g.features * wr);
      CHECK(oracle::max_abs(out.value() - expected) < 1e-10);
    }
  }
  SUBCASE("s = 0 without residual is one-hop GCN propagation") {
    Tape t;
    Var out = fixgcn_layer(LayerInput::of(t.constant(h)), LayerInput::of(xs), ahat, t.parameter(w),
                           t.parameter(Matrix::Zero(4, 3)), 0.0, Activation::identity);
    CHECK(oracle::max_abs(out.value() - oracle::dense_ahat(g) * h * w) < 1e-12);
  }
  SUBCASE("zero weights leave only the residual branch") {
    Tape t;
    Var out = fixgcn_layer(LayerInput::of(t.constant(h)), LayerInput::of(xs), ahat, t.parameter(Matrix::Zero(6, 3)),
                           t.parameter(wr), 0.3, Activation::relu);
    CHECK(oracle::max_abs(out.value() - relu_dense(g.features * wr)) < 1e-12);
  }
  SUBCASE("s = 0 reduces bit-exactly to Â(HW) + XW̃") {
    Tape t;
    Var out = fixgcn_layer(LayerInput::of(t.constant(h)), LayerInput::of(xs), ahat, t.parameter(w), t.parameter(wr), 0.0,
                           Activation::identity);
    const Matrix hw = h * w;
    const Matrix expected = Matrix(ahat * hw) + Matrix(xs * wr);
    CHECK(out.value() == expected);
  }
}

TEST_CASE("network forward against dense oracles") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = oracle::random_graph(15, 0.25, seed, 6, 3);
    for (int layers : {1, 2, 3}) {
      for (Variant variant : {Variant::fixgcn, Variant::gcn_baseline}) {
        const ModelConfig cfg = small_config(layers, 0.2 + 0.05 * static_cast<double>(seed % 3), variant);
        const ModelParams p = init_params(cfg, 6, 3, seed);
        const Matrix logits = forward(g, p, cfg, Mode::eval, 99);
        CHECK(logits.rows() == 15);
        CHECK(logits.cols() == 3);
        CHECK(oracle::max_abs(logits - dense_forward(g, p, cfg)) < 1e-10);
      }
    }
  }
}

TEST_CASE("baseline entry point forces the baseline variant") {
  const Graph g = oracle::random_graph(10, 0.3, 4, 3, 2);
  const ModelConfig cfg = small_config(2, 0.2, Variant::gcn_baseline);
  const ModelParams p = init_params(cfg, 3, 2, 1);
  ModelConfig claimed = cfg;
  claimed.variant = Variant::fixgcn;
  CHECK(gcn_baseline_forward(g, p, claimed, Mode::eval, 0) == forward(g, p, cfg, Mode::eval, 0));
}

TEST_CASE("eval mode is deterministic and seed-free; train mode depends on the seed") {
  const Graph g = oracle::random_graph(20, 0.2, 8, 5, 3);
  const ModelConfig cfg = small_config(2, 0.2);
  const ModelParams p = init_params(cfg, 5, 3, 2);
  CHECK(forward(g, p, cfg, Mode::eval, 1) == forward(g, p, cfg, Mode::eval, 2));
  CHECK(forward(g, p, cfg, Mode::train, 1) == forward(g, p, cfg, Mode::train, 1));
  CHECK(forward(g, p, cfg, Mode::train, 1) != forward(g, p, cfg, Mode::train, 2));
  CHECK(forward(g, p, cfg, Mode::train, 1) != forward(g, p, cfg, Mode::eval, 1));
}

TEST_CASE("permutation equivariance") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = oracle::random_graph(12, 0.3, seed, 4, 3);
    std::vector<Index> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed + 77);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    std::vector<std::pair<Index, Index>> edges;
    for (const auto& e : g.edges) edges.emplace_back(perm[e.u], perm[e.v]);
    Matrix x(12, 4);
    std::vector<int> y(12);
    for (Index i = 0; i < 12; ++i) {
      x.row(perm[i]) = g.features.row(i);
      y[perm[i]] = g.labels[i];
    }
    const Graph permuted = build_graph(12, edges, x, y, g.num_classes);

    const ModelConfig cfg = small_config(2, 0.4);
    const ModelParams p = init_params(cfg, 4, g.num_classes, seed);
    const Matrix a = forward(g, p, cfg, Mode::eval, 0);
    const Matrix b = forward(permuted, p, cfg, Mode::eval, 0);
    for (Index i = 0; i < 12; ++i) CHECK((a.row(i) - b.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("repeated propagation stays bounded") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = oracle::random_graph(25, 0.2, seed, 3);
    const Sparse ahat = normalized_adjacency(g);
    for (double s : {0.0, 0.2, 0.5, 1.0}) {
      const PropagationOperator<double> op(ahat, FilterParam{s});
      Matrix h = g.features;
      for (int k = 0; k < 64; ++k) h = apply_propagation(op, h);
      CHECK(h.norm() <= g.features.norm() * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("end-to-end gradient of the two-layer loss") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(gradcheck::model_gradient_error(seed) < gradcheck::kTolerance);
  }
  CHECK(gradcheck::model_gradient_error(3, 0.0, 0.0) < gradcheck::kTolerance);
  CHECK(gradcheck::model_gradient_error(4, 1.0, 0.5) < gradcheck::kTolerance);
}

TEST_CASE("feature dropout is shared with the residual branch") {
  // One layer in train mode: both terms must see the same dropped X.
  const Graph g = oracle::random_graph(10, 0.3, 2, 4, 2);
  ModelConfig cfg = small_config(1, 0.2);
  cfg.dropout = 0.5;
  ModelParams p = init_params(cfg, 4, 2, 0);
  const GraphOperators ops = prepare_operators(g, cfg.variant);
  Tape t;
  auto fwd = forward(t, ops, p, cfg, Mode::train, 7);
  const Sparse dropped = dropout(ops.features, 0.5, true, derive_seed(7, 0));
  const Matrix expected = oracle::dense_propagation(oracle::dense_ahat(g), 0.2) * (Matrix(dropped) * p.weights[0]) +
                          Matrix(dropped) * p.residual[0];
  CHECK(oracle::max_abs(fwd.logits.value() - expected) < 1e-12);
}

TEST_CASE("predict") {
  Matrix logits(3, 3);
  logits << 0.1, 0.5, 0.2,  //
      1.0, 1.0, 0.0,        //
      -1.0, -1.0, -1.0;
  CHECK(predict(logits) == std::vector<int>{1, 0, 0});
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  const ModelConfig cfg = small_config(2, 0.3);
  const ModelParams p = init_params(cfg, 6, 3, 11);
  save_checkpoint(dir.file("model.ckpt"), cfg, p);
  const Checkpoint ck = load_checkpoint(dir.file("model.ckpt"));
  CHECK(ck.config.layers == 2);
  CHECK(ck.config.hidden == 5);
  CHECK(ck.config.s == 0.3);
  CHECK(ck.config.dropout == cfg.dropout);
  CHECK(ck.config.variant == Variant::fixgcn);
  REQUIRE(ck.params.weights.size() == 2);
  REQUIRE(ck.params.residual.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(ck.params.weights[l] == p.weights[l]);
    CHECK(ck.params.residual[l] == p.residual[l]);
  }

  const ModelConfig base = small_config(2, 0.2, Variant::gcn_baseline);
  save_checkpoint(dir.file("gcn.ckpt"), base, init_params(base, 6, 3, 1));
  CHECK(load_checkpoint(dir.file("gcn.ckpt")).params.residual.empty());

  std::ofstream(dir.file("bad.ckpt")) << "not-a-checkpoint 1\n";
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), Error);
  std::ofstream(dir.file("short.ckpt")) << "fixgcn-checkpoint 1\nvariant fixgcn\nlayers 2\n";
  CHECK_THROWS_AS(load_checkpoint(dir.file("short.ckpt")), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), Error);
}
