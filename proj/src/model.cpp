#include "fixgcn/model.hpp"

#include <fstream>
#include <sstream>

#include "fixgcn/filter.hpp"
#include "fixgcn/text.hpp"

namespace fixgcn {

std::string to_string(Variant v) { return v == Variant::fixgcn ? "fixgcn" : "gcn"; }

Variant parse_variant(const std::string& name) {
  if (name == "fixgcn") return Variant::fixgcn;
  if (name == "gcn" || name == "gcn-baseline") return Variant::gcn_baseline;
  throw Error("unknown model variant '" + name + "' (expected fixgcn or gcn)");
}

void ModelConfig::validate() const {
  if (layers < 1) throw Error("ModelConfig: layers must be >= 1");
  if (layers > 1 && hidden < 1) throw Error("ModelConfig: hidden dimension must be >= 1");
  FilterParam{s};
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("ModelConfig: dropout must lie in [0, 1)");
}

std::vector<Matrix*> ModelParams::all() {
  std::vector<Matrix*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& w : residual) out.push_back(&w);
  return out;
}

std::vector<const Matrix*> ModelParams::all() const {
  std::vector<const Matrix*> out;
  for (const auto& w : weights) out.push_back(&w);
  for (const auto& w : residual) out.push_back(&w);
  return out;
}

std::vector<Index> layer_dims(const ModelConfig& cfg, Index in_features, int num_classes) {
  std::vector<Index> dims{in_features};
  for (int l = 1; l < cfg.layers; ++l) dims.push_back(cfg.hidden);
  dims.push_back(num_classes);
  return dims;
}

ModelParams init_params(const ModelConfig& cfg, Index in_features, int num_classes, std::uint64_t seed) {
  cfg.validate();
  const auto dims = layer_dims(cfg, in_features, num_classes);
  ModelParams p;
  for (int l = 0; l < cfg.layers; ++l) {
    p.weights.push_back(glorot_init(dims[l], dims[l + 1], derive_seed(seed, 2 * l)));
    if (cfg.variant == Variant::fixgcn)
      p.residual.push_back(glorot_init(in_features, dims[l + 1], derive_seed(seed, 2 * l + 1)));
  }
  return p;
}

void check_params(const ModelParams& params, const ModelConfig& cfg, Index in_features, int num_classes) {
  const auto dims = layer_dims(cfg, in_features, num_classes);
  const std::size_t layers = static_cast<std::size_t>(cfg.layers);
  if (params.weights.size() != layers)
    throw Error("model parameters have " + std::to_string(params.weights.size()) + " layers, config has " +
                std::to_string(layers));
  const std::size_t want_res = cfg.variant == Variant::fixgcn ? layers : 0;
  if (params.residual.size() != want_res) throw Error("model parameters: wrong number of residual matrices");
  for (std::size_t l = 0; l < layers; ++l) {
    if (params.weights[l].rows() != dims[l] || params.weights[l].cols() != dims[l + 1])
      throw Error("model parameters: W" + std::to_string(l) + " has the wrong shape");
    if (want_res && (params.residual[l].rows() != in_features || params.residual[l].cols() != dims[l + 1]))
      throw Error("model parameters: residual W" + std::to_string(l) + " has the wrong shape");
  }
}

GraphOperators prepare_operators(const Graph& g, Variant variant) {
  GraphOperators ops;
  ops.variant = variant;
  ops.propagation = variant == Variant::fixgcn ? normalized_adjacency(g) : normalized_adjacency_with_self_loops(g);
  ops.features = g.features.sparseView();
  ops.features.makeCompressed();
  return ops;
}

Var project(const LayerInput& in, Var w) { return in.sparse ? spmm(*in.sparse, w) : matmul(in.dense, w); }

namespace {

Var activate(Var z, Activation act) { return act == Activation::relu ? relu(z) : z; }

}  // namespace

Var fixgcn_layer(const LayerInput& h, const LayerInput& x, const Sparse& ahat, Var w, Var w_res, double s,
                 Activation act) {
  FilterParam{s};
  const Var hw = project(h, w);
  const Var one_hop = spmm(ahat, hw);
  Var propagated = one_hop;
  if (s == 1.0) {
    propagated = spmm(ahat, one_hop);
  } else if (s != 0.0) {
    propagated = add(scale(one_hop, 1.0 - s), scale(spmm(ahat, one_hop), s));
  }
  return activate(add(propagated, project(x, w_res)), act);
}

Var gcn_layer(const LayerInput& h, const Sparse& ahat_loop, Var w, Activation act) {
  return activate(spmm(ahat_loop, project(h, w)), act);
}

ForwardResult forward(Tape& tape, const GraphOperators& ops, const ModelParams& params, const ModelConfig& cfg,
                      Mode mode, std::uint64_t seed) {
  cfg.validate();
  if (ops.variant != cfg.variant) throw Error("forward: operators were prepared for another model variant");
  const bool training = mode == Mode::train;

  ForwardResult out;
  for (const auto& w : params.weights) out.weights.push_back(tape.parameter(w));
  for (const auto& w : params.residual) out.residual.push_back(tape.parameter(w));

  const Sparse& x = training && cfg.dropout > 0.0
                        ? tape.keep(dropout(ops.features, cfg.dropout, training, derive_seed(seed, 0)))
                        : ops.features;

  LayerInput h = LayerInput::of(x);
  const LayerInput x_in = LayerInput::of(x);
  Var current;
  for (int l = 0; l < cfg.layers; ++l) {
    if (l > 0) h = LayerInput::of(dropout(current, cfg.dropout, training, derive_seed(seed, l)));
    const Activation act = l + 1 < cfg.layers ? Activation::relu : Activation::identity;
    if (cfg.variant == Variant::fixgcn)
      current = fixgcn_layer(h, x_in, ops.propagation, out.weights[l], out.residual[l], cfg.s, act);
    else
      current = gcn_layer(h, ops.propagation, out.weights[l], act);
  }
  out.logits = current;
  return out;
}

Matrix forward(const Graph& g, const ModelParams& params, const ModelConfig& cfg, Mode mode, std::uint64_t seed) {
  check_params(params, cfg, g.num_features(), g.num_classes);
  const GraphOperators ops = prepare_operators(g, cfg.variant);
  Tape tape;
  return forward(tape, ops, params, cfg, mode, seed).logits.value();
}

Matrix gcn_baseline_forward(const Graph& g, const ModelParams& params, ModelConfig cfg, Mode mode,
                            std::uint64_t seed) {
  cfg.variant = Variant::gcn_baseline;
  return forward(g, params, cfg, mode, seed);
}

std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()), 0);
  for (Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

namespace {

constexpr const char* kCheckpointMagic = "fixgcn-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << text::format_double(m(i, j));
    }
    os << '\n';
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
  std::ostringstream os;
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
     << "variant " << to_string(cfg.variant) << '\n'
     << "layers " << cfg.layers << '\n'
     << "hidden " << cfg.hidden << '\n'
     << "s " << text::format_double(cfg.s) << '\n'
     << "dropout " << text::format_double(cfg.dropout) << '\n';
  for (std::size_t l = 0; l < params.weights.size(); ++l) write_matrix(os, "W" + std::to_string(l), params.weights[l]);
  for (std::size_t l = 0; l < params.residual.size(); ++l)
    write_matrix(os, "Wres" + std::to_string(l), params.residual[l]);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint '" + path + "'");
  f << os.str();
  if (!f) throw Error("error writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open checkpoint '" + path + "'");
  std::string line;
  auto next_fields = [&](std::size_t want) {
    if (!std::getline(f, line)) throw Error("checkpoint '" + path + "' is truncated");
    auto fields = text::split_ws(line);
    if (fields.size() != want) throw Error("checkpoint '" + path + "': malformed line '" + line + "'");
    return fields;
  };

  auto head = next_fields(2);
  if (head[0] != kCheckpointMagic) throw Error("'" + path + "' is not a checkpoint file");
  if (text::parse_int<int>(head[1]) != kCheckpointVersion)
    throw Error("checkpoint '" + path + "': unsupported version " + std::string(head[1]));

  Checkpoint ck;
  auto expect_key = [&](const char* key) {
    auto fields = next_fields(2);
    if (fields[0] != key) throw Error("checkpoint '" + path + "': expected key '" + key + "'");
    return std::string(fields[1]);
  };
  ck.config.variant = parse_variant(expect_key("variant"));
  ck.config.layers = text::parse_int<int>(expect_key("layers"));
  ck.config.hidden = text::parse_int<Index>(expect_key("hidden"));
  ck.config.s = text::parse_double(expect_key("s"));
  ck.config.dropout = text::parse_double(expect_key("dropout"));
  ck.config.validate();

  const int residual_count = ck.config.variant == Variant::fixgcn ? ck.config.layers : 0;
  for (int k = 0; k < ck.config.layers + residual_count; ++k) {
    auto fields = next_fields(4);
    if (fields[0] != "matrix") throw Error("checkpoint '" + path + "': expected a matrix header");
    const Index rows = text::parse_int<Index>(fields[2]);
    const Index cols = text::parse_int<Index>(fields[3]);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      auto values = next_fields(static_cast<std::size_t>(cols));
      for (Index j = 0; j < cols; ++j) m(i, j) = text::parse_double(values[j]);
    }
    (k < ck.config.layers ? ck.params.weights : ck.params.residual).push_back(std::move(m));
  }
  if (ck.params.weights.empty()) throw Error("checkpoint '" + path + "' holds no weights");
  check_params(ck.params, ck.config, ck.params.weights.front().rows(),
               static_cast<int>(ck.params.weights.back().cols()));
  return ck;
}

}  // namespace fixgcn
