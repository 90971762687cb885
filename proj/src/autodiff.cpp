#include "fixgcn/autodiff.hpp"

#include <cmath>
#include <string>

namespace fixgcn {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) throw Error(std::string(op) + ": operands on different tapes");
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::constant_view(const Matrix& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const { return node_value(nodes_.at(v.id)); }

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.requires_grad) throw Error("Tape::grad: node does not require a gradient");
  if (n.grad.size() == 0 && node_value(n).size() != 0)
    throw Error("Tape::grad: backward() has not been run");
  return n.grad;
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.allFinite()) throw Error("Tape: op produced a non-finite value");
  Node n;
  n.value = std::move(value);
  for (std::size_t in : inputs) n.requires_grad = n.requires_grad || nodes_.at(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("Tape::backward: variable belongs to another tape");
  const Matrix& out = value(loss);
  if (out.rows() != 1 || out.cols() != 1)
    throw Error("Tape::backward: target must be 1x1, got " + shape(out));

  for (auto& n : nodes_) {
    if (n.requires_grad)
      n.grad = Matrix::Zero(node_value(n).rows(), node_value(n).cols());
    else
      n.grad.resize(0, 0);
  }
  backward_steps_ = 0;
  if (!nodes_[loss.id].requires_grad) return;

  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.requires_grad || !n.backward) continue;
    n.backward(*this, k);
    ++backward_steps_;
  }
}

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw Error("matmul: inner dimensions differ (" + shape(av) + " * " + shape(bv) + ")");
  return a.tape->record(av * bv, {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const Matrix& dc = t.node_grad(self);
    if (t.requires_grad(a.id)) t.node_grad_mut(a.id).noalias() += dc * b.value().transpose();
    if (t.requires_grad(b.id)) t.node_grad_mut(b.id).noalias() += a.value().transpose() * dc;
  });
}

Var spmm(const Sparse& s, Var h) {
  const Matrix& hv = h.value();
  if (s.cols() != hv.rows())
    throw Error("spmm: sparse operand is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                ", dense operand " + shape(hv));
  Matrix out = s * hv;
  const Sparse* sp = &s;
  return h.tape->record(std::move(out), {h.id}, [sp, h](Tape& t, std::size_t self) {
    t.node_grad_mut(h.id).noalias() += sp->transpose() * t.node_grad(self);
  });
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw Error("add: shape mismatch (" + shape(av) + " + " + shape(bv) + ")");
  return a.tape->record(av + bv, {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    if (t.requires_grad(a.id)) t.node_grad_mut(a.id) += t.node_grad(self);
    if (t.requires_grad(b.id)) t.node_grad_mut(b.id) += t.node_grad(self);
  });
}

Var scale(Var a, double alpha) {
  return a.tape->record(alpha * a.value(), {a.id}, [a, alpha](Tape& t, std::size_t self) {
    t.node_grad_mut(a.id) += alpha * t.node_grad(self);
  });
}

Var relu(Var a) {
  return a.tape->record(a.value().cwiseMax(0.0), {a.id}, [a](Tape& t, std::size_t self) {
    // Subgradient at 0 is 0.
    t.node_grad_mut(a.id).array() += (a.value().array() > 0.0).cast<double>() * t.node_grad(self).array();
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    t.node_grad_mut(a.id).array() += t.node_grad(self)(0, 0);
  });
}

namespace {

void check_dropout_rate(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("dropout: rate " + std::to_string(p) + " outside [0, 1)");
}

}  // namespace

Var dropout(Var a, double p, bool training, std::uint64_t seed) {
  check_dropout_rate(p);
  if (!training || p == 0.0) return a;
  const Matrix& av = a.value();
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(av.rows(), av.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix out = av.cwiseProduct(mask);
  return a.tape->record(std::move(out), {a.id}, [a, mask = std::move(mask)](Tape& t, std::size_t self) {
    t.node_grad_mut(a.id) += t.node_grad(self).cwiseProduct(mask);
  });
}

Sparse dropout(const Sparse& x, double p, bool training, std::uint64_t seed) {
  check_dropout_rate(p);
  if (!training || p == 0.0) return x;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  Sparse out = x;
  for (Index r = 0; r < out.outerSize(); ++r)
    for (Sparse::InnerIterator it(out, r); it; ++it)
      it.valueRef() = rng.uniform() < p ? 0.0 : it.value() * keep_scale;
  out.prune(0.0);
  out.makeCompressed();
  return out;
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels, std::span<const Index> mask) {
  const Matrix& z = logits.value();
  if (mask.empty()) throw Error("softmax_cross_entropy: empty mask");
  if (static_cast<Index>(labels.size()) != z.rows())
    throw Error("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(z.rows()) + " rows");

  const double inv_count = 1.0 / static_cast<double>(mask.size());
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  double loss = 0.0;
  for (Index i : mask) {
    if (i < 0 || i >= z.rows()) throw Error("softmax_cross_entropy: mask index out of range");
    const int y = labels[i];
    if (y < 0 || y >= z.cols()) throw Error("softmax_cross_entropy: label out of range");
    const double zmax = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp();
    const double denom = e.sum();
    loss += std::log(denom) - (z(i, y) - zmax);
    dz.row(i) += inv_count * e / denom;
    dz(i, y) -= inv_count;
  }
  Matrix out(1, 1);
  out(0, 0) = loss * inv_count;
  return logits.tape->record(std::move(out), {logits.id},
                             [logits, dz = std::move(dz)](Tape& t, std::size_t self) {
                               t.node_grad_mut(logits.id) += t.node_grad(self)(0, 0) * dz;
                             });
}

Matrix glorot_init(Index rows, Index cols, std::uint64_t seed) {
  if (rows <= 0 || cols <= 0) throw Error("glorot_init: dimensions must be positive");
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix w(rows, cols);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
  return w;
}

AdamState::AdamState(AdamConfig cfg, std::span<const Matrix> params) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw Error("AdamState: learning rate must be positive");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size())
    throw Error("adam_step: parameter/gradient/state counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].rows() != grads[k].rows() || params[k].cols() != grads[k].cols() ||
        params[k].rows() != state.m_[k].rows() || params[k].cols() != state.m_[k].cols())
      throw Error("adam_step: shape mismatch for parameter " + std::to_string(k));
  }

  const AdamConfig& c = state.cfg_;
  ++state.t_;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t_));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix g = grads[k] + c.weight_decay * params[k];
    state.m_[k] = c.beta1 * state.m_[k] + (1.0 - c.beta1) * g;
    state.v_[k] = c.beta2 * state.v_[k] + (1.0 - c.beta2) * g.cwiseAbs2();
    params[k].array() -= c.lr * (state.m_[k].array() / bias1) /
                         ((state.v_[k].array() / bias2).sqrt() + c.eps);
  }
}

}  // namespace fixgcn
