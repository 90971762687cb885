#ifndef FIXGCN_AUTODIFF_HPP
#define FIXGCN_AUTODIFF_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "fixgcn/types.hpp"

// Reverse-mode differentiation over dense row-major matrices. Only the ops the
// network needs are provided. Every op appends a node to the tape, so record
// order is a topological order and backward is a single reverse sweep.

namespace fixgcn {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient. The value is copied.
  Var constant(Matrix value);
  /// Leaf without gradient that refers to caller-owned storage.
  Var constant_view(const Matrix& value);
  /// Leaf that receives a gradient.
  Var parameter(Matrix value);
  /// Moves a sparse constant into tape-owned storage so spmm can refer to it
  /// for the lifetime of the tape.
  const Sparse& keep(Sparse s) { return owned_.emplace_back(std::move(s)); }

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() target with respect to v. Zero for
  /// parameters the target does not depend on.
  const Matrix& grad(Var v) const;

  /// Reverse sweep from a 1x1 node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  /// Number of op backward rules executed by the most recent backward().
  std::size_t backward_steps() const { return backward_steps_; }

  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  // Op construction; used by the free functions below.
  Var record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Matrix& node_grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& node_grad_mut(std::size_t id) { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Matrix& node_value(const Node& n) const { return n.external ? *n.external : n.value; }

  std::vector<Node> nodes_;
  std::deque<Sparse> owned_;
  std::size_t backward_steps_ = 0;
};

Var matmul(Var a, Var b);
/// S·H for a constant sparse S that must outlive the tape. S may be rectangular.
Var spmm(const Sparse& s, Var h);
Var add(Var a, Var b);
Var scale(Var a, double alpha);
Var relu(Var a);
Var sum(Var a);
/// Inverted dropout. Identity when !training or p == 0.
Var dropout(Var a, double p, bool training, std::uint64_t seed);
/// Mean over masked rows of -log softmax(logits)_label, computed with row-max
/// subtraction. labels has one entry per logits row.
Var softmax_cross_entropy(Var logits, std::span<const int> labels, std::span<const Index> mask);

/// Inverted dropout on a constant sparse matrix; zeroed entries are removed.
Sparse dropout(const Sparse& x, double p, bool training, std::uint64_t seed);

/// Uniform on [-a, a] with a = sqrt(6 / (rows + cols)).
Matrix glorot_init(Index rows, Index cols, std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Moments and step counter for a fixed list of parameters.
class AdamState {
 public:
  AdamState(AdamConfig cfg, std::span<const Matrix> params);
  const AdamConfig& config() const { return cfg_; }
  long step() const { return t_; }

 private:
  friend void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

/// One Adam update. Weight decay is L2 folded into the gradient before the
/// moment updates: g <- g + wd * param.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);

}  // namespace fixgcn

#endif  // FIXGCN_AUTODIFF_HPP
