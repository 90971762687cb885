#ifndef FIXGCN_FILTER_HPP
#define FIXGCN_FILTER_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "fixgcn/graph.hpp"
#include "fixgcn/types.hpp"

// Spectral modulation filter h_s(λ) = 1 / ((1+s)λ - sλ²) and the propagation
// operator P = ((1-s)I + sÂ)Â it induces through H = PH + X.
//
// h_s has a pole at λ = 0, and every connected graph has a λ = 0 eigenvector,
// so the exact filtering system is singular. direct_filter_solve deflates that
// null space; the network itself never solves anything and only unrolls a
// finite number of propagation steps.

namespace fixgcn {

class SingularityError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSingularityTolerance = 1e-12;
inline constexpr double kZeroEigenvalueTolerance = 1e-10;

/// Scaling parameter s of the filter, restricted to [0, 1]. The endpoints are
/// admitted: s = 0 is first-order GCN propagation, s = 1 second-order.
class FilterParam {
 public:
  explicit FilterParam(double s) : s_(s) {
    if (!(s >= 0.0 && s <= 1.0))
      throw Error("filter parameter s=" + std::to_string(s) + " outside [0, 1]");
  }
  double value() const { return s_; }

 private:
  double s_;
};

template <typename Scalar>
Scalar transfer_function(Scalar s, Scalar lambda) {
  const Scalar denom = (Scalar(1) + s) * lambda - s * lambda * lambda;
  if (std::abs(denom) < Scalar(kSingularityTolerance))
    throw SingularityError("transfer_function: h_s(" + std::to_string(static_cast<double>(lambda)) +
                           ") is singular for s=" + std::to_string(static_cast<double>(s)));
  return Scalar(1) / denom;
}

/// P = ((1-s)I + sÂ)Â applied as two sparse products; Â² is never formed.
/// Holds a reference to Â, which must outlive the operator.
template <typename Scalar = double>
class PropagationOperator {
 public:
  PropagationOperator(const SparseMatrix<Scalar>& ahat, FilterParam s) : ahat_(&ahat), s_(s) {
    if (ahat.rows() != ahat.cols()) throw Error("PropagationOperator: Â must be square");
  }

  const SparseMatrix<Scalar>& ahat() const { return *ahat_; }
  Scalar s() const { return static_cast<Scalar>(s_.value()); }
  Index size() const { return ahat_->rows(); }

 private:
  const SparseMatrix<Scalar>* ahat_;
  FilterParam s_;
};

template <typename Scalar, typename Derived>
DenseMatrix<Scalar> apply_propagation(const PropagationOperator<Scalar>& op,
                                      const Eigen::MatrixBase<Derived>& h) {
  if (h.rows() != op.size())
    throw Error("apply_propagation: H has " + std::to_string(h.rows()) + " rows, operator is " +
                std::to_string(op.size()));
  const Scalar s = op.s();
  const DenseMatrix<Scalar> one_hop = op.ahat() * h;
  if (s == Scalar(0)) return one_hop;
  DenseMatrix<Scalar> two_hop = op.ahat() * one_hop;
  if (s == Scalar(1)) return two_hop;
  return (Scalar(1) - s) * one_hop + s * two_hop;
}

/// t steps of H <- PH + X from H = X, i.e. the partial sum Σ_{k=0..t} P^k X.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> fixed_point_iterate(const PropagationOperator<Scalar>& op,
                                        const Eigen::MatrixBase<Derived>& x, Index steps) {
  if (steps < 0) throw Error("fixed_point_iterate: negative iteration count");
  if (x.rows() != op.size()) throw Error("fixed_point_iterate: dimension mismatch");
  DenseMatrix<Scalar> h = x;
  for (Index t = 0; t < steps; ++t) h = apply_propagation(op, h) + x;
  return h;
}

/// Exact filter response on the range space of L: each eigen-coefficient is
/// scaled by h_s(λ_i), and coefficients on λ_i <= 1e-10 are dropped.
/// The other pole, λ = (1+s)/s, meets the spectrum only for s = 1 on graphs
/// with a bipartite component (λ = 2); that case throws SingularityError.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> direct_filter_solve(const SpectralDecomposition<Scalar>& spec,
                                        const Eigen::MatrixBase<Derived>& x, Scalar s) {
  const auto& u = spec.eigenvectors;
  if (x.rows() != u.rows()) throw Error("direct_filter_solve: dimension mismatch");
  DenseMatrix<Scalar> coeff = u.transpose() * x;
  for (Index i = 0; i < coeff.rows(); ++i) {
    const Scalar lambda = spec.eigenvalues(i);
    if (lambda <= Scalar(kZeroEigenvalueTolerance))
      coeff.row(i).setZero();
    else
      coeff.row(i) *= transfer_function(s, lambda);
  }
  return u * coeff;
}

/// Power-iteration estimate of ρ(P). P is symmetric, so ||P v|| for a unit v
/// never exceeds ρ(P) and converges to it even when ±ρ are both eigenvalues.
template <typename Scalar = double>
Scalar spectral_radius_estimate(const PropagationOperator<Scalar>& op, Index iters,
                                std::uint64_t seed) {
  if (iters < 1) throw Error("spectral_radius_estimate: iters must be >= 1");
  using Vector = DenseMatrix<Scalar>;
  const Index n = op.size();
  if (n == 0) return Scalar(0);

  Vector v(n, 1);
  Scalar norm = 0;
  for (int attempt = 0; attempt < 5 && norm == Scalar(0); ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    for (Index i = 0; i < n; ++i) v(i, 0) = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
    norm = v.norm();
  }
  if (norm == Scalar(0)) throw Error("spectral_radius_estimate: zero start vector after 5 retries");
  v /= norm;

  Scalar estimate = 0;
  for (Index k = 0; k < iters; ++k) {
    Vector w = apply_propagation(op, v);
    estimate = w.norm();
    if (estimate == Scalar(0)) return Scalar(0);
    v = w / estimate;
  }
  return estimate;
}

}  // namespace fixgcn

#endif  // FIXGCN_FILTER_HPP
