#ifndef FIXGCN_TYPES_HPP
#define FIXGCN_TYPES_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace fixgcn {

using Index = Eigen::Index;

template <typename Scalar = double>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Compressed sparse row storage. Column indices are kept sorted within each
// row by Eigen once the matrix is compressed.
template <typename Scalar = double>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

using Matrix = DenseMatrix<double>;
using Sparse = SparseMatrix<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seeded generator used everywhere randomness is involved. std::mt19937_64
// has a fully specified output sequence; the std distributions do not, so the
// conversions to doubles and bounded integers are done by hand to keep runs
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n) by rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a tag (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fixgcn

#endif  // FIXGCN_TYPES_HPP
