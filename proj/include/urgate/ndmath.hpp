// Dense numerics shared by every other module: elementwise nonlinearities,
// affine maps, reductions, seeded pseudo-random generation and norm utilities.
//
// Matrices and vectors are Eigen dense types in 64-bit float. All operations
// here are pure functions; Rng is single-owner (use distinct stream ids for
// parallel work).

#ifndef URGATE_NDMATH_HPP
#define URGATE_NDMATH_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace urgate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Rng
//
// xoshiro256++ seeded via splitmix64 from (seed, stream). The generator is
// version-pinned: identical (seed, stream) produces the identical byte stream
// on every platform. Doubles are drawn from the top 53 bits.
// ---------------------------------------------------------------------------
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& si : s_) si = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) {
      throw std::invalid_argument("rng_uniform: lo must be < hi (lo=" +
                                  std::to_string(lo) +
                                  ", hi=" + std::to_string(hi) + ")");
    }
    return lo + (hi - lo) * next_double();
  }

  Vector uniform_vector(Eigen::Index n, double lo, double hi) {
    if (!(lo < hi)) {
      throw std::invalid_argument("rng_uniform: lo must be < hi");
    }
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * next_double();
    return v;
  }

  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo,
                        double hi) {
    if (!(lo < hi)) {
      throw std::invalid_argument("rng_uniform: lo must be < hi");
    }
    Matrix m(rows, cols);
    // Row-major fill order so the stream layout is independent of Eigen's
    // internal storage order.
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = lo + (hi - lo) * next_double();
    return m;
  }

  // Integer in [lo, hi] inclusive, rejection-free via 64-bit modulo of a
  // widened draw (bias < 2^-32 for the small ranges used here).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Derived>
typename Derived::PlainObject sigmoid(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double x) { return sigmoid(x); });
}

// Clamps p into [eps, 1-eps] then returns log(p/(1-p)).
inline double inverse_sigmoid(double p, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("inverse_sigmoid: eps must be in (0, 0.5)");
  }
  const double q = std::min(std::max(p, eps), 1.0 - eps);
  return std::log(q / (1.0 - q));
}

inline double tanh_act(double x) { return std::tanh(x); }

template <typename Derived>
typename Derived::PlainObject tanh_act(const Eigen::MatrixBase<Derived>& m) {
  return m.array().tanh().matrix();
}

inline Vector softmax(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("softmax: empty vector");
  const double m = v.maxCoeff();
  Vector e = (v.array() - m).exp().matrix();
  return e / e.sum();
}

// cumsum(softmax(v)): nondecreasing, entries in [0,1], last entry 1.
// The cumulative sum is sequential left-to-right so results are bit-stable.
inline Vector cumax(const Vector& v) {
  Vector s = softmax(v);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    acc += s[i];
    s[i] = acc;
  }
  return s;
}

inline Vector affine(const Matrix& W, const Vector& x, const Vector& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw std::invalid_argument(
        "affine: shape mismatch, W is " + std::to_string(W.rows()) + "x" +
        std::to_string(W.cols()) + ", x has " + std::to_string(x.size()) +
        ", b has " + std::to_string(b.size()));
  }
  return W * x + b;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

inline double global_norm(const std::vector<const Matrix*>& vs) {
  double sq = 0.0;
  for (const Matrix* m : vs) sq += m->squaredNorm();
  return std::sqrt(sq);
}

inline double clip_by_global_norm(const std::vector<Matrix*>& vs,
                                  double max_norm) {
  if (!(max_norm > 0.0)) {
    throw std::invalid_argument("clip_by_global_norm: max_norm must be > 0");
  }
  double sq = 0.0;
  for (const Matrix* m : vs) sq += m->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix* m : vs) *m *= scale;
  }
  return norm;
}

}  // namespace urgate

#endif  // URGATE_NDMATH_HPP
