#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmmn/errors.hpp"

namespace hmmn {

template <typename T>
using Vector = std::vector<T>;

// Dense column-major matrix. Columns are the unit everything else works in
// (memory slots, answer choices, word vectors), so they are kept contiguous.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[j * rows_ + i];
  }

  std::span<T> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const T> col(std::size_t j) const {
    return {data_.data() + j * rows_, rows_};
  }

  Vector<T> col_copy(std::size_t j) const {
    auto c = col(j);
    return Vector<T>(c.begin(), c.end());
  }

  void set_col(std::size_t j, std::span<const T> v) {
    if (v.size() != rows_) throw DimensionError("set_col: length mismatch");
    std::copy(v.begin(), v.end(), data_.begin() + j * rows_);
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  static Matrix from_columns(const std::vector<Vector<T>>& columns) {
    if (columns.empty()) throw DimensionError("from_columns: no columns");
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].size() != m.rows_)
        throw DimensionError("from_columns: ragged columns");
      m.set_col(j, columns[j]);
    }
    return m;
  }

  bool all_finite() const {
    for (const T& x : data_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  T acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T dot(const Vector<T>& a, const Vector<T>& b) {
  return dot(std::span<const T>(a), std::span<const T>(b));
}

// mutable-span adapters (template deduction does not add const on its own)
template <typename T>
T dot(std::span<T> a, std::span<const T> b) {
  return dot(std::span<const T>(a), b);
}
template <typename T>
T dot(std::span<const T> a, std::span<T> b) {
  return dot(a, std::span<const T>(b));
}
template <typename T>
T dot(std::span<T> a, std::span<T> b) {
  return dot(std::span<const T>(a), std::span<const T>(b));
}

// y += alpha * x
template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

template <typename T>
void axpy(T alpha, const Vector<T>& x, Vector<T>& y) {
  axpy(alpha, std::span<const T>(x), std::span<T>(y));
}

template <typename T>
void axpy(T alpha, std::span<T> x, std::span<T> y) {
  axpy(alpha, std::span<const T>(x), y);
}

// W * x
template <typename T>
Vector<T> matvec(const Matrix<T>& W, std::span<const T> x) {
  if (W.cols() != x.size()) throw DimensionError("matvec: shape mismatch");
  Vector<T> out(W.rows(), T{});
  for (std::size_t j = 0; j < W.cols(); ++j) axpy(x[j], W.col(j), std::span<T>(out));
  return out;
}

// W^T * x  (projections are stored input-dim x output-dim, like W1: d_w x d)
template <typename T>
Vector<T> matvec_t(const Matrix<T>& W, std::span<const T> x) {
  if (W.rows() != x.size()) throw DimensionError("matvec_t: shape mismatch");
  Vector<T> out(W.cols());
  for (std::size_t j = 0; j < W.cols(); ++j) out[j] = dot(W.col(j), x);
  return out;
}

template <typename T>
Vector<T> matvec(const Matrix<T>& W, std::span<T> x) {
  return matvec(W, std::span<const T>(x));
}

template <typename T>
Vector<T> matvec_t(const Matrix<T>& W, std::span<T> x) {
  return matvec_t(W, std::span<const T>(x));
}

// A += scale * u * v^T
template <typename T>
void add_outer(Matrix<T>& A, std::span<const T> u, std::span<const T> v, T scale = T(1)) {
  if (A.rows() != u.size() || A.cols() != v.size())
    throw DimensionError("add_outer: shape mismatch");
  for (std::size_t j = 0; j < v.size(); ++j) axpy(scale * v[j], u, A.col(j));
}

// Numerically stable softmax over all entries (max subtracted before exp).
// Normalization runs across the slot index, i.e. the whole input vector.
template <typename T>
Vector<T> softmax(std::span<const T> scores) {
  if (scores.empty()) throw DimensionError("softmax: empty input");
  T hi = *std::max_element(scores.begin(), scores.end());
  Vector<T> out(scores.size());
  T sum{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - hi);
    sum += out[i];
  }
  for (T& x : out) x /= sum;
  return out;
}

template <typename T>
Vector<T> softmax(const Vector<T>& scores) {
  return softmax(std::span<const T>(scores));
}

// sum_i weights_i * M_:i
template <typename T>
Vector<T> weighted_sum(std::span<const T> weights, const Matrix<T>& M) {
  if (weights.size() != M.cols())
    throw DimensionError("weighted_sum: weight/column mismatch");
  Vector<T> out(M.rows(), T{});
  for (std::size_t j = 0; j < M.cols(); ++j) axpy(weights[j], M.col(j), std::span<T>(out));
  return out;
}

template <typename T>
Vector<T> weighted_sum(const Vector<T>& weights, const Matrix<T>& M) {
  return weighted_sum(std::span<const T>(weights), M);
}

template <typename T>
bool all_finite(std::span<const T> v) {
  for (const T& x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Seeded deterministic RNG.
//
// SplitMix64 (Steele/Lea/Flood 2014): state advances by the golden-gamma
// constant and is finalized by two xor-multiply rounds. Bit-identical on
// every platform, which is what makes whole runs reproducible from one seed.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    return splitmix_finalize(state_ += 0x9e3779b97f4a7c15ull);
  }

  // uniform in [0, 1), 53 bits of mantissa
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  template <typename T>
  T uniform(T lo, T hi) {
    return static_cast<T>(lo + (hi - lo) * next_double());
  }

  // uniform index in [0, n); modulo bias is irrelevant at the scales used here
  std::size_t next_index(std::size_t n) {
    if (n == 0) throw DimensionError("next_index: empty range");
    return static_cast<std::size_t>(next_u64() % n);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Sub-stream seed derivation: child = finalize(base ^ fnv1a(label) ^ mix(index)).
// Independent of draw order on the parent, so the label set alone defines
// every stream a run will ever use.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index = 0) {
  return splitmix_finalize(base ^ fnv1a64(label) ^
                           splitmix_finalize(index + 0x51a0b2c3d4e5f607ull));
}

// Seeded in-place Fisher-Yates shuffle.
template <typename Seq>
void shuffle(Seq& seq, SplitMix64& rng) {
  if (seq.size() < 2) return;
  for (std::size_t i = seq.size() - 1; i > 0; --i) {
    std::size_t j = rng.next_index(i + 1);
    std::swap(seq[i], seq[j]);
  }
}

}  // namespace hmmn
