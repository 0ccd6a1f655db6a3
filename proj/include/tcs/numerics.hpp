// Dense and sparse-ternary linear algebra primitives plus seeded randomness.
// All floating-point reductions use a fixed ascending-index summation order so
// results are reproducible bit-for-bit across runs of the same build.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcs {

/// Row-major dense matrix of 64-bit reals.
class DenseMatrix {
public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
      if (r.size() != m.cols_) throw std::invalid_argument("from_rows: ragged row lengths");
      std::size_t j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return values_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return values_.data() + i * cols_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool is_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One nonzero of a ternary column: row index and sign (-1 or +1).
struct TernaryEntry {
  std::uint32_t row = 0;
  std::int8_t sign = 1;

  friend bool operator==(const TernaryEntry& a, const TernaryEntry& b) {
    return a.row == b.row && a.sign == b.sign;
  }
};

/// n x m ternary matrix with exactly k nonzeros per column, stored compactly
/// as per-column (row, sign) records with strictly increasing row indices.
struct SparseTernaryMatrix {
  std::uint32_t n = 0;
  std::uint32_t m = 0;
  std::uint32_t k = 0;
  std::vector<TernaryEntry> entries;  // column j occupies [j*k, (j+1)*k)

  std::span<const TernaryEntry> column(std::size_t j) const {
    return {entries.data() + j * k, k};
  }
  std::span<TernaryEntry> column(std::size_t j) {
    return {entries.data() + j * k, k};
  }

  /// Throws if the compact layout violates its invariants.
  void validate() const {
    if (k > n) throw std::invalid_argument("SparseTernaryMatrix: k > n");
    if (entries.size() != static_cast<std::size_t>(m) * k)
      throw std::invalid_argument("SparseTernaryMatrix: entry count != m*k");
    for (std::uint32_t j = 0; j < m; ++j) {
      const auto col = column(j);
      for (std::size_t e = 0; e < col.size(); ++e) {
        if (col[e].row >= n) throw std::invalid_argument("SparseTernaryMatrix: row index out of range");
        if (col[e].sign != 1 && col[e].sign != -1)
          throw std::invalid_argument("SparseTernaryMatrix: sign not in {-1,+1}");
        if (e > 0 && col[e].row <= col[e - 1].row)
          throw std::invalid_argument("SparseTernaryMatrix: row indices not strictly increasing");
      }
    }
  }

  friend bool operator==(const SparseTernaryMatrix& a, const SparseTernaryMatrix& b) {
    return a.n == b.n && a.m == b.m && a.k == b.k && a.entries == b.entries;
  }
};

/// Deterministic random source: std::mt19937_64 under the hood (the stream is
/// pinned by the C++ standard), with hand-specified draw mappings so the
/// produced doubles and bounded ints do not depend on library internals.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1): top 53 bits of a raw draw scaled by 2^-53.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform in [0, bound), unbiased via rejection of the tail of 2^64 % bound.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_int: bound must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  /// Fisher-Yates, descending position, swap target drawn with uniform_int.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

/// y_i = sum_j A_ij x_j, ascending j.
inline std::vector<double> dense_matvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw std::invalid_argument("dense_matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

/// Measurements y_j = sum over column-j entries of sign * x_row, ascending
/// entry order; additions and subtractions only. Equals dense_matvec on the
/// densified transpose bit-for-bit.
inline std::vector<double> ternary_matvec(const SparseTernaryMatrix& t, std::span<const double> x) {
  if (x.size() != t.n) throw std::invalid_argument("ternary_matvec: dimension mismatch");
  std::vector<double> y(t.m, 0.0);
  for (std::uint32_t j = 0; j < t.m; ++j) {
    double acc = 0.0;
    for (const TernaryEntry& e : t.column(j)) {
      if (e.row >= t.n) throw std::out_of_range("ternary_matvec: corrupt matrix (row index out of range)");
      if (e.sign > 0)
        acc += x[e.row];
      else
        acc -= x[e.row];
    }
    y[j] = acc;
  }
  return y;
}

/// Expands the compact storage to a dense n x m matrix over {-1, 0, +1}.
inline DenseMatrix densify(const SparseTernaryMatrix& t) {
  DenseMatrix d(t.n, t.m, 0.0);
  for (std::uint32_t j = 0; j < t.m; ++j)
    for (const TernaryEntry& e : t.column(j)) d(e.row, j) = static_cast<double>(e.sign);
  return d;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// C = A * B. Each output element accumulates over ascending k; rows are
/// independent, so the result does not depend on thread count.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols(), 0.0);
  const std::int64_t rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = c.row_ptr(static_cast<std::size_t>(i));
    const double* arow = a.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = arow[k];
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// C = A^T * B with A and B sharing their row count; C_kj = sum_b A_bk B_bj,
/// ascending b. Used for weight gradients.
inline DenseMatrix matmul_transpose_a(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transpose_a: dimension mismatch");
  DenseMatrix c(a.cols(), b.cols(), 0.0);
  const std::int64_t outs = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < outs; ++k) {
    double* crow = c.row_ptr(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double av = a(i, static_cast<std::size_t>(k));
      const double* brow = b.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// C = A * B^T; C_ij = sum_k A_ik B_jk, ascending k. Both operands are read
/// along contiguous rows.
inline DenseMatrix matmul_transpose_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transpose_b: dimension mismatch");
  DenseMatrix c(a.rows(), b.rows(), 0.0);
  const std::int64_t rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* arow = a.row_ptr(static_cast<std::size_t>(i));
    double* crow = c.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

}  // namespace tcs
