#pragma once

// Dense and sparse matrices over Z/2^32Z. All arithmetic wraps; unsigned 32-bit
// overflow is exactly reduction modulo 2^32, so no explicit reduction is done.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trapmat/errors.hpp"

namespace trapmat {

using Word = std::uint32_t;
inline constexpr unsigned kRingBits = 32;

/// Ring-operation tally. Counts follow the schoolbook (omega = 3) convention.
/// `largest_muls` is the biggest single kernel call seen.
struct OpCounter {
  std::uint64_t ring_muls = 0;
  std::uint64_t ring_adds = 0;
  std::uint64_t largest_muls = 0;

  void reset() noexcept { *this = OpCounter{}; }

  OpCounter& operator+=(const OpCounter& o) noexcept {
    ring_muls += o.ring_muls;
    ring_adds += o.ring_adds;
    largest_muls = std::max(largest_muls, o.largest_muls);
    return *this;
  }
  /// Difference of the tallies; `largest_muls` is kept from `a`.
  friend OpCounter operator-(OpCounter a, const OpCounter& b) noexcept {
    a.ring_muls -= b.ring_muls;
    a.ring_adds -= b.ring_adds;
    return a;
  }
  friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

namespace detail {

inline void count(OpCounter* c, std::uint64_t muls, std::uint64_t adds) noexcept {
  if (c != nullptr) {
    c->ring_muls += muls;
    c->ring_adds += adds;
    c->largest_muls = std::max(c->largest_muls, muls);
  }
}

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void secure_zero(std::span<Word> words) noexcept {
  volatile Word* p = words.data();
  for (std::size_t i = 0; i < words.size(); ++i) p[i] = 0;
}

}  // namespace detail

class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<Word> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("DenseMatrix " + shape() + " needs " + std::to_string(rows_ * cols_) +
                       " words, got " + std::to_string(data_.size()));
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<Word>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<Word> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("from_rows: ragged row");
      data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::string shape() const { return detail::shape_str(rows_, cols_); }

  Word& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  Word operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<Word> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const Word> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<Word> data() noexcept { return data_; }
  std::span<const Word> data() const noexcept { return data_; }

  bool is_zero() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](Word w) { return w == 0; });
  }

  /// Overwrites the contents with zeros in a way the optimiser keeps.
  void zeroize() noexcept { detail::secure_zero(data_); }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Word> data_;
};

struct SparseEntry {
  std::uint32_t row;
  std::uint32_t col;
  Word value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Coordinate-list matrix kept in canonical form: entries sorted by (row, col),
/// duplicate coordinates summed, zero values dropped.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<SparseEntry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    canonicalize();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  std::string shape() const { return detail::shape_str(rows_, cols_); }
  std::span<const SparseEntry> entries() const noexcept { return entries_; }

  DenseMatrix densify() const {
    DenseMatrix out(rows_, cols_);
    for (const auto& e : entries_) out(e.row, e.col) = e.value;
    return out;
  }

  void zeroize() noexcept {
    volatile SparseEntry* p = entries_.data();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      p[i].row = 0;
      p[i].col = 0;
      p[i].value = 0;
    }
    entries_.clear();
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  void canonicalize() {
    for (const auto& e : entries_) {
      if (e.row >= rows_ || e.col >= cols_) {
        throw ShapeError("SparseMatrix " + shape() + ": entry (" + std::to_string(e.row) + ", " +
                         std::to_string(e.col) + ") out of range");
      }
    }
    auto less = [](const SparseEntry& a, const SparseEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    };
    if (!std::is_sorted(entries_.begin(), entries_.end(), less)) {
      std::stable_sort(entries_.begin(), entries_.end(), less);
    }
    std::size_t out = 0;
    for (std::size_t i = 0; i < entries_.size();) {
      SparseEntry acc = entries_[i++];
      while (i < entries_.size() && entries_[i].row == acc.row && entries_[i].col == acc.col) {
        acc.value += entries_[i++].value;
      }
      if (acc.value != 0) entries_[out++] = acc;
    }
    entries_.resize(out);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<SparseEntry> entries_;
};

/// Cache tiling for mat_mul. Results never depend on it. The register tile
/// (4 rows by 64 columns) is fixed; only the depth of the k panel is tunable.
struct GemmTiling {
  std::size_t k_block = 256;
};

inline GemmTiling& gemm_tiling() noexcept {
  static GemmTiling tiling;
  return tiling;
}

namespace detail {

// Output is narrow: dot products against a transposed copy of B.
inline void gemm_narrow(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  const std::size_t m = a.rows(), n = a.cols(), l = b.cols();
  std::vector<Word> bt(l * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < l; ++j) bt[j * n + k] = b(k, j);
  for (std::size_t i = 0; i < m; ++i) {
    const Word* ar = a.row(i).data();
    for (std::size_t j = 0; j < l; ++j) {
      const Word* br = bt.data() + j * n;
      Word acc = 0;
      for (std::size_t k = 0; k < n; ++k) acc += ar[k] * br[k];
      c(i, j) = acc;
    }
  }
}

inline void gemm_blocked(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 64;
  const std::size_t m = a.rows(), n = a.cols(), l = b.cols();
  const std::size_t kb = std::max<std::size_t>(1, gemm_tiling().k_block);
  const Word* A = a.data().data();
  const Word* B = b.data().data();
  Word* C = c.data().data();

  for (std::size_t k0 = 0; k0 < n; k0 += kb) {
    const std::size_t k1 = std::min(n, k0 + kb);
    for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
      const std::size_t i1 = std::min(m, i0 + kRows);
      for (std::size_t j0 = 0; j0 < l; j0 += kCols) {
        const std::size_t j1 = std::min(l, j0 + kCols);
        if (i1 - i0 == kRows && j1 - j0 == kCols) {
          Word acc[kRows][kCols];
          for (std::size_t r = 0; r < kRows; ++r)
            for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = C[(i0 + r) * l + j0 + j];
          for (std::size_t k = k0; k < k1; ++k) {
            const Word* brow = B + k * l + j0;
            for (std::size_t r = 0; r < kRows; ++r) {
              const Word av = A[(i0 + r) * n + k];
              for (std::size_t j = 0; j < kCols; ++j) acc[r][j] += av * brow[j];
            }
          }
          for (std::size_t r = 0; r < kRows; ++r)
            for (std::size_t j = 0; j < kCols; ++j) C[(i0 + r) * l + j0 + j] = acc[r][j];
        } else {
          for (std::size_t i = i0; i < i1; ++i) {
            Word* crow = C + i * l;
            for (std::size_t k = k0; k < k1; ++k) {
              const Word av = A[i * n + k];
              const Word* brow = B + k * l;
              for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
          }
        }
      }
    }
  }
}

inline void require_same_shape(const char* op, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

}  // namespace detail

/// Exact product over Z/2^32Z. Adds m*n*l ring multiplications to `counter`.
inline DenseMatrix mat_mul(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  if (a.cols() != b.rows()) {
    throw ShapeError("mat_mul: inner dimensions differ, " + a.shape() + " times " + b.shape());
  }
  DenseMatrix c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  if (b.cols() < 16) {
    detail::gemm_narrow(a, b, c);
  } else {
    detail::gemm_blocked(a, b, c);
  }
  const std::uint64_t work = std::uint64_t(a.rows()) * a.cols() * b.cols();
  detail::count(counter, work, work);
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a);

/// A^T B without forming A^T when B is narrow. Adds A.cols * A.rows * B.cols
/// ring multiplications to `counter`.
inline DenseMatrix mat_mul_tn(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  if (a.rows() != b.rows()) {
    throw ShapeError("mat_mul_tn: row counts differ, " + a.shape() + "^T times " + b.shape());
  }
  if (b.cols() >= 16) return mat_mul(transpose(a), b, counter);
  const std::size_t n = a.rows(), m = a.cols(), l = b.cols();
  DenseMatrix c(m, l);
  std::vector<Word> row(m);
  for (std::size_t j = 0; j < l; ++j) {
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      const Word bv = b(k, j);
      const Word* ar = a.row(k).data();
      for (std::size_t i = 0; i < m; ++i) row[i] += ar[i] * bv;
    }
    for (std::size_t i = 0; i < m; ++i) c(i, j) = row[i];
  }
  const std::uint64_t work = std::uint64_t(m) * n * l;
  detail::count(counter, work, work);
  return c;
}

/// S * B with S sparse. Costs nnz(S) * B.cols multiplications.
inline DenseMatrix sparse_dense_mul(const SparseMatrix& s, const DenseMatrix& b, OpCounter* counter = nullptr) {
  if (s.cols() != b.rows()) {
    throw ShapeError("sparse_dense_mul: inner dimensions differ, " + s.shape() + " times " + b.shape());
  }
  const std::size_t l = b.cols();
  DenseMatrix out(s.rows(), l);
  if (l == 1) {
    // Entries are sorted by row: sum each row run in registers.
    Word* dst = out.data().data();
    const Word* src = b.data().data();
    const auto es = s.entries();
    for (std::size_t i = 0; i < es.size();) {
      const std::uint32_t r = es[i].row;
      Word acc[4] = {0, 0, 0, 0};
      for (; i + 3 < es.size() && es[i + 3].row == r; i += 4) {
        acc[0] += es[i].value * src[es[i].col];
        acc[1] += es[i + 1].value * src[es[i + 1].col];
        acc[2] += es[i + 2].value * src[es[i + 2].col];
        acc[3] += es[i + 3].value * src[es[i + 3].col];
      }
      for (; i < es.size() && es[i].row == r; ++i) acc[0] += es[i].value * src[es[i].col];
      dst[r] += acc[0] + acc[1] + acc[2] + acc[3];
    }
    detail::count(counter, s.nnz(), s.nnz());
    return out;
  }
  for (const auto& e : s.entries()) {
    Word* dst = out.row(e.row).data();
    const Word* src = b.row(e.col).data();
    const Word v = e.value;
    for (std::size_t j = 0; j < l; ++j) dst[j] += v * src[j];
  }
  detail::count(counter, std::uint64_t(s.nnz()) * l, std::uint64_t(s.nnz()) * l);
  return out;
}

/// A * T with T sparse. Costs nnz(T) * A.rows multiplications.
inline DenseMatrix dense_sparse_mul(const DenseMatrix& a, const SparseMatrix& t, OpCounter* counter = nullptr) {
  if (a.cols() != t.rows()) {
    throw ShapeError("dense_sparse_mul: inner dimensions differ, " + a.shape() + " times " + t.shape());
  }
  DenseMatrix out(a.rows(), t.cols());
  const auto entries = t.entries();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const Word* arow = a.row(i).data();
    Word* orow = out.row(i).data();
    for (const auto& e : entries) orow[e.col] += arow[e.row] * e.value;
  }
  detail::count(counter, std::uint64_t(t.nnz()) * a.rows(), std::uint64_t(t.nnz()) * a.rows());
  return out;
}

inline DenseMatrix mat_add(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  detail::require_same_shape("mat_add", a, b);
  DenseMatrix out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  detail::count(counter, 0, dst.size());
  return out;
}

inline DenseMatrix mat_sub(const DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  detail::require_same_shape("mat_sub", a, b);
  DenseMatrix out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  detail::count(counter, 0, dst.size());
  return out;
}

/// In-place a += b.
inline void add_in_place(DenseMatrix& a, const DenseMatrix& b, OpCounter* counter = nullptr) {
  detail::require_same_shape("add_in_place", a, b);
  auto dst = a.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  detail::count(counter, 0, dst.size());
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile)
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile)
      for (std::size_t i = i0; i < std::min(a.rows(), i0 + kTile); ++i)
        for (std::size_t j = j0; j < std::min(a.cols(), j0 + kTile); ++j) out(j, i) = a(i, j);
  return out;
}

/// A + S without densifying S.
inline DenseMatrix add_sparse_into(DenseMatrix a, const SparseMatrix& s, OpCounter* counter = nullptr) {
  if (a.rows() != s.rows() || a.cols() != s.cols()) {
    throw ShapeError("add_sparse_into: shape mismatch " + a.shape() + " vs " + s.shape());
  }
  for (const auto& e : s.entries()) a(e.row, e.col) += e.value;
  detail::count(counter, 0, s.nnz());
  return a;
}

}  // namespace trapmat
