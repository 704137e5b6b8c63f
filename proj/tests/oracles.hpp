#pragma once

// Independent reference implementations used only by the tests.

#include <cstdint>
#include <random>
#include <vector>

#include "trapmat/ring_matrix.hpp"

namespace oracle {

using trapmat::DenseMatrix;
using trapmat::Word;

/// Schoolbook product, accumulating in 64 bits and reducing at the end.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      std::uint64_t acc = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += std::uint64_t(a(i, k)) * b(k, j);
      c(i, j) = Word(acc);
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

/// Uniform matrix from the standard library engine, independent of SeededRng.
inline DenseMatrix random(std::size_t r, std::size_t c, std::mt19937_64& gen) {
  DenseMatrix m(r, c);
  std::uniform_int_distribution<std::uint32_t> dist;
  for (auto& w : m.data()) w = dist(gen);
  return m;
}

}  // namespace oracle
