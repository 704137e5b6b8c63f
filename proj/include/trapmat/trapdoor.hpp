#pragma once

// Trapdoored pseudorandom matrices built from a chain of LPN subspace factors
// L_1 (n_0 x n_1), ..., L_d (n_{d-1} x n_d).
//
//   right mask  B' = F_d G + sum_{i<d} F_i T_{i+1}        (n x l)
//   left mask   A' = H F_d^T + sum_{i<d} S_{i+1} F_i^T    (m x n)
//
// where F_i = L_1 ... L_i (F_0 = identity, never materialised), G and H are
// uniform and S, T are LPN noise. Products of a mask with anything else only
// touch the thin factors F_i and the sparse noise terms.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/lpn.hpp"
#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"

namespace trapmat {

struct SubspaceChain {
  std::vector<DenseMatrix> factors;  // factors[i-1] = L_i

  std::size_t depth() const noexcept { return factors.size(); }
  const DenseMatrix& L(std::size_t i) const { return factors.at(i - 1); }
  /// n_i for i in 0..d.
  std::size_t dim(std::size_t i) const { return i == 0 ? factors.at(0).rows() : factors.at(i - 1).cols(); }

  /// Throws unless the factors are non-empty and chain-compatible.
  void validate() const {
    if (factors.empty()) throw ProtocolError("subspace chain is empty");
    for (std::size_t i = 1; i < factors.size(); ++i) {
      if (factors[i - 1].cols() != factors[i].rows()) {
        throw ShapeError("subspace chain: L_" + std::to_string(i) + " is " + factors[i - 1].shape() + " but L_" +
                         std::to_string(i + 1) + " is " + factors[i].shape());
      }
    }
  }

  bool matches(const LpnSchedule& s) const {
    if (factors.size() != s.depth()) return false;
    for (std::size_t i = 1; i <= depth(); ++i) {
      if (L(i).rows() != s.dims[i - 1] || L(i).cols() != s.dims[i]) return false;
    }
    return true;
  }
};

inline SubspaceChain gen_chain(const LpnSchedule& schedule, SeededRng& rng) {
  schedule.validate();
  SubspaceChain chain;
  for (std::size_t i = 1; i <= schedule.depth(); ++i) {
    chain.factors.push_back(sample_uniform(schedule.dims[i - 1], schedule.dims[i], rng));
  }
  return chain;
}

/// Forward products F_i = L_1...L_i and Gram blocks F_j^T F_i for i, j in 1..d.
/// Index 0 (the identity) is implicit: gram(0, i) is F_i.
class ChainProducts {
 public:
  ChainProducts() = default;
  ChainProducts(std::vector<DenseMatrix> forward, std::vector<DenseMatrix> gram)
      : forward_(std::move(forward)), gram_(std::move(gram)) {
    if (gram_.size() != forward_.size() * forward_.size()) {
      throw ShapeError("chain products: expected " + std::to_string(forward_.size() * forward_.size()) +
                       " gram blocks, got " + std::to_string(gram_.size()));
    }
  }

  std::size_t depth() const noexcept { return forward_.size(); }
  const DenseMatrix& forward(std::size_t i) const { return forward_.at(i - 1); }
  /// F_j^T F_i for 1 <= i, j <= d; j == 0 returns F_i.
  const DenseMatrix& gram(std::size_t j, std::size_t i) const {
    if (j == 0) return forward(i);
    return gram_.at((j - 1) * depth() + (i - 1));
  }

  std::span<const DenseMatrix> forward_all() const noexcept { return forward_; }
  std::span<const DenseMatrix> gram_all() const noexcept { return gram_; }

  /// Shapes agree with `chain`: F_i is n_0 x n_i and gram(j, i) is n_j x n_i.
  bool shapes_match(const SubspaceChain& chain) const {
    const std::size_t d = chain.depth();
    if (depth() != d) return false;
    for (std::size_t i = 1; i <= d; ++i) {
      if (forward(i).rows() != chain.dim(0) || forward(i).cols() != chain.dim(i)) return false;
      for (std::size_t j = 1; j <= d; ++j) {
        if (gram(j, i).rows() != chain.dim(j) || gram(j, i).cols() != chain.dim(i)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const ChainProducts&, const ChainProducts&) = default;

 private:
  std::vector<DenseMatrix> forward_;
  std::vector<DenseMatrix> gram_;
};

namespace detail {

inline DenseMatrix vstack(std::span<const DenseMatrix* const> parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front()->cols();
  for (const auto* p : parts) rows += p->rows();
  DenseMatrix out(rows, cols);
  std::size_t at = 0;
  for (const auto* p : parts) {
    std::copy(p->data().begin(), p->data().end(), out.data().begin() + std::ptrdiff_t(at * cols));
    at += p->rows();
  }
  return out;
}

inline DenseMatrix row_slice(const DenseMatrix& m, std::size_t first, std::size_t count) {
  std::vector<Word> data(m.data().begin() + std::ptrdiff_t(first * m.cols()),
                         m.data().begin() + std::ptrdiff_t((first + count) * m.cols()));
  return DenseMatrix(count, m.cols(), std::move(data));
}

}  // namespace detail

/// Computes every forward and Gram product. For each i, the blocks
/// [F_{i-1}; gram(1, i-1); ...; gram(i-1, i-1)] are stacked and multiplied by
/// L_i in one batch, then gram(i, i) = gram(i-1, i)^T L_i. The lower triangle
/// is filled by transposition.
inline ChainProducts chain_products_local(const SubspaceChain& chain, OpCounter* counter = nullptr) {
  chain.validate();
  const std::size_t d = chain.depth();
  std::vector<DenseMatrix> fwd(d);
  std::vector<DenseMatrix> gram(d * d);
  auto g = [&](std::size_t j, std::size_t i) -> DenseMatrix& { return gram[(j - 1) * d + (i - 1)]; };

  fwd[0] = chain.L(1);
  g(1, 1) = mat_mul(transpose(chain.L(1)), chain.L(1), counter);
  for (std::size_t i = 2; i <= d; ++i) {
    std::vector<const DenseMatrix*> parts{&fwd[i - 2]};
    for (std::size_t j = 1; j < i; ++j) parts.push_back(&g(j, i - 1));
    const DenseMatrix stacked = mat_mul(detail::vstack(parts), chain.L(i), counter);
    std::size_t at = 0;
    fwd[i - 1] = detail::row_slice(stacked, at, chain.dim(0));
    at += chain.dim(0);
    for (std::size_t j = 1; j < i; ++j) {
      g(j, i) = detail::row_slice(stacked, at, chain.dim(j));
      at += chain.dim(j);
    }
    g(i, i) = mat_mul(transpose(g(i - 1, i)), chain.L(i), counter);
  }
  for (std::size_t i = 1; i <= d; ++i)
    for (std::size_t j = i + 1; j <= d; ++j) g(j, i) = transpose(g(i, j));
  return ChainProducts(std::move(fwd), std::move(gram));
}

/// Left-mask trapdoor: H (m x n_d) and S_{i} (m x n_{i-1}) at rate mu_i.
struct LeftMaskSecret {
  DenseMatrix H;
  std::vector<SparseMatrix> S;  // S[i-1] = S_i

  LeftMaskSecret() = default;
  LeftMaskSecret(DenseMatrix h, std::vector<SparseMatrix> s) : H(std::move(h)), S(std::move(s)) {}
  LeftMaskSecret(const LeftMaskSecret&) = default;
  LeftMaskSecret(LeftMaskSecret&&) noexcept = default;
  LeftMaskSecret& operator=(const LeftMaskSecret&) = default;
  LeftMaskSecret& operator=(LeftMaskSecret&&) noexcept = default;
  ~LeftMaskSecret() { zeroize(); }

  std::size_t depth() const noexcept { return S.size(); }

  void zeroize() noexcept {
    H.zeroize();
    for (auto& s : S) s.zeroize();
  }
};

/// Right-mask trapdoor: G (n_d x l) and T_i (n_{i-1} x l) at rate mu_i.
struct RightMaskSecret {
  DenseMatrix G;
  std::vector<SparseMatrix> T;  // T[i-1] = T_i

  RightMaskSecret() = default;
  RightMaskSecret(DenseMatrix g, std::vector<SparseMatrix> t) : G(std::move(g)), T(std::move(t)) {}
  RightMaskSecret(const RightMaskSecret&) = default;
  RightMaskSecret(RightMaskSecret&&) noexcept = default;
  RightMaskSecret& operator=(const RightMaskSecret&) = default;
  RightMaskSecret& operator=(RightMaskSecret&&) noexcept = default;
  ~RightMaskSecret() { zeroize(); }

  std::size_t depth() const noexcept { return T.size(); }
  std::size_t width() const noexcept { return G.cols(); }

  void zeroize() noexcept {
    G.zeroize();
    for (auto& t : T) t.zeroize();
  }
};

inline LeftMaskSecret sample_left_secret(std::size_t m, const LpnSchedule& s, SeededRng& rng) {
  LeftMaskSecret secret;
  secret.H = sample_uniform(m, s.floor_dim(), rng);
  for (std::size_t i = 1; i <= s.depth(); ++i) secret.S.push_back(sample_noise(m, s.dims[i - 1], s.mu(i), rng));
  return secret;
}

inline RightMaskSecret sample_right_secret(std::size_t l, const LpnSchedule& s, SeededRng& rng) {
  RightMaskSecret secret;
  secret.G = sample_uniform(s.floor_dim(), l, rng);
  for (std::size_t i = 1; i <= s.depth(); ++i) secret.T.push_back(sample_noise(s.dims[i - 1], l, s.mu(i), rng));
  return secret;
}

namespace detail {

inline void require_depth(const char* op, std::size_t have, std::size_t want) {
  if (have != want) {
    throw ShapeError(std::string(op) + ": secret depth " + std::to_string(have) + " does not match chain depth " +
                     std::to_string(want));
  }
}

}  // namespace detail

/// B' = F_d G + T_1 + sum_{i=1}^{d-1} F_i T_{i+1}, using the precomputed
/// forward products. Costs n n_d l plus n nnz(T_{i+1}) per sparse term.
inline DenseMatrix expand_right_mask(const ChainProducts& cp, const RightMaskSecret& secret,
                                     OpCounter* counter = nullptr) {
  const std::size_t d = cp.depth();
  detail::require_depth("expand_right_mask", secret.depth(), d);
  DenseMatrix out = mat_mul(cp.forward(d), secret.G, counter);
  out = add_sparse_into(std::move(out), secret.T[0], counter);
  for (std::size_t i = 1; i < d; ++i) add_in_place(out, dense_sparse_mul(cp.forward(i), secret.T[i], counter), counter);
  return out;
}

/// The same mask in nested form T_1 + L_1(T_2 + L_2(... (T_d + L_d G))).
/// Costs sum n_{i-1} n_i l; used as an independent route to expand_right_mask.
inline DenseMatrix expand_right_mask_nested(const SubspaceChain& chain, const RightMaskSecret& secret,
                                            OpCounter* counter = nullptr) {
  const std::size_t d = chain.depth();
  detail::require_depth("expand_right_mask_nested", secret.depth(), d);
  DenseMatrix acc = secret.G;
  for (std::size_t i = d; i >= 1; --i) acc = add_sparse_into(mat_mul(chain.L(i), acc, counter), secret.T[i - 1], counter);
  return acc;
}

/// A' = H F_d^T + S_1 + sum_{i=1}^{d-1} S_{i+1} F_i^T.
inline DenseMatrix expand_left_mask(const ChainProducts& cp, const LeftMaskSecret& secret,
                                    OpCounter* counter = nullptr) {
  const std::size_t d = cp.depth();
  detail::require_depth("expand_left_mask", secret.depth(), d);
  DenseMatrix out = mat_mul(secret.H, transpose(cp.forward(d)), counter);
  out = add_sparse_into(std::move(out), secret.S[0], counter);
  for (std::size_t i = 1; i < d; ++i) {
    add_in_place(out, sparse_dense_mul(secret.S[i], transpose(cp.forward(i)), counter), counter);
  }
  return out;
}

/// Nested form (((H L_d^T + S_d) L_{d-1}^T + S_{d-1}) ... ) L_1^T + S_1.
inline DenseMatrix expand_left_mask_nested(const SubspaceChain& chain, const LeftMaskSecret& secret,
                                           OpCounter* counter = nullptr) {
  const std::size_t d = chain.depth();
  detail::require_depth("expand_left_mask_nested", secret.depth(), d);
  DenseMatrix acc = secret.H;
  for (std::size_t i = d; i >= 1; --i) {
    acc = add_sparse_into(mat_mul(acc, transpose(chain.L(i)), counter), secret.S[i - 1], counter);
  }
  return acc;
}

/// A' F_i for i = 1..d from the Gram blocks alone:
///   A' F_i = H gram(d, i) + S_1 F_i + sum_{j=1}^{d-1} S_{j+1} gram(j, i).
/// No product with an n-sized dense dimension on both sides is formed.
inline std::vector<DenseMatrix> left_partials_from_secret(const ChainProducts& cp, const LeftMaskSecret& secret,
                                                          OpCounter* counter = nullptr) {
  const std::size_t d = cp.depth();
  detail::require_depth("left_partials_from_secret", secret.depth(), d);
  std::vector<DenseMatrix> out;
  out.reserve(d);
  for (std::size_t i = 1; i <= d; ++i) {
    DenseMatrix acc = mat_mul(secret.H, cp.gram(d, i), counter);
    for (std::size_t j = 0; j < d; ++j) add_in_place(acc, sparse_dense_mul(secret.S[j], cp.gram(j, i), counter), counter);
    out.push_back(std::move(acc));
  }
  return out;
}

/// A F_i for i = 0..d. Index 0 refers to A itself, shared rather than copied.
struct PrecomputedLeft {
  std::shared_ptr<const DenseMatrix> base;
  std::vector<DenseMatrix> partials;  // partials[i-1] = A F_i

  std::size_t depth() const noexcept { return partials.size(); }
  const DenseMatrix& at(std::size_t i) const { return i == 0 ? *base : partials.at(i - 1); }
};

/// A B' = (A F_d) G + A T_1 + sum_{i=1}^{d-1} (A F_i) T_{i+1}.
inline DenseMatrix fast_AB_prime(const PrecomputedLeft& al, const RightMaskSecret& secret,
                                 OpCounter* counter = nullptr) {
  const std::size_t d = al.depth();
  detail::require_depth("fast_AB_prime", secret.depth(), d);
  DenseMatrix out = mat_mul(al.at(d), secret.G, counter);
  for (std::size_t i = 0; i < d; ++i) add_in_place(out, dense_sparse_mul(al.at(i), secret.T[i], counter), counter);
  return out;
}

/// A' B_enc = H (F_d^T B_enc) + S_1 B_enc + sum_{i=1}^{d-1} S_{i+1} (F_i^T B_enc).
/// `probes[i-1]` holds F_i^T B_enc.
inline DenseMatrix fast_Aprime_Benc(const LeftMaskSecret& secret, const DenseMatrix& b_enc,
                                    std::span<const DenseMatrix> probes, OpCounter* counter = nullptr) {
  const std::size_t d = probes.size();
  detail::require_depth("fast_Aprime_Benc", secret.depth(), d);
  DenseMatrix out = mat_mul(secret.H, probes[d - 1], counter);
  add_in_place(out, sparse_dense_mul(secret.S[0], b_enc, counter), counter);
  for (std::size_t i = 1; i < d; ++i) add_in_place(out, sparse_dense_mul(secret.S[i], probes[i - 1], counter), counter);
  return out;
}

/// Pair handed out by TargetedGenerator: a mask block B'_i and A B'_i.
struct MaskBlock {
  DenseMatrix mask;
  DenseMatrix product;
};

/// Amortised targeted generator. One delegated m x n by n x (t l) product
/// yields M and A M; each pull returns the next n x l column block of M
/// together with the matching block of A M.
class TargetedGenerator {
 public:
  using Delegate = std::function<DenseMatrix(const DenseMatrix&)>;

  TargetedGenerator(const LpnSchedule& schedule, const ChainProducts& cp, const Delegate& delegate_multiply,
                    std::size_t batch, std::size_t width, SeededRng& rng)
      : width_(width) {
    if (batch == 0 || width == 0) throw ConfigError("targeted generator needs batch >= 1 and width >= 1");
    RightMaskSecret secret = sample_right_secret(batch * width, schedule, rng);
    const DenseMatrix m = expand_right_mask(cp, secret);
    const DenseMatrix am = delegate_multiply(m);
    if (am.cols() != m.cols()) throw ShapeError("targeted generator: delegate returned " + am.shape());
    blocks_.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) blocks_.push_back({column_block(m, b), column_block(am, b)});
  }

  std::size_t remaining() const noexcept { return blocks_.size() - next_; }
  std::size_t width() const noexcept { return width_; }

  MaskBlock pull() {
    if (next_ == blocks_.size()) throw GeneratorExhausted("targeted generator exhausted; build a new batch");
    return std::move(blocks_[next_++]);
  }

 private:
  DenseMatrix column_block(const DenseMatrix& src, std::size_t b) const {
    DenseMatrix out(src.rows(), width_);
    for (std::size_t r = 0; r < src.rows(); ++r) {
      const auto row = src.row(r).subspan(b * width_, width_);
      std::copy(row.begin(), row.end(), out.row(r).begin());
    }
    return out;
  }

  std::size_t width_;
  std::vector<MaskBlock> blocks_;
  std::size_t next_ = 0;
};

}  // namespace trapmat
