#pragma once

// Closed-form byte and multiplication counts for a session, as functions of
// the shapes alone. The tests compare these against what the transport and
// the operation counters actually record.

#include <cstdint>
#include <vector>

#include "trapmat/lpn.hpp"
#include "trapmat/message.hpp"
#include "trapmat/wire.hpp"

namespace trapmat {

struct ByteForecast {
  std::uint64_t chain_upload = 0;
  std::uint64_t chain_products_reply = 0;
  std::uint64_t aenc_upload = 0;
  std::uint64_t aenc_partials_reply = 0;
  std::vector<std::uint64_t> online_request;  // one per online step
  std::vector<std::uint64_t> online_reply;

  std::uint64_t init_total() const noexcept {
    return chain_upload + chain_products_reply + aenc_upload + aenc_partials_reply;
  }
  std::uint64_t total() const noexcept {
    std::uint64_t t = init_total();
    for (auto b : online_request) t += b;
    for (auto b : online_reply) t += b;
    return t;
  }
};

namespace detail {
inline constexpr std::uint64_t kMessageOverhead = kFrameHeaderSize + 4;
}

/// Bytes on the wire for one session with m x n left operand and the given
/// online widths.
inline ByteForecast predict_bytes(std::size_t m, const LpnSchedule& s, const std::vector<std::size_t>& widths) {
  const auto& dims = s.dims;
  const std::size_t d = s.depth();
  ByteForecast f;
  f.chain_upload = detail::kMessageOverhead;
  f.chain_products_reply = detail::kMessageOverhead;
  f.aenc_partials_reply = detail::kMessageOverhead;
  for (std::size_t i = 1; i <= d; ++i) {
    f.chain_upload += encoded_dense_size(dims[i - 1], dims[i]);
    f.chain_products_reply += encoded_dense_size(dims[0], dims[i]);
    for (std::size_t j = 1; j <= d; ++j) f.chain_products_reply += encoded_dense_size(dims[j], dims[i]);
    f.aenc_partials_reply += encoded_dense_size(m, dims[i]);
  }
  f.aenc_upload = detail::kMessageOverhead + encoded_dense_size(m, dims[0]);
  for (std::size_t l : widths) {
    f.online_request.push_back(detail::kMessageOverhead + encoded_dense_size(dims[0], l));
    std::uint64_t reply = detail::kMessageOverhead + encoded_dense_size(m, l);
    for (std::size_t i = 1; i <= d; ++i) reply += encoded_dense_size(dims[i], l);
    f.online_reply.push_back(reply);
  }
  return f;
}

/// Server ring multiplications for the chain products (batched order).
inline std::uint64_t predict_server_chain_muls(const LpnSchedule& s) {
  const auto& n = s.dims;
  std::uint64_t muls = std::uint64_t(n[1]) * n[0] * n[1];
  for (std::size_t i = 2; i <= s.depth(); ++i) {
    std::uint64_t stacked = n[0];
    for (std::size_t j = 1; j < i; ++j) stacked += n[j];
    muls += stacked * n[i - 1] * n[i] + std::uint64_t(n[i]) * n[i - 1] * n[i];
  }
  return muls;
}

/// Server ring multiplications for A_enc F_1 .. A_enc F_d.
inline std::uint64_t predict_server_aenc_muls(std::size_t m, const LpnSchedule& s) {
  std::uint64_t muls = 0;
  for (std::size_t i = 1; i <= s.depth(); ++i) muls += std::uint64_t(m) * s.dims[i - 1] * s.dims[i];
  return muls;
}

/// Server ring multiplications for one online step of width l.
inline std::uint64_t predict_server_online_muls(std::size_t m, const LpnSchedule& s, std::size_t l) {
  std::uint64_t muls = std::uint64_t(m) * s.n() * l;
  for (std::size_t i = 1; i <= s.depth(); ++i) muls += std::uint64_t(l) * s.dims[i - 1] * s.dims[i];
  return muls;
}

namespace detail {

// Ring multiplications of one partial-product check over factors of sizes
// a_1 x a_2, a_2 x a_3, ..., each level probing with lambda' columns.
inline std::uint64_t check_chain_muls(const std::vector<std::uint64_t>& a, std::uint64_t lambda_prime) {
  std::uint64_t muls = 0;
  for (std::size_t i = 2; i < a.size(); ++i) {
    muls += (a[0] * a[i] + a[i - 1] * a[i] + a[0] * a[i - 1]) * lambda_prime;
  }
  return muls;
}

inline double expected_nnz(std::uint64_t rows, std::uint64_t cols, const Rational& mu) {
  return double(rows) * double(cols) * mu.to_double();
}

}  // namespace detail

/// Expected client ring multiplications for both init phases, checks included.
/// Noise terms enter through their expected number of non-zeros.
inline double predict_client_init_muls(std::size_t m, const LpnSchedule& s) {
  const std::size_t d = s.depth();
  const auto& n = s.dims;
  const std::uint64_t lp = s.lambda_prime, nd = s.floor_dim();
  double muls = 0;
  // forward chain, Gram rows, A_enc partials
  std::vector<std::uint64_t> fwd(n.begin(), n.end());
  muls += double(detail::check_chain_muls(fwd, lp));
  for (std::size_t j = 1; j <= d; ++j) {
    std::vector<std::uint64_t> a{n[j]};
    a.insert(a.end(), n.begin(), n.end());
    muls += double(detail::check_chain_muls(a, lp));
  }
  std::vector<std::uint64_t> a_enc{m};
  a_enc.insert(a_enc.end(), n.begin(), n.end());
  muls += double(detail::check_chain_muls(a_enc, lp));
  // A' = H F_d^T + sum S_{i+1} F_i^T
  muls += double(m) * double(nd) * double(n[0]);
  for (std::size_t i = 1; i < d; ++i) muls += detail::expected_nnz(m, n[i], s.mu(i + 1)) * double(n[0]);
  // A' F_i from the Gram blocks
  for (std::size_t i = 1; i <= d; ++i) {
    muls += double(m) * double(nd) * double(n[i]);
    for (std::size_t j = 1; j <= d; ++j) muls += detail::expected_nnz(m, n[j - 1], s.mu(j)) * double(n[i]);
  }
  return muls;
}

/// Expected client ring multiplications for one online step of width l.
inline double predict_client_online_muls(std::size_t m, const LpnSchedule& s, std::size_t l) {
  const std::size_t d = s.depth();
  const auto& n = s.dims;
  const double nd = double(s.floor_dim());
  double muls = double(n[0]) * nd * double(l) + 2 * double(m) * nd * double(l);
  for (std::size_t i = 1; i <= d; ++i) {
    const double t_nnz = detail::expected_nnz(n[i - 1], l, s.mu(i));
    if (i > 1) muls += double(n[0]) * t_nnz;
    muls += double(m) * t_nnz;
    muls += double(l) * detail::expected_nnz(m, n[i - 1], s.mu(i));
  }
  return muls;
}

/// Ring multiplications of computing A B locally.
inline std::uint64_t naive_muls(std::size_t m, std::size_t n, std::size_t l) { return std::uint64_t(m) * n * l; }

}  // namespace trapmat
