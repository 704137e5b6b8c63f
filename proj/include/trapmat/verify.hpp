#pragma once

// Server-honesty checks: Freivalds product checks, the iterated check over a
// chain of partial products, and the zero-query auditor for online steps.
//
// Over Z/2^32Z a probe column x misses an error entry e exactly when e*x == 0,
// which happens with probability 2^(v-32) where 2^v is the largest power of two
// dividing e. The |R|^-lambda' soundness figure therefore holds for errors with
// an odd entry; an error made only of multiples of 2^31 is missed with
// probability 2^-lambda'.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/lpn.hpp"
#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"

namespace trapmat {

struct CheckConfig {
  std::size_t lambda_prime;
  SeededRng& rng;
};

/// True when P == A B. A wrong P passes with probability at most
/// |R|^-lambda' over the probe (see the note above for even errors).
inline bool freivalds_check(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& p, CheckConfig& cfg,
                            OpCounter* counter = nullptr) {
  if (a.cols() != b.rows() || p.rows() != a.rows() || p.cols() != b.cols()) {
    throw ShapeError("freivalds_check: " + a.shape() + " times " + b.shape() + " cannot equal " + p.shape());
  }
  if (cfg.lambda_prime == 0) throw ConfigError("freivalds_check: lambda' must be >= 1");
  if (p.cols() == 0 || p.rows() == 0) return true;
  const DenseMatrix x = sample_uniform(b.cols(), cfg.lambda_prime, cfg.rng);
  return mat_mul(p, x, counter) == mat_mul(a, mat_mul(b, x, counter), counter);
}

namespace detail {

using MatrixAt = std::function<const DenseMatrix&(std::size_t)>;

// factor(i) is M_i for i in 1..d; partial(i) is the claimed P_i for i in 2..d.
inline bool check_partial_chain(std::size_t d, const MatrixAt& factor, const MatrixAt& partial, CheckConfig& cfg,
                                OpCounter* counter) {
  if (cfg.lambda_prime == 0) throw ConfigError("check_partial_products: lambda' must be >= 1");
  const std::size_t a1 = d == 0 ? 0 : factor(1).rows();
  for (std::size_t i = 1; i < d; ++i) {
    if (factor(i).cols() != factor(i + 1).rows()) {
      throw ShapeError("check_partial_products: M_" + std::to_string(i) + " is " + factor(i).shape() + ", M_" +
                       std::to_string(i + 1) + " is " + factor(i + 1).shape());
    }
  }
  for (std::size_t i = 2; i <= d; ++i) {
    if (partial(i).rows() != a1 || partial(i).cols() != factor(i).cols()) {
      throw ShapeError("check_partial_products: P_" + std::to_string(i) + " is " + partial(i).shape() +
                       ", expected " + detail::shape_str(a1, factor(i).cols()));
    }
  }
  for (std::size_t i = 2; i <= d; ++i) {
    const DenseMatrix& prev = i == 2 ? factor(1) : partial(i - 1);
    const DenseMatrix x = sample_uniform(factor(i).cols(), cfg.lambda_prime, cfg.rng);
    if (mat_mul(partial(i), x, counter) != mat_mul(prev, mat_mul(factor(i), x, counter), counter)) return false;
  }
  return true;
}

}  // namespace detail

/// Checks claimed partial products P_i = M_1 ... M_i (i = 2..d) with a fresh
/// probe per level. `partials[k]` is P_{k+2}.
inline bool check_partial_products(std::span<const DenseMatrix> factors, std::span<const DenseMatrix> partials,
                                   CheckConfig& cfg, OpCounter* counter = nullptr) {
  const std::size_t d = factors.size();
  if (partials.size() + 1 != std::max<std::size_t>(d, 1)) {
    throw ShapeError("check_partial_products: " + std::to_string(d) + " factors need " +
                     std::to_string(d == 0 ? 0 : d - 1) + " partial products, got " + std::to_string(partials.size()));
  }
  return detail::check_partial_chain(
      d, [&](std::size_t i) -> const DenseMatrix& { return factors[i - 1]; },
      [&](std::size_t i) -> const DenseMatrix& { return partials[i - 2]; }, cfg, counter);
}

/// Variant taking a leading factor separately: M_1 = `head`, M_{i+1} = `tail[i-1]`.
inline bool check_partial_products(const DenseMatrix& head, std::span<const DenseMatrix> tail,
                                   std::span<const DenseMatrix> partials, CheckConfig& cfg,
                                   OpCounter* counter = nullptr) {
  const std::size_t d = tail.size() + 1;
  if (partials.size() != tail.size()) {
    throw ShapeError("check_partial_products: " + std::to_string(d) + " factors need " + std::to_string(d - 1) +
                     " partial products, got " + std::to_string(partials.size()));
  }
  return detail::check_partial_chain(
      d, [&](std::size_t i) -> const DenseMatrix& { return i == 1 ? head : tail[i - 2]; },
      [&](std::size_t i) -> const DenseMatrix& { return partials[i - 2]; }, cfg, counter);
}

enum class AuditVerdict { NoEvidence, Dishonest };

inline const char* to_string(AuditVerdict v) noexcept {
  return v == AuditVerdict::Dishonest ? "DISHONEST" : "NO-EVIDENCE";
}

struct AuditReport {
  AuditVerdict verdict = AuditVerdict::NoEvidence;
  std::size_t audit_queries = 0;
  std::size_t flagged = 0;
  std::vector<DenseMatrix> results;  // answers to the real queries, in order
};

/// ceil(c / alpha) zero queries detect a deviation rate alpha with probability >= 1 - e^-c.
inline std::size_t audit_query_count(double alpha, double c) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(c > 0.0)) throw ConfigError("audit needs 0 < alpha <= 1 and c > 0");
  return std::size_t(std::ceil(c / alpha - 1e-9));
}

/// Runs the real queries through `multiply` with ceil(c/alpha) all-zero
/// queries of width `audit_width` shuffled in. Any non-zero answer to a zero
/// query means the server deviated.
inline AuditReport zero_query_audit(const std::function<DenseMatrix(const DenseMatrix&)>& multiply, std::size_t n,
                                    std::span<const DenseMatrix> queries, std::size_t audit_width, double alpha,
                                    double c, SeededRng& rng) {
  AuditReport report;
  report.audit_queries = audit_query_count(alpha, c);
  const std::size_t total = queries.size() + report.audit_queries;
  std::vector<bool> is_audit(total, false);
  std::fill(is_audit.begin(), is_audit.begin() + std::ptrdiff_t(report.audit_queries), true);
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = rng.uniform_below(i);
    const bool tmp = is_audit[i - 1];
    is_audit[i - 1] = is_audit[j];
    is_audit[j] = tmp;
  }
  const DenseMatrix zero(n, audit_width);
  std::size_t next_real = 0;
  for (std::size_t k = 0; k < total; ++k) {
    if (is_audit[k]) {
      if (!multiply(zero).is_zero()) ++report.flagged;
    } else {
      report.results.push_back(multiply(queries[next_real++]));
    }
  }
  report.verdict = report.flagged > 0 ? AuditVerdict::Dishonest : AuditVerdict::NoEvidence;
  return report;
}

}  // namespace trapmat
