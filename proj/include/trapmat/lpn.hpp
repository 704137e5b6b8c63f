#pragma once

// LPN parameters and samplers: the security table giving the minimum secure
// subspace dimension, the recursion floor nu, the dimension/noise-rate ladder,
// and the noise and uniform matrix samplers.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/rational.hpp"
#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"

namespace trapmat {

/// Probability that an entry of a noise matrix is non-zero.
class NoiseRate {
 public:
  NoiseRate() = default;
  NoiseRate(Rational mu) : mu_(mu) {  // NOLINT: implicit from Rational
    if (mu_ < Rational(0) || Rational(1) < mu_) throw ConfigError("noise rate " + mu_.str() + " outside [0, 1]");
  }
  const Rational& value() const noexcept { return mu_; }

 private:
  Rational mu_{0};
};

struct SecurityKey {
  Rational delta;
  Rational epsilon;
  std::uint32_t lambda = 0;

  friend bool operator==(const SecurityKey&, const SecurityKey&) = default;
  friend std::strong_ordering operator<=>(const SecurityKey& a, const SecurityKey& b) {
    if (auto c = a.delta <=> b.delta; c != 0) return c;
    if (auto c = a.epsilon <=> b.epsilon; c != 0) return c;
    return a.lambda <=> b.lambda;
  }
  std::string str() const {
    return "(delta=" + delta.str() + ", epsilon=" + epsilon.str() + ", lambda=" + std::to_string(lambda) + ")";
  }
};

/// Maps (delta, epsilon, lambda) to iota, the smallest subspace dimension at
/// which LPN reaches the target security. Values come from external estimates;
/// this class only stores and looks them up.
///
/// Text format: one `delta epsilon lambda iota` entry per line, rationals as
/// `p/q`, `#` starts a comment.
class SecurityTable {
 public:
  void insert(const SecurityKey& key, std::uint64_t iota) {
    if (iota == 0) throw ConfigError("security table entry " + key.str() + " has iota 0");
    entries_[key] = iota;
  }

  std::uint64_t iota(const SecurityKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      std::string msg = "no security table entry for " + key.str() + "; available:";
      if (entries_.empty()) msg += " (none)";
      for (const auto& [k, v] : entries_) msg += " " + k.str();
      throw ConfigError(msg);
    }
    return it->second;
  }

  bool contains(const SecurityKey& key) const { return entries_.count(key) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<SecurityKey, std::uint64_t>& entries() const noexcept { return entries_; }

  static SecurityTable parse(std::string_view text) {
    SecurityTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::vector<std::string> tok;
      for (std::string t; fields >> t;) tok.push_back(t);
      if (tok.empty()) continue;
      if (tok.size() != 4) {
        throw ConfigError("security table line " + std::to_string(line_no) + ": expected 'delta epsilon lambda iota'");
      }
      try {
        const Rational lambda = Rational::parse(tok[2]);
        const Rational iota = Rational::parse(tok[3]);
        if (lambda.den() != 1 || iota.den() != 1 || lambda.num() <= 0 || iota.num() <= 0) {
          throw ConfigError("lambda and iota must be positive integers");
        }
        table.insert({Rational::parse(tok[0]), Rational::parse(tok[1]), std::uint32_t(lambda.num())},
                     std::uint64_t(iota.num()));
      } catch (const ConfigError& e) {
        throw ConfigError("security table line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return table;
  }

  static SecurityTable load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open security table '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

 private:
  std::map<SecurityKey, std::uint64_t> entries_;
};

inline std::size_t ceil_div(std::uint64_t a, std::uint64_t b) { return std::size_t((a + b - 1) / b); }

/// Recursion floor: max(ceil(lambda / ring_bits), iota).
inline std::size_t nu(const Rational& delta, const Rational& epsilon, std::uint32_t lambda, unsigned ring_bits,
                      const SecurityTable& table) {
  const std::uint64_t iota = table.iota({delta, epsilon, lambda});
  return std::max<std::size_t>(ceil_div(lambda, ring_bits), std::size_t(iota));
}

/// Number of Freivalds probe columns so that |R|^-lambda' <= 2^-lambda.
inline std::size_t lambda_prime(std::uint32_t lambda, unsigned ring_bits) { return ceil_div(lambda, ring_bits); }

/// Probe columns when `checks` separate Freivalds checks share the error budget
/// (union bound): ceil((lambda + ceil(lg checks)) / ring_bits).
inline std::size_t lambda_prime_for_checks(std::uint32_t lambda, unsigned ring_bits, std::size_t checks) {
  unsigned lg = 0;
  while ((std::size_t(1) << lg) < checks) ++lg;
  return ceil_div(std::uint64_t(lambda) + lg, ring_bits);
}

/// Freivalds comparisons made while checking one initialization of depth d:
/// d - 1 forward levels, d levels for each of the d Gram rows, d A_enc partials.
inline constexpr std::size_t init_check_count(std::size_t d) noexcept { return d == 0 ? 0 : d * d + 2 * d - 1; }

inline constexpr std::int64_t kNoiseRateDenominator = std::int64_t(1) << 20;

/// Exact test of mu >= n^(epsilon - 1) for rational epsilon = p/q in (0, 1):
/// equivalent to mu_num^q * n^(q-p) >= mu_den^q.
inline bool noise_rate_at_least(const Rational& mu, std::size_t n, const Rational& epsilon) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::pow;
  if (mu.num() <= 0) return n == 0;
  const auto p = unsigned(epsilon.num());
  const auto q = unsigned(epsilon.den());
  const cpp_int lhs = pow(cpp_int(mu.num()), q) * pow(cpp_int(n), q - p);
  const cpp_int rhs = pow(cpp_int(mu.den()), q);
  return lhs >= rhs;
}

/// Smallest k / 2^20 that is >= n^(epsilon - 1), reduced to lowest terms.
inline Rational noise_rate_for(std::size_t n, const Rational& epsilon) {
  if (!(Rational(0) < epsilon && epsilon < Rational(1))) throw ConfigError("epsilon must lie in (0, 1)");
  if (n == 0) throw ConfigError("noise rate for empty dimension");
  const double approx = std::pow(double(n), epsilon.to_double() - 1.0);
  auto num = std::int64_t(std::ceil(approx * double(kNoiseRateDenominator)));
  num = std::clamp<std::int64_t>(num, 1, kNoiseRateDenominator);
  while (num < kNoiseRateDenominator && !noise_rate_at_least(Rational(num, kNoiseRateDenominator), n, epsilon)) ++num;
  while (num > 1 && noise_rate_at_least(Rational(num - 1, kNoiseRateDenominator), n, epsilon)) --num;
  return Rational(num, kNoiseRateDenominator);
}

/// Dimension ladder n_0 > n_1 > ... > n_d = nu with noise rates mu_1..mu_d.
struct LpnSchedule {
  std::vector<std::size_t> dims;
  std::vector<Rational> mus;
  std::uint32_t lambda = 0;
  std::size_t lambda_prime = 1;

  std::size_t depth() const noexcept { return mus.size(); }
  std::size_t n() const noexcept { return dims.front(); }
  std::size_t floor_dim() const noexcept { return dims.back(); }
  std::size_t dim(std::size_t i) const { return dims.at(i); }
  const Rational& mu(std::size_t i) const { return mus.at(i - 1); }

  /// Structural checks: strictly decreasing dims, one rate per layer, rates in (0, 1].
  void validate() const {
    if (dims.size() < 2 || mus.size() != dims.size() - 1) {
      throw ConfigError("schedule needs depth >= 1 with one noise rate per layer");
    }
    for (std::size_t i = 1; i < dims.size(); ++i) {
      if (dims[i] == 0 || dims[i] >= dims[i - 1]) throw ConfigError("schedule dimensions must strictly decrease to >= 1");
    }
    for (const auto& mu : mus) {
      if (!(Rational(0) < mu) || Rational(1) < mu) throw ConfigError("schedule noise rate " + mu.str() + " outside (0, 1]");
    }
    if (lambda_prime == 0) throw ConfigError("lambda' must be >= 1");
  }

  friend bool operator==(const LpnSchedule&, const LpnSchedule&) = default;
};

/// Per-layer replacement for the uniform (delta, epsilon) ladder.
struct LayerOverride {
  Rational delta;
  Rational epsilon;
};

/// Ladder with a known floor `nu`. `overrides[i]` replaces (delta, epsilon) for layer i+1.
inline LpnSchedule build_schedule_with_floor(std::size_t n, const Rational& delta, const Rational& epsilon,
                                             std::uint32_t lambda, unsigned ring_bits, std::size_t floor_dim,
                                             std::span<const LayerOverride> overrides = {}) {
  auto check_params = [](const Rational& d, const Rational& e) {
    if (!(Rational(0) < d && d < Rational(1, 2))) throw ConfigError("delta must lie in (0, 1/2), got " + d.str());
    if (!(Rational(0) < e && e < Rational(1))) throw ConfigError("epsilon must lie in (0, 1), got " + e.str());
  };
  check_params(delta, epsilon);
  for (const auto& o : overrides) check_params(o.delta, o.epsilon);
  if (floor_dim == 0) throw ConfigError("recursion floor must be positive");
  if (n <= floor_dim) {
    throw DelegationUnprofitable("n = " + std::to_string(n) + " does not exceed the recursion floor nu = " +
                                 std::to_string(floor_dim) + "; compute the product locally");
  }

  LpnSchedule s;
  s.lambda = lambda;
  s.dims.push_back(n);
  while (s.dims.back() > floor_dim) {
    const std::size_t layer = s.mus.size();
    const Rational& d = layer < overrides.size() ? overrides[layer].delta : delta;
    const Rational& e = layer < overrides.size() ? overrides[layer].epsilon : epsilon;
    const std::size_t prev = s.dims.back();
    const auto shrunk = std::size_t((__int128(prev) * d.num() + d.den() - 1) / d.den());
    s.mus.push_back(noise_rate_for(prev, e));
    s.dims.push_back(std::max(shrunk, floor_dim));
  }
  s.lambda_prime = lambda_prime_for_checks(lambda, ring_bits, init_check_count(s.depth()));
  return s;
}

inline LpnSchedule build_schedule(std::size_t n, const Rational& delta, const Rational& epsilon, std::uint32_t lambda,
                                  unsigned ring_bits, const SecurityTable& table,
                                  std::span<const LayerOverride> overrides = {}) {
  return build_schedule_with_floor(n, delta, epsilon, lambda, ring_bits, nu(delta, epsilon, lambda, ring_bits, table),
                                   overrides);
}

/// Full invariant check for a uniform ladder: n_i >= ceil(delta n_{i-1}),
/// n_i >= nu, n_d == nu, mu_i >= n_{i-1}^(epsilon-1).
inline bool satisfies_ladder_invariants(const LpnSchedule& s, const Rational& delta, const Rational& epsilon,
                                        std::size_t floor_dim) {
  try {
    s.validate();
  } catch (const ConfigError&) {
    return false;
  }
  if (s.dims.back() != floor_dim) return false;
  for (std::size_t i = 1; i < s.dims.size(); ++i) {
    const auto shrunk = std::size_t((__int128(s.dims[i - 1]) * delta.num() + delta.den() - 1) / delta.den());
    if (s.dims[i] < shrunk || s.dims[i] < floor_dim) return false;
    if (!noise_rate_at_least(s.mus[i - 1], s.dims[i - 1], epsilon)) return false;
  }
  return true;
}

/// Noise matrix: each entry independently non-zero with probability mu, then
/// uniform over the ring. A uniform draw of 0 leaves the entry absent.
inline SparseMatrix sample_noise(std::size_t rows, std::size_t cols, const NoiseRate& rate, SeededRng& rng) {
  const Rational& mu = rate.value();
  std::vector<SparseEntry> entries;
  if (mu.num() == 0) return SparseMatrix(rows, cols);
  entries.reserve(std::size_t(double(rows) * double(cols) * mu.to_double() * 1.1) + 16);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rng.bernoulli(mu)) continue;
      const Word v = rng.next_u32();
      if (v != 0) entries.push_back({std::uint32_t(r), std::uint32_t(c), v});
    }
  }
  return SparseMatrix(rows, cols, std::move(entries));
}

inline DenseMatrix sample_uniform(std::size_t rows, std::size_t cols, SeededRng& rng) {
  DenseMatrix m(rows, cols);
  for (auto& w : m.data()) w = rng.next_u32();
  return m;
}

}  // namespace trapmat
