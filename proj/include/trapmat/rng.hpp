#pragma once

// Deterministic generator: ChaCha20 (20 rounds) in counter mode. The 32-byte
// seed is the key, the 64-bit stream id fills the nonce words, and the 64-bit
// block counter makes the output seekable. Output words are the keystream words
// in order, so results are identical on every platform.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "trapmat/rational.hpp"

namespace trapmat {

namespace detail {

inline constexpr std::uint32_t rotl32(std::uint32_t v, int c) noexcept { return (v << c) | (v >> (32 - c)); }

inline constexpr void quarter_round(std::array<std::uint32_t, 16>& x, int a, int b, int c, int d) noexcept {
  x[a] += x[b]; x[d] ^= x[a]; x[d] = rotl32(x[d], 16);
  x[c] += x[d]; x[b] ^= x[c]; x[b] = rotl32(x[b], 12);
  x[a] += x[b]; x[d] ^= x[a]; x[d] = rotl32(x[d], 8);
  x[c] += x[d]; x[b] ^= x[c]; x[b] = rotl32(x[b], 7);
}

/// One ChaCha20 block. Words 12..13 carry the counter, 14..15 the stream id.
inline std::array<std::uint32_t, 16> chacha20_block(const std::array<std::uint32_t, 8>& key,
                                                    std::uint64_t counter, std::uint64_t stream) noexcept {
  std::array<std::uint32_t, 16> in{0x61707865u, 0x3320646eu, 0x79622d32u, 0x6b206574u,
                                   key[0], key[1], key[2], key[3],
                                   key[4], key[5], key[6], key[7],
                                   std::uint32_t(counter), std::uint32_t(counter >> 32),
                                   std::uint32_t(stream), std::uint32_t(stream >> 32)};
  auto x = in;
  for (int i = 0; i < 10; ++i) {
    quarter_round(x, 0, 4, 8, 12);
    quarter_round(x, 1, 5, 9, 13);
    quarter_round(x, 2, 6, 10, 14);
    quarter_round(x, 3, 7, 11, 15);
    quarter_round(x, 0, 5, 10, 15);
    quarter_round(x, 1, 6, 11, 12);
    quarter_round(x, 2, 7, 8, 13);
    quarter_round(x, 3, 4, 9, 14);
  }
  for (int i = 0; i < 16; ++i) x[i] += in[i];
  return x;
}

}  // namespace detail

class SeededRng {
 public:
  using Seed = std::array<std::uint8_t, 32>;
  using result_type = std::uint32_t;

  explicit SeededRng(const Seed& seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    for (int i = 0; i < 8; ++i) {
      key_[i] = std::uint32_t(seed[4 * i]) | std::uint32_t(seed[4 * i + 1]) << 8 |
                std::uint32_t(seed[4 * i + 2]) << 16 | std::uint32_t(seed[4 * i + 3]) << 24;
    }
  }

  /// Seed built from a 64-bit value, little-endian in the first eight key bytes.
  static SeededRng from_u64(std::uint64_t value, std::uint64_t stream = 0) {
    Seed s{};
    for (int i = 0; i < 8; ++i) s[i] = std::uint8_t(value >> (8 * i));
    return SeededRng(s, stream);
  }

  /// Independent generator sharing this seed on another stream id.
  SeededRng fork(std::uint64_t stream) const { return SeededRng(seed_, stream); }

  /// Fresh generator keyed by 32 bytes drawn from this one.
  SeededRng split() {
    Seed s{};
    for (int i = 0; i < 8; ++i) {
      const std::uint32_t w = next_u32();
      for (int b = 0; b < 4; ++b) s[4 * i + b] = std::uint8_t(w >> (8 * b));
    }
    return SeededRng(s);
  }

  std::uint32_t next_u32() noexcept {
    if (index_ == 16) refill();
    ++position_;
    return block_[index_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t lo = next_u32();
    return lo | std::uint64_t(next_u32()) << 32;
  }

  /// Uniform integer in [0, bound). Exact: rejection removes modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw ConfigError("uniform_below(0)");
    constexpr std::uint64_t kWord = std::uint64_t(1) << 32;
    if ((bound & (bound - 1)) == 0) return (bound <= kWord ? next_u32() : next_u64()) & (bound - 1);
    if (bound < kWord) {
      const std::uint64_t limit = kWord - kWord % bound;
      for (;;) {
        const std::uint64_t v = next_u32();
        if (v < limit) return v % bound;
      }
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v < limit) return v % bound;
    }
  }

  /// True with probability exactly p (0 <= p <= 1).
  bool bernoulli(const Rational& p) {
    if (p.num() <= 0) return false;
    if (p.num() >= p.den()) return true;
    return uniform_below(std::uint64_t(p.den())) < std::uint64_t(p.num());
  }

  /// Number of 32-bit words drawn so far.
  std::uint64_t position() const noexcept { return position_; }

  /// Jump so that the next draw is word `word_index` of the stream.
  void seek(std::uint64_t word_index) noexcept {
    counter_ = word_index / 16;
    refill();
    index_ = static_cast<unsigned>(word_index % 16);
    position_ = word_index;
  }

  // UniformRandomBitGenerator
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u32(); }

 private:
  void refill() noexcept {
    block_ = detail::chacha20_block(key_, counter_++, stream_);
    index_ = 0;
  }

  Seed seed_{};
  std::array<std::uint32_t, 8> key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 16> block_{};
  unsigned index_ = 16;
  std::uint64_t position_ = 0;
};

}  // namespace trapmat
