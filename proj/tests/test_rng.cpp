#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "trapmat/lpn.hpp"
#include "trapmat/rng.hpp"

using namespace trapmat;

TEST(ChaCha20, MatchesPublishedBlockVector) {
  // Key 00 01 .. 1f, nonce 00:00:00:09 00:00:00:4a 00:00:00:00, block counter 1.
  std::array<std::uint32_t, 8> key{};
  for (std::uint32_t i = 0; i < 8; ++i) key[i] = (4 * i) | (4 * i + 1) << 8 | (4 * i + 2) << 16 | (4 * i + 3) << 24;
  const auto out = detail::chacha20_block(key, (std::uint64_t(0x09000000) << 32) | 1, 0x4a000000);
  const std::array<std::uint32_t, 16> want{0xe4e7f110, 0x15593bd1, 0x1fdd0f50, 0xc47120a3, 0xc7f4d1c7, 0x0368c033,
                                           0x9aaa2204, 0x4e6cd4c3, 0x466482d2, 0x09aa9f07, 0x05d7c214, 0xa2028bd9,
                                           0xd19c12b5, 0xb94e16de, 0xe883d0cb, 0x4e3c50a2};
  EXPECT_EQ(out, want);
}

TEST(SeededRng, DeterministicAndStreamSeparated) {
  auto a = SeededRng::from_u64(42);
  auto b = SeededRng::from_u64(42);
  auto c = SeededRng::from_u64(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    differs |= x != c.next_u32();
  }
  EXPECT_TRUE(differs);
}

TEST(SeededRng, SeekReproducesPosition) {
  auto a = SeededRng::from_u64(7);
  std::vector<std::uint32_t> words(100);
  for (auto& w : words) w = a.next_u32();
  EXPECT_EQ(a.position(), 100u);
  auto b = SeededRng::from_u64(7);
  for (std::uint64_t at : {0u, 1u, 15u, 16u, 17u, 63u, 99u}) {
    b.seek(at);
    EXPECT_EQ(b.next_u32(), words[at]) << at;
  }
}

TEST(SeededRng, UniformBelowStaysInRange) {
  auto r = SeededRng::from_u64(3);
  for (std::uint64_t bound : {1ull, 2ull, 3ull, 7ull, 1000ull, (1ull << 32), (1ull << 32) + 5, (1ull << 40)}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(r.uniform_below(bound), bound);
  }
  EXPECT_THROW(r.uniform_below(0), ConfigError);
}

TEST(SeededRng, BernoulliEdgeRates) {
  auto r = SeededRng::from_u64(4);
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(r.bernoulli(Rational(0)));
    EXPECT_TRUE(r.bernoulli(Rational(1)));
  }
}

TEST(SampleUniform, ChiSquareOnLowByte) {
  auto r = SeededRng::from_u64(5);
  const auto m = sample_uniform(1000, 1000, r);
  std::array<double, 256> counts{};
  for (Word w : m.data()) counts[w & 0xff] += 1;
  const double expected = 1e6 / 256;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(255);
  const double p = 1 - boost::math::cdf(dist, chi2);
  EXPECT_GT(p, 0.001) << "chi2 = " << chi2;
}

TEST(SampleUniform, EmptyAndDeterministic) {
  auto r = SeededRng::from_u64(6);
  EXPECT_EQ(sample_uniform(0, 5, r).shape(), "0x5");
  auto a = SeededRng::from_u64(9);
  auto b = SeededRng::from_u64(9);
  EXPECT_EQ(sample_uniform(13, 17, a), sample_uniform(13, 17, b));
}

TEST(SampleUniform, KnownPrefixIsStable) {
  // Pins the byte-level draw order so that any platform reproduces it.
  auto a = SeededRng::from_u64(0);
  const auto m = sample_uniform(1, 4, a);
  const auto key = std::array<std::uint32_t, 8>{};
  const auto block = detail::chacha20_block(key, 0, 0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(m(0, i), block[i]);
}
