#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "trapmat/verify.hpp"

using namespace trapmat;

namespace {

std::vector<DenseMatrix> honest_partials(const std::vector<DenseMatrix>& ms) {
  std::vector<DenseMatrix> out;
  DenseMatrix acc = ms[0];
  for (std::size_t i = 1; i < ms.size(); ++i) {
    acc = oracle::matmul(acc, ms[i]);
    out.push_back(acc);
  }
  return out;
}

std::vector<DenseMatrix> random_chain(std::mt19937_64& gen, std::size_t d) {
  std::vector<std::size_t> a(d + 1);
  for (auto& x : a) x = 1 + gen() % 12;
  std::vector<DenseMatrix> ms;
  for (std::size_t i = 0; i < d; ++i) ms.push_back(oracle::random(a[i], a[i + 1], gen));
  return ms;
}

Word nonzero(std::mt19937_64& gen) {
  Word v = 0;
  while (v == 0) v = Word(gen());
  return v;
}

}  // namespace

TEST(Freivalds, AcceptsCorrectProducts) {
  std::mt19937_64 gen(1);
  auto rng = SeededRng::from_u64(1);
  CheckConfig cfg{4, rng};
  for (int t = 0; t < 100; ++t) {
    const auto a = oracle::random(1 + gen() % 10, 1 + gen() % 10, gen);
    const auto b = oracle::random(a.cols(), 1 + gen() % 10, gen);
    ASSERT_TRUE(freivalds_check(a, b, oracle::matmul(a, b), cfg));
  }
}

TEST(Freivalds, RejectsSingleEntryTampers) {
  std::mt19937_64 gen(2);
  auto rng = SeededRng::from_u64(2);
  CheckConfig cfg{4, rng};
  for (int t = 0; t < 2000; ++t) {
    const auto a = oracle::random(6, 5, gen);
    const auto b = oracle::random(5, 7, gen);
    auto p = oracle::matmul(a, b);
    p(gen() % 6, gen() % 7) += nonzero(gen);
    ASSERT_FALSE(freivalds_check(a, b, p, cfg));
  }
}

TEST(Freivalds, VacuousForEmptyProducts) {
  auto rng = SeededRng::from_u64(3);
  CheckConfig cfg{4, rng};
  EXPECT_TRUE(freivalds_check(DenseMatrix(3, 4), DenseMatrix(4, 0), DenseMatrix(3, 0), cfg));
  EXPECT_THROW(freivalds_check(DenseMatrix(3, 4), DenseMatrix(4, 2), DenseMatrix(2, 2), cfg), ShapeError);
  CheckConfig zero{0, rng};
  EXPECT_THROW(freivalds_check(DenseMatrix(1, 1), DenseMatrix(1, 1), DenseMatrix(1, 1), zero), ConfigError);
}

TEST(Freivalds, EvenTamperMissRateMatchesTwoAdicBound) {
  // An error of 2^31 is invisible to a probe column with even entry, so
  // each column catches it with probability 1/2.
  std::mt19937_64 gen(4);
  auto rng = SeededRng::from_u64(4);
  CheckConfig cfg{1, rng};
  const auto a = oracle::random(4, 4, gen);
  const auto b = oracle::random(4, 4, gen);
  auto p = oracle::matmul(a, b);
  p(1, 2) += 0x80000000u;
  int missed = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) missed += freivalds_check(a, b, p, cfg);
  // binomial(4000, 1/2): sigma ~ 31.6
  EXPECT_NEAR(missed, trials / 2, 5 * 31.6);
}

TEST(PartialProducts, HonestChainsAccepted) {
  std::mt19937_64 gen(5);
  auto rng = SeededRng::from_u64(5);
  CheckConfig cfg{4, rng};
  for (int t = 0; t < 100; ++t) {
    const auto ms = random_chain(gen, 1 + t % 5);
    ASSERT_TRUE(check_partial_products(ms, honest_partials(ms), cfg));
  }
}

TEST(PartialProducts, DepthOneIsVacuous) {
  auto rng = SeededRng::from_u64(6);
  CheckConfig cfg{4, rng};
  std::vector<DenseMatrix> one{DenseMatrix(3, 2)};
  EXPECT_TRUE(check_partial_products(one, {}, cfg));
}

TEST(PartialProducts, AnyPerturbedLevelRejected) {
  std::mt19937_64 gen(7);
  auto rng = SeededRng::from_u64(7);
  CheckConfig cfg{4, rng};
  for (int t = 0; t < 2000; ++t) {
    const auto ms = random_chain(gen, 3);
    auto ps = honest_partials(ms);
    auto& victim = ps[gen() % ps.size()];
    victim(gen() % victim.rows(), gen() % victim.cols()) += nonzero(gen);
    ASSERT_FALSE(check_partial_products(ms, ps, cfg));
  }
}

TEST(PartialProducts, HeadVariantMatchesFlatVariant) {
  std::mt19937_64 gen(8);
  auto rng = SeededRng::from_u64(8);
  CheckConfig cfg{2, rng};
  const auto ms = random_chain(gen, 4);
  auto ps = honest_partials(ms);
  const std::vector<DenseMatrix> tail(ms.begin() + 1, ms.end());
  EXPECT_TRUE(check_partial_products(ms[0], tail, ps, cfg));
  ps[1](0, 0) += 1;
  EXPECT_FALSE(check_partial_products(ms[0], tail, ps, cfg));
  EXPECT_THROW(check_partial_products(ms[0], tail, std::span<const DenseMatrix>(ps).first(2), cfg), ShapeError);
}

TEST(PartialProducts, ShapeErrors) {
  auto rng = SeededRng::from_u64(9);
  CheckConfig cfg{2, rng};
  std::vector<DenseMatrix> ms{DenseMatrix(2, 3), DenseMatrix(4, 5)};
  EXPECT_THROW(check_partial_products(ms, std::vector<DenseMatrix>{DenseMatrix(2, 5)}, cfg), ShapeError);
  std::vector<DenseMatrix> ok{DenseMatrix(2, 3), DenseMatrix(3, 5)};
  EXPECT_THROW(check_partial_products(ok, std::vector<DenseMatrix>{DenseMatrix(2, 4)}, cfg), ShapeError);
}

TEST(Audit, QueryCount) {
  EXPECT_EQ(audit_query_count(0.1, 5), 50u);
  EXPECT_EQ(audit_query_count(0.3, 1), 4u);
  EXPECT_THROW(audit_query_count(0, 5), ConfigError);
}

TEST(Audit, HonestServerNoEvidence) {
  std::mt19937_64 gen(10);
  auto rng = SeededRng::from_u64(10);
  const auto a = oracle::random(5, 8, gen);
  std::vector<DenseMatrix> qs;
  for (int i = 0; i < 7; ++i) qs.push_back(oracle::random(8, 3, gen));
  const auto rep = zero_query_audit([&](const DenseMatrix& b) { return oracle::matmul(a, b); }, 8, qs, 3, 0.2, 2, rng);
  EXPECT_EQ(rep.verdict, AuditVerdict::NoEvidence);
  ASSERT_EQ(rep.results.size(), qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(rep.results[i], oracle::matmul(a, qs[i]));
}

TEST(Audit, AlwaysNoisyServerFlaggedOnEveryAudit) {
  std::mt19937_64 gen(11);
  auto rng = SeededRng::from_u64(11);
  const auto a = oracle::random(5, 8, gen);
  const auto rep = zero_query_audit(
      [&](const DenseMatrix& b) {
        auto p = oracle::matmul(a, b);
        p(0, 0) += 1;
        return p;
      },
      8, {}, 2, 0.5, 1, rng);
  EXPECT_EQ(rep.verdict, AuditVerdict::Dishonest);
  EXPECT_EQ(rep.flagged, rep.audit_queries);
}

TEST(Audit, PlacementIsSeedDeterministic) {
  auto run = [](std::uint64_t seed) {
    auto rng = SeededRng::from_u64(seed);
    std::vector<int> pattern;
    std::vector<DenseMatrix> qs(10, DenseMatrix(2, 1));
    for (auto& q : qs) q(0, 0) = 1;
    zero_query_audit([&](const DenseMatrix& b) { pattern.push_back(b.is_zero()); return DenseMatrix(1, 1); }, 2, qs,
                     1, 0.5, 2, rng);
    return pattern;
  };
  EXPECT_EQ(run(3), run(3));
  EXPECT_NE(run(3), run(4));
}
