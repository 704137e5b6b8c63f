#include <gtest/gtest.h>

#include <random>

#include "harness.hpp"
#include "oracles.hpp"
#include "trapmat/cost_model.hpp"

using namespace trapmat;

TEST(Bytes, LoopbackMatchesClosedFormPerMessage) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 10; ++t) {
    const std::size_t m = 1 + gen() % 30, n = 20 + gen() % 200;
    const auto s = harness::desk_schedule(n, 2 + gen() % 8);
    const std::vector<std::size_t> widths{1 + gen() % 9, 1, 1 + gen() % 40};
    const auto a = oracle::random(m, n, gen);
    harness::LoopbackSession session;
    DelegationClient client(session.client(), SeededRng::from_u64(t));
    client.initialize(a, s);
    for (auto l : widths) client.multiply(oracle::random(n, l, gen));
    const auto tap = session.tap();
    const auto f = predict_bytes(m, s, widths);
    std::vector<std::uint64_t> want{f.chain_upload, f.chain_products_reply, f.aenc_upload, f.aenc_partials_reply};
    for (std::size_t k = 0; k < widths.size(); ++k) {
      want.push_back(f.online_request[k]);
      want.push_back(f.online_reply[k]);
    }
    ASSERT_EQ(tap.frames.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) ASSERT_EQ(tap.frames[k].second, want[k]) << "frame " << k;
    ASSERT_EQ(tap.total_bytes(), f.total());
  }
}

TEST(Bytes, HandComputedSmallCase) {
  // n = 10 -> 3 with one layer, m = 2, one online step of width 1.
  LpnSchedule s;
  s.dims = {10, 3};
  s.mus = {Rational(1, 2)};
  const auto f = predict_bytes(2, s, {1});
  EXPECT_EQ(f.chain_upload, 33u + 8 + 4 * 30);
  EXPECT_EQ(f.chain_products_reply, 33u + (8 + 4 * 30) + (8 + 4 * 9));
  EXPECT_EQ(f.aenc_upload, 33u + 8 + 4 * 20);
  EXPECT_EQ(f.aenc_partials_reply, 33u + 8 + 4 * 6);
  EXPECT_EQ(f.online_request[0], 33u + 8 + 4 * 10);
  EXPECT_EQ(f.online_reply[0], 33u + (8 + 4 * 2) + (8 + 4 * 3));
}

TEST(Muls, ServerCountersMatchClosedForm) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 8; ++t) {
    const std::size_t m = 1 + gen() % 30, n = 40 + gen() % 300;
    const auto s = harness::desk_schedule(n, 2 + gen() % 8);
    harness::LoopbackSession session;
    DelegationClient client(session.client(), SeededRng::from_u64(t));
    client.initialize(oracle::random(m, n, gen), s);
    const std::size_t l = 1 + gen() % 20;
    client.multiply(oracle::random(n, l, gen));
    session.shutdown();
    EXPECT_EQ(session.server().init_ops().ring_muls, predict_server_chain_muls(s) + predict_server_aenc_muls(m, s));
    EXPECT_EQ(session.server().online_ops().ring_muls, predict_server_online_muls(m, s, l));
  }
}

TEST(Muls, ClientOnlineCountIsSparseScale) {
  std::mt19937_64 gen(3);
  const std::size_t m = 200, n = 1024, l = 50;
  const auto s = build_schedule_with_floor(n, Rational(1, 4), Rational(1, 2), 40, 32, 16);
  auto rng = SeededRng::from_u64(3);
  auto [state, chain_msg] = client_init_phase1(oracle::random(m, n, gen), s, rng);
  ServerSession server;
  const auto aenc = client_init_phase2(state, *server.handle(chain_msg), rng);
  client_init_phase3(state, *server.handle(aenc), rng);

  state.ops.reset();
  auto [req, pending] = client_online(state, oracle::random(n, l, gen), rng);
  const auto reply = *server.handle(req);
  client_finish(state, pending, reply, rng);

  // B' = F_d G + sum F_i T_{i+1} + T_1, then A B' and A' B_enc from the
  // trapdoors: every dense product has n_d = nu as its inner dimension.
  const auto& right = pending.secret();
  const auto& left = state.left_secret;
  const std::size_t d = s.depth(), nd = s.floor_dim();
  std::uint64_t want = std::uint64_t(n) * nd * l + 2 * std::uint64_t(m) * nd * l;
  for (std::size_t i = 1; i < d; ++i) want += std::uint64_t(n) * right.T[i].nnz();
  for (std::size_t i = 0; i < d; ++i) want += std::uint64_t(m) * right.T[i].nnz();
  for (std::size_t i = 0; i < d; ++i) want += std::uint64_t(l) * left.S[i].nnz();
  EXPECT_EQ(state.ops.ring_muls, want);
  EXPECT_LT(state.ops.ring_muls, std::uint64_t(m) * n * l / 2);
}

TEST(Muls, ClientForecastTracksCounters) {
  // The forecast uses expected noise weights, so it matches only up to the
  // spread of the sampled non-zero counts.
  std::mt19937_64 gen(3);
  for (auto [m, n, l] : {std::tuple<std::size_t, std::size_t, std::size_t>{300, 600, 50}, {512, 512, 1},
                         {128, 900, 200}}) {
    const auto s = harness::desk_schedule(n, 16);
    harness::LoopbackSession session;
    DelegationClient client(session.client(), SeededRng::from_u64(n));
    client.initialize(oracle::random(m, n, gen), s);
    const double init = double(client.state().ops.ring_muls);
    client.multiply(oracle::random(n, l, gen));
    const double online = double(client.state().ops.ring_muls) - init;
    EXPECT_NEAR(init / predict_client_init_muls(m, s), 1.0, 0.05) << m << "x" << n;
    EXPECT_NEAR(online / predict_client_online_muls(m, s, l), 1.0, 0.05) << m << "x" << n << "x" << l;
  }
}
