#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "harness.hpp"
#include "oracles.hpp"
#include "trapmat/transport.hpp"

using namespace trapmat;

namespace {

Message small_message(MessageKind kind, std::uint8_t tag) {
  SessionId sid{};
  sid[0] = tag;
  return Message{kind, sid, {DenseMatrix::from_rows({{tag, 2}, {3, 4}})}};
}

}  // namespace

TEST(Loopback, FifoAndAccounting) {
  auto [c, s] = loopback_pair();
  const auto m1 = small_message(MessageKind::OnlineRequest, 1);
  const auto m2 = small_message(MessageKind::OnlineRequest, 2);
  c->send(m1);
  c->send(m2);
  EXPECT_EQ(s->recv(), m1);
  EXPECT_EQ(s->recv(), m2);
  s->send(small_message(MessageKind::OnlineReply, 3));
  EXPECT_EQ(c->recv().payload[0](0, 0), 3u);
  const auto tap = c->tap();
  EXPECT_EQ(tap.client_frames, 2u);
  EXPECT_EQ(tap.server_frames, 1u);
  EXPECT_EQ(tap.client_bytes, 2 * encoded_message_size(m1));
  EXPECT_EQ(tap.rounds, 1u);
  EXPECT_EQ(c->stats().bytes_sent, tap.client_bytes);
  EXPECT_EQ(c->stats().bytes_received, tap.server_bytes);
}

TEST(Loopback, HalfCloseDrainsThenErrors) {
  auto [c, s] = loopback_pair();
  c->send(small_message(MessageKind::OnlineRequest, 1));
  c->close();
  EXPECT_NO_THROW(s->recv());
  EXPECT_THROW(s->recv(), TransportError);
  EXPECT_THROW(c->send(small_message(MessageKind::OnlineRequest, 1)), TransportError);
  // only the client's write side is closed; replies still flow back
  EXPECT_NO_THROW(s->send(small_message(MessageKind::OnlineReply, 2)));
  EXPECT_NO_THROW(c->recv());
}

TEST(Tcp, RoundTripOverLocalhost) {
  TcpListener listener("127.0.0.1:0");
  const auto port = listener.port();
  std::thread server([&] {
    auto ep = listener.accept();
    for (;;) {
      try {
        auto m = ep->recv();
        m.kind = MessageKind::OnlineReply;
        ep->send(m);
      } catch (const TransportError&) {
        break;
      }
    }
  });
  auto c = tcp_connect("127.0.0.1:" + std::to_string(port));
  std::mt19937_64 gen(1);
  for (int k = 0; k < 5; ++k) {
    const Message m{MessageKind::OnlineRequest, {}, {oracle::random(300, 200 + k, gen)}};
    c->send(m);
    auto back = c->recv();
    EXPECT_EQ(back.kind, MessageKind::OnlineReply);
    EXPECT_EQ(back.payload, m.payload);
  }
  c->close();
  server.join();
  EXPECT_THROW(c->recv(), TransportError);
}

TEST(Tcp, ConcurrentSessionsStayIsolated) {
  TcpListener listener("127.0.0.1:0");
  const std::string addr = "127.0.0.1:" + std::to_string(listener.port());
  std::thread server([&] {
    tcp_serve(listener, [](Endpoint& ep) {
      ServerSession session;
      serve_connection(ep, session);
    });
  });
  constexpr int kClients = 6;
  std::vector<std::thread> clients;
  std::vector<int> ok(kClients, 0);
  for (int i = 0; i < kClients; ++i) {
    clients.emplace_back([&, i] {
      std::mt19937_64 gen(100 + i);
      const std::size_t n = 30 + 5 * i;
      const auto a = oracle::random(4 + i, n, gen);
      auto ep = tcp_connect(addr);
      DelegationClient client(*ep, SeededRng::from_u64(i));
      client.initialize(a, harness::desk_schedule(n, 3));
      int good = 0;
      for (int k = 0; k < 4; ++k) {
        const auto b = oracle::random(n, 1 + k, gen);
        good += client.multiply(b) == oracle::matmul(a, b);
      }
      ok[i] = good;
      ep->close();
    });
  }
  for (auto& t : clients) t.join();
  listener.shutdown();
  server.join();
  for (int i = 0; i < kClients; ++i) EXPECT_EQ(ok[i], 4) << "client " << i;
}

TEST(Tcp, ConnectionLossMidRoundAbortsSession) {
  TcpListener listener("127.0.0.1:0");
  const std::string addr = "127.0.0.1:" + std::to_string(listener.port());
  std::thread server([&] {
    auto ep = listener.accept();
    ServerSession session;
    auto chain = ep->recv();
    const auto reply = message_to_bytes(*session.handle(chain));
    // send half a frame, then drop the connection
    Bytes half(reply.begin(), reply.begin() + std::ptrdiff_t(reply.size() / 2));
    ep->send_bytes(half);
  });
  auto ep = tcp_connect(addr);
  DelegationClient client(*ep, SeededRng::from_u64(1));
  std::mt19937_64 gen(2);
  try {
    client.initialize(oracle::random(3, 30, gen), harness::desk_schedule(30, 3));
    FAIL() << "expected a transport error";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("mid-frame"), std::string::npos);
  }
  EXPECT_EQ(client.state().phase, ClientPhase::Aborted);
  server.join();
}

TEST(Tcp, BadAddressesAreReported) {
  EXPECT_THROW(tcp_connect("no-port"), ConfigError);
  EXPECT_THROW(tcp_connect("127.0.0.1:99999"), ConfigError);
  TcpListener listener("127.0.0.1:0");
  const auto port = listener.port();
  listener.shutdown();
  EXPECT_THROW(tcp_connect("127.0.0.1:" + std::to_string(port)), TransportError);
}

TEST(Tcp, MalformedFrameGetsAbort) {
  TcpListener listener("127.0.0.1:0");
  const std::string addr = "127.0.0.1:" + std::to_string(listener.port());
  std::string reason;
  std::thread server([&] {
    auto ep = listener.accept();
    ServerSession session;
    reason = serve_connection(*ep, session);
    ep->close();
  });
  auto ep = tcp_connect(addr);
  Bytes junk = message_to_bytes(Message{MessageKind::AEncUpload, {}, {DenseMatrix(1, 1)}});
  junk[29] = 5;  // matrix count no longer matches the body
  ep->send_bytes(junk);
  EXPECT_EQ(ep->recv().kind, MessageKind::Abort);
  ep->close();
  server.join();
  EXPECT_NE(reason.find("malformed"), std::string::npos);
}
