#pragma once

// Drivers that run the protocol state machines over an Endpoint.

#include <chrono>
#include <functional>
#include <optional>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include "trapmat/errors.hpp"
#include "trapmat/protocol.hpp"
#include "trapmat/transport.hpp"

namespace trapmat {

/// Serves one connection until the client closes or aborts. Errors are
/// answered with an Abort frame. Returns the reason the loop ended.
inline std::string serve_connection(Endpoint& ep, ServerSession& session) {
  for (;;) {
    Message msg;
    try {
      msg = ep.recv();
    } catch (const TransportError& e) {
      return e.what();
    } catch (const DecodeError& e) {
      try {
        ep.send(Message{MessageKind::Abort, session.session().value_or(SessionId{}), {}});
      } catch (const TransportError&) {
      }
      return std::string("malformed frame: ") + e.what();
    }
    try {
      std::optional<Message> reply = session.handle(msg);
      if (!reply) return "client aborted";
      ep.send(*reply);
    } catch (const TransportError& e) {
      return e.what();
    } catch (const Error& e) {
      try {
        ep.send(Message{MessageKind::Abort, msg.session, {}});
      } catch (const TransportError&) {
      }
      return std::string("aborted: ") + e.what();
    }
  }
}

class DelegationClient {
 public:
  struct Timing {
    double init_seconds = 0;
    double online_seconds = 0;
  };

  DelegationClient(Endpoint& ep, SeededRng rng) : ep_(ep), rng_(std::move(rng)) {}

  /// Both init rounds. On return the session is READY.
  void initialize(const DenseMatrix& a, const LpnSchedule& schedule) {
    Message chain_msg;
    timed(timing_.init_seconds, [&] {
      auto [state, msg] = client_init_phase1(a, schedule, rng_);
      state_ = std::move(state);
      chain_msg = std::move(msg);
    });
    const Message products = exchange(chain_msg);
    Message aenc_msg;
    timed(timing_.init_seconds, [&] { aenc_msg = guarded([&] { return client_init_phase2(*state_, products, rng_); }); });
    const Message partials = exchange(aenc_msg);
    timed(timing_.init_seconds, [&] { guarded([&] { return client_init_phase3(*state_, partials, rng_), 0; }); });
  }

  /// One online round: returns A B.
  DenseMatrix multiply(const DenseMatrix& b, OnlineOptions options = {}) {
    require_state("multiply");
    std::optional<std::pair<Message, PendingProduct>> req;
    timed(timing_.online_seconds, [&] { req.emplace(client_online(*state_, b, rng_, options)); });
    return finish(*req);
  }

  /// Online round using a precomputed mask block.
  DenseMatrix multiply_with_mask(const DenseMatrix& b, MaskBlock block, OnlineOptions options = {}) {
    require_state("multiply_with_mask");
    std::optional<std::pair<Message, PendingProduct>> req;
    timed(timing_.online_seconds,
          [&] { req.emplace(client_online_with_mask(*state_, b, std::move(block), options)); });
    return finish(*req);
  }

  /// One-off product in two rounds: the OnlineRequest is sent together with
  /// A_enc, before the A_enc partials come back.
  DenseMatrix multiply_once(const DenseMatrix& a, const DenseMatrix& b, const LpnSchedule& schedule,
                            OnlineOptions options = {}) {
    Message chain_msg;
    timed(timing_.init_seconds, [&] {
      auto [state, msg] = client_init_phase1(a, schedule, rng_);
      state_ = std::move(state);
      chain_msg = std::move(msg);
    });
    const Message products = exchange(chain_msg);
    Message aenc_msg;
    timed(timing_.init_seconds, [&] { aenc_msg = guarded([&] { return client_init_phase2(*state_, products, rng_); }); });
    std::optional<std::pair<Message, PendingProduct>> req;
    timed(timing_.online_seconds, [&] { req.emplace(client_online(*state_, b, rng_, options)); });
    send(aenc_msg);
    send(req->first);
    const Message partials = receive();
    const Message reply = receive();
    timed(timing_.init_seconds, [&] { guarded([&] { return client_init_phase3(*state_, partials, rng_), 0; }); });
    DenseMatrix out;
    timed(timing_.online_seconds,
          [&] { out = guarded([&] { return client_finish(*state_, req->second, reply, rng_); }); });
    return out;
  }

  /// Builds a targeted generator whose single batch product runs through
  /// this session.
  TargetedGenerator make_generator(std::size_t batch, std::size_t width) {
    require_state("make_generator");
    return TargetedGenerator(state_->schedule, state_->chain_products,
                             [this](const DenseMatrix& m) { return multiply(m); }, batch, width, rng_);
  }

  /// Sends Abort and closes the connection.
  void abort() {
    if (state_) {
      try {
        ep_.send(Message{MessageKind::Abort, state_->session, {}});
      } catch (const TransportError&) {
      }
      state_->abort();
    }
    ep_.close();
  }

  ClientState& state() {
    require_state("state");
    return *state_;
  }
  const Timing& timing() const noexcept { return timing_; }
  SeededRng& rng() noexcept { return rng_; }

 private:
  template <class F>
  static void timed(double& acc, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    acc += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  // Runs a state transition; a failed check also notifies the server.
  template <class F>
  auto guarded(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const DishonestServer&) {
      try {
        ep_.send(Message{MessageKind::Abort, state_->session, {}});
      } catch (const TransportError&) {
      }
      throw;
    }
  }

  void require_state(const char* op) const {
    if (!state_) throw ProtocolError(std::string(op) + ": session not initialized");
  }

  void send(const Message& m) {
    try {
      ep_.send(m);
    } catch (const TransportError&) {
      if (state_) state_->abort();
      throw;
    }
  }

  Message receive() {
    try {
      return ep_.recv();
    } catch (const TransportError&) {
      if (state_) state_->abort();
      throw;
    } catch (const DecodeError& e) {
      if (state_) state_->abort();
      throw TransportError(std::string("malformed frame from server: ") + e.what());
    }
  }

  Message exchange(const Message& m) {
    send(m);
    return receive();
  }

  DenseMatrix finish(std::pair<Message, PendingProduct>& req) {
    const Message reply = exchange(req.first);
    DenseMatrix out;
    timed(timing_.online_seconds,
          [&] { out = guarded([&] { return client_finish(*state_, req.second, reply, rng_); }); });
    return out;
  }

  Endpoint& ep_;
  SeededRng rng_;
  std::optional<ClientState> state_;
  Timing timing_;
};

/// A ServerSession on its own thread behind the far end of a loopback pair.
class LoopbackServer {
 public:
  LoopbackServer() {
    auto [c, s] = loopback_pair();
    client_ = std::move(c);
    server_ep_ = std::move(s);
    thread_ = std::thread([this] {
      reason_ = serve_connection(*server_ep_, session_);
      server_ep_->close();
    });
  }
  LoopbackServer(const LoopbackServer&) = delete;
  LoopbackServer& operator=(const LoopbackServer&) = delete;
  ~LoopbackServer() { stop(); }

  /// Closes the client end and joins the server thread. Returns why the
  /// server loop ended.
  const std::string& stop() {
    if (thread_.joinable()) {
      client_->close();
      thread_.join();
    }
    return reason_;
  }

  LoopbackEndpoint& client() { return *client_; }
  /// Safe to read between completed rounds or after stop().
  const ServerSession& session() const { return session_; }
  LoopbackTap tap() const { return client_->tap(); }

 private:
  std::unique_ptr<LoopbackEndpoint> client_;
  std::unique_ptr<LoopbackEndpoint> server_ep_;
  ServerSession session_;
  std::string reason_;
  std::thread thread_;
};

}  // namespace trapmat
