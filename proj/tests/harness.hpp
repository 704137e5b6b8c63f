#pragma once

// Loopback session fixtures shared by the unit and acceptance tests.

#include <functional>
#include <memory>
#include <thread>

#include "trapmat/delegation.hpp"
#include "trapmat/transport.hpp"

namespace harness {

using namespace trapmat;

using ReplyHook = std::function<void(Message&)>;

/// serve_connection with a hook that may rewrite each reply before it is sent.
inline void serve_tampered(Endpoint& ep, ServerSession& session, const ReplyHook& hook) {
  for (;;) {
    Message msg;
    try {
      msg = ep.recv();
    } catch (const TransportError&) {
      return;
    }
    try {
      auto reply = session.handle(msg);
      if (!reply) return;
      hook(*reply);
      ep.send(*reply);
    } catch (const TransportError&) {
      return;
    } catch (const Error&) {
      try {
        ep.send(Message{MessageKind::Abort, msg.session, {}});
      } catch (const TransportError&) {
      }
      return;
    }
  }
}

/// A loopback connection with a server thread behind it.
class LoopbackSession {
 public:
  explicit LoopbackSession(ReplyHook hook = {}) {
    auto [c, s] = loopback_pair();
    client_ = std::move(c);
    server_ep_ = std::move(s);
    thread_ = std::thread([this, hook = std::move(hook)] {
      if (hook) {
        serve_tampered(*server_ep_, server_, hook);
      } else {
        serve_connection(*server_ep_, server_);
      }
      server_ep_->close();
    });
  }
  LoopbackSession(const LoopbackSession&) = delete;
  LoopbackSession& operator=(const LoopbackSession&) = delete;
  ~LoopbackSession() { shutdown(); }

  /// Closes the client side and waits for the server loop to finish.
  void shutdown() {
    if (thread_.joinable()) {
      client_->close();
      thread_.join();
    }
  }

  LoopbackEndpoint& client() { return *client_; }
  /// Valid once shutdown() has returned, or between completed rounds.
  ServerSession& server() { return server_; }
  LoopbackTap tap() const { return client_->tap(); }

 private:
  std::unique_ptr<LoopbackEndpoint> client_;
  std::unique_ptr<LoopbackEndpoint> server_ep_;
  ServerSession server_;
  std::thread thread_;
};

inline LpnSchedule desk_schedule(std::size_t n, std::size_t floor_dim) {
  return build_schedule_with_floor(n, Rational(1, 4), Rational(1, 2), 40, kRingBits, floor_dim);
}

}  // namespace harness
