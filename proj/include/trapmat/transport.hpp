#pragma once

// Framed message transport: an in-process loopback pair and TCP.
// Every message crosses as one encoded frame; loopback frames are the exact
// bytes TCP would carry, so traffic accounting is shared.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/message.hpp"
#include "trapmat/wire.hpp"

namespace trapmat {

struct TrafficStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;

  /// Sends one encoded frame.
  virtual void send_bytes(const Bytes& frame) = 0;
  /// Blocks for the next complete frame. Throws TransportError once the peer
  /// has closed and nothing is queued.
  virtual Bytes recv_bytes() = 0;
  /// Half-close: no further sends; pending frames from the peer stay readable.
  virtual void close() = 0;

  void send(const Message& msg) {
    Bytes frame = message_to_bytes(msg);
    send_bytes(frame);
    stats_.bytes_sent += frame.size();
    ++stats_.frames_sent;
  }

  Message recv() {
    Bytes frame = recv_bytes();
    stats_.bytes_received += frame.size();
    ++stats_.frames_received;
    return message_from_bytes(frame);
  }

  const TrafficStats& stats() const noexcept { return stats_; }

 private:
  TrafficStats stats_;
};

// ---------------------------------------------------------------------------
// Loopback

/// Byte counts seen on a loopback pair. A round is one flight of client
/// sends, closed by the client reading a reply; several frames sent before
/// the next read share a round.
struct LoopbackTap {
  std::uint64_t client_bytes = 0;
  std::uint64_t server_bytes = 0;
  std::uint64_t client_frames = 0;
  std::uint64_t server_frames = 0;
  std::uint64_t rounds = 0;
  std::vector<std::pair<MessageKind, std::uint64_t>> frames;  // in send order

  std::uint64_t total_bytes() const noexcept { return client_bytes + server_bytes; }
};

namespace detail {

struct LoopbackChannel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> inbox[2];  // inbox[s] is read by side s
  bool closed[2] = {false, false};  // closed[s]: side s will send no more
  bool client_in_flight = false;  // client has sent since its last read
  LoopbackTap tap;
};

}  // namespace detail

class LoopbackEndpoint final : public Endpoint {
 public:
  LoopbackEndpoint(std::shared_ptr<detail::LoopbackChannel> ch, int side) : ch_(std::move(ch)), side_(side) {}
  ~LoopbackEndpoint() override { close(); }

  void send_bytes(const Bytes& frame) override {
    std::lock_guard lock(ch_->mu);
    if (ch_->closed[side_]) throw TransportError("send on closed loopback endpoint");
    auto& tap = ch_->tap;
    const MessageKind kind = frame.size() > 4 ? static_cast<MessageKind>(frame[4]) : MessageKind::Abort;
    tap.frames.emplace_back(kind, frame.size());
    if (side_ == 0) {
      tap.client_bytes += frame.size();
      ++tap.client_frames;
      if (!ch_->client_in_flight) ++tap.rounds;
      ch_->client_in_flight = true;
    } else {
      tap.server_bytes += frame.size();
      ++tap.server_frames;
    }
    ch_->inbox[1 - side_].push_back(frame);
    ch_->cv.notify_all();
  }

  Bytes recv_bytes() override {
    std::unique_lock lock(ch_->mu);
    auto& box = ch_->inbox[side_];
    ch_->cv.wait(lock, [&] { return !box.empty() || ch_->closed[1 - side_]; });
    if (box.empty()) throw TransportError("loopback peer closed the connection");
    Bytes out = std::move(box.front());
    box.pop_front();
    if (side_ == 0) ch_->client_in_flight = false;
    return out;
  }

  void close() override {
    std::lock_guard lock(ch_->mu);
    ch_->closed[side_] = true;
    ch_->cv.notify_all();
  }

  LoopbackTap tap() const {
    std::lock_guard lock(ch_->mu);
    return ch_->tap;
  }

 private:
  std::shared_ptr<detail::LoopbackChannel> ch_;
  int side_;
};

/// Returns {client, server} ends of an in-process connection.
inline std::pair<std::unique_ptr<LoopbackEndpoint>, std::unique_ptr<LoopbackEndpoint>> loopback_pair() {
  auto ch = std::make_shared<detail::LoopbackChannel>();
  return {std::make_unique<LoopbackEndpoint>(ch, 0), std::make_unique<LoopbackEndpoint>(ch, 1)};
}

// ---------------------------------------------------------------------------
// TCP

namespace detail {

inline std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

inline std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address '" + addr + "' is not host:port");
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw ConfigError("address '" + addr + "' has an invalid port");
  }
  if (port > 65535) throw ConfigError("address '" + addr + "' has an invalid port");
  return {host.empty() ? "0.0.0.0" : host, std::uint16_t(port)};
}

}  // namespace detail

class TcpEndpoint final : public Endpoint {
 public:
  explicit TcpEndpoint(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  TcpEndpoint(const TcpEndpoint&) = delete;
  TcpEndpoint& operator=(const TcpEndpoint&) = delete;
  ~TcpEndpoint() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_bytes(const Bytes& frame) override {
    if (write_closed_) throw TransportError("send on closed TCP endpoint");
    std::size_t done = 0;
    while (done < frame.size()) {
      const ssize_t k = ::send(fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
      if (k < 0) {
        if (errno == EINTR) continue;
        throw TransportError(detail::errno_text("send"));
      }
      done += std::size_t(k);
    }
  }

  Bytes recv_bytes() override {
    Bytes frame(kFrameHeaderSize);
    if (!read_exact(frame.data(), kFrameHeaderSize, true)) throw TransportError("peer closed the connection");
    FrameHeader h;
    try {
      h = decode_frame_header(frame);
    } catch (const DecodeError& e) {
      throw TransportError(std::string("bad frame from peer: ") + e.what());
    }
    // Grow as bytes arrive rather than trusting the declared length up front.
    constexpr std::size_t kChunk = std::size_t(1) << 22;
    std::uint64_t left = h.body_len;
    while (left > 0) {
      const std::size_t n = std::size_t(std::min<std::uint64_t>(left, kChunk));
      const std::size_t at = frame.size();
      frame.resize(at + n);
      if (!read_exact(frame.data() + at, n, false)) throw TransportError("connection lost mid-frame");
      left -= n;
    }
    return frame;
  }

  void close() override {
    if (!write_closed_) {
      ::shutdown(fd_, SHUT_WR);
      write_closed_ = true;
    }
  }

  int fd() const noexcept { return fd_; }

 private:
  // False on a clean EOF before the first byte when `eof_ok`.
  bool read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok) {
    std::size_t done = 0;
    while (done < n) {
      const ssize_t k = ::recv(fd_, dst + done, n - done, 0);
      if (k == 0) {
        if (eof_ok && done == 0) return false;
        throw TransportError("connection lost mid-frame");
      }
      if (k < 0) {
        if (errno == EINTR) continue;
        throw TransportError(detail::errno_text("recv"));
      }
      done += std::size_t(k);
    }
    return true;
  }

  int fd_;
  bool write_closed_ = false;
};

inline std::unique_ptr<TcpEndpoint> tcp_connect(const std::string& addr) {
  const auto [host, port] = detail::split_host_port(addr);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + addr + ": " + ::gai_strerror(rc));
  }
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last = detail::errno_text("socket");
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<TcpEndpoint>(fd);
    }
    last = detail::errno_text("connect");
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to " + addr + ": " + last);
}

class TcpListener {
 public:
  explicit TcpListener(const std::string& addr) {
    const auto [host, port] = detail::split_host_port(addr);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
      throw TransportError("cannot resolve " + addr + ": " + ::gai_strerror(rc));
    }
    std::string last = "no addresses";
    for (addrinfo* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
        fd_ = fd;
      } else {
        last = detail::errno_text("bind/listen");
        ::close(fd);
      }
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw TransportError("cannot listen on " + addr + ": " + last);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() { shutdown(); }

  std::uint16_t port() const {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len);
    if (ss.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
    return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  }

  /// Blocks for the next connection; nullptr once the listener is shut down.
  std::unique_ptr<TcpEndpoint> accept() {
    for (;;) {
      const int fd = ::accept(fd_, nullptr, nullptr);
      if (fd >= 0) return std::make_unique<TcpEndpoint>(fd);
      if (errno == EINTR) continue;
      if (stopped_) return nullptr;
      throw TransportError(detail::errno_text("accept"));
    }
  }

  void shutdown() {
    if (fd_ >= 0 && !stopped_.exchange(true)) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
  std::atomic<bool> stopped_{false};
};

/// Accepts connections until the listener is shut down, running `handler` on
/// a thread per connection. Joins every handler before returning.
inline void tcp_serve(TcpListener& listener, const std::function<void(Endpoint&)>& handler) {
  std::vector<std::thread> workers;
  for (;;) {
    std::unique_ptr<TcpEndpoint> ep;
    try {
      ep = listener.accept();
    } catch (const TransportError&) {
      break;
    }
    if (!ep) break;
    workers.emplace_back([&handler, ep = std::move(ep)]() mutable {
      try {
        handler(*ep);
      } catch (const std::exception&) {
      }
      ep->close();
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace trapmat
