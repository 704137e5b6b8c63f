#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"

namespace trapmat {

/// Wire kinds. The numeric values are the frame's kind byte.
enum class MessageKind : std::uint8_t {
  ChainUpload = 1,         // client -> server: L_1..L_d
  ChainProductsReply = 2,  // server -> client: F_1..F_d, then gram(j, i) row-major over j, i in 1..d
  AEncUpload = 3,          // client -> server: A_enc
  AEncPartialsReply = 4,   // server -> client: A_enc F_1 .. A_enc F_d
  OnlineRequest = 5,       // client -> server: B_enc
  OnlineReply = 6,         // server -> client: A_enc B_enc, F_1^T B_enc .. F_d^T B_enc
  Abort = 7,               // either direction, no payload
};

inline const char* to_string(MessageKind k) noexcept {
  switch (k) {
    case MessageKind::ChainUpload: return "ChainUpload";
    case MessageKind::ChainProductsReply: return "ChainProductsReply";
    case MessageKind::AEncUpload: return "AEncUpload";
    case MessageKind::AEncPartialsReply: return "AEncPartialsReply";
    case MessageKind::OnlineRequest: return "OnlineRequest";
    case MessageKind::OnlineReply: return "OnlineReply";
    case MessageKind::Abort: return "Abort";
  }
  return "Unknown";
}

inline bool is_client_to_server(MessageKind k) noexcept {
  return k == MessageKind::ChainUpload || k == MessageKind::AEncUpload || k == MessageKind::OnlineRequest ||
         k == MessageKind::Abort;
}

using SessionId = std::array<std::uint8_t, 16>;

inline SessionId random_session_id(SeededRng& rng) {
  SessionId id{};
  for (std::size_t i = 0; i < id.size(); i += 4) {
    const std::uint32_t w = rng.next_u32();
    for (std::size_t b = 0; b < 4; ++b) id[i + b] = std::uint8_t(w >> (8 * b));
  }
  return id;
}

inline std::string to_hex(const SessionId& id) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (auto b : id) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

struct Message {
  MessageKind kind = MessageKind::Abort;
  SessionId session{};
  std::vector<DenseMatrix> payload;

  friend bool operator==(const Message&, const Message&) = default;
};

}  // namespace trapmat
