#pragma once

// Normative byte layout. All integers little-endian.
//
//   matrix  : u32 rows | u32 cols | rows*cols u32 words, row-major
//   body    : u32 count | count matrices
//   frame   : "TMX1" | u8 kind | 16-byte session | u64 body_len | body

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/message.hpp"
#include "trapmat/ring_matrix.hpp"

namespace trapmat {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::array<std::uint8_t, 4> kFrameMagic{'T', 'M', 'X', '1'};
inline constexpr std::size_t kFrameHeaderSize = 4 + 1 + 16 + 8;
inline constexpr std::uint64_t kMaxFrameBody = std::uint64_t(1) << 40;

namespace wire {

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

/// Bounds-checked little-endian reader that reports failures with their offset.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0)
      : bytes_(bytes), base_(base_offset) {}

  std::size_t offset() const noexcept { return base_ + pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DecodeError(std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, have " +
                            std::to_string(remaining()),
                        offset());
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

inline void append_dense(Bytes& out, const DenseMatrix& m) {
  if (m.rows() > 0xffffffffu || m.cols() > 0xffffffffu) throw ShapeError("matrix too large to encode: " + m.shape());
  put_u32(out, std::uint32_t(m.rows()));
  put_u32(out, std::uint32_t(m.cols()));
  const std::size_t at = out.size();
  out.resize(at + 4 * m.size());
  std::uint8_t* dst = out.data() + at;
  for (Word w : m.data()) {
    dst[0] = std::uint8_t(w);
    dst[1] = std::uint8_t(w >> 8);
    dst[2] = std::uint8_t(w >> 16);
    dst[3] = std::uint8_t(w >> 24);
    dst += 4;
  }
}

inline DenseMatrix read_dense(Reader& in) {
  const std::uint64_t rows = in.u32("matrix rows");
  const std::uint64_t cols = in.u32("matrix cols");
  const std::uint64_t words = rows * cols;
  if (words > in.remaining() / 4) {
    throw DecodeError("truncated matrix body: " + std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
                          std::to_string(words * 4) + " bytes, have " + std::to_string(in.remaining()),
                      in.offset());
  }
  auto raw = in.take(std::size_t(words * 4), "matrix body");
  std::vector<Word> data(static_cast<std::size_t>(words));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint8_t* p = raw.data() + 4 * i;
    data[i] = Word(p[0]) | Word(p[1]) << 8 | Word(p[2]) << 16 | Word(p[3]) << 24;
  }
  return DenseMatrix(std::size_t(rows), std::size_t(cols), std::move(data));
}

}  // namespace wire

/// Size in bytes of an encoded rows x cols matrix.
inline constexpr std::uint64_t encoded_dense_size(std::uint64_t rows, std::uint64_t cols) noexcept {
  return 8 + 4 * rows * cols;
}

inline Bytes encode_dense(const DenseMatrix& m) {
  Bytes out;
  out.reserve(std::size_t(encoded_dense_size(m.rows(), m.cols())));
  wire::append_dense(out, m);
  return out;
}

/// Rejects truncated and overlong buffers.
inline DenseMatrix decode_dense(std::span<const std::uint8_t> bytes) {
  wire::Reader in(bytes);
  DenseMatrix m = wire::read_dense(in);
  if (in.remaining() != 0) {
    throw DecodeError("overlong matrix buffer: " + std::to_string(in.remaining()) + " trailing bytes", in.offset());
  }
  return m;
}

struct Frame {
  std::uint8_t kind = 0;
  SessionId session{};
  Bytes body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Bytes encode_frame(const Frame& f) {
  if (f.body.size() > kMaxFrameBody) throw ProtocolError("frame body exceeds 2^40 bytes");
  Bytes out;
  out.reserve(kFrameHeaderSize + f.body.size());
  out.insert(out.end(), kFrameMagic.begin(), kFrameMagic.end());
  out.push_back(f.kind);
  out.insert(out.end(), f.session.begin(), f.session.end());
  wire::put_u64(out, f.body.size());
  out.insert(out.end(), f.body.begin(), f.body.end());
  return out;
}

struct FrameHeader {
  std::uint8_t kind = 0;
  SessionId session{};
  std::uint64_t body_len = 0;
};

/// Parses and validates the fixed 29-byte header.
inline FrameHeader decode_frame_header(std::span<const std::uint8_t> bytes) {
  wire::Reader in(bytes);
  auto magic = in.take(4, "frame magic");
  if (!std::equal(magic.begin(), magic.end(), kFrameMagic.begin())) throw DecodeError("bad frame magic", 0);
  FrameHeader h;
  h.kind = in.take(1, "frame kind")[0];
  if (h.kind < 1 || h.kind > 7) throw DecodeError("unknown message kind " + std::to_string(h.kind), 4);
  auto sid = in.take(16, "session id");
  std::copy(sid.begin(), sid.end(), h.session.begin());
  h.body_len = in.u64("body length");
  if (h.body_len > kMaxFrameBody) throw DecodeError("frame body length exceeds 2^40 bytes", 21);
  return h;
}

inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_frame_header(bytes);
  const std::size_t have = bytes.size() - std::min(bytes.size(), kFrameHeaderSize);
  if (have < h.body_len) {
    throw DecodeError("truncated frame body: need " + std::to_string(h.body_len) + " bytes, have " +
                          std::to_string(have),
                      kFrameHeaderSize + have);
  }
  if (have > h.body_len) {
    throw DecodeError("overlong frame: " + std::to_string(have - h.body_len) + " trailing bytes",
                      kFrameHeaderSize + std::size_t(h.body_len));
  }
  Frame f;
  f.kind = h.kind;
  f.session = h.session;
  f.body.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

namespace detail {

// Structural payload checks that need no session context.
inline void validate_payload(MessageKind kind, const std::vector<DenseMatrix>& p) {
  auto fail = [&](const std::string& why) {
    throw DecodeError(std::string(to_string(kind)) + " payload: " + why, kFrameHeaderSize);
  };
  auto need_count = [&](std::size_t n) {
    if (p.size() != n) fail("expected " + std::to_string(n) + " matrices, got " + std::to_string(p.size()));
  };
  switch (kind) {
    case MessageKind::ChainUpload:
      if (p.empty()) fail("empty subspace chain");
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i - 1].cols() != p[i].rows()) fail("chain factors " + p[i - 1].shape() + " and " + p[i].shape());
      }
      break;
    case MessageKind::ChainProductsReply: {
      std::size_t d = 0;
      while (d + d * d < p.size()) ++d;
      if (d == 0 || d + d * d != p.size()) fail(std::to_string(p.size()) + " matrices is not d + d^2");
      for (std::size_t i = 0; i < d; ++i) {
        if (p[i].rows() != p[0].rows()) fail("forward products disagree on n");
      }
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
          const auto& g = p[d + j * d + i];
          if (g.rows() != p[j].cols() || g.cols() != p[i].cols()) fail("gram block shape " + g.shape());
        }
      }
      break;
    }
    case MessageKind::AEncUpload:
    case MessageKind::OnlineRequest:
      need_count(1);
      break;
    case MessageKind::AEncPartialsReply:
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i].rows() != p[0].rows()) fail("partials disagree on m");
      }
      break;
    case MessageKind::OnlineReply:
      if (p.empty()) fail("missing product");
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i].cols() != p[0].cols()) fail("probe products disagree on l");
      }
      break;
    case MessageKind::Abort:
      need_count(0);
      break;
  }
}

}  // namespace detail

inline Frame encode_message(const Message& msg) {
  Frame f;
  f.kind = static_cast<std::uint8_t>(msg.kind);
  f.session = msg.session;
  std::uint64_t size = 4;
  for (const auto& m : msg.payload) size += encoded_dense_size(m.rows(), m.cols());
  f.body.reserve(std::size_t(size));
  wire::put_u32(f.body, std::uint32_t(msg.payload.size()));
  for (const auto& m : msg.payload) wire::append_dense(f.body, m);
  return f;
}

inline Message decode_message(const Frame& f) {
  if (f.kind < 1 || f.kind > 7) throw DecodeError("unknown message kind " + std::to_string(f.kind), 4);
  Message msg;
  msg.kind = static_cast<MessageKind>(f.kind);
  msg.session = f.session;
  wire::Reader in(f.body, kFrameHeaderSize);
  const std::uint32_t count = in.u32("matrix count");
  // every matrix needs at least its 8-byte header
  if (count > in.remaining() / 8) {
    throw DecodeError("matrix count " + std::to_string(count) + " exceeds body size", in.offset());
  }
  msg.payload.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) msg.payload.push_back(wire::read_dense(in));
  if (in.remaining() != 0) {
    throw DecodeError("overlong message body: " + std::to_string(in.remaining()) + " trailing bytes", in.offset());
  }
  detail::validate_payload(msg.kind, msg.payload);
  return msg;
}

/// Total bytes on the wire for `msg`.
inline std::uint64_t encoded_message_size(const Message& msg) noexcept {
  std::uint64_t size = kFrameHeaderSize + 4;
  for (const auto& m : msg.payload) size += encoded_dense_size(m.rows(), m.cols());
  return size;
}

inline Bytes message_to_bytes(const Message& msg) { return encode_frame(encode_message(msg)); }
inline Message message_from_bytes(std::span<const std::uint8_t> bytes) { return decode_message(decode_frame(bytes)); }

}  // namespace trapmat
