#pragma once

// Client and server state machines for delegated products A B.
//
// The client masks A once (A_enc = A + A') and masks each right operand
// (B_enc = B + B'). The server returns A_enc B_enc plus the probe products
// F_i^T B_enc, and the client recovers
//
//     A B = A_enc B_enc - A B' - A' B_enc
//
// using its trapdoors for the two correction terms. Every initialization reply
// is checked with iterated Freivalds checks before it is used; a failed check
// aborts the session.
//
// Wire rounds: (1) ChainUpload -> ChainProductsReply, (2) AEncUpload ->
// AEncPartialsReply, then one OnlineRequest -> OnlineReply per product.
// For a one-off product the first OnlineRequest may ride along in round 2.

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trapmat/errors.hpp"
#include "trapmat/lpn.hpp"
#include "trapmat/message.hpp"
#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"
#include "trapmat/trapdoor.hpp"
#include "trapmat/verify.hpp"

namespace trapmat {

enum class ClientPhase { InitSentChain, InitSentAEnc, Ready, Aborted };

inline const char* to_string(ClientPhase p) noexcept {
  switch (p) {
    case ClientPhase::InitSentChain: return "INIT_SENT_CHAIN";
    case ClientPhase::InitSentAEnc: return "INIT_SENT_AENC";
    case ClientPhase::Ready: return "READY";
    case ClientPhase::Aborted: return "ABORTED";
  }
  return "?";
}

struct ClientState {
  SessionId session{};
  LpnSchedule schedule;
  std::shared_ptr<const DenseMatrix> A;
  SubspaceChain chain;
  ChainProducts chain_products;
  LeftMaskSecret left_secret;
  DenseMatrix A_enc;
  std::optional<PrecomputedLeft> left_partials;  // set iff phase == Ready
  ClientPhase phase = ClientPhase::InitSentChain;
  bool online_in_flight = false;
  OpCounter ops;  // every ring operation the client performs

  std::size_t m() const noexcept { return A ? A->rows() : 0; }
  std::size_t n() const noexcept { return schedule.dims.empty() ? 0 : schedule.n(); }

  /// Tears the session down and wipes secret material.
  void abort() noexcept {
    phase = ClientPhase::Aborted;
    left_secret.zeroize();
    if (left_partials) {
      for (auto& p : left_partials->partials) p.zeroize();
      left_partials.reset();
    }
    A_enc.zeroize();
    online_in_flight = false;
  }
};

namespace detail {

inline void require_phase(const ClientState& s, ClientPhase want, const char* op) {
  if (s.phase == ClientPhase::Aborted) throw ProtocolError(std::string(op) + ": session was aborted");
  if (s.phase != want) {
    throw ProtocolError(std::string(op) + ": expected phase " + to_string(want) + ", in " + to_string(s.phase));
  }
}

inline void require_reply(const ClientState& s, const Message& reply, MessageKind want) {
  if (reply.session != s.session) {
    throw ProtocolError(std::string("reply for session ") + to_hex(reply.session) + " does not belong to session " +
                        to_hex(s.session));
  }
  if (reply.kind == MessageKind::Abort) throw ProtocolError("server aborted the session");
  if (reply.kind != want) {
    throw ProtocolError(std::string("expected ") + to_string(want) + ", got " + to_string(reply.kind));
  }
}

[[noreturn]] inline void abort_dishonest(ClientState& s, const std::string& what) {
  s.abort();
  throw DishonestServer(what);
}

}  // namespace detail

/// Samples the subspace chain and produces the ChainUpload message.
inline std::pair<ClientState, Message> client_init_phase1(const DenseMatrix& a, const LpnSchedule& schedule,
                                                          SeededRng& rng) {
  schedule.validate();
  if (a.cols() != schedule.n()) {
    throw ShapeError("client_init: A is " + a.shape() + " but the schedule is for n = " + std::to_string(schedule.n()));
  }
  ClientState s;
  s.session = random_session_id(rng);
  s.schedule = schedule;
  s.A = std::make_shared<const DenseMatrix>(a);
  s.chain = gen_chain(schedule, rng);
  Message msg{MessageKind::ChainUpload, s.session, s.chain.factors};
  return {std::move(s), std::move(msg)};
}

/// Verifies the chain products, samples the left trapdoor, and produces AEncUpload.
inline Message client_init_phase2(ClientState& s, const Message& reply, SeededRng& rng) {
  detail::require_phase(s, ClientPhase::InitSentChain, "client_init_phase2");
  detail::require_reply(s, reply, MessageKind::ChainProductsReply);
  const std::size_t d = s.chain.depth();
  if (reply.payload.size() != d + d * d) {
    detail::abort_dishonest(s, "chain products reply has " + std::to_string(reply.payload.size()) + " matrices");
  }
  ChainProducts cp(std::vector<DenseMatrix>(reply.payload.begin(), reply.payload.begin() + std::ptrdiff_t(d)),
                   std::vector<DenseMatrix>(reply.payload.begin() + std::ptrdiff_t(d), reply.payload.end()));
  if (!cp.shapes_match(s.chain)) detail::abort_dishonest(s, "chain products have wrong shapes");
  if (cp.forward(1) != s.chain.L(1)) detail::abort_dishonest(s, "F_1 differs from L_1");

  CheckConfig cfg{s.schedule.lambda_prime, rng};
  const auto factors = std::span<const DenseMatrix>(s.chain.factors);
  if (!check_partial_products(factors, cp.forward_all().subspan(1), cfg, &s.ops)) {
    detail::abort_dishonest(s, "forward chain products failed verification");
  }
  for (std::size_t j = 1; j <= d; ++j) {
    for (std::size_t i = 1; i < j; ++i) {
      if (cp.gram(j, i) != transpose(cp.gram(i, j))) detail::abort_dishonest(s, "gram blocks are not symmetric");
    }
    const DenseMatrix head = transpose(cp.forward(j));
    if (!check_partial_products(head, factors, cp.gram_all().subspan((j - 1) * d, d), cfg, &s.ops)) {
      detail::abort_dishonest(s, "gram row " + std::to_string(j) + " failed verification");
    }
  }
  s.chain_products = std::move(cp);

  s.left_secret = sample_left_secret(s.m(), s.schedule, rng);
  DenseMatrix a_prime = expand_left_mask(s.chain_products, s.left_secret, &s.ops);
  s.A_enc = mat_add(*s.A, a_prime, &s.ops);
  a_prime.zeroize();
  s.phase = ClientPhase::InitSentAEnc;
  return Message{MessageKind::AEncUpload, s.session, {s.A_enc}};
}

/// Verifies A_enc F_i and derives A F_i = A_enc F_i - A' F_i.
inline void client_init_phase3(ClientState& s, const Message& reply, SeededRng& rng) {
  detail::require_phase(s, ClientPhase::InitSentAEnc, "client_init_phase3");
  detail::require_reply(s, reply, MessageKind::AEncPartialsReply);
  const std::size_t d = s.chain.depth();
  if (reply.payload.size() != d) {
    detail::abort_dishonest(s, "A_enc partials reply has " + std::to_string(reply.payload.size()) + " matrices");
  }
  for (std::size_t i = 1; i <= d; ++i) {
    const auto& q = reply.payload[i - 1];
    if (q.rows() != s.m() || q.cols() != s.schedule.dims[i]) {
      detail::abort_dishonest(s, "A_enc partial " + std::to_string(i) + " has shape " + q.shape());
    }
  }
  CheckConfig cfg{s.schedule.lambda_prime, rng};
  if (!check_partial_products(s.A_enc, s.chain.factors, reply.payload, cfg, &s.ops)) {
    detail::abort_dishonest(s, "A_enc partial products failed verification");
  }
  std::vector<DenseMatrix> a_prime_partials = left_partials_from_secret(s.chain_products, s.left_secret, &s.ops);
  PrecomputedLeft pl;
  pl.base = s.A;
  for (std::size_t i = 0; i < d; ++i) {
    pl.partials.push_back(mat_sub(reply.payload[i], a_prime_partials[i], &s.ops));
    a_prime_partials[i].zeroize();
  }
  s.left_partials = std::move(pl);
  s.phase = ClientPhase::Ready;
}

struct OnlineOptions {
  /// Freivalds-check the server's A_enc B_enc before using it.
  bool verify_product = false;
};

/// Client-side continuation of one online product.
class PendingProduct {
 public:
  PendingProduct(SessionId session, RightMaskSecret secret, DenseMatrix b_enc, std::optional<DenseMatrix> ab_prime,
                 OnlineOptions options)
      : session_(session),
        secret_(std::move(secret)),
        b_enc_(std::move(b_enc)),
        ab_prime_(std::move(ab_prime)),
        options_(options) {}

  const SessionId& session() const noexcept { return session_; }
  const RightMaskSecret& secret() const noexcept { return secret_; }
  const DenseMatrix& b_enc() const noexcept { return b_enc_; }
  const std::optional<DenseMatrix>& ab_prime() const noexcept { return ab_prime_; }
  const OnlineOptions& options() const noexcept { return options_; }

 private:
  SessionId session_;
  RightMaskSecret secret_;
  DenseMatrix b_enc_;
  std::optional<DenseMatrix> ab_prime_;
  OnlineOptions options_;
};

namespace detail {

inline void begin_online(ClientState& s, const DenseMatrix& b, const char* op) {
  if (s.phase == ClientPhase::Aborted) throw ProtocolError(std::string(op) + ": session was aborted");
  if (s.phase != ClientPhase::Ready && s.phase != ClientPhase::InitSentAEnc) {
    throw ProtocolError(std::string(op) + ": initialization has not reached A_enc upload");
  }
  if (s.online_in_flight) throw ProtocolError(std::string(op) + ": another online product is in flight");
  if (b.rows() != s.n()) throw ShapeError(std::string(op) + ": B is " + b.shape() + ", n = " + std::to_string(s.n()));
}

}  // namespace detail

/// Masks B and produces the OnlineRequest. Allowed once A_enc has been sent,
/// so a one-off product can share the second init round.
inline std::pair<Message, PendingProduct> client_online(ClientState& s, const DenseMatrix& b, SeededRng& rng,
                                                        OnlineOptions options = {}) {
  detail::begin_online(s, b, "client_online");
  RightMaskSecret secret = sample_right_secret(b.cols(), s.schedule, rng);
  DenseMatrix b_enc = expand_right_mask(s.chain_products, secret, &s.ops);
  add_in_place(b_enc, b, &s.ops);
  s.online_in_flight = true;
  Message req{MessageKind::OnlineRequest, s.session, {b_enc}};
  return {std::move(req), PendingProduct(s.session, std::move(secret), std::move(b_enc), std::nullopt, options)};
}

/// Online step using a precomputed (B', A B') pair from a TargetedGenerator.
inline std::pair<Message, PendingProduct> client_online_with_mask(ClientState& s, const DenseMatrix& b,
                                                                  MaskBlock block, OnlineOptions options = {}) {
  detail::begin_online(s, b, "client_online_with_mask");
  if (block.mask.rows() != b.rows() || block.mask.cols() != b.cols() || block.product.rows() != s.m() ||
      block.product.cols() != b.cols()) {
    throw ShapeError("client_online_with_mask: mask block " + block.mask.shape() + "/" + block.product.shape() +
                     " does not fit B " + b.shape());
  }
  // The right trapdoor is not needed here; only the left one enters A' B_enc.
  DenseMatrix b_enc = mat_add(b, block.mask, &s.ops);
  block.mask.zeroize();
  s.online_in_flight = true;
  Message req{MessageKind::OnlineRequest, s.session, {b_enc}};
  return {std::move(req),
          PendingProduct(s.session, RightMaskSecret{}, std::move(b_enc), std::move(block.product), options)};
}

/// Consumes the OnlineReply and returns A B.
inline DenseMatrix client_finish(ClientState& s, const PendingProduct& pending, const Message& reply, SeededRng& rng) {
  detail::require_phase(s, ClientPhase::Ready, "client_finish");
  if (pending.session() != s.session) throw ProtocolError("pending product belongs to another session");
  detail::require_reply(s, reply, MessageKind::OnlineReply);
  s.online_in_flight = false;
  const std::size_t d = s.chain.depth();
  const std::size_t l = pending.b_enc().cols();
  if (reply.payload.size() != d + 1) {
    detail::abort_dishonest(s, "online reply has " + std::to_string(reply.payload.size()) + " matrices");
  }
  const DenseMatrix& product = reply.payload[0];
  if (product.rows() != s.m() || product.cols() != l) detail::abort_dishonest(s, "online product has shape " + product.shape());
  for (std::size_t i = 1; i <= d; ++i) {
    const auto& v = reply.payload[i];
    if (v.rows() != s.schedule.dims[i] || v.cols() != l) detail::abort_dishonest(s, "probe product has shape " + v.shape());
  }
  if (pending.options().verify_product) {
    CheckConfig cfg{s.schedule.lambda_prime, rng};
    if (!freivalds_check(s.A_enc, pending.b_enc(), product, cfg, &s.ops)) {
      detail::abort_dishonest(s, "online product failed verification");
    }
  }
  const DenseMatrix ab_prime =
      pending.ab_prime() ? *pending.ab_prime() : fast_AB_prime(*s.left_partials, pending.secret(), &s.ops);
  const auto probes = std::span<const DenseMatrix>(reply.payload).subspan(1);
  const DenseMatrix a_prime_b_enc = fast_Aprime_Benc(s.left_secret, pending.b_enc(), probes, &s.ops);
  DenseMatrix out = mat_sub(product, ab_prime, &s.ops);
  return mat_sub(out, a_prime_b_enc, &s.ops);
}

/// Server half of a session. Holds only what the client sent (the chain,
/// A_enc) and values derived from it.
class ServerSession {
 public:
  struct Timing {
    double init_seconds = 0;
    double online_seconds = 0;
  };

  /// Dispatches one client message. Returns no reply for Abort.
  std::optional<Message> handle(const Message& msg) {
    bind(msg.session);
    switch (msg.kind) {
      case MessageKind::ChainUpload: return on_chain(msg);
      case MessageKind::AEncUpload: return on_aenc(msg);
      case MessageKind::OnlineRequest: return on_online(msg);
      case MessageKind::Abort:
        reset();
        return std::nullopt;
      default:
        throw ProtocolError(std::string("server cannot handle ") + to_string(msg.kind));
    }
  }

  Message on_chain(const Message& msg) {
    bind(msg.session);
    if (msg.kind != MessageKind::ChainUpload) throw ProtocolError("on_chain: wrong message kind");
    if (chain_.depth() != 0 || a_enc_) throw ProtocolError("chain upload on a session that already has state");
    const auto t0 = Clock::now();
    SubspaceChain chain{msg.payload};
    chain.validate();
    ChainProducts cp = chain_products_local(chain, &init_ops_);
    Message reply{MessageKind::ChainProductsReply, msg.session, {}};
    reply.payload.assign(cp.forward_all().begin(), cp.forward_all().end());
    reply.payload.insert(reply.payload.end(), cp.gram_all().begin(), cp.gram_all().end());
    chain_ = std::move(chain);
    products_ = std::move(cp);
    timing_.init_seconds += elapsed(t0);
    return reply;
  }

  Message on_aenc(const Message& msg) {
    bind(msg.session);
    if (msg.kind != MessageKind::AEncUpload || msg.payload.size() != 1) throw ProtocolError("on_aenc: malformed message");
    if (a_enc_) throw ProtocolError("A_enc already uploaded");
    const auto t0 = Clock::now();
    const DenseMatrix& a_enc = msg.payload[0];
    Message reply{MessageKind::AEncPartialsReply, msg.session, {}};
    if (chain_.depth() > 0) {
      if (a_enc.cols() != chain_.dim(0)) {
        throw ShapeError("A_enc is " + a_enc.shape() + " but the chain starts at n = " + std::to_string(chain_.dim(0)));
      }
      const DenseMatrix* prev = &a_enc;
      for (std::size_t i = 1; i <= chain_.depth(); ++i) {
        reply.payload.push_back(mat_mul(*prev, chain_.L(i), &init_ops_));
        prev = &reply.payload.back();
      }
    }
    a_enc_ = a_enc;
    timing_.init_seconds += elapsed(t0);
    return reply;
  }

  Message on_online(const Message& msg) {
    bind(msg.session);
    if (msg.kind != MessageKind::OnlineRequest || msg.payload.size() != 1) {
      throw ProtocolError("on_online: malformed message");
    }
    if (!ready()) throw ProtocolError("online request before A_enc upload");
    const DenseMatrix& b_enc = msg.payload[0];
    if (b_enc.rows() != a_enc_->cols()) {
      throw ShapeError("B_enc is " + b_enc.shape() + " but A_enc is " + a_enc_->shape());
    }
    const auto t0 = Clock::now();
    Message reply{MessageKind::OnlineReply, msg.session, {}};
    reply.payload.reserve(chain_.depth() + 1);
    reply.payload.push_back(mat_mul(*a_enc_, b_enc, &online_ops_));
    const DenseMatrix* prev = &b_enc;
    for (std::size_t i = 1; i <= chain_.depth(); ++i) {
      reply.payload.push_back(mat_mul_tn(chain_.L(i), *prev, &online_ops_));
      prev = &reply.payload.back();
    }
    timing_.online_seconds += elapsed(t0);
    ++online_steps_;
    return reply;
  }

  bool ready() const noexcept { return a_enc_.has_value(); }
  const std::optional<SessionId>& session() const noexcept { return id_; }
  const SubspaceChain& chain() const noexcept { return chain_; }
  const OpCounter& init_ops() const noexcept { return init_ops_; }
  const OpCounter& online_ops() const noexcept { return online_ops_; }
  const Timing& timing() const noexcept { return timing_; }
  std::size_t online_steps() const noexcept { return online_steps_; }

 private:
  using Clock = std::chrono::steady_clock;
  static double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

  void bind(const SessionId& id) {
    if (!id_) {
      id_ = id;
    } else if (*id_ != id) {
      throw ProtocolError("message for session " + to_hex(id) + " on connection bound to " + to_hex(*id_));
    }
  }

  void reset() {
    chain_ = {};
    products_.reset();
    a_enc_.reset();
  }

  std::optional<SessionId> id_;
  SubspaceChain chain_;
  std::optional<ChainProducts> products_;
  std::optional<DenseMatrix> a_enc_;
  OpCounter init_ops_;
  OpCounter online_ops_;
  Timing timing_;
  std::size_t online_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Single-layer variant: one subspace factor L, masks A' = H L^T + S and
// B' = L G + T, all trapdoor products computed locally.

struct SimpleClientState {
  SessionId session{};
  std::shared_ptr<const DenseMatrix> A;
  Rational mu;
  DenseMatrix L;
  DenseMatrix H;
  SparseMatrix S;
  DenseMatrix A_enc;
  DenseMatrix AL;
  DenseMatrix A_enc_L;
  OpCounter ops;

  SimpleClientState() = default;
  SimpleClientState(const SimpleClientState&) = default;
  SimpleClientState(SimpleClientState&&) noexcept = default;
  SimpleClientState& operator=(const SimpleClientState&) = default;
  SimpleClientState& operator=(SimpleClientState&&) noexcept = default;
  ~SimpleClientState() { zeroize(); }

  DenseMatrix a_prime() const { return add_sparse_into(mat_mul(H, transpose(L)), S); }

  void zeroize() noexcept {
    H.zeroize();
    S.zeroize();
    AL.zeroize();
  }
};

struct SimplePending {
  DenseMatrix G;
  SparseMatrix T;
  DenseMatrix b_enc;
};

inline std::pair<SimpleClientState, Message> simple_init(const DenseMatrix& a, std::size_t n1, const NoiseRate& mu,
                                                         SeededRng& rng) {
  if (n1 == 0 || n1 >= a.cols()) {
    throw ConfigError("simple_init: subspace dimension " + std::to_string(n1) + " must lie in [1, n) with n = " +
                      std::to_string(a.cols()));
  }
  SimpleClientState s;
  s.session = random_session_id(rng);
  s.A = std::make_shared<const DenseMatrix>(a);
  s.mu = mu.value();
  s.L = sample_uniform(a.cols(), n1, rng);
  s.H = sample_uniform(a.rows(), n1, rng);
  s.S = sample_noise(a.rows(), a.cols(), mu, rng);
  DenseMatrix a_prime = add_sparse_into(mat_mul(s.H, transpose(s.L), &s.ops), s.S, &s.ops);
  s.A_enc = mat_add(a, a_prime, &s.ops);
  a_prime.zeroize();
  s.A_enc_L = mat_mul(s.A_enc, s.L, &s.ops);
  s.AL = mat_mul(a, s.L, &s.ops);
  Message msg{MessageKind::AEncUpload, s.session, {s.A_enc}};
  return {std::move(s), std::move(msg)};
}

inline std::pair<Message, SimplePending> simple_request(SimpleClientState& s, const DenseMatrix& b, SeededRng& rng) {
  if (b.rows() != s.L.rows()) throw ShapeError("simple_request: B is " + b.shape() + ", n = " + std::to_string(s.L.rows()));
  SimplePending p;
  p.G = sample_uniform(s.L.cols(), b.cols(), rng);
  p.T = sample_noise(b.rows(), b.cols(), s.mu, rng);
  p.b_enc = add_sparse_into(mat_mul(s.L, p.G, &s.ops), p.T, &s.ops);
  add_in_place(p.b_enc, b, &s.ops);
  Message req{MessageKind::OnlineRequest, s.session, {p.b_enc}};
  return {std::move(req), std::move(p)};
}

/// A B = A_enc B_enc - ((A L) G + A T) - (H (L^T B_enc) + S B_enc).
inline DenseMatrix simple_mul(SimpleClientState& s, const SimplePending& p, const Message& reply) {
  if (reply.session != s.session) throw ProtocolError("reply does not belong to this session");
  if (reply.kind != MessageKind::OnlineReply || reply.payload.empty()) throw ProtocolError("expected OnlineReply");
  const DenseMatrix& product = reply.payload[0];
  if (product.rows() != s.A->rows() || product.cols() != p.b_enc.cols()) {
    throw ShapeError("simple_mul: server product is " + product.shape());
  }
  DenseMatrix ab_prime = mat_mul(s.AL, p.G, &s.ops);
  add_in_place(ab_prime, dense_sparse_mul(*s.A, p.T, &s.ops), &s.ops);
  DenseMatrix a_prime_b_enc = mat_mul(s.H, mat_mul(transpose(s.L), p.b_enc, &s.ops), &s.ops);
  add_in_place(a_prime_b_enc, sparse_dense_mul(s.S, p.b_enc, &s.ops), &s.ops);
  return mat_sub(mat_sub(product, ab_prime, &s.ops), a_prime_b_enc, &s.ops);
}

}  // namespace trapmat
