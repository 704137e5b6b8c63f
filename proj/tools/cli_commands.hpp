#pragma once

// Command implementations behind the `trapmat` executable. Kept apart from
// main() so the tests can drive them with string streams.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trapmat/trapmat.hpp"

#ifndef TRAPMAT_DEFAULT_TABLE
#define TRAPMAT_DEFAULT_TABLE "data/security_table.txt"
#endif

namespace trapmat::cli {

enum ExitCode : int { kExitOk = 0, kExitParameter = 2, kExitDishonest = 3, kExitTransport = 4 };

/// --table wins, then $TRAPMAT_SECURITY_TABLE, then the bundled table.
inline std::string resolve_table_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TRAPMAT_SECURITY_TABLE"); env != nullptr && *env != '\0') return env;
  if (std::filesystem::exists(TRAPMAT_DEFAULT_TABLE)) return TRAPMAT_DEFAULT_TABLE;
  return "data/security_table.txt";
}

struct SecurityParams {
  std::string delta = "1/4";
  std::string epsilon = "1/2";
  std::uint32_t lambda = 128;
  std::string table;

  Rational delta_value() const { return Rational::parse(delta); }
  Rational epsilon_value() const { return Rational::parse(epsilon); }
  std::size_t floor_dim() const {
    return nu(delta_value(), epsilon_value(), lambda, kRingBits, SecurityTable::load(resolve_table_path(table)));
  }
};

inline LpnSchedule make_schedule(std::size_t n, const SecurityParams& p) {
  return build_schedule_with_floor(n, p.delta_value(), p.epsilon_value(), p.lambda, kRingBits, p.floor_dim());
}

/// Ladder whose layers keep delta_i / mu_i equal to `ratio`, with delta_i
/// clamped into (0, 1/2). The floor stays the one of the base parameters.
inline LpnSchedule ratio_schedule(std::size_t n, const SecurityParams& p, std::size_t floor_dim, int ratio_log2) {
  const Rational eps = p.epsilon_value();
  const Rational upper(kNoiseRateDenominator / 2 - 1, kNoiseRateDenominator);
  std::vector<LayerOverride> overrides;
  std::size_t prev = n;
  while (prev > floor_dim) {
    const Rational mu = noise_rate_for(prev, eps);
    Rational delta = ratio_log2 >= 0 ? Rational(mu.num() << ratio_log2, mu.den())
                                     : Rational(mu.num(), mu.den() << -ratio_log2);
    if (!(delta < Rational(1, 2))) delta = upper;
    overrides.push_back({delta, eps});
    const auto shrunk = std::size_t((__int128(prev) * delta.num() + delta.den() - 1) / delta.den());
    prev = std::max(shrunk, floor_dim);
  }
  return build_schedule_with_floor(n, p.delta_value(), eps, p.lambda, kRingBits, floor_dim, overrides);
}

template <class F>
int run_command(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const DishonestServer& e) {
    err << "error: server failed verification, session aborted: " << e.what() << "\n";
    return kExitDishonest;
  } catch (const TransportError& e) {
    err << "error: transport: " << e.what() << "\n";
    return kExitTransport;
  } catch (const ProtocolError& e) {
    err << "error: protocol: " << e.what() << "\n";
    return kExitTransport;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitParameter;
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// params

struct ParamsOptions {
  std::size_t n = 0;
  std::size_t m = 0;  // 0: same as n
  std::size_t l = 0;  // 0: same as n
  SecurityParams security;
};

struct CostForecast {
  double client_init_muls = 0;
  double client_online_muls = 0;
  std::uint64_t server_init_muls = 0;
  std::uint64_t server_online_muls = 0;
  std::uint64_t naive = 0;
  ByteForecast bytes;
};

inline CostForecast forecast(std::size_t m, const LpnSchedule& s, std::size_t l) {
  CostForecast f;
  f.client_init_muls = predict_client_init_muls(m, s);
  f.client_online_muls = predict_client_online_muls(m, s, l);
  f.server_init_muls = predict_server_chain_muls(s) + predict_server_aenc_muls(m, s);
  f.server_online_muls = predict_server_online_muls(m, s, l);
  f.naive = naive_muls(m, s.n(), l);
  f.bytes = predict_bytes(m, s, {l});
  return f;
}

inline void print_schedule(std::ostream& out, const LpnSchedule& s) {
  out << "schedule: n=" << s.n() << " depth=" << s.depth() << " nu=" << s.floor_dim() << " lambda=" << s.lambda
      << " lambda'=" << s.lambda_prime << "\n";
  for (std::size_t i = 1; i <= s.depth(); ++i) {
    out << "  layer " << i << ": " << s.dims[i - 1] << " -> " << s.dims[i] << "  mu=" << s.mu(i) << " ("
        << std::setprecision(4) << s.mu(i).to_double() << ")\n";
  }
}

inline int cmd_params(const ParamsOptions& o, std::ostream& out) {
  const std::size_t m = o.m == 0 ? o.n : o.m;
  const std::size_t l = o.l == 0 ? o.n : o.l;
  LpnSchedule s;
  try {
    s = make_schedule(o.n, o.security);
  } catch (const DelegationUnprofitable& e) {
    out << "delegation does not pay off: " << e.what() << "\n";
    return kExitOk;
  }
  print_schedule(out, s);
  const CostForecast f = forecast(m, s, l);
  const auto ratio = [&](double v) { return v / double(f.naive); };
  out << std::setprecision(6);
  out << "ring multiplications (m=" << m << ", l=" << l << "):\n"
      << "  client init    " << std::fixed << std::setprecision(0) << f.client_init_muls << "\n"
      << "  client online  " << f.client_online_muls << "\n"
      << "  server init    " << f.server_init_muls << "\n"
      << "  server online  " << f.server_online_muls << "\n"
      << "  local product  " << f.naive << "\n"
      << std::defaultfloat << std::setprecision(4) << "  client online / local  " << ratio(f.client_online_muls) << "\n"
      << "  client total / local   " << ratio(f.client_init_muls + f.client_online_muls) << "\n";
  out << "bytes on the wire:\n"
      << "  chain upload           " << f.bytes.chain_upload << "\n"
      << "  chain products reply   " << f.bytes.chain_products_reply << "\n"
      << "  A_enc upload           " << f.bytes.aenc_upload << "\n"
      << "  A_enc partials reply   " << f.bytes.aenc_partials_reply << "\n"
      << "  online request         " << f.bytes.online_request.front() << "\n"
      << "  online reply           " << f.bytes.online_reply.front() << "\n"
      << "  total                  " << f.bytes.total() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Connections

/// Either a TCP connection or an in-process server.
class Link {
 public:
  static Link open(const std::string& connect, bool loopback) {
    Link link;
    if (loopback == !connect.empty()) throw ConfigError("give exactly one of --connect and --loopback");
    if (loopback) {
      link.loop_ = std::make_unique<LoopbackServer>();
    } else {
      link.tcp_ = tcp_connect(connect);
    }
    return link;
  }

  Endpoint& endpoint() { return loop_ ? static_cast<Endpoint&>(loop_->client()) : *tcp_; }
  /// Null for TCP links.
  LoopbackServer* loopback() { return loop_.get(); }
  void close() {
    if (loop_) {
      loop_->stop();
    } else if (tcp_) {
      tcp_->close();
    }
  }

 private:
  std::unique_ptr<LoopbackServer> loop_;
  std::unique_ptr<TcpEndpoint> tcp_;
};

inline void write_matrix_file(const std::string& path, const DenseMatrix& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  const Bytes bytes = encode_dense(m);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

// ---------------------------------------------------------------------------
// matmul

struct MatmulOptions {
  std::string connect;
  bool loopback = false;
  std::size_t m = 0, n = 0, l = 0;
  std::uint64_t seed = 1;
  std::string out_path;
  bool verify_local = false;
  bool verify_product = false;
  SecurityParams security;
};

struct MatmulReport {
  DenseMatrix result;
  LpnSchedule schedule;
  TrafficStats traffic;
  std::optional<LoopbackTap> tap;
  std::optional<OpCounter> server_ops;  // loopback only
  OpCounter client_ops;
  double client_init_s = 0;
  double client_online_s = 0;
  double wall_s = 0;
  std::optional<bool> matches_local;
};

/// Random A (m x n) and B (n x l) drawn from the seed.
inline std::pair<DenseMatrix, DenseMatrix> seeded_operands(std::uint64_t seed, std::size_t m, std::size_t n,
                                                           std::size_t l) {
  const SeededRng root = SeededRng::from_u64(seed);
  SeededRng ra = root.fork(1), rb = root.fork(2);
  DenseMatrix a = sample_uniform(m, n, ra);
  DenseMatrix b = sample_uniform(n, l, rb);
  return {std::move(a), std::move(b)};
}

inline MatmulReport run_matmul(const MatmulOptions& o) {
  if (o.m == 0 || o.n == 0 || o.l == 0) throw ConfigError("matmul needs --m, --n and --l >= 1");
  MatmulReport r;
  r.schedule = make_schedule(o.n, o.security);
  auto [a, b] = seeded_operands(o.seed, o.m, o.n, o.l);
  Link link = Link::open(o.connect, o.loopback);
  DelegationClient client(link.endpoint(), SeededRng::from_u64(o.seed).fork(3));
  const auto t0 = std::chrono::steady_clock::now();
  r.result = client.multiply_once(a, b, r.schedule, OnlineOptions{o.verify_product});
  r.wall_s = seconds_since(t0);
  r.client_ops = client.state().ops;
  r.client_init_s = client.timing().init_seconds;
  r.client_online_s = client.timing().online_seconds;
  r.traffic = link.endpoint().stats();
  link.close();
  if (LoopbackServer* lb = link.loopback()) {
    r.tap = lb->tap();
    r.server_ops = lb->session().init_ops();
    *r.server_ops += lb->session().online_ops();
  }
  if (o.verify_local) r.matches_local = r.result == mat_mul(a, b);
  return r;
}

inline int cmd_matmul(const MatmulOptions& o, std::ostream& out, std::ostream& err) {
  MatmulReport r = run_matmul(o);
  if (!o.out_path.empty()) write_matrix_file(o.out_path, r.result);
  out << std::setprecision(4) << "matmul " << o.m << "x" << o.n << " by " << o.n << "x" << o.l
      << ": depth=" << r.schedule.depth() << " nu=" << r.schedule.floor_dim();
  if (r.tap) out << " rounds=" << r.tap->rounds;
  out << " bytes_sent=" << r.traffic.bytes_sent << " bytes_received=" << r.traffic.bytes_received
      << " client_muls=" << r.client_ops.ring_muls;
  if (r.server_ops) {
    out << " server_muls=" << r.server_ops->ring_muls;
  } else {
    out << " server_muls_predicted="
        << predict_server_chain_muls(r.schedule) + predict_server_aenc_muls(o.m, r.schedule) +
               predict_server_online_muls(o.m, r.schedule, o.l);
  }
  out << " local_muls=" << naive_muls(o.m, o.n, o.l) << " client_init_s=" << r.client_init_s
      << " client_online_s=" << r.client_online_s << " wall_s=" << r.wall_s << "\n";
  if (r.matches_local) {
    if (!*r.matches_local) {
      err << "error: delegated product differs from the local product\n";
      return kExitDishonest;
    }
    out << "verified against local product\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// matvec-stream

struct StreamOptions {
  std::string connect;
  bool loopback = false;
  std::size_t n = 0;
  std::size_t m = 0;  // 0: same as n
  std::size_t count = 0;
  std::size_t batch = 64;
  std::uint64_t seed = 1;
  std::string out_path;
  bool verify_local = false;
  SecurityParams security;
};

struct StreamReport {
  DenseMatrix results;  // column j answers vector j
  LpnSchedule schedule;
  TrafficStats traffic;
  std::size_t generator_batches = 0;
  double client_init_s = 0;
  double generator_s = 0;  // wall time spent building generator batches
  double client_online_s = 0;
  double wall_s = 0;
  std::optional<bool> matches_local;
};

inline StreamReport run_matvec_stream(const StreamOptions& o) {
  const std::size_t m = o.m == 0 ? o.n : o.m;
  if (o.n == 0 || o.count == 0 || o.batch == 0) throw ConfigError("matvec-stream needs --n, --count, --batch >= 1");
  StreamReport r;
  r.schedule = make_schedule(o.n, o.security);
  const SeededRng root = SeededRng::from_u64(o.seed);
  SeededRng ra = root.fork(1), rv = root.fork(2);
  const DenseMatrix a = sample_uniform(m, o.n, ra);
  const DenseMatrix vectors = sample_uniform(o.n, o.count, rv);
  Link link = Link::open(o.connect, o.loopback);
  DelegationClient client(link.endpoint(), root.fork(3));
  const auto t0 = std::chrono::steady_clock::now();
  client.initialize(a, r.schedule);
  r.client_init_s = client.timing().init_seconds;
  r.results = DenseMatrix(m, o.count);
  std::optional<TargetedGenerator> gen;
  DenseMatrix v(o.n, 1);
  for (std::size_t j = 0; j < o.count; ++j) {
    if (!gen || gen->remaining() == 0) {
      const auto g0 = std::chrono::steady_clock::now();
      gen.emplace(client.make_generator(std::min(o.batch, o.count - j), 1));
      r.generator_s += seconds_since(g0);
      ++r.generator_batches;
    }
    for (std::size_t i = 0; i < o.n; ++i) v(i, 0) = vectors(i, j);
    const double before = client.timing().online_seconds;
    const DenseMatrix y = client.multiply_with_mask(v, gen->pull());
    r.client_online_s += client.timing().online_seconds - before;
    for (std::size_t i = 0; i < m; ++i) r.results(i, j) = y(i, 0);
  }
  r.wall_s = seconds_since(t0);
  r.traffic = link.endpoint().stats();
  link.close();
  if (o.verify_local) r.matches_local = r.results == mat_mul(a, vectors);
  return r;
}

inline int cmd_matvec_stream(const StreamOptions& o, std::ostream& out, std::ostream& err) {
  StreamReport r = run_matvec_stream(o);
  if (!o.out_path.empty()) write_matrix_file(o.out_path, r.results);
  const double k = double(o.count);
  out << std::setprecision(4) << "matvec-stream n=" << o.n << " count=" << o.count << " batch=" << o.batch
      << ": generator_batches=" << r.generator_batches << " bytes_sent=" << r.traffic.bytes_sent
      << " bytes_received=" << r.traffic.bytes_received << " client_init_s=" << r.client_init_s
      << " amortized_init_s=" << (r.client_init_s + r.generator_s) / k
      << " client_per_vector_s=" << r.client_online_s / k << " wall_s=" << r.wall_s << "\n";
  if (r.matches_local) {
    if (!*r.matches_local) {
      err << "error: delegated results differ from the local products\n";
      return kExitDishonest;
    }
    out << "verified against local products\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  std::size_t n = 0;
  double local_s = 0;
  double client_init_s = 0;
  double server_init_s = 0;
  double client_s = 0;
  double server_s = 0;

  double client_ratio() const { return (client_init_s + client_s) / local_s; }
  double total_ratio() const { return (client_init_s + server_init_s + client_s + server_s) / local_s; }
};

inline constexpr const char* kBenchHeader =
    "n,local_s,client_init_s,server_init_s,client_s,server_s,client_ratio,total_ratio";

inline void write_bench_row(std::ostream& out, const BenchRow& r) {
  out << r.n << std::setprecision(6) << std::scientific << "," << r.local_s << "," << r.client_init_s << ","
      << r.server_init_s << "," << r.client_s << "," << r.server_s << "," << std::defaultfloat << std::setprecision(4)
      << r.client_ratio() << "," << r.total_ratio() << "\n";
}

/// Component-wise median over trials.
inline BenchRow median_row(std::vector<BenchRow> trials) {
  auto med = [&](double BenchRow::*field) {
    std::vector<double> v;
    for (const auto& t : trials) v.push_back(t.*field);
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  };
  BenchRow r;
  r.n = trials.front().n;
  r.local_s = med(&BenchRow::local_s);
  r.client_init_s = med(&BenchRow::client_init_s);
  r.server_init_s = med(&BenchRow::server_init_s);
  r.client_s = med(&BenchRow::client_s);
  r.server_s = med(&BenchRow::server_s);
  return r;
}

/// One matrix-vector trial: init is amortized over n products, the generator
/// batch over `steps` products; client_s and server_s are per product.
inline BenchRow bench_matvec_trial(const LpnSchedule& s, std::uint64_t seed, std::size_t steps) {
  const std::size_t n = s.n();
  const SeededRng root = SeededRng::from_u64(seed);
  SeededRng ra = root.fork(1), rv = root.fork(2);
  const DenseMatrix a = sample_uniform(n, n, ra);
  std::vector<DenseMatrix> vs;
  for (std::size_t j = 0; j < steps; ++j) vs.push_back(sample_uniform(n, 1, rv));

  BenchRow row;
  row.n = n;
  std::vector<DenseMatrix> local;
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& v : vs) local.push_back(mat_mul(a, v));
  row.local_s = seconds_since(t0) / double(steps);

  LoopbackServer server;
  DelegationClient client(server.client(), root.fork(3));
  client.initialize(a, s);
  const double server_init = server.session().timing().init_seconds;

  const double so0 = server.session().timing().online_seconds;
  t0 = std::chrono::steady_clock::now();
  TargetedGenerator gen = client.make_generator(steps, 1);
  const double gen_wall = seconds_since(t0);
  const double gen_server = server.session().timing().online_seconds - so0;

  const double c0 = client.timing().online_seconds;
  const double s0 = server.session().timing().online_seconds;
  for (std::size_t j = 0; j < steps; ++j) {
    if (client.multiply_with_mask(vs[j], gen.pull()) != local[j]) {
      throw Error("bench: delegated matrix-vector product differs from the local one");
    }
  }
  row.client_s = (client.timing().online_seconds - c0) / double(steps);
  row.server_s = (server.session().timing().online_seconds - s0) / double(steps);
  row.client_init_s = client.timing().init_seconds / double(n) + (gen_wall - gen_server) / double(steps);
  row.server_init_s = server_init / double(n) + gen_server / double(steps);
  server.stop();
  return row;
}

/// One n x n by n x n trial through the two-round one-off path.
inline BenchRow bench_matmul_trial(const LpnSchedule& s, std::uint64_t seed) {
  const std::size_t n = s.n();
  auto [a, b] = seeded_operands(seed, n, n, n);
  BenchRow row;
  row.n = n;
  auto t0 = std::chrono::steady_clock::now();
  const DenseMatrix local = mat_mul(a, b);
  row.local_s = seconds_since(t0);
  LoopbackServer server;
  DelegationClient client(server.client(), SeededRng::from_u64(seed).fork(3));
  if (client.multiply_once(a, b, s) != local) throw Error("bench: delegated product differs from the local one");
  server.stop();
  row.client_init_s = client.timing().init_seconds;
  row.client_s = client.timing().online_seconds;
  row.server_init_s = server.session().timing().init_seconds;
  row.server_s = server.session().timing().online_seconds;
  return row;
}

struct BenchOptions {
  std::vector<std::size_t> sizes;  // empty: 2^k + 1 (or 2^k with pow2) for k = 9..12
  bool pow2 = false;
  std::size_t trials = 5;
  std::size_t steps = 64;
  std::string csv;
  std::string matmul_csv;  // empty: derived from csv
  bool skip_matmul = false;
  std::vector<double> audit;  // {alpha, c} when set
  bool grid_search = false;
  std::uint64_t seed = 1;
  SecurityParams security;
};

inline std::vector<std::size_t> bench_sizes(const BenchOptions& o) {
  if (!o.sizes.empty()) return o.sizes;
  std::vector<std::size_t> out;
  for (int k = 9; k <= 12; ++k) out.push_back((std::size_t(1) << k) + (o.pow2 ? 0 : 1));
  return out;
}

inline std::string matmul_csv_path(const BenchOptions& o) {
  if (!o.matmul_csv.empty()) return o.matmul_csv;
  std::filesystem::path p(o.csv);
  const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
  p.replace_extension();
  return p.string() + ".matmul" + ext;
}

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << kBenchHeader << "\n";
  return f;
}

inline BenchRow run_trials(std::size_t trials, const std::function<BenchRow(std::uint64_t)>& trial,
                           std::uint64_t seed) {
  std::vector<BenchRow> rows;
  for (std::size_t t = 0; t < trials; ++t) rows.push_back(trial(seed + t));
  return median_row(std::move(rows));
}

/// Honest-server audit: `queries` vector products with zero queries mixed in.
inline AuditReport bench_audit(const LpnSchedule& s, double alpha, double c, std::uint64_t seed, std::size_t queries,
                               double& seconds) {
  const std::size_t n = s.n();
  const SeededRng root = SeededRng::from_u64(seed);
  SeededRng ra = root.fork(1), rv = root.fork(2), rq = root.fork(4);
  const DenseMatrix a = sample_uniform(n, n, ra);
  std::vector<DenseMatrix> qs;
  for (std::size_t j = 0; j < queries; ++j) qs.push_back(sample_uniform(n, 1, rv));
  LoopbackServer server;
  DelegationClient client(server.client(), root.fork(3));
  client.initialize(a, s);
  const auto t0 = std::chrono::steady_clock::now();
  AuditReport rep = zero_query_audit([&](const DenseMatrix& b) { return client.multiply(b); }, n, qs, 1, alpha, c, rq);
  seconds = seconds_since(t0);
  server.stop();
  for (std::size_t j = 0; j < queries; ++j) {
    if (rep.results[j] != mat_mul(a, qs[j])) throw Error("bench: audited product differs from the local one");
  }
  return rep;
}

inline int cmd_bench(const BenchOptions& o, std::ostream& out) {
  if (o.csv.empty()) throw ConfigError("bench needs --csv");
  if (o.trials == 0 || o.steps == 0) throw ConfigError("bench needs --trials and --steps >= 1");
  if (!o.audit.empty() && o.audit.size() != 2) throw ConfigError("--audit takes alpha and c");
  const std::vector<std::size_t> sizes = bench_sizes(o);
  const std::size_t floor_dim = o.security.floor_dim();
  std::ofstream mv_csv = open_csv(o.csv);
  std::optional<std::ofstream> mm_csv;
  if (!o.skip_matmul) mm_csv = open_csv(matmul_csv_path(o));

  for (std::size_t n : sizes) {
    LpnSchedule s = build_schedule_with_floor(n, o.security.delta_value(), o.security.epsilon_value(),
                                              o.security.lambda, kRingBits, floor_dim);
    BenchRow mv = run_trials(o.trials, [&](std::uint64_t sd) { return bench_matvec_trial(s, sd, o.steps); }, o.seed);
    if (o.grid_search) {
      int best_k = 0;
      bool have_best = false;
      for (int k = -4; k <= 8; ++k) {
        const LpnSchedule g = ratio_schedule(n, o.security, floor_dim, k);
        const BenchRow row =
            run_trials(o.trials, [&](std::uint64_t sd) { return bench_matvec_trial(g, sd, o.steps); }, o.seed);
        out << "grid n=" << n << " ratio=2^" << k << " depth=" << g.depth() << " client_ratio=" << row.client_ratio()
            << "\n";
        if (!have_best || row.client_ratio() < mv.client_ratio()) {
          mv = row;
          s = g;
          best_k = k;
          have_best = true;
        }
      }
      out << "grid n=" << n << " best ratio=2^" << best_k << "\n";
    }
    write_bench_row(mv_csv, mv);
    out << "matvec n=" << n << " client_ratio=" << mv.client_ratio() << " total_ratio=" << mv.total_ratio() << "\n";
    if (mm_csv) {
      const BenchRow mm = run_trials(o.trials, [&](std::uint64_t sd) { return bench_matmul_trial(s, sd); }, o.seed);
      write_bench_row(*mm_csv, mm);
      out << "matmul n=" << n << " client_ratio=" << mm.client_ratio() << " total_ratio=" << mm.total_ratio()
          << "\n";
    }
    if (!o.audit.empty()) {
      double secs = 0;
      const AuditReport rep = bench_audit(s, o.audit[0], o.audit[1], o.seed, o.steps, secs);
      out << "audit n=" << n << " alpha=" << o.audit[0] << " c=" << o.audit[1] << " zero_queries=" << rep.audit_queries
          << " real_queries=" << o.steps << " verdict=" << to_string(rep.verdict) << " seconds=" << secs << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

/// Serves one connection and writes a one-line summary to `log`.
inline void serve_and_log(Endpoint& ep, std::ostream& log, std::mutex& log_mu) {
  ServerSession session;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string reason = serve_connection(ep, session);
  ep.close();
  std::lock_guard lock(log_mu);
  log << std::setprecision(4) << "session "
      << (session.session() ? to_hex(*session.session()) : std::string("(none)")) << " ended (" << reason
      << "): init_s=" << session.timing().init_seconds << " online_s=" << session.timing().online_seconds
      << " online_steps=" << session.online_steps() << " bytes_in=" << ep.stats().bytes_received
      << " bytes_out=" << ep.stats().bytes_sent << " init_muls=" << session.init_ops().ring_muls
      << " online_muls=" << session.online_ops().ring_muls << " wall_s=" << seconds_since(t0) << std::endl;
}

}  // namespace trapmat::cli
