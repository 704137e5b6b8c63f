// Delegate A B to an in-process server, then a few matrix-vector products
// against the same A. Usage: demo_delegate [n] [table]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "trapmat/trapmat.hpp"

using namespace trapmat;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  DenseMatrix x(rows, cols);
  for (auto& w : x.data()) w = rng.next_u32();
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 1025;
  const std::string table_path = argc > 2 ? argv[2] : TRAPMAT_DEFAULT_TABLE;

  const SecurityTable table = SecurityTable::load(table_path);
  const LpnSchedule schedule = build_schedule(n, Rational(1, 4), Rational(1, 2), 40, kRingBits, table);
  std::printf("n=%zu depth=%zu nu=%zu\n", n, schedule.depth(), schedule.floor_dim());

  SeededRng rng = SeededRng::from_u64(2024);
  const DenseMatrix a = random_matrix(n, n, rng);

  LoopbackServer server;
  DelegationClient client(server.client(), rng.fork(1));
  client.initialize(a, schedule);
  std::printf("init: %.3f s on the client, %llu bytes so far\n", client.timing().init_seconds,
              static_cast<unsigned long long>(server.tap().total_bytes()));

  bool exact = true;
  for (int k = 0; k < 4; ++k) {
    const DenseMatrix b = random_matrix(n, 1, rng);
    exact = exact && client.multiply(b) == mat_mul(a, b);
  }
  const DenseMatrix b = random_matrix(n, 64, rng);
  exact = exact && client.multiply(b) == mat_mul(a, b);

  const LoopbackTap tap = server.tap();
  std::printf("online: %.3f s on the client over 5 products\n", client.timing().online_seconds);
  std::printf("rounds=%llu bytes=%llu exact=%s\n", static_cast<unsigned long long>(tap.rounds),
              static_cast<unsigned long long>(tap.total_bytes()), exact ? "yes" : "no");
  std::printf("server stopped: %s\n", server.stop().c_str());
  return exact ? 0 : 1;
}
