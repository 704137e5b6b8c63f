// trapmat: delegation server, client workloads, parameter planning and benchmarks.

#include <csignal>
#include <iostream>
#include <mutex>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "cli_commands.hpp"

namespace {

using namespace trapmat;
using namespace trapmat::cli;

void add_security_flags(CLI::App* cmd, SecurityParams& p) {
  cmd->add_option("--delta", p.delta, "Subspace shrink factor, p/q in (0, 1/2)")->capture_default_str();
  cmd->add_option("--epsilon", p.epsilon, "Noise exponent, p/q in (0, 1)")->capture_default_str();
  cmd->add_option("--lambda", p.lambda, "Security parameter in bits")->capture_default_str();
  cmd->add_option("--table", p.table, "Security table (default: $TRAPMAT_SECURITY_TABLE or the bundled table)");
}

int serve(const std::string& addr) {
  // Block the stop signals in every thread; one watcher thread waits for them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  TcpListener listener(addr);
  std::cerr << "listening on port " << listener.port() << std::endl;
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    if (sig != 0) {
      std::cerr << "signal " << sig << ", shutting down" << std::endl;
      listener.shutdown();
    }
  });
  std::mutex log_mu;
  tcp_serve(listener, [&](Endpoint& ep) { serve_and_log(ep, std::cerr, log_mu); });
  // A shutdown not caused by a signal still has to release the watcher.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delegated matrix multiplication over Z/2^32 with trapdoored matrices"};
  app.require_subcommand(1);

  std::string listen_addr;
  auto* serve_cmd = app.add_subcommand("serve", "Run a delegation server");
  serve_cmd->add_option("--listen", listen_addr, "host:port to listen on")->required();

  ParamsOptions params;
  auto* params_cmd = app.add_subcommand("params", "Print the LPN schedule and predicted costs");
  params_cmd->add_option("--n", params.n, "Inner dimension")->required();
  params_cmd->add_option("--m", params.m, "Rows of A (default n)");
  params_cmd->add_option("--l", params.l, "Columns of B (default n)");
  add_security_flags(params_cmd, params.security);

  MatmulOptions mm;
  auto* mm_cmd = app.add_subcommand("matmul", "Delegate one random m x n by n x l product");
  auto* mm_connect = mm_cmd->add_option("--connect", mm.connect, "Server host:port");
  mm_cmd->add_flag("--loopback", mm.loopback, "Use an in-process server")->excludes(mm_connect);
  mm_cmd->add_option("--m", mm.m)->required();
  mm_cmd->add_option("--n", mm.n)->required();
  mm_cmd->add_option("--l", mm.l)->required();
  mm_cmd->add_option("--seed", mm.seed)->capture_default_str();
  mm_cmd->add_option("--out", mm.out_path, "Write the product here (wire matrix encoding)");
  mm_cmd->add_flag("--verify-local", mm.verify_local, "Compare with a local product");
  mm_cmd->add_flag("--verify-product", mm.verify_product, "Freivalds-check the server's online product");
  add_security_flags(mm_cmd, mm.security);

  StreamOptions st;
  auto* st_cmd = app.add_subcommand("matvec-stream", "Delegate a stream of matrix-vector products");
  auto* st_connect = st_cmd->add_option("--connect", st.connect, "Server host:port");
  st_cmd->add_flag("--loopback", st.loopback, "Use an in-process server")->excludes(st_connect);
  st_cmd->add_option("--n", st.n)->required();
  st_cmd->add_option("--m", st.m, "Rows of A (default n)");
  st_cmd->add_option("--count", st.count, "Number of vectors")->required();
  st_cmd->add_option("--batch", st.batch, "Targeted generator batch size")->capture_default_str();
  st_cmd->add_option("--seed", st.seed)->capture_default_str();
  st_cmd->add_option("--out", st.out_path, "Write the m x count results here");
  st_cmd->add_flag("--verify-local", st.verify_local, "Compare with local products");
  add_security_flags(st_cmd, st.security);

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time local against delegated products and write CSV");
  bench_cmd->add_option("--sizes", bench.sizes, "Comma-separated n values (default 513,1025,2049,4097)")
      ->delimiter(',');
  bench_cmd->add_flag("--pow2", bench.pow2, "Default sizes 2^k instead of 2^k + 1");
  bench_cmd->add_option("--trials", bench.trials)->capture_default_str();
  bench_cmd->add_option("--steps", bench.steps, "Matrix-vector products timed per trial")->capture_default_str();
  bench_cmd->add_option("--csv", bench.csv, "Matrix-vector CSV output")->required();
  bench_cmd->add_option("--matmul-csv", bench.matmul_csv, "Matrix-matrix CSV output (default <csv>.matmul.csv)");
  bench_cmd->add_flag("--skip-matmul", bench.skip_matmul, "Only run the matrix-vector workload");
  bench_cmd->add_option("--audit", bench.audit, "Run a zero-query audit: alpha c")->expected(2);
  bench_cmd->add_flag("--grid-search", bench.grid_search, "Search the subspace/sparsity ratio per n");
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  add_security_flags(bench_cmd, bench.security);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitParameter;
  }

  return run_command(std::cerr, [&] {
    if (serve_cmd->parsed()) return serve(listen_addr);
    if (params_cmd->parsed()) return cmd_params(params, std::cout);
    if (mm_cmd->parsed()) return cmd_matmul(mm, std::cout, std::cerr);
    if (st_cmd->parsed()) return cmd_matvec_stream(st, std::cout, std::cerr);
    return cmd_bench(bench, std::cout);
  });
}
