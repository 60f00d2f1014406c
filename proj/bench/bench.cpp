// Serial reference executor vs OpenMP executor on the same MR programs.
// Prints one CSV row per workload; outputs of the two executors must agree.
#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mrmx/generate.hpp"
#include "mrmx/matmul_dense.hpp"
#include "mrmx/matmul_sparse.hpp"
#include "mrmx/oracles.hpp"

using namespace mrmx;

namespace {

struct Timing {
  double best = 1e300;
  std::string digest;
};

template <class F>
Timing time_it(int reps, F&& f) {
  Timing t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    t.digest = f();
    t.best = std::min(t.best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return t;
}

template <class S>
std::string digest(const CooMatrix<S>& C, const RoundStats& st) {
  std::ostringstream os;
  os << C.nnz() << ':' << st.rounds() << ':' << st.max_local_words() << ':' << st.max_agg_words();
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& e : C.entries()) {
    for (auto x : {static_cast<std::uint64_t>(e.i), static_cast<std::uint64_t>(e.j), static_cast<std::uint64_t>(e.x)}) {
      h ^= x;
      h *= 1099511628211ull;
    }
  }
  os << ':' << h;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP executor"};
  int dim = 128, reps = 3;
  double density = 0.05;
  app.add_option("--dim", dim, "matrix side")->check(CLI::Range(2, 4096));
  app.add_option("--density", density, "sparse input density")->check(CLI::Range(0.0, 1.0));
  app.add_option("--reps", reps, "repetitions, best time is reported")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  using N = NatSemiring;
  const auto d = static_cast<std::int64_t>(dim);
  const auto n = static_cast<std::size_t>(d * d);
  const auto Ad = random_matrix<N>(d, 1.0, 1), Bd = random_matrix<N>(d, 1.0, 2);
  const auto As = random_matrix<N>(d, density, 3), Bs = random_matrix<N>(d, density, 4);
  const auto Cs = naive_multiply(As, Bs);
  const auto nt = static_cast<std::size_t>(n_tilde(As, Bs));
  const MemoryBudget dense_b(std::max<std::size_t>(4, n / 64), 4 * n);
  const MemoryBudget sparse_b(std::max<std::size_t>(2, nt / 8), 8 * (nt + Cs.nnz()));
  const MemoryBudget r1_b(std::max(sparse_b.m, r1_min_local(d)), std::max(sparse_b.M, r1_min_local(d)));

  struct Work {
    std::string name;
    std::function<std::string(Execution)> run;
  };
  const std::vector<Work> work = {
      {"dense", [&](Execution e) { auto r = dd_multiply(Ad, Bd, dense_b, 1, Mode::Audit, e); return digest(r.C, r.stats); }},
      {"d1", [&](Execution e) { auto r = d1_multiply(As, Bs, sparse_b, 1, Mode::Audit, e); return digest(r.C, r.stats); }},
      {"d2", [&](Execution e) { auto r = d2_multiply(As, Bs, sparse_b, 1, Mode::Audit, e); return digest(r.C, r.stats); }},
      {"r1", [&](Execution e) { auto r = r1_multiply(As, Bs, r1_b, 1, Mode::Audit, e); return digest(r.C, r.stats); }},
  };

  std::printf("threads=%d dim=%d density=%g\n", omp_get_max_threads(), dim, density);
  std::printf("workload,serial_s,parallel_s,speedup,outputs_agree\n");
  int bad = 0;
  for (const auto& w : work) {
    const auto s = time_it(reps, [&] { return w.run(Execution::Serial); });
    const auto p = time_it(reps, [&] { return w.run(Execution::Parallel); });
    const bool agree = s.digest == p.digest;
    bad += !agree;
    std::printf("%s,%.4f,%.4f,%.2f,%s\n", w.name.c_str(), s.best, p.best, s.best / p.best, agree ? "yes" : "NO");
  }
  return bad == 0 ? 0 : 1;
}
