// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mrmx/generate.hpp"
#include "mrmx/linalg.hpp"
#include "mrmx/matching.hpp"
#include "mrmx/matmul_sparse.hpp"
#include "mrmx/oracles.hpp"
#include "mrmx/primitives.hpp"
#include "mrmx/sort.hpp"

using namespace mrmx;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double product_cap(const MemoryBudget& b) {
  return 2.0 * std::sqrt(2.0) * static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m));
}

std::string audit_text(const RoundStats& st) {
  std::ostringstream os;
  st.write_audit_log(os);
  return os.str();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// ---- criteria 1, 2, 8: multiplication sweep ------------------------------

struct SweepTally {
  int runs = 0, wrong = 0, dirty = 0, over_cap = 0, nondeterministic = 0;
  std::vector<int> per_algo = std::vector<int>(6, 0);
};

const char* kAlgos[] = {"dense", "d1", "d2", "r1", "auto", "sd"};

template <class S>
using Runner = std::function<MatmulResult<S>(const CooMatrix<S>&, const CooMatrix<S>&, const MemoryBudget&,
                                             std::uint64_t)>;

template <class S>
void check_run(SweepTally& t, int algo, const Runner<S>& run, const CooMatrix<S>& A, const CooMatrix<S>& B,
               const CooMatrix<S>& C, const MemoryBudget& b, std::uint64_t seed) {
  const auto r = run(A, B, b, seed);
  ++t.runs;
  ++t.per_algo[static_cast<std::size_t>(algo)];
  if (!(r.C == C)) ++t.wrong;
  const auto& st = r.stats;
  if (!st.clean() || static_cast<double>(st.max_local_words()) > b.local_cap() ||
      static_cast<double>(st.max_agg_words()) > b.agg_cap())
    ++t.dirty;
  if (static_cast<double>(st.max_products_per_round()) > product_cap(b)) ++t.over_cap;
  const auto again = run(A, B, b, seed);
  if (!(again.C == r.C) || audit_text(again.stats) != audit_text(st) || again.algo != r.algo) ++t.nondeterministic;
}

/// Sparse legality: m in [2, 2n~), M = 8 (n~ + o).
template <class S>
MemoryBudget sparse_budget(const CooMatrix<S>& A, const CooMatrix<S>& B, std::size_t o, std::mt19937_64& gen,
                           std::size_t min_m = 2) {
  const auto nt = static_cast<std::size_t>(n_tilde(A, B));
  const std::size_t m = std::max(min_m, 2 + gen() % std::max<std::size_t>(1, 2 * nt - 2));
  return MemoryBudget(m, std::max(m, 8 * (nt + o)));
}

template <class S>
void sweep(SweepTally& t, std::uint64_t base) {
  std::mt19937_64 gen(base);
  const Runner<S> dense = [](auto& A, auto& B, auto& b, auto s) { return dd_multiply(A, B, b, s); };
  const Runner<S> d1 = [](auto& A, auto& B, auto& b, auto s) { return d1_multiply(A, B, b, s); };
  const Runner<S> d2 = [](auto& A, auto& B, auto& b, auto s) { return d2_multiply(A, B, b, s); };
  const Runner<S> r1 = [](auto& A, auto& B, auto& b, auto s) { return r1_multiply(A, B, b, s); };
  const Runner<S> au = [](auto& A, auto& B, auto& b, auto s) { return sparse_multiply_auto(A, B, b, s, s % 2 == 1); };
  const Runner<S> sd = [](auto& A, auto& B, auto& b, auto s) { return sd_multiply(A, B, b, s); };

  for (int k = 0; k < 100; ++k) {
    const std::uint64_t seed = gen();
    // dense inputs, M a random multiple of n from 2n
    {
      const std::int64_t d = 1 + static_cast<std::int64_t>(gen() % 64);
      const auto n = static_cast<std::size_t>(d * d);
      const double dens = 0.3 + 0.7 * static_cast<double>(gen() % 1000) / 1000.0;
      const auto A = random_matrix<S>(d, dens, gen());
      const auto B = random_matrix<S>(d, dens, gen());
      const auto C = naive_multiply(A, B);
      const std::size_t m = 2 + gen() % std::max<std::size_t>(2, 2 * n);
      const MemoryBudget b(m, std::max(m, n * (2 + gen() % 7)));
      check_run(t, 0, dense, A, B, C, b, seed);
    }
    // sparse inputs for D1, D2, auto
    {
      const std::int64_t d = 2 + static_cast<std::int64_t>(gen() % 63);
      const auto A = random_sparse<S>(d, 1 + static_cast<std::int64_t>(gen() % (3 * d)), gen());
      const auto B = random_sparse<S>(d, 1 + static_cast<std::int64_t>(gen() % (3 * d)), gen());
      const auto C = naive_multiply(A, B);
      const MemoryBudget b = sparse_budget(A, B, C.nnz(), gen);
      check_run(t, 1, d1, A, B, C, b, seed);
      check_run(t, 2, d2, A, B, C, b, seed);
      check_run(t, 4, au, A, B, C, b, seed);
    }
    // R1: denser inputs so that n~ exceeds the sketch's local minimum
    {
      const std::int64_t d = 16 + static_cast<std::int64_t>(gen() % 49);
      const std::int64_t nz = d + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(d * d / 3));
      const auto A = random_sparse<S>(d, nz, gen());
      const auto B = random_sparse<S>(d, nz, gen());
      const auto C = naive_multiply(A, B);
      const MemoryBudget b = sparse_budget(A, B, C.nnz(), gen, r1_min_local(d));
      check_run(t, 3, r1, A, B, C, b, seed);
    }
    // sparse A times dense B
    {
      const std::int64_t d = 2 + static_cast<std::int64_t>(gen() % 63);
      const auto A = random_sparse<S>(d, 1 + static_cast<std::int64_t>(gen() % (2 * d)), gen());
      const auto B = random_matrix<S>(d, 1.0, gen());
      const auto C = naive_multiply(A, B);
      const MemoryBudget b = sparse_budget(A, B, C.nnz(), gen);
      check_run(t, 5, sd, A, B, C, b, seed);
    }
  }
}

// ---- criterion 3 ---------------------------------------------------------

struct Triple {
  std::int64_t d;
  std::size_t m, M;
};

std::vector<Triple> schedule_grid() {
  std::vector<Triple> g;
  for (std::int64_t d : {8, 16, 32, 64})
    for (std::size_t m : {4, 16, 64})
      for (std::size_t f : {2, 4, 8}) {
        const auto n = static_cast<std::size_t>(d * d);
        if (m * 4 > n) continue;
        g.push_back({d, m, f * n});
      }
  return g;
}

/// ceil(q / K) with q = sqrt(n/m) and K = min(M/n, q).
std::int64_t expected_product_rounds(const Triple& t) {
  const auto n = static_cast<std::int64_t>(t.d * t.d);
  const auto q = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n) / static_cast<double>(t.m))));
  const std::int64_t K = std::min<std::int64_t>(static_cast<std::int64_t>(t.M) / n, q);
  return (q + K - 1) / K;
}

}  // namespace

int main() {
  const auto t_all = Clock::now();

  {
    const auto t0 = Clock::now();
    SweepTally nat, mp;
    sweep<NatSemiring>(nat, 101);
    sweep<MinPlusSemiring>(mp, 202);
    const double secs = seconds_since(t0);
    std::ostringstream per;
    int min_per = 1 << 30;
    for (std::size_t a = 0; a < 6; ++a) {
      per << (a ? " " : "") << kAlgos[a] << "=" << nat.per_algo[a] << "+" << mp.per_algo[a];
      min_per = std::min({min_per, nat.per_algo[a], mp.per_algo[a]});
    }
    const int runs = nat.runs + mp.runs;
    std::ostringstream s1, s2, s8;
    s1 << "correctness sweep, " << runs - nat.wrong - mp.wrong << "/" << runs << " runs match the oracle (" << per.str()
       << "), " << secs << " s for both passes";
    verdict(1, nat.wrong + mp.wrong == 0 && min_per >= 100 && secs / 2 <= 120, s1.str());
    s2 << "budget audit, " << nat.dirty + mp.dirty << " runs over a memory cap, " << nat.over_cap + mp.over_cap
       << " over the product cap 2*sqrt(2)*M*sqrt(m)";
    verdict(2, nat.dirty + mp.dirty + nat.over_cap + mp.over_cap == 0, s2.str());
    s8 << "determinism, " << nat.nondeterministic + mp.nondeterministic << "/" << runs
       << " repeated runs differ in output or round stats";
    // printed in order below
    const bool ok8 = nat.nondeterministic + mp.nondeterministic == 0;
    const std::string msg8 = s8.str();

    {
      const auto grid = schedule_grid();
      int exact = 0, sort_ok = 0, prefix_ok = 0, sorted_ok = 0;
      std::ostringstream worst;
      std::mt19937_64 gen(303);
      for (const auto& t : grid) {
        const MemoryBudget b(t.m, t.M);
        const auto A = random_matrix<NatSemiring>(t.d, 1.0, gen());
        const auto B = random_matrix<NatSemiring>(t.d, 1.0, gen());
        const auto r = dd_multiply(A, B, b, 1);
        if (static_cast<std::int64_t>(r.stats.rounds_labeled("product")) == expected_product_rounds(t)) ++exact;

        const auto n = static_cast<std::size_t>(t.d * t.d);
        const std::size_t bound = log_rounds_bound(n, t.m);
        std::vector<IndexedItem<std::int64_t>> items(n);
        for (std::size_t i = 0; i < n; ++i) items[i] = {static_cast<std::int64_t>(i), static_cast<std::int64_t>(gen() % n)};
        const auto p = mr_prefix<std::int64_t>(items, std::plus<std::int64_t>(), b);
        if (p.stats.rounds() <= bound) ++prefix_ok;
        const auto s = mr_sort<std::int64_t>(items, MemoryBudget(t.m, t.M, kSortLocalConstant, 4.0), 7, Mode::Audit);
        std::vector<std::int64_t> got, want;
        for (const auto& it : s.items) got.push_back(it.value);
        for (const auto& it : items) want.push_back(it.value);
        std::stable_sort(want.begin(), want.end());
        if (got == want) ++sorted_ok;
        if (s.stats.rounds() <= bound) {
          ++sort_ok;
        } else if (worst.tellp() < 200) {
          worst << " n=" << n << ",m=" << t.m << ":" << s.stats.rounds() << ">" << bound;
        }
      }
      const int g = static_cast<int>(grid.size());
      std::ostringstream s3;
      s3 << "round schedules on " << g << " triples, dense product rounds exact " << exact << "/" << g
         << ", prefix within 2*ceil(log_m n)+3 " << prefix_ok << "/" << g << ", sort within it " << sort_ok << "/" << g
         << " (sorted correctly " << sorted_ok << "/" << g << ")" << (worst.str().empty() ? "" : ";" + worst.str());
      verdict(3, g >= 20 && exact == g && prefix_ok == g && sort_ok == g && sorted_ok == g, s3.str());
    }

    {
      const auto t0 = Clock::now();
      struct Inst {
        std::int64_t r, c;
      };
      bool ok = true;
      std::ostringstream s4;
      s4 << "sketch accuracy eps=1/2 delta=1/8 over 200 seeds,";
      for (const Inst in : {Inst{10, 10}, Inst{10, 100}, Inst{100, 100}}) {
        // a column of ones times a row of ones, then every cell hit once
        const std::int64_t d = 100;
        std::vector<Entry<std::int64_t>> ea, eb;
        for (std::int64_t i = 0; i < in.r; ++i) ea.push_back({i, 0, 1});
        for (std::int64_t j = 0; j < in.c; ++j) eb.push_back({0, j, 1});
        const CooMatrix<NatSemiring> A(d, d, ea), B(d, d, eb);
        const auto o = static_cast<double>(exact_distinct_products(A, B).count);
        EstimateOptions opt;
        opt.eps = 0.5;
        opt.delta = 0.125;
        const auto nt = static_cast<std::size_t>(n_tilde(A, B));
        const std::size_t m = sketch_min_local(sketch_params(opt.eps, opt.delta));
        const MemoryBudget b(m, std::max(4 * m, 8 * nt));
        int hit = 0, dirty = 0;
        for (std::uint64_t s = 0; s < 200; ++s) {
          const auto e = estimate_output_nnz(A, B, opt, b, 1000 + s, Mode::Audit);
          if (std::abs(e.estimate - o) <= opt.eps * o) ++hit;
          if (!e.stats.clean()) ++dirty;
        }
        ok = ok && hit >= 140 && dirty == 0;
        s4 << " o=" << o << ": " << hit << "/200" << (dirty ? " (budget violations " + std::to_string(dirty) + ")" : "");
      }
      const double secs = seconds_since(t0);
      s4 << ", " << secs << " s";
      verdict(4, ok && secs <= 180, s4.str());
    }

    {
      std::mt19937_64 gen(505);
      using Q = Rational;
      using QM = FieldMatrix<Q>;
      int tri_ok = 0, gen_ok = 0, poly_ok = 0, dirty = 0;
      for (int k = 0; k < 50; ++k) {
        const std::int64_t d = 1 + static_cast<std::int64_t>(gen() % 16);
        const auto n = static_cast<std::size_t>(d * d);
        std::vector<Entry<Q>> e;
        for (std::int64_t i = 0; i < d; ++i) {
          for (std::int64_t j = 0; j < i; ++j) e.push_back({i, j, Q(static_cast<long>(gen() % 21) - 10)});
          e.push_back({i, i, Q(static_cast<long>(1 + gen() % 9) * (gen() % 2 ? 1 : -1))});
        }
        const QM L(d, d, e);
        const auto r = invert_lower_triangular(L, LinalgConfig{MemoryBudget(1 + gen() % n, 8 * n), gen()});
        if (naive_multiply(L, r.inv) == QM::identity(d)) ++tri_ok;
        if (!r.stats.clean()) ++dirty;
      }
      int done = 0;
      while (done < 50) {
        const std::int64_t d = 1 + static_cast<std::int64_t>(gen() % 16);
        const auto n = static_cast<std::size_t>(d * d);
        std::vector<Entry<Q>> e;
        for (std::int64_t i = 0; i < d; ++i)
          for (std::int64_t j = 0; j < d; ++j) e.push_back({i, j, Q(static_cast<long>(gen() % 11) - 5)});
        const QM A(d, d, e);
        if (oracle_determinant(A.to_dense()) == 0) continue;
        ++done;
        const auto r = invert_general(A, LinalgConfig{MemoryBudget(std::min<std::size_t>(n, 2 + gen() % n), 8 * n * static_cast<std::size_t>(d)), gen()});
        if (naive_multiply(A, r.inv) == QM::identity(d)) ++gen_ok;
        if (!r.stats.clean()) ++dirty;
      }
      int poly_total = 0;
      for (int k = 0; k < 50; ++k) {
        const std::int64_t d = 1 + static_cast<std::int64_t>(gen() % 8);
        const auto n = static_cast<std::size_t>(d * d);
        std::vector<Entry<Q>> e;
        for (std::int64_t i = 0; i < d; ++i)
          for (std::int64_t j = 0; j < d; ++j) e.push_back({i, j, Q(static_cast<long>(gen() % 15) - 7)});
        const QM A(d, d, e);
        const auto cp = char_poly(A, LinalgConfig{MemoryBudget(std::min<std::size_t>(n, 2 + gen() % n), 8 * n * static_cast<std::size_t>(d)), gen()});
        ++poly_total;
        if (cp.c == oracle_char_poly(A.to_dense())) ++poly_ok;
        if (!cp.stats.clean()) ++dirty;
      }
      std::ostringstream s5;
      s5 << "exact inversion, triangular " << tri_ok << "/50, char-poly " << gen_ok << "/50, char poly vs oracle "
         << poly_ok << "/" << poly_total << ", budget-dirty runs " << dirty;
      verdict(5, tri_ok == 50 && gen_ok == 50 && poly_ok == poly_total && dirty == 0, s5.str());
    }

    {
      std::mt19937_64 gen(606);
      std::normal_distribution<double> nd(0, 1);
      int conv = 0, quad = 0, dirty = 0;
      std::size_t max_it = 0;
      for (int k = 0; k < 20; ++k) {
        const std::int64_t d = 16;
        std::vector<Entry<double>> e;
        for (std::int64_t i = 0; i < d; ++i)
          for (std::int64_t j = 0; j < d; ++j) e.push_back({i, j, (i == j ? 8.0 : 0.0) + nd(gen)});
        const FieldMatrix<double> A(d, d, e);
        try {
          const auto r = newton_inverse(A, LinalgConfig{MemoryBudget(16, 8 * 256), gen()}, 1e-10, 60);
          if (r.residuals.back() <= 1e-10) ++conv;
          max_it = std::max<std::size_t>(max_it, static_cast<std::size_t>(r.iterations));
          if (!r.stats.clean()) ++dirty;
          // r(B_{k+1}) = r(B_k)^2 exactly, so the Frobenius norm at most squares.
          bool q = true;
          for (std::size_t i = 1; i < r.residuals.size(); ++i) {
            const double prev = r.residuals[i - 1];
            if (prev < 1 && r.residuals[i] > prev * prev + 1e-13) q = false;
          }
          if (q) ++quad;
        } catch (const NoConvergence&) {
        }
      }
      std::ostringstream s6;
      s6 << "Newton, " << conv << "/20 reach 1e-10 within 60 iterations (max " << max_it << "), " << quad
         << "/20 contract quadratically below 1, budget-dirty runs " << dirty;
      verdict(6, conv == 20 && quad == 20 && dirty == 0, s6.str());
    }

    {
      using E = std::vector<std::pair<std::int64_t, std::int64_t>>;
      auto path = [](std::int64_t d) {
        E e;
        for (std::int64_t i = 0; i + 1 < d; ++i) e.push_back({i, i + 1});
        return Graph(d, e);
      };
      auto cycle = [](std::int64_t d) {
        E e;
        for (std::int64_t i = 0; i + 1 < d; ++i) e.push_back({i, i + 1});
        e.push_back({0, d - 1});
        return Graph(d, e);
      };
      std::vector<std::pair<std::string, Graph>> yes = {
          {"edge", Graph(2, E{{0, 1}})}, {"P4", path(4)},  {"P6", path(6)}, {"C4", cycle(4)},
          {"C6", cycle(6)},              {"C8", cycle(8)}, {"K4", Graph(4, E{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}})}};
      std::mt19937_64 gen(707);
      while (yes.size() < 10) {
        const std::int64_t d = 2 * (3 + static_cast<std::int64_t>(gen() % 3));
        E e;
        for (std::int64_t i = 0; i < d; ++i)
          for (std::int64_t j = i + 1; j < d; ++j)
            if (gen() % 10 < 4) e.push_back({i, j});
        Graph g(d, e);
        if (!exhaustive_perfect_matchings(g).empty()) yes.push_back({"G" + std::to_string(d), g});
      }
      const std::vector<std::pair<std::string, Graph>> no = {
          {"star4", Graph(4, E{{0, 1}, {0, 2}, {0, 3}})},
          {"2xK3", Graph(6, E{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}})},
          {"P3+K1", Graph(4, E{{0, 1}, {1, 2}})},
          {"empty6", Graph(6, E{})}};
      bool ok = true;
      int invalid = 0;
      double worst = 1.0;
      std::string worst_name;
      for (const auto& [name, g] : yes) {
        const auto all = exhaustive_perfect_matchings(g);
        int hit = 0;
        for (std::uint64_t s = 0; s < 200; ++s) {
          const auto r = mvv_trial(g, matching_budget(g.d), s);
          if (!r.stats.clean()) ok = false;
          if (!r.success) continue;
          ++hit;
          if (!is_perfect_matching(g, r.edges) || std::find(all.begin(), all.end(), r.edges) == all.end()) ++invalid;
        }
        const double rate = hit / 200.0;
        if (rate < worst) {
          worst = rate;
          worst_name = name;
        }
      }
      int nonzero = 0;
      for (const auto& [name, g] : no)
        for (std::uint64_t s = 0; s < 50; ++s)
          if (mvv_trial(g, matching_budget(g.d), s).det != 0) ++nonzero;
      std::ostringstream s7;
      s7 << "matching on " << yes.size() << " graphs, lowest success rate " << worst << " (" << worst_name << "), invalid "
         << invalid << ", nonzero det on " << no.size() << " graphs without a perfect matching " << nonzero << "/"
         << 50 * no.size();
      verdict(7, ok && worst >= 0.4 && invalid == 0 && nonzero == 0, s7.str());
    }

    verdict(8, ok8, msg8);
  }

  std::printf("%d of 8 criteria failed, %.1f s total\n", failures, seconds_since(t_all));
  return failures == 0 ? 0 : 1;
}
