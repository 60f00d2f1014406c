#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "mrmx/matmul_sparse.hpp"
#include "mrmx/oracles.hpp"

using namespace mrmx;

namespace {

using NatM = CooMatrix<NatSemiring>;

template <class S>
CooMatrix<S> random_sparse(std::int64_t d, std::size_t nnz, std::mt19937_64& gen) {
  nnz = std::min<std::size_t>(nnz, static_cast<std::size_t>(d * d));
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> cells;
  while (cells.size() < nnz) {
    cells[{static_cast<std::int64_t>(gen() % d), static_cast<std::int64_t>(gen() % d)}] = 1 + gen() % 9;
  }
  std::vector<Entry<std::int64_t>> e;
  for (const auto& [ij, x] : cells) e.push_back({ij.first, ij.second, x});
  return CooMatrix<S>(d, d, std::move(e));
}

double product_cap(const MemoryBudget& b) {
  return 2.0 * std::sqrt(2.0) * static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m));
}

/// Budget the sparse algorithms run cleanly under: m in [2, 2 n~) and
/// M = 8 (n~ + o).
template <class S>
MemoryBudget legal_budget(const CooMatrix<S>& A, const CooMatrix<S>& B, std::size_t o, std::mt19937_64& gen,
                          std::size_t min_m = 2) {
  const auto nt = static_cast<std::size_t>(n_tilde(A, B));
  const std::size_t m = std::max(min_m, 2 + gen() % std::max<std::size_t>(1, 2 * nt - 2));
  return MemoryBudget(m, std::max(m, 8 * (nt + o)));
}

/// Structural words of group l: the sum of structural nonzeros of its block
/// products, by brute force over the partitioned inputs.
std::int64_t group_structure(const NatM& A, const NatM& B, std::size_t m, std::int64_t l) {
  const auto ga = partition_blocks(A, m);
  const auto gb = partition_blocks(B, m);
  std::int64_t s = 0;
  for (std::int64_t i = 0; i < ga.q; ++i) {
    for (std::int64_t j = 0; j < ga.q; ++j) {
      const std::int64_t h = group_member(i, j, l, ga.q);
      std::set<std::pair<int, int>> cells;
      for (const auto& x : ga.at(i, h).entries)
        for (const auto& y : gb.at(h, j).entries)
          if (x.c == y.r) cells.insert({x.r, y.c});
      s += static_cast<std::int64_t>(cells.size());
    }
  }
  return s;
}

}  // namespace

TEST_CASE("D1 windows: hand traced") {
  const std::vector<std::int64_t> a{2, 1}, b{1, 3};
  auto one = d1_windows(a, b, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == D1Window{0, 1, 1});
  auto two = d1_windows(a, b, 3);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == D1Window{0, 0, 1});
  CHECK(two[1] == D1Window{1, 1, 1});
  // An index heavier than the cap is split into chunks.
  auto big = d1_windows({4}, {4}, 5);
  REQUIRE(big.size() == 1);
  CHECK(big[0].chunks == 4);
  // Empty indices are skipped.
  CHECK(d1_windows({0, 3, 0}, {5, 1, 0}, 10) == std::vector<D1Window>{{1, 1, 1}});
}

TEST_CASE("D1 windows are maximal and within the cap") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + gen() % 20;
    std::vector<std::int64_t> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = static_cast<std::int64_t>(gen() % 4);
      b[k] = static_cast<std::int64_t>(gen() % 4);
    }
    const std::int64_t cap = 1 + static_cast<std::int64_t>(gen() % 12);
    const auto w = d1_windows(a, b, cap);
    std::int64_t covered = 0;
    for (std::size_t p = 0; p < w.size(); ++p) {
      std::int64_t sum = 0;
      for (auto k = w[p].first; k <= w[p].last; ++k) sum += a[k] * b[k];
      covered += sum;
      if (w[p].chunks == 1) CHECK(sum <= cap);
      if (p + 1 < w.size()) {
        const auto nk = w[p + 1].first;
        CHECK(sum + a[nk] * b[nk] > cap);
      }
    }
    std::int64_t total = 0;
    for (std::size_t k = 0; k < n; ++k) total += a[k] * b[k];
    CHECK(covered == total);
  }
}

TEST_CASE("D1 rank-1 product runs in one phase") {
  std::vector<Entry<std::int64_t>> ea, eb;
  for (std::int64_t i = 0; i < 6; ++i) ea.push_back({i * 2, 5, i + 1});
  for (std::int64_t j = 0; j < 5; ++j) eb.push_back({5, j * 3, j + 2});
  const NatM A(16, 16, ea), B(16, 16, eb);
  const MemoryBudget b(4, 256);
  auto r = d1_multiply(A, B, b);
  CHECK(r.C == naive_multiply(A, B));
  REQUIRE(r.windows.size() == 1);
  CHECK(r.windows[0] == D1Window{5, 5, 1});
  CHECK(r.stats.clean());
}

TEST_CASE("D1 random 16x16 with 20 nonzeros") {
  std::mt19937_64 gen(16);
  for (int t = 0; t < 20; ++t) {
    auto A = random_sparse<NatSemiring>(16, 20, gen);
    auto B = random_sparse<NatSemiring>(16, 20, gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b = legal_budget(A, B, C.nnz(), gen);
    auto r = d1_multiply(A, B, b, t);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
  }
}

TEST_CASE("D1 phase count follows the window rule") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 20; ++t) {
    auto A = random_sparse<NatSemiring>(12, 30, gen);
    auto B = random_sparse<NatSemiring>(12, 30, gen);
    const MemoryBudget b(4, 64 + gen() % 400);
    std::vector<std::int64_t> a(12, 0), bb(12, 0);
    for (const auto& e : A.entries()) ++a[e.j];
    for (const auto& e : B.entries()) ++bb[e.i];
    auto r = d1_multiply(A, B, b, t, Mode::Audit);
    CHECK(r.C == naive_multiply(A, B));
    CHECK(r.windows == d1_windows(a, bb, d1_phase_cap(b)));
  }
}

TEST_CASE("D2 identity: every group costs n~ plus one diagonal block") {
  const std::int64_t d = 16;
  const auto I = NatM::identity(d);
  const MemoryBudget b(4, 256);
  auto r = d2_multiply(I, I, b);
  CHECK(r.C == I);
  CHECK(r.stats.clean());
  const BlockLayout L = block_layout(d, b.m);
  REQUIRE(static_cast<std::int64_t>(r.group_words.size()) == L.q);
  for (auto w : r.group_words) CHECK(w == d + L.side);
  const std::int64_t k = std::min(d2_phase_cap(b) / (d + L.side), L.q);
  for (auto kt : r.phases) CHECK(kt <= std::max<std::int64_t>(1, k));
  CHECK(r.phases.front() == std::max<std::int64_t>(1, std::min(k, d2_replication(b, d, L.q))));
}

TEST_CASE("D2 group words match the structural oracle") {
  std::mt19937_64 gen(32);
  for (int t = 0; t < 15; ++t) {
    const std::int64_t d = 8 + static_cast<std::int64_t>(gen() % 24);
    auto A = random_sparse<NatSemiring>(d, 2 * d, gen);
    auto B = random_sparse<NatSemiring>(d, 2 * d, gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b = legal_budget(A, B, C.nnz(), gen);
    auto r = d2_multiply(A, B, b, t);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
    if (b.m >= static_cast<std::size_t>(2 * n_tilde(A, B))) continue;
    const std::int64_t nt = n_tilde(A, B);
    const BlockLayout L = block_layout(d, b.m);
    REQUIRE(static_cast<std::int64_t>(r.group_words.size()) == L.q);
    for (std::int64_t l = 0; l < L.q; ++l) CHECK(r.group_words[l] == nt + group_structure(A, B, b.m, l));
    // Each phase stays within the cap unless it is a single group.
    std::int64_t g = 0;
    for (auto kt : r.phases) {
      std::int64_t sum = 0;
      for (std::int64_t s = 0; s < kt; ++s) sum += r.group_words[g + s];
      if (kt > 1) CHECK(sum <= d2_phase_cap(b));
      g += kt;
    }
  }
}

TEST_CASE("D2 block-diagonal input") {
  // Two aligned 2x2 diagonal blocks at block rows 0 and 3 of a 4x4 grid.
  const std::int64_t d = 8;
  std::vector<Entry<std::int64_t>> e;
  for (std::int64_t blk : {0, 3})
    for (std::int64_t r = 0; r < 2; ++r)
      for (std::int64_t c = 0; c < 2; ++c) e.push_back({blk * 2 + r, blk * 2 + c, 1 + r + c});
  const NatM A(d, d, e), B(d, d, e);
  const MemoryBudget b(4, 256);
  auto r = d2_multiply(A, B, b);
  CHECK(r.C == naive_multiply(A, B));
  const std::int64_t nt = n_tilde(A, B);
  REQUIRE(r.group_words.size() == 4);
  // Diagonal block i lands in group l = -i mod q.
  CHECK(r.group_words[0] == nt + 4);
  CHECK(r.group_words[1] == nt + 4);
  CHECK(r.group_words[2] == nt);
  CHECK(r.group_words[3] == nt);
}

TEST_CASE("D2 random 32x32 covers every group once") {
  std::mt19937_64 gen(40);
  for (int t = 0; t < 10; ++t) {
    auto A = random_sparse<NatSemiring>(32, 40, gen);
    auto B = random_sparse<NatSemiring>(32, 40, gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b(4 + gen() % 30, 8 * (40 + C.nnz()));
    auto r = d2_multiply(A, B, b, t);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
    std::int64_t sum = 0;
    for (auto k : r.phases) sum += k;
    CHECK(sum == block_layout(32, b.m).q);
  }
}

TEST_CASE("R1 identity 16x16 is exact on every seed") {
  const auto I = NatM::identity(16);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto r = r1_multiply(I, I, MemoryBudget(16, 64), seed, Mode::Audit);
    CHECK(r.C == I);
  }
}

TEST_CASE("R1 below its local minimum is a budget error in strict mode") {
  const auto I = NatM::identity(16);
  CHECK_THROWS_AS(r1_multiply(I, I, MemoryBudget(16, 64), 1), BudgetError);
}

TEST_CASE("R1 uses the known-output schedule when the estimate is exact") {
  // Many nonzeros but only ten products: A's columns and B's rows overlap
  // in index 40 alone, so the sketch stays in its exact regime.
  std::mt19937_64 gen(50);
  const std::int64_t d = 64;
  for (int t = 0; t < 5; ++t) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> ca, cb;
    while (ca.size() < 300) ca[{static_cast<std::int64_t>(gen() % d), static_cast<std::int64_t>(gen() % 32)}] = 1;
    while (cb.size() < 300) cb[{41 + static_cast<std::int64_t>(gen() % 23), static_cast<std::int64_t>(gen() % d)}] = 1;
    ca[{0, 40}] = 2;
    for (std::int64_t j = 0; j < 10; ++j) cb[{40, j * 3}] = 3;
    std::vector<Entry<std::int64_t>> ea, eb;
    for (const auto& [ij, x] : ca) ea.push_back({ij.first, ij.second, x});
    for (const auto& [ij, x] : cb) eb.push_back({ij.first, ij.second, x});
    const NatM A(d, d, ea), B(d, d, eb);
    const auto C = naive_multiply(A, B);
    REQUIRE(C.nnz() == 10);
    const MemoryBudget b(r1_min_local(d), 8 * (310 + 10));
    REQUIRE(b.m < static_cast<std::size_t>(2 * n_tilde(A, B)));
    double o_hat = -1;
    auto r = r1_multiply(A, B, b, t, Mode::Strict, Execution::Parallel, &o_hat);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
    CHECK(o_hat == 10.0);
    CHECK(r.K == r1_groups(b, n_tilde(A, B), 10.0, block_layout(d, b.m).q));
  }
}

TEST_CASE("R1 group count degrades by at most 2 under a 2x misestimate") {
  const MemoryBudget b(16, 100000);
  const std::int64_t q = 1 << 20;  // large enough not to clamp
  for (std::int64_t nt : {10, 100, 1000}) {
    for (double o : {10.0, 100.0, 1000.0, 5000.0}) {
      const auto k = static_cast<double>(r1_groups(b, nt, o, q));
      for (double f : {0.5, 0.75, 1.5, 2.0}) {
        const auto kf = static_cast<double>(r1_groups(b, nt, o * f, q));
        CHECK(kf >= std::floor(k / 2.0));
        CHECK(kf <= 2.0 * k + 1.0);
      }
    }
  }
}

TEST_CASE("R1 result does not depend on the seed") {
  std::mt19937_64 gen(60);
  auto A = random_sparse<NatSemiring>(64, 200, gen);
  auto B = random_sparse<NatSemiring>(64, 200, gen);
  const auto C = naive_multiply(A, B);
  const MemoryBudget b(r1_min_local(64), 8 * (200 + C.nnz()));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = r1_multiply(A, B, b, seed);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
  }
}

TEST_CASE("auto dispatch") {
  const MemoryBudget b(2, 256);
  const NatM A(16, 16, {{0, 3, 2}, {5, 1, 1}});
  const NatM B(16, 16, {{3, 4, 1}, {1, 9, 7}});
  auto r = sparse_multiply_auto(A, B, b);
  CHECK(r.algo == "d1");
  CHECK(r.C == naive_multiply(A, B));

  std::vector<Entry<std::int64_t>> e;
  for (std::int64_t i = 0; i < 16; ++i)
    for (std::int64_t j = 0; j < 16; ++j) e.push_back({i, j, 1});
  const NatM D(16, 16, e);
  auto rd = sparse_multiply_auto(D, D, MemoryBudget(16, 8 * (256 + 256)));
  CHECK(rd.algo == "d2");
  CHECK(rd.C == naive_multiply(D, D));
  CHECK(rd.stats.clean());

  const auto t = dispatch_terms(2, 4, 16, 16);
  CHECK(t.d1 == 4.0);
  CHECK(t.d2 == 6.0 * 16.0 / 4.0);
}

TEST_CASE("auto, D1, D2 and R1 agree") {
  std::mt19937_64 gen(70);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t d = 16 + static_cast<std::int64_t>(gen() % 48);
    auto A = random_sparse<NatSemiring>(d, d + gen() % (2 * d), gen);
    auto B = random_sparse<NatSemiring>(d, d + gen() % (2 * d), gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b = legal_budget(A, B, C.nnz(), gen, r1_min_local(d));
    const auto r0 = sparse_multiply_auto(A, B, b, t, true);
    const auto r1 = d1_multiply(A, B, b, t);
    const auto r2 = d2_multiply(A, B, b, t);
    const auto r3 = r1_multiply(A, B, b, t);
    CHECK(r0.C == C);
    CHECK(r1.C == C);
    CHECK(r2.C == C);
    CHECK(r3.C == C);
  }
}

TEST_CASE("sparse-dense dispatch") {
  const std::int64_t d = 16;
  std::mt19937_64 gen(80);
  std::vector<Entry<std::int64_t>> perm, full;
  for (std::int64_t j = 0; j < d; ++j) perm.push_back({(j * 5) % d, j, 1 + j});
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < d; ++j) full.push_back({i, j, 1 + static_cast<std::int64_t>(gen() % 9)});
  const NatM P(d, d, perm), F(d, d, full);
  const MemoryBudget b(4, 1024);

  const auto bp = sd_bounds(d, d, b);
  CHECK(bp.d1 < bp.dense);
  auto rp = sd_multiply(P, F, b);
  CHECK(rp.algo == "d1");
  CHECK(rp.C == naive_multiply(P, F));

  const auto bf = sd_bounds(d * d, d, b);
  CHECK(bf.dense < bf.d1);
  auto rf = sd_multiply(F, F, b);
  CHECK(rf.algo == "dense");
  CHECK(rf.C == naive_multiply(F, F));
}

TEST_CASE("sparse-dense random 16x16") {
  std::mt19937_64 gen(81);
  for (int t = 0; t < 20; ++t) {
    auto A = random_sparse<NatSemiring>(16, 10 + gen() % 30, gen);
    auto B = random_sparse<NatSemiring>(16, 256, gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b(2 + gen() % 60, 8 * (256 + 256));
    auto r = sd_multiply(A, B, b, t);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
  }
}

TEST_CASE_TEMPLATE("sparse sweep against the naive oracle", S, NatSemiring, MinPlusSemiring) {
  std::mt19937_64 gen(90);
  int runs = 0;
  for (int t = 0; t < 110; ++t) {
    const std::int64_t d = 2 + static_cast<std::int64_t>(gen() % 40);
    auto A = random_sparse<S>(d, 1 + gen() % (3 * d), gen);
    auto B = random_sparse<S>(d, 1 + gen() % (3 * d), gen);
    const auto C = naive_multiply(A, B);
    const MemoryBudget b = legal_budget(A, B, C.nnz(), gen);
    const MemoryBudget br = legal_budget(A, B, C.nnz(), gen, r1_min_local(d));
    const double cap = product_cap(b);
    for (const auto& r : {d1_multiply(A, B, b, t), d2_multiply(A, B, b, t), sparse_multiply_auto(A, B, b, t),
                          sd_multiply(A, B, b, t)}) {
      CHECK(r.C == C);
      CHECK(r.stats.clean());
      CHECK(static_cast<double>(r.stats.max_products_per_round()) <= cap);
    }
    const auto r = r1_multiply(A, B, br, t);
    CHECK(r.C == C);
    CHECK(r.stats.clean());
    CHECK(static_cast<double>(r.stats.max_products_per_round()) <= product_cap(br));
    ++runs;
  }
  CHECK(runs >= 100);
}
