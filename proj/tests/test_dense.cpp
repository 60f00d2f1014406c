#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mrmx/matmul_dense.hpp"
#include "mrmx/oracles.hpp"

using namespace mrmx;

namespace {

template <class S>
CooMatrix<S> random_matrix(std::int64_t d, double density, std::mt19937_64& gen) {
  std::vector<Entry<std::int64_t>> e;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      if (u(gen) < density) e.push_back({i, j, static_cast<std::int64_t>(1 + gen() % 9)});
  return CooMatrix<S>(d, d, std::move(e));
}

double product_cap(const MemoryBudget& b) {
  return 2.0 * std::sqrt(2.0) * static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m));
}

}  // namespace

TEST_CASE("2x2 hand example") {
  using M = CooMatrix<NatSemiring>;
  auto r = dd_multiply(M::from_dense({{1, 2}, {3, 4}}), M::from_dense({{5, 6}, {7, 8}}), MemoryBudget(1, 32));
  CHECK(r.C == M::from_dense({{19, 22}, {43, 50}}));
}

TEST_CASE("identity times random 8x8") {
  std::mt19937_64 gen(1);
  auto A = random_matrix<NatSemiring>(8, 1.0, gen);
  auto r = dd_multiply(CooMatrix<NatSemiring>::identity(8), A, MemoryBudget(4, 128));
  CHECK(r.C == A);
  CHECK(r.stats.clean());
}

TEST_CASE("4x4 with m = 4, M = 16 has two product rounds") {
  auto s = dense_schedule(4, MemoryBudget(4, 16));
  CHECK(s.K == 1);
  CHECK(s.q == 2);
  CHECK(s.product_rounds == 2);
  std::mt19937_64 gen(2);
  auto A = random_matrix<NatSemiring>(4, 1.0, gen);
  auto B = random_matrix<NatSemiring>(4, 1.0, gen);
  // 32 input entries of 4 words exceed 4M = 64, so this runs in audit mode.
  auto r = dd_multiply(A, B, MemoryBudget(4, 16), 0, Mode::Audit);
  CHECK(r.stats.rounds_labeled("product") == 2);
  CHECK(r.C == naive_multiply(A, B));
}

TEST_CASE("dense product round with two 2x2 block products") {
  std::mt19937_64 gen(3);
  auto A = random_matrix<NatSemiring>(4, 1.0, gen);
  auto B = random_matrix<NatSemiring>(4, 1.0, gen);
  // q = 2, K = 1: each of the 4 reducers does one product of dense 2x2 blocks per round.
  auto r = dd_multiply(A, B, MemoryBudget(4, 16), 0, Mode::Audit);
  auto per_round = count_elementary_products(r.stats);
  CHECK(per_round[0] == 0);
  CHECK(per_round[1] == 4 * 8);
  CHECK(per_round[2] == 4 * 8);
  // With M = 32, K = 2 = q and both groups run in one round.
  auto r2 = dd_multiply(A, B, MemoryBudget(4, 32));
  auto pr2 = count_elementary_products(r2.stats);
  CHECK(pr2[1] == 64);
  CHECK(r2.stats.rounds_labeled("product") == 1);
}

TEST_CASE("oracle agreement, budgets and product cap over random instances") {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 60; ++t) {
    const std::int64_t d = 1 + static_cast<std::int64_t>(gen() % 40);
    const std::size_t n = static_cast<std::size_t>(d * d);
    const std::size_t m = 2 + gen() % std::max<std::size_t>(2, 2 * n);
    const std::size_t M = std::max(m, n * (2 + gen() % 6));
    MemoryBudget b(m, M);
    auto A = random_matrix<NatSemiring>(d, 0.9, gen);
    auto B = random_matrix<NatSemiring>(d, 0.9, gen);
    auto r = dd_multiply(A, B, b, t);
    CHECK(r.C == naive_multiply(A, B));
    CHECK(r.stats.clean());
    CHECK(static_cast<double>(r.stats.max_products_per_round()) <= product_cap(b));
    auto P = random_matrix<MinPlusSemiring>(d, 0.7, gen);
    auto Q = random_matrix<MinPlusSemiring>(d, 0.7, gen);
    auto rp = dd_multiply(P, Q, b, t);
    CHECK(rp.C == naive_multiply(P, Q));
    CHECK(rp.stats.clean());
  }
}

TEST_CASE("measured product rounds follow the schedule and shrink with M") {
  std::mt19937_64 gen(5);
  for (std::int64_t d : {8, 16, 32}) {
    for (std::size_t m : {4, 16}) {
      std::int64_t prev = 1 << 30;
      auto A = random_matrix<NatSemiring>(d, 1.0, gen);
      auto B = random_matrix<NatSemiring>(d, 1.0, gen);
      for (std::size_t f : {2, 4, 8, 16}) {
        MemoryBudget b(m, f * static_cast<std::size_t>(d * d));
        auto r = dd_multiply(A, B, b);
        auto s = dense_schedule(d, b);
        CHECK(static_cast<std::int64_t>(r.stats.rounds_labeled("product")) == s.product_rounds);
        CHECK(r.stats.rounds() == s.total_rounds());
        CHECK(static_cast<std::int64_t>(r.stats.rounds()) <= prev);
        prev = static_cast<std::int64_t>(r.stats.rounds());
      }
    }
  }
}

TEST_CASE("large m falls back to one reducer") {
  std::mt19937_64 gen(6);
  auto A = random_matrix<NatSemiring>(4, 1.0, gen);
  auto B = random_matrix<NatSemiring>(4, 1.0, gen);
  auto r = dd_multiply(A, B, MemoryBudget(32, 64));
  CHECK(r.stats.rounds() == 1);
  CHECK(r.C == naive_multiply(A, B));
}
