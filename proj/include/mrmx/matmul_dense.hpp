// Dense-dense multiplication: the blocked schedule with
// K = min(M/n, sqrt(n/m)) groups per round.
#pragma once

#include <map>
#include <stdexcept>

#include "mrmx/blocked.hpp"

namespace mrmx {

/// K = min(floor(M/n), q), clamped to >= 1, for d x d matrices (n = d^2).
inline FixedSchedule dense_schedule(std::int64_t dim, const MemoryBudget& b) {
  const BlockLayout L = block_layout(dim, b.m);
  const std::int64_t n = std::max<std::int64_t>(1, dim * dim);
  return fixed_schedule(L, static_cast<std::int64_t>(b.M) / n, b);
}

/// Bound value n^{3/2} / (M sqrt m) + log_m n used in reports.
inline double dense_bound(std::int64_t dim, const MemoryBudget& b) {
  const double n = static_cast<double>(dim) * static_cast<double>(dim);
  const double m = static_cast<double>(b.m);
  const double lg = m > 1 ? std::log(std::max(n, 2.0)) / std::log(m) : std::log2(std::max(n, 2.0));
  return std::pow(n, 1.5) / (static_cast<double>(b.M) * std::sqrt(m)) + lg;
}

template <class S>
void check_square_pair(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw std::invalid_argument("multiplication needs two square matrices of equal size");
}

/// One reducer multiplies everything when both inputs fit in local memory.
template <class S>
Program<MatMsg<typename S::value_type>> sequential_program() {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  Round<Msg> r{"sequential",
               [](ReducerContext<Msg>& ctx) {
                 std::map<std::int64_t, std::vector<std::pair<std::int64_t, V>>> brow;
                 for (const auto& p : ctx.input())
                   if (p.value.kind == Msg::Kind::BEntry) brow[p.value.e.i].push_back({p.value.e.j, p.value.e.x});
                 std::map<std::pair<std::int64_t, std::int64_t>, V> acc;
                 std::size_t products = 0;
                 for (const auto& p : ctx.input()) {
                   if (p.value.kind != Msg::Kind::AEntry) continue;
                   auto it = brow.find(p.value.e.j);
                   if (it == brow.end()) continue;
                   for (const auto& [j, x] : it->second) {
                     const V prod = S::mul(p.value.e.x, x);
                     auto [slot, fresh] = acc.try_emplace({p.value.e.i, j}, prod);
                     if (!fresh) slot->second = S::add(slot->second, prod);
                     ++products;
                   }
                 }
                 ctx.count_products(products);
                 for (const auto& [ij, x] : acc) {
                   if (S::is_zero(x)) continue;
                   Msg m;
                   m.kind = Msg::Kind::AEntry;
                   m.e = {ij.first, ij.second, x};
                   ctx.output(make_key(ij.first, ij.second), std::move(m));
                 }
               },
               [](const Pair<Msg>&) { return make_key(0); }};
  return Program<Msg>::fixed({r});
}

template <class S>
MatmulResult<S> dd_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                            std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  check_square_pair(A, B);
  const std::int64_t dim = A.rows();
  MatmulResult<S> res;
  res.algo = "dense";
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  const auto n = static_cast<std::size_t>(dim * dim);
  if (budget.m >= 2 * n) {
    auto st = pipe.run(coo_input(A, B), sequential_program<S>());
    res.C = collect_matrix<S>(st.output, dim, dim);
    res.K = 1;
    res.stats = pipe.stats();
    return res;
  }
  const BlockLayout L = block_layout(dim, budget.m);
  const FixedSchedule sch = dense_schedule(dim, budget);
  auto st = pipe.run(coo_input(A, B), fixed_k_program<S>(L, sch, budget));
  res.C = collect_matrix<S>(st.output, dim, dim);
  res.K = sch.K;
  res.stats = pipe.stats();
  return res;
}

}  // namespace mrmx
