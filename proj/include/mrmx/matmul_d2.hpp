// Sparse-sparse multiplication on the blocked group schedule with a
// data-dependent number of groups per phase.
//
// A phase replicates the input K' times and runs the block products of the
// next K' groups structurally (no values, one occupancy bitmap per reducer)
// to learn M_l = n~ + sum of the structural nonzeros the group produces.
// A scan over the M_l picks the largest K with M_r + ... + M_{r+K-1} within
// the phase cap; those K groups are then multiplied for real and their
// partial blocks summed into C by a reduction keyed by output cell.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "mrmx/blocked.hpp"
#include "mrmx/matmul_dense.hpp"
#include "mrmx/sparse_common.hpp"

namespace mrmx {

/// Words a phase may spend on the groups it runs.
inline std::int64_t d2_phase_cap(const MemoryBudget& b) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(b.M / 2));
}

/// K' = min(M / (2 n~), q), at least 1: the replication of the structural pass.
inline std::int64_t d2_replication(const MemoryBudget& b, std::int64_t nt, std::int64_t q) {
  const std::int64_t k = static_cast<std::int64_t>(b.M) / std::max<std::int64_t>(1, 2 * nt);
  return std::clamp<std::int64_t>(k, 1, std::max<std::int64_t>(1, q));
}

/// Largest K in [1, kmax] with K n~ + (structural words of groups < K) <= cap,
/// given per-group structural counts.
inline std::int64_t d2_pick_k(const std::vector<std::int64_t>& structural, std::int64_t nt, std::int64_t cap) {
  std::int64_t sum = 0, k = 0;
  for (auto s : structural) {
    sum += nt + s;
    if (sum > cap) break;
    ++k;
  }
  return std::max<std::int64_t>(1, k);
}

namespace detail {

template <class S>
Round<MatMsg<typename S::value_type>> d2_build_round(const BlockLayout& L, std::int64_t first, std::int64_t copies,
                                                     std::int64_t row_lo, std::int64_t row_hi) {
  using Msg = MatMsg<typename S::value_type>;
  const std::int64_t side = L.side;
  return {"d2-build",
          [=](ReducerContext<Msg>& ctx) { build_blocks<S>(ctx, L, first, copies, row_lo, row_hi); },
          [side](const Pair<Msg>& p) { return block_key(p, side); }};
}

template <class V>
void d2_find_blocks(const ReducerContext<MatMsg<V>>& ctx, const Block<V>*& a, const Block<V>*& b) {
  a = b = nullptr;
  for (const auto& x : ctx.input()) {
    if (x.value.kind == MatMsg<V>::Kind::ABlock) a = &x.value.block;
    if (x.value.kind == MatMsg<V>::Kind::BBlock) b = &x.value.block;
  }
}

/// Structural nonzeros of the block product at (i, j, s), sent as a count
/// keyed (s, i q + j).
template <class S>
Round<MatMsg<typename S::value_type>> d2_structure_round(const BlockLayout& L) {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  return {"d2-structure", [L](ReducerContext<Msg>& ctx) {
            const Block<V>* a;
            const Block<V>* b;
            d2_find_blocks(ctx, a, b);
            if (a == nullptr || b == nullptr || a->entries.empty() || b->entries.empty()) return;
            // Occupancy bitmap of the output block.
            ctx.declare_working(static_cast<std::size_t>((L.side * L.side + 63) / 64));
            const auto c = static_cast<std::int64_t>(block_product_structure(*a, *b));
            if (c == 0) return;
            Msg m;
            m.kind = Msg::Kind::Count;
            m.num = c;
            const Key& k = ctx.key();
            ctx.output(make_key(k.v[2], k.v[0] * L.q + k.v[1]), m);
          },
          {}};
}

/// Real block products; each nonzero of the partial block goes out keyed
/// (cell, s).
template <class S>
Round<MatMsg<typename S::value_type>> d2_product_round(const BlockLayout& L) {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  return {"d2-product", [L](ReducerContext<Msg>& ctx) {
            const Block<V>* a;
            const Block<V>* b;
            d2_find_blocks(ctx, a, b);
            if (a == nullptr || b == nullptr) return;
            Block<V> c;
            c.side = static_cast<std::int32_t>(L.side);
            ctx.count_products(block_multiply_add<S>(c, *a, *b));
            const Key& k = ctx.key();
            for (const auto& x : c.entries) {
              const std::int64_t i = k.v[0] * L.side + x.r;
              const std::int64_t j = k.v[1] * L.side + x.c;
              if (i >= L.dim || j >= L.dim) continue;
              Msg m;
              m.kind = Msg::Kind::Partial;
              m.val = x.x;
              ctx.output(make_key(i * L.dim + j, k.v[2]), m);
            }
          },
          {}};
}

}  // namespace detail

template <class S>
MatmulResult<S> d2_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                            std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  check_square_pair(A, B);
  const std::int64_t d = A.rows();
  MatmulResult<S> res;
  res.algo = "d2";
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  const std::int64_t nt = n_tilde(A, B);
  if (budget.m >= static_cast<std::size_t>(2 * nt)) {
    auto st = pipe.run(coo_input(A, B), sequential_program<S>());
    res.C = collect_matrix<S>(st.output, d, d);
    res.stats = pipe.stats();
    return res;
  }
  const BlockLayout L = block_layout(d, budget.m);
  const std::int64_t cap = d2_phase_cap(budget);
  const std::size_t in_words = coo_words(A, B);
  std::function<V(const V&, const V&)> add = [](const V& x, const V& y) { return S::add(x, y); };
  PairSet<ScanMsg<V>> cpart;  // C so far, keyed by cell

  for (std::int64_t r = 0; r < L.q;) {
    const std::int64_t kp = std::min(d2_replication(budget, nt, L.q), L.q - r);
    const std::size_t resident = in_words + total_words(cpart);

    // Structural pass over groups r .. r + K' - 1.
    auto st = pipe.run(coo_input(A, B),
                       Program<Msg>::fixed({detail::d2_build_round<S>(L, r, kp, 0, L.q),
                                            detail::d2_structure_round<S>(L)}),
                       resident);
    PairSet<ScanI> counts;
    counts.reserve(st.output.size());
    for (const auto& p : st.output) counts.push_back(scan_item<std::int64_t>(p.key.v[0], p.key.v[1], p.value.num));
    auto per_group = pipe_sum(pipe, std::move(counts), L.q * L.q, true, resident);

    // Running sum of M_l = n~ + structural(l) over the candidate groups.
    std::vector<std::int64_t> structural(static_cast<std::size_t>(kp), 0);
    for (const auto& p : per_group.output) structural[static_cast<std::size_t>(p.value.seg)] = p.value.vals.front();
    PairSet<ScanI> msum;
    for (std::int64_t s = 0; s < kp; ++s) {
      msum.push_back(scan_item<std::int64_t>(0, s, nt + structural[static_cast<std::size_t>(s)]));
    }
    auto prefix = pipe_sum(pipe, std::move(msum), kp, false, resident);
    std::int64_t K = 0;
    for (const auto& p : prefix.output) {
      if (p.value.vals.front() <= cap) K = std::max(K, p.value.pos + 1);
    }
    K = std::max<std::int64_t>(1, K);
    for (std::int64_t s = 0; s < K; ++s) res.group_words.push_back(nt + structural[static_cast<std::size_t>(s)]);
    res.phases.push_back(K);

    // A lone group over the cap runs in slices of block rows.
    const std::int64_t slices =
        std::min(L.q, K == 1 ? (nt + structural.front() + cap - 1) / cap : std::int64_t{1});
    for (std::int64_t sl = 0; sl < slices; ++sl) {
      const std::int64_t lo = sl * L.q / slices;
      const std::int64_t hi = (sl + 1) * L.q / slices;
      auto run = pipe.run(coo_input(A, B),
                          Program<Msg>::fixed({detail::d2_build_round<S>(L, r, K, lo, hi),
                                               detail::d2_product_round<S>(L)}),
                          in_words + total_words(cpart));
      PairSet<ScanMsg<V>> acc;
      acc.reserve(run.output.size() + cpart.size());
      for (const auto& p : run.output) acc.push_back(scan_item<V>(p.key.v[0], p.key.v[1], p.value.val));
      for (const auto& p : cpart) acc.push_back(scan_item<V>(p.value.seg, K, p.value.vals.front()));
      auto red = pipe_scan<V>(pipe, std::move(acc), K + 1, true, add, in_words);
      cpart.clear();
      for (auto& p : red.output) cpart.push_back(scan_item<V>(p.value.seg, 0, p.value.vals.front()));
    }
    r += K;
  }

  std::vector<Entry<V>> ce;
  ce.reserve(cpart.size());
  for (const auto& p : cpart) {
    const V x = p.value.vals.front();
    if (!S::is_zero(x)) ce.push_back({p.value.seg / d, p.value.seg % d, x});
  }
  res.C = CooMatrix<S>(d, d, std::move(ce));
  res.K = res.phases.empty() ? 0 : *std::max_element(res.phases.begin(), res.phases.end());
  res.stats = pipe.stats();
  return res;
}

}  // namespace mrmx
