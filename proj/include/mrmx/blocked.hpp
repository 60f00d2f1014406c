// Blocked multiplication schedule shared by the dense algorithm and the
// sparse algorithms that reuse its group structure.
//
// Reducer (i, j, s) owns output block C_{i,j} for groups l = s (mod K). In
// product round p it multiplies A_{i,h} B_{h,j} with l = pK + s and
// h = (i + j + l) mod q, then passes A_{i,h} to (i, j-K, s) and B_{h,j} to
// (i-K, j, s), which need exactly those blocks for group l + K. After the
// last product round the K partial sums of every output entry are added by
// a reduction tree.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mrmx/engine.hpp"
#include "mrmx/matrix.hpp"
#include "mrmx/pipeline.hpp"
#include "mrmx/primitives.hpp"

namespace mrmx {

template <class V>
struct MatMsg {
  enum class Kind : std::uint8_t { AEntry, BEntry, ABlock, BBlock, CBlock, Partial, Count };
  Kind kind = Kind::AEntry;
  Entry<V> e{};
  Block<V> block{};
  V val{};
  std::int64_t num = 0;
};

/// Entries cost (i, j, x); a block costs one word per nonzero since the
/// local index and the block kind are packed with each value.
template <class V>
std::size_t word_size(const MatMsg<V>& m) {
  using K = typename MatMsg<V>::Kind;
  switch (m.kind) {
    case K::AEntry:
    case K::BEntry:
      return 3;
    case K::ABlock:
    case K::BBlock:
    case K::CBlock:
      return std::max<std::size_t>(1, m.block.words());
    case K::Partial:
    case K::Count:
      return 1;
  }
  return 1;
}

/// Input pairs (k, (i, j, x)) for A and B with progressive keys.
template <class S>
PairSet<MatMsg<typename S::value_type>> coo_input(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  using Msg = MatMsg<typename S::value_type>;
  PairSet<Msg> in;
  in.reserve(A.nnz() + B.nnz());
  for (std::size_t k = 0; k < A.nnz(); ++k) {
    Msg m;
    m.kind = Msg::Kind::AEntry;
    m.e = A.entries()[k];
    in.push_back({make_key(0, static_cast<std::int64_t>(k)), std::move(m)});
  }
  for (std::size_t k = 0; k < B.nnz(); ++k) {
    Msg m;
    m.kind = Msg::Kind::BEntry;
    m.e = B.entries()[k];
    in.push_back({make_key(1, static_cast<std::int64_t>(k)), std::move(m)});
  }
  return in;
}

/// Output pairs to a matrix; cancelled entries are dropped.
template <class S>
CooMatrix<S> collect_matrix(const PairSet<MatMsg<typename S::value_type>>& out, std::int64_t rows, std::int64_t cols) {
  std::vector<Entry<typename S::value_type>> e;
  e.reserve(out.size());
  for (const auto& p : out) e.push_back(p.value.e);
  return CooMatrix<S>(rows, cols, std::move(e));
}

struct BlockLayout {
  std::int64_t dim = 0;   // original side of the square matrices
  std::int64_t side = 1;  // block side
  std::int64_t q = 1;     // blocks per side (power of two)
};

inline BlockLayout block_layout(std::int64_t dim, std::size_t m) {
  BlockLayout L;
  L.dim = dim;
  L.side = block_side(m);
  L.q = blocks_per_side(dim, L.side);
  return L;
}

/// Fan-in of the closing reduction: partial entries cost 2 words.
inline std::size_t partial_fan_in(const MemoryBudget& b) {
  return std::max<std::size_t>(2, static_cast<std::size_t>(b.local_cap()) / 2);
}

namespace detail {

inline std::int64_t mod(std::int64_t a, std::int64_t q) { return ((a % q) + q) % q; }

/// Build round: one reducer per nonempty block of A or B collects its
/// entries and sends `copies` replicas to the reducers of groups
/// first_group .. first_group + copies - 1 (offset s within the phase).
/// Only reducers whose block row lies in [row_lo, row_hi) are served.
template <class S>
void build_blocks(ReducerContext<MatMsg<typename S::value_type>>& ctx, const BlockLayout& L, std::int64_t first_group,
                  std::int64_t copies, std::int64_t row_lo = 0,
                  std::int64_t row_hi = std::numeric_limits<std::int64_t>::max()) {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  const Key& k = ctx.key();
  const bool is_a = k.v[0] == -1;
  const std::int64_t bi = k.v[1];
  const std::int64_t bj = k.v[2];
  Block<V> blk;
  blk.side = static_cast<std::int32_t>(L.side);
  for (const auto& p : ctx.input()) {
    const auto& e = p.value.e;
    blk.entries.push_back({static_cast<std::int32_t>(e.i % L.side), static_cast<std::int32_t>(e.j % L.side), e.x});
  }
  std::sort(blk.entries.begin(), blk.entries.end(),
            [](const auto& a, const auto& b) { return a.r != b.r ? a.r < b.r : a.c < b.c; });
  for (std::int64_t s = 0; s < copies; ++s) {
    const std::int64_t l = first_group + s;
    if (l >= L.q) break;
    Msg m;
    m.kind = is_a ? Msg::Kind::ABlock : Msg::Kind::BBlock;
    m.block = blk;
    // A_{bi,h}: h = i + j + l with i = bi; B_{h,bj}: j = bj.
    const Key dst = is_a ? make_key(bi, mod(bj - bi - l, L.q), s) : make_key(mod(bi - bj - l, L.q), bj, s);
    if (dst.v[0] < row_lo || dst.v[0] >= row_hi) continue;
    ctx.emit(dst, std::move(m));
  }
}

template <class V>
Key block_key(const Pair<MatMsg<V>>& p, std::int64_t side) {
  const bool a = p.value.kind == MatMsg<V>::Kind::AEntry;
  return make_key(a ? -1 : -2, p.value.e.i / side, p.value.e.j / side);
}

/// Emits the entries of a finished partial block, either as final output or
/// as partial values for the reduction tree.
template <class S>
void emit_partial(ReducerContext<MatMsg<typename S::value_type>>& ctx, const BlockLayout& L,
                  const Block<typename S::value_type>& C, std::int64_t bi, std::int64_t bj, std::int64_t s,
                  std::int64_t K, std::size_t fan) {
  using Msg = MatMsg<typename S::value_type>;
  for (const auto& x : C.entries) {
    const std::int64_t i = bi * L.side + x.r;
    const std::int64_t j = bj * L.side + x.c;
    if (i >= L.dim || j >= L.dim) continue;
    Msg m;
    if (K == 1) {
      m.kind = Msg::Kind::AEntry;
      m.e = {i, j, x.x};
      ctx.output(make_key(i, j), std::move(m));
    } else {
      m.kind = Msg::Kind::Partial;
      m.val = x.x;
      ctx.emit(make_key(i, j, s / static_cast<std::int64_t>(fan)), std::move(m));
    }
  }
}

}  // namespace detail

/// Rounds that add up `parts` partial sums per entry at the given fan-in.
inline std::size_t reduction_rounds(std::int64_t parts, std::size_t fan) {
  return parts <= 1 ? 0 : tree_levels(parts, fan);
}

/// Closing reduction of partial values keyed (i, j, node). Level t combines
/// up to `fan` children; the root emits the entry to the output.
template <class S>
Round<MatMsg<typename S::value_type>> reduction_round(std::size_t level, std::size_t levels, std::size_t fan) {
  using Msg = MatMsg<typename S::value_type>;
  return {"reduce", [level, levels, fan](ReducerContext<Msg>& ctx) {
            const Key& k = ctx.key();
            auto acc = ctx.input().front().value.val;
            for (std::size_t t = 1; t < ctx.input().size(); ++t) acc = S::add(acc, ctx.input()[t].value.val);
            Msg m;
            if (level + 1 == levels) {
              if (S::is_zero(acc)) return;
              m.kind = Msg::Kind::AEntry;
              m.e = {k.v[0], k.v[1], acc};
              ctx.output(make_key(k.v[0], k.v[1]), std::move(m));
            } else {
              m.kind = Msg::Kind::Partial;
              m.val = acc;
              ctx.emit(make_key(k.v[0], k.v[1], k.v[2] / static_cast<std::int64_t>(fan)), std::move(m));
            }
          },
          {}};
}

/// Product round p of a fixed-K schedule over groups [first, first + K*P).
template <class S>
Round<MatMsg<typename S::value_type>> product_round(const BlockLayout& L, std::int64_t K, std::int64_t first,
                                                   std::int64_t p, std::int64_t P, std::int64_t end_group,
                                                   bool finish, std::int64_t final_K, std::size_t fan) {
  using V = typename S::value_type;
  using Msg = MatMsg<V>;
  return {"product", [=](ReducerContext<Msg>& ctx) {
            const Key& k = ctx.key();
            const std::int64_t i = k.v[0], j = k.v[1], s = k.v[2];
            const Block<V>* a = nullptr;
            const Block<V>* b = nullptr;
            Block<V> c;
            c.side = static_cast<std::int32_t>(L.side);
            for (const auto& x : ctx.input()) {
              if (x.value.kind == Msg::Kind::ABlock) a = &x.value.block;
              if (x.value.kind == Msg::Kind::BBlock) b = &x.value.block;
              if (x.value.kind == Msg::Kind::CBlock) c = x.value.block;
            }
            const std::int64_t l = first + p * K + s;
            if (l < end_group && a != nullptr && b != nullptr) {
              ctx.count_products(block_multiply_add<S>(c, *a, *b));
            }
            const std::int64_t next_l = l + K;
            if (p + 1 < P && next_l < end_group) {
              if (a != nullptr) {
                Msg m;
                m.kind = Msg::Kind::ABlock;
                m.block = *a;
                ctx.emit(make_key(i, detail::mod(j - K, L.q), s), std::move(m));
              }
              if (b != nullptr) {
                Msg m;
                m.kind = Msg::Kind::BBlock;
                m.block = *b;
                ctx.emit(make_key(detail::mod(i - K, L.q), j, s), std::move(m));
              }
            }
            if (c.entries.empty()) return;
            if (p + 1 == P && finish) {
              detail::emit_partial<S>(ctx, L, c, i, j, s, final_K, fan);
              return;
            }
            Msg m;
            m.kind = Msg::Kind::CBlock;
            m.block = std::move(c);
            ctx.emit(make_key(i, j, s), std::move(m));
          },
          {}};
}

struct FixedSchedule {
  std::int64_t q = 1;
  std::int64_t K = 1;
  std::int64_t product_rounds = 1;
  std::size_t reduce_rounds = 0;
  std::size_t total_rounds() const { return 1 + static_cast<std::size_t>(product_rounds) + reduce_rounds; }
};

inline FixedSchedule fixed_schedule(const BlockLayout& L, std::int64_t K, const MemoryBudget& b) {
  FixedSchedule s;
  s.q = L.q;
  s.K = std::clamp<std::int64_t>(K, 1, L.q);
  s.product_rounds = (L.q + s.K - 1) / s.K;
  s.reduce_rounds = reduction_rounds(s.K, partial_fan_in(b));
  return s;
}

/// One build round, ceil(q/K) product rounds, then the reduction of the K
/// partial sums.
template <class S>
Program<MatMsg<typename S::value_type>> fixed_k_program(const BlockLayout& L, const FixedSchedule& sch,
                                                        const MemoryBudget& budget) {
  using Msg = MatMsg<typename S::value_type>;
  std::vector<Round<Msg>> rounds;
  const std::int64_t K = sch.K;
  const std::size_t fan = partial_fan_in(budget);
  const std::int64_t side = L.side;
  rounds.push_back({"build", [L, K](ReducerContext<Msg>& ctx) { detail::build_blocks<S>(ctx, L, 0, K); },
                    [side](const Pair<Msg>& p) { return detail::block_key(p, side); }});
  for (std::int64_t p = 0; p < sch.product_rounds; ++p) {
    rounds.push_back(product_round<S>(L, K, 0, p, sch.product_rounds, L.q, true, K, fan));
  }
  for (std::size_t t = 0; t < sch.reduce_rounds; ++t) rounds.push_back(reduction_round<S>(t, sch.reduce_rounds, fan));
  return Program<Msg>::fixed(std::move(rounds));
}

/// Inner indices first..last (inclusive) processed in one phase. A single
/// index whose products exceed the cap is split into `chunks` phases.
struct D1Window {
  std::int64_t first = 0;
  std::int64_t last = 0;
  std::int64_t chunks = 1;
  bool operator==(const D1Window&) const = default;
};

template <class S>
struct MatmulResult {
  CooMatrix<S> C;
  RoundStats stats;
  std::string algo;
  std::int64_t K = 0;
  std::vector<std::int64_t> phases;       // groups per phase (D2)
  std::vector<std::int64_t> group_words;  // estimated words per group (D2)
  std::vector<D1Window> windows;          // index windows (D1)
};

}  // namespace mrmx
