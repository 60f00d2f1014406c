// MR estimate of the number of nonzeros of A * B.
//
// The stream has one element j + i d per nonzero elementary product
// a_{i,h} b_{h,j}, so its distinct count is the output size. Phases walk the
// block groups K at a time. A reducer holding A_{i,h}, B_{h,j} either
// sketches its share of the stream or, when the two blocks together are
// smaller than a sketch, forwards them untouched (a pseudosketch). Sketches
// and pseudosketches of the phase land on random bins; each bin merges
// them into the sketch it kept from the previous phase. After the last phase a reduction tree merges the bins.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "mrmx/blocked.hpp"
#include "mrmx/matrix.hpp"
#include "mrmx/pipeline.hpp"
#include "mrmx/sketch.hpp"
#include "mrmx/sparse_common.hpp"

namespace mrmx {

struct SketchMsg {
  enum class Kind : std::uint8_t { AEntry, BEntry, ABlock, BBlock, Sketch, Pseudo };
  Kind kind = Kind::AEntry;
  std::int64_t i = 0;  // entry row, or output block row of a pseudosketch
  std::int64_t j = 0;  // entry column, or output block column of a pseudosketch
  Block<Unit> a;       // block (ABlock/BBlock) or the A half of a pseudosketch
  Block<Unit> b;       // B half of a pseudosketch
  NnzSketch sketch;
};

/// Entries are coordinates only; a pseudosketch also names its output block.
inline std::size_t word_size(const SketchMsg& m) {
  using K = SketchMsg::Kind;
  switch (m.kind) {
    case K::AEntry:
    case K::BEntry:
      return 2;
    case K::ABlock:
    case K::BBlock:
      return std::max<std::size_t>(1, m.a.words());
    case K::Sketch:
      return m.sketch.words();
    case K::Pseudo:
      return 2 + m.a.words() + m.b.words();
  }
  return 1;
}

struct EstimateOptions {
  double eps = 0.5;
  double delta = 0.125;
  /// Blocks with fewer combined nonzeros than this stay pseudosketches.
  /// Defaults to the sketch size H.
  std::optional<std::size_t> threshold;
};

struct NnzEstimate {
  double estimate = 0;
  NnzSketch sketch;
  RoundStats stats;
  std::int64_t K = 0;  // groups per phase
  std::int64_t bins = 0;
};

/// Groups per phase: min(M / (2 n~), q), at least 1.
inline std::int64_t estimate_groups(const MemoryBudget& b, std::int64_t nt, std::int64_t q) {
  const std::int64_t k = static_cast<std::int64_t>(b.M) / std::max<std::int64_t>(1, 2 * nt);
  return std::clamp<std::int64_t>(k, 1, std::max<std::int64_t>(1, q));
}

/// Bins per phase: 2M / m, at least 1. A merge round carries about M words
/// onto bins picked at random; with M / m bins the mean load is already near
/// m and the fullest bin overflows the local cap in a few percent of seeds.
inline std::int64_t estimate_bins(const MemoryBudget& b) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(2 * b.M / std::max<std::size_t>(1, b.m)));
}

/// Local memory the estimator needs: two sketches must fit in a bin.
inline std::size_t sketch_min_local(const SketchParams& p) { return 2 * p.words(); }

namespace detail {

inline constexpr std::int64_t kBinKey = -3;

/// Adds the stream elements of A_blk * B_blk (output block (bi, bj)).
inline void sketch_block_pair(NnzSketch& s, const Block<Unit>& a, const Block<Unit>& b, std::int64_t bi,
                              std::int64_t bj, std::int64_t side, std::int64_t d) {
  std::vector<std::vector<std::int32_t>> brow(static_cast<std::size_t>(side));
  for (const auto& e : b.entries) brow[static_cast<std::size_t>(e.r)].push_back(e.c);
  for (const auto& e : a.entries) {
    for (auto c : brow[static_cast<std::size_t>(e.c)]) {
      const std::int64_t i = bi * side + e.r;
      const std::int64_t j = bj * side + c;
      s.insert(static_cast<std::uint64_t>(j + i * d));
    }
  }
}

}  // namespace detail

template <class S>
NnzEstimate estimate_output_nnz(const CooMatrix<S>& A, const CooMatrix<S>& B, const EstimateOptions& opt,
                                const MemoryBudget& budget, std::uint64_t seed = 0, Mode mode = Mode::Strict,
                                Execution exec = Execution::Parallel) {
  using Msg = SketchMsg;
  using K = Msg::Kind;
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw std::invalid_argument("estimate needs two square matrices of equal size");
  const std::int64_t d = A.rows();
  const SketchParams prm = sketch_params(opt.eps, opt.delta);
  const std::size_t H = opt.threshold.value_or(prm.words());
  const std::uint64_t domain = static_cast<std::uint64_t>(std::max<std::int64_t>(1, d * d));
  const NnzSketch family(prm, domain, seed);

  NnzEstimate res;
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  const BlockLayout L = block_layout(d, budget.m);
  const std::int64_t nt = n_tilde(A, B);
  const std::int64_t Kg = estimate_groups(budget, nt, L.q);
  const std::int64_t bins = estimate_bins(budget);
  res.K = Kg;
  res.bins = bins;

  PairSet<Msg> input;
  input.reserve(A.nnz() + B.nnz());
  for (std::size_t t = 0; t < A.nnz(); ++t) {
    Msg m;
    m.kind = K::AEntry;
    m.i = A.entries()[t].i;
    m.j = A.entries()[t].j;
    input.push_back({make_key(0, static_cast<std::int64_t>(t)), std::move(m)});
  }
  for (std::size_t t = 0; t < B.nnz(); ++t) {
    Msg m;
    m.kind = K::BEntry;
    m.i = B.entries()[t].i;
    m.j = B.entries()[t].j;
    input.push_back({make_key(1, static_cast<std::int64_t>(t)), std::move(m)});
  }
  const std::size_t in_words = total_words(input);

  const auto to_bin = [bins](ReducerContext<Msg>& ctx, Msg m) {
    const auto bin = static_cast<std::int64_t>(ctx.rng().uniform(0, static_cast<std::uint64_t>(bins - 1)));
    ctx.emit(make_key(detail::kBinKey, bin), std::move(m));
  };

  PairSet<Msg> carried;
  for (std::int64_t r = 0; r < L.q; r += Kg) {
    const std::int64_t copies = std::min(Kg, L.q - r);
    Round<Msg> build{"sketch-build",
                     [L, r, copies](ReducerContext<Msg>& ctx) {
                       const Key& k = ctx.key();
                       if (k.v[0] == detail::kBinKey) {
                         forward_all(ctx);
                         return;
                       }
                       const bool is_a = k.v[0] == -1;
                       Block<Unit> blk;
                       blk.side = static_cast<std::int32_t>(L.side);
                       for (const auto& p : ctx.input()) {
                         blk.entries.push_back({static_cast<std::int32_t>(p.value.i % L.side),
                                                static_cast<std::int32_t>(p.value.j % L.side), Unit{}});
                       }
                       std::sort(blk.entries.begin(), blk.entries.end(),
                                 [](const auto& x, const auto& y) { return x.r != y.r ? x.r < y.r : x.c < y.c; });
                       const std::int64_t bi = k.v[1], bj = k.v[2];
                       for (std::int64_t s = 0; s < copies; ++s) {
                         const std::int64_t l = r + s;
                         Msg m;
                         m.kind = is_a ? K::ABlock : K::BBlock;
                         m.a = blk;
                         ctx.emit(is_a ? make_key(bi, detail::mod(bj - bi - l, L.q), s)
                                       : make_key(detail::mod(bi - bj - l, L.q), bj, s),
                                  std::move(m));
                       }
                     },
                     [side = L.side](const Pair<Msg>& p) {
                       if (p.value.kind == K::Sketch) return p.key;
                       return make_key(p.value.kind == K::AEntry ? -1 : -2, p.value.i / side, p.value.j / side);
                     }};
    Round<Msg> local{"sketch-local", [&, L, H](ReducerContext<Msg>& ctx) {
                       const Key& k = ctx.key();
                       if (k.v[0] == detail::kBinKey) {
                         // a bin's running sketch stays in its bin
                         forward_all(ctx);
                         return;
                       }
                       const Block<Unit>* a = nullptr;
                       const Block<Unit>* b = nullptr;
                       for (const auto& p : ctx.input()) {
                         if (p.value.kind == K::ABlock) a = &p.value.a;
                         if (p.value.kind == K::BBlock) b = &p.value.a;
                       }
                       if (a == nullptr || b == nullptr || a->entries.empty() || b->entries.empty()) return;
                       Msg m;
                       if (a->entries.size() + b->entries.size() > H) {
                         m.kind = K::Sketch;
                         m.sketch = NnzSketch::like(family);
                         detail::sketch_block_pair(m.sketch, *a, *b, k.v[0], k.v[1], L.side, d);
                         if (m.sketch.empty()) return;
                       } else {
                         m.kind = K::Pseudo;
                         m.i = k.v[0];
                         m.j = k.v[1];
                         m.a = *a;
                         m.b = *b;
                       }
                       to_bin(ctx, std::move(m));
                     },
                     {}};
    Round<Msg> merge{"sketch-merge", [&, L](ReducerContext<Msg>& ctx) {
                       NnzSketch s = NnzSketch::like(family);
                       ctx.declare_working(prm.words());
                       for (const auto& p : ctx.input()) {
                         if (p.value.kind == K::Sketch) {
                           s.merge(p.value.sketch);
                         } else {
                           detail::sketch_block_pair(s, p.value.a, p.value.b, p.value.i, p.value.j, L.side, d);
                         }
                       }
                       if (s.empty()) return;
                       Msg m;
                       m.kind = K::Sketch;
                       m.sketch = std::move(s);
                       ctx.output(ctx.key(), std::move(m));
                     },
                     {}};
    PairSet<Msg> in = input;
    for (auto& p : carried) in.push_back(std::move(p));
    auto st = pipe.run(std::move(in), Program<Msg>::fixed({build, local, merge}), in_words);
    carried = std::move(st.output);
  }

  // Merge the bins with a reduction tree.
  const auto per = static_cast<std::int64_t>(budget.local_cap()) / static_cast<std::int64_t>(prm.words() + 1);
  const auto fan = static_cast<std::size_t>(std::max<std::int64_t>(2, per - 1));
  std::int64_t width = bins;
  while (carried.size() > 1 || width > 1) {
    width = (width + static_cast<std::int64_t>(fan) - 1) / static_cast<std::int64_t>(fan);
    const bool last = width <= 1;
    Round<Msg> up{"sketch-reduce",
                  [&, last](ReducerContext<Msg>& ctx) {
                    NnzSketch s = NnzSketch::like(family);
                    ctx.declare_working(prm.words());
                    for (const auto& p : ctx.input()) s.merge(p.value.sketch);
                    Msg m;
                    m.kind = K::Sketch;
                    m.sketch = std::move(s);
                    ctx.output(ctx.key(), std::move(m));
                  },
                  [fan, last](const Pair<Msg>& p) {
                    return last ? make_key(detail::kBinKey, 0)
                                : make_key(detail::kBinKey, p.key.v[1] / static_cast<std::int64_t>(fan));
                  }};
    auto st = pipe.run(std::move(carried), Program<Msg>::fixed({up}));
    carried = std::move(st.output);
    if (last) break;
  }

  res.sketch = carried.empty() ? NnzSketch::like(family) : carried.front().value.sketch;
  res.estimate = res.sketch.empty() ? 0.0 : res.sketch.estimate();
  res.stats = pipe.stats();
  return res;
}

}  // namespace mrmx
