// Sparse-sparse multiplication by phases over inner indices.
//
// Every A entry of column k and B entry of row k learns a_k, b_k and its
// rank inside its column or row (one reduction and one scan). A phase then
// takes the longest run of inner indices whose products a_k b_k fit in the
// phase cap: a scan over the remaining entries gives each entry the running
// product count up to its column, so each entry decides locally whether it
// belongs to the phase. Entries in the phase are copied to one constant
// memory reducer per elementary product, keyed (k, rank_a, rank_b), and the
// products are summed into C by a reduction keyed by output cell.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "mrmx/blocked.hpp"
#include "mrmx/matmul_dense.hpp"
#include "mrmx/sparse_common.hpp"

namespace mrmx {

/// Greedy maximal windows over the indices with a_k b_k > 0.
inline std::vector<D1Window> d1_windows(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                                        std::int64_t cap) {
  if (a.size() != b.size()) throw std::invalid_argument("profile size mismatch");
  cap = std::max<std::int64_t>(1, cap);
  std::vector<D1Window> out;
  std::int64_t sum = 0;
  bool open = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::int64_t w = a[k] * b[k];
    if (w == 0) continue;
    const auto kk = static_cast<std::int64_t>(k);
    if (open && sum + w <= cap) {
      out.back().last = kk;
      sum += w;
      continue;
    }
    out.push_back({kk, kk, w > cap ? (w + cap - 1) / cap : 1});
    sum = w;
    open = w <= cap;
  }
  return out;
}

/// Elementary products per phase: a quarter of M, so that two copies of
/// every product's operands fit beside the resident data.
inline std::int64_t d1_phase_cap(const MemoryBudget& b) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(b.M / 4));
}

template <class V>
struct D1Msg {
  enum class Kind : std::uint8_t { AEntry, BEntry, Info, ACopy, BCopy, Product };
  Kind kind = Kind::AEntry;
  Entry<V> e{};
  std::int64_t info = 0;  // packed a_k, b_k and rank once annotated
  bool annotated = false;
};

template <class V>
std::size_t word_size(const D1Msg<V>& m) {
  using K = typename D1Msg<V>::Kind;
  switch (m.kind) {
    case K::AEntry:
    case K::BEntry:
      return m.annotated ? 4 : 3;
    case K::Info:
    case K::Product:
      return 1;
    case K::ACopy:
    case K::BCopy:
      return 2;
  }
  return 1;
}

namespace detail {

/// Unpacked annotation of an entry of column/row k.
struct D1Ann {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t rank = 0;
};

inline D1Ann d1_unpack(std::int64_t info, bool from_a, std::int64_t R) {
  D1Ann r;
  r.a = info / (R * R);
  r.b = (info / R) % R;
  const std::int64_t c = info % R;
  r.rank = from_a ? c - 1 : c - r.a - 1;
  return r;
}

template <class V>
std::int64_t d1_inner(const D1Msg<V>& m) {
  return m.kind == D1Msg<V>::Kind::AEntry ? m.e.j : m.e.i;
}

/// Position of an entry inside the segment of its inner index.
template <class V>
std::int64_t d1_local_pos(const D1Msg<V>& m, std::int64_t d) {
  return m.kind == D1Msg<V>::Kind::AEntry ? 1 + m.e.i : 1 + d + m.e.j;
}

template <class V>
std::size_t d1_words(const PairSet<D1Msg<V>>& ps) {
  return total_words(ps);
}

template <class V>
std::size_t scan_words(const PairSet<ScanMsg<V>>& ps) {
  return total_words(ps);
}

}  // namespace detail

/// D1 with phase cap `cap` (d1_phase_cap(budget) by default).
template <class S>
MatmulResult<S> d1_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                            std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel,
                            std::int64_t cap = 0) {
  using V = typename S::value_type;
  using Msg = D1Msg<V>;
  using K = typename Msg::Kind;
  check_square_pair(A, B);
  const std::int64_t d = A.rows();
  MatmulResult<S> res;
  res.algo = "d1";
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  const std::int64_t nt = n_tilde(A, B);
  if (budget.m >= static_cast<std::size_t>(2 * nt)) {
    auto st = pipe.run(coo_input(A, B), sequential_program<S>());
    res.C = collect_matrix<S>(st.output, d, d);
    res.stats = pipe.stats();
    return res;
  }
  if (cap <= 0) cap = d1_phase_cap(budget);
  const std::int64_t R = profile_radix(d);
  const std::size_t in_words = coo_words(A, B);

  // a_k and b_k, then every entry's rank behind the column total.
  auto prof = mr_col_row_counts(pipe, A, B, in_words);
  PairSet<ScanI> items;
  items.reserve(prof.totals.size() + A.nnz() + B.nnz());
  for (const auto& p : prof.totals) items.push_back(scan_item<std::int64_t>(p.value.seg, 0, p.value.vals.front() * R));
  for (const auto& e : A.entries()) items.push_back(scan_item<std::int64_t>(e.j, 1 + e.i, 1));
  for (const auto& e : B.entries()) items.push_back(scan_item<std::int64_t>(e.i, 1 + d + e.j, 1));
  auto ranks = pipe_sum(pipe, std::move(items), 2 * d + 1, false, in_words);

  // Join each entry with its scan result.
  PairSet<Msg> join_in;
  join_in.reserve(A.nnz() + B.nnz() + ranks.output.size());
  for (const auto& e : A.entries()) join_in.push_back({make_key(0), Msg{K::AEntry, e, 0, false}});
  for (const auto& e : B.entries()) join_in.push_back({make_key(1), Msg{K::BEntry, e, 0, false}});
  for (const auto& p : ranks.output) {
    if (p.value.pos == 0) continue;
    Msg m;
    m.kind = K::Info;
    m.info = p.value.vals.front();
    join_in.push_back({p.key, m});
  }
  Round<Msg> annotate{"d1-annotate",
                      [](ReducerContext<Msg>& ctx) {
                        const Msg* entry = nullptr;
                        std::int64_t info = 0;
                        for (const auto& p : ctx.input()) {
                          if (p.value.kind == K::Info) {
                            info = p.value.info;
                          } else {
                            entry = &p.value;
                          }
                        }
                        if (entry == nullptr) return;
                        Msg m = *entry;
                        m.info = info;
                        m.annotated = true;
                        ctx.output(ctx.key(), m);
                      },
                      [d](const Pair<Msg>& p) {
                        if (p.value.kind == K::Info) return p.key;
                        return make_key(detail::d1_inner(p.value), detail::d1_local_pos(p.value, d));
                      }};
  auto joined = pipe.run(std::move(join_in), Program<Msg>::fixed({annotate}));

  // Entries of indices without products never take part.
  PairSet<Msg> live;
  for (auto& p : joined.output) {
    const auto ann = detail::d1_unpack(p.value.info, p.value.kind == K::AEntry, R);
    if (ann.a > 0 && ann.b > 0) live.push_back(std::move(p));
  }

  const std::int64_t seg_span = 2 * d + 1;
  const std::int64_t Q = d + 1;  // radix of the packed (weight, column count)
  PairSet<ScanMsg<V>> cpart;     // C so far, keyed by cell
  std::function<V(const V&, const V&)> add = [](const V& x, const V& y) { return S::add(x, y); };

  while (!live.empty()) {
    // Running product count, packed with the number of columns so far.
    PairSet<ScanI> witems;
    witems.reserve(live.size());
    for (const auto& p : live) {
      const bool is_a = p.value.kind == K::AEntry;
      const auto ann = detail::d1_unpack(p.value.info, is_a, R);
      const std::int64_t v = (is_a && ann.rank == 0) ? ann.a * ann.b * Q + 1 : 0;
      witems.push_back(scan_item<std::int64_t>(0, p.key.v[0] * seg_span + p.key.v[1], v));
    }
    auto wscan = pipe_sum(pipe, std::move(witems), d * seg_span, false,
                          detail::d1_words(live) + detail::scan_words(cpart));

    PairSet<Msg> phase_in = live;
    std::int64_t first = -1, last = -1, big = 0;
    for (const auto& p : wscan.output) {
      const std::int64_t incl = p.value.vals.front();
      const std::int64_t S_k = incl / Q, c = incl % Q;
      const std::int64_t k = p.value.pos / seg_span;
      if (S_k <= cap || c == 1) {
        if (first < 0 || k < first) first = k;
        last = std::max(last, k);
        if (c == 1 && S_k > cap) big = S_k;
      }
      Msg m;
      m.kind = K::Info;
      m.info = incl;
      phase_in.push_back({make_key(k, p.value.pos % seg_span), m});
    }
    const std::int64_t chunks = big > 0 ? (big + cap - 1) / cap : 1;
    res.windows.push_back({first, last, chunks});

    for (std::int64_t ch = 0; ch < chunks; ++ch) {
      const std::int64_t lo = ch * cap;
      const std::int64_t hi = chunks == 1 ? std::numeric_limits<std::int64_t>::max() : (ch + 1) * cap;
      const bool keep_in_phase = ch + 1 < chunks;
      Round<Msg> replicate{
          "d1-replicate", [=](ReducerContext<Msg>& ctx) {
            const Msg* entry = nullptr;
            std::int64_t incl = 0;
            for (const auto& p : ctx.input()) {
              if (p.value.kind == K::Info) {
                incl = p.value.info;
              } else {
                entry = &p.value;
              }
            }
            if (entry == nullptr) return;
            const bool in = incl / Q <= cap || incl % Q == 1;
            if (!in || keep_in_phase) ctx.output(ctx.key(), *entry);
            if (!in) return;
            const bool is_a = entry->kind == K::AEntry;
            const auto ann = detail::d1_unpack(entry->info, is_a, R);
            const std::int64_t k = ctx.key().v[0];
            const std::int64_t others = is_a ? ann.b : ann.a;
            for (std::int64_t t = 0; t < others; ++t) {
              const std::int64_t ra = is_a ? ann.rank : t;
              const std::int64_t rb = is_a ? t : ann.rank;
              const std::int64_t idx = ra * ann.b + rb;
              if (idx < lo || idx >= hi) continue;
              Msg c;
              c.kind = is_a ? K::ACopy : K::BCopy;
              c.e = entry->e;
              ctx.emit(make_key(k, ra, rb), c);
            }
          },
          {}};
      Round<Msg> product{"d1-product", [d](ReducerContext<Msg>& ctx) {
                           const Msg* a = nullptr;
                           const Msg* b = nullptr;
                           for (const auto& p : ctx.input()) {
                             if (p.value.kind == K::ACopy) a = &p.value;
                             if (p.value.kind == K::BCopy) b = &p.value;
                           }
                           if (a == nullptr || b == nullptr) return;
                           Msg out;
                           out.kind = K::Product;
                           out.e = {a->e.i, b->e.j, S::mul(a->e.x, b->e.x)};
                           ctx.count_products(1);
                           ctx.output(make_key(a->e.i * d + b->e.j, ctx.key().v[0]), out);
                         },
                         {}};
      auto run = pipe.run(std::move(phase_in), Program<Msg>::fixed({replicate, product}),
                          detail::scan_words(cpart));

      // Sum this phase's products into C.
      PairSet<Msg> rest;
      PairSet<ScanMsg<V>> acc;
      acc.reserve(run.output.size() + cpart.size());
      for (auto& p : run.output) {
        if (p.value.kind == K::Product) {
          acc.push_back(scan_item<V>(p.key.v[0], p.key.v[1], p.value.e.x));
        } else {
          rest.push_back(std::move(p));
        }
      }
      for (const auto& p : cpart) acc.push_back(scan_item<V>(p.value.seg, d, p.value.vals.front()));
      auto red = pipe_scan<V>(pipe, std::move(acc), d + 1, true, add, detail::d1_words(rest));
      cpart.clear();
      for (auto& p : red.output) cpart.push_back(scan_item<V>(p.value.seg, 0, p.value.vals.front()));
      if (keep_in_phase) {
        // The next chunk needs the same entries and scan results.
        phase_in = rest;
        for (const auto& p : wscan.output) {
          Msg m;
          m.kind = K::Info;
          m.info = p.value.vals.front();
          phase_in.push_back({make_key(p.value.pos / seg_span, p.value.pos % seg_span), m});
        }
      } else {
        live = std::move(rest);
      }
    }
  }

  std::vector<Entry<V>> ce;
  ce.reserve(cpart.size());
  for (const auto& p : cpart) {
    const V x = p.value.vals.front();
    if (!S::is_zero(x)) ce.push_back({p.value.seg / d, p.value.seg % d, x});
  }
  res.C = CooMatrix<S>(d, d, std::move(ce));
  res.stats = pipe.stats();
  return res;
}

}  // namespace mrmx
