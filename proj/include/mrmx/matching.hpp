// Randomized perfect matching through the isolation lemma. Each edge (i, j)
// gets a random weight w in [1, 2k]; B holds 2^w at (i, j) and -2^w at
// (j, i). With 2^W the largest power of two dividing det(B), edge (i, j) is
// kept when b_ij adj(B)_ij / 2^W is odd. When the minimum weight perfect
// matching is unique the kept edges are exactly that matching.
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrmx/graph.hpp"
#include "mrmx/linalg.hpp"

namespace mrmx {

class OddVertexCount : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoPerfectMatchingFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularWeighting : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WeightedMatrix {
  FieldMatrix<Rational> B;
  std::vector<std::int64_t> weights;  // one per edge, in edge order
  RoundStats stats;
};

struct MatchingResult {
  bool success = false;
  Matching edges;            // kept edges, sorted
  mpz_class det;             // det(B)
  std::int64_t w = -1;       // largest W with 2^W | det(B); -1 when det = 0
  std::vector<bool> parity;  // per edge: b_ij adj(B)_ij / 2^W is odd
  std::vector<std::int64_t> weights;
  RoundStats stats;
};

inline mpz_class pow2(std::int64_t e) {
  mpz_class x;
  mpz_ui_pow_ui(x.get_mpz_t(), 2, static_cast<unsigned long>(e));
  return x;
}

/// One round keyed by edge: the reducer draws the weight and emits both
/// entries of the pair.
inline WeightedMatrix build_weighted_matrix(const Graph& g, std::uint64_t seed, const MemoryBudget& budget,
                                            Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  if (g.d % 2 != 0) throw OddVertexCount("perfect matching needs an even number of vertices");
  using Msg = MatMsg<Rational>;
  const auto k = static_cast<std::int64_t>(g.k());
  PairSet<Msg> in;
  for (std::int64_t t = 0; t < k; ++t) {
    Msg m;
    m.kind = Msg::Kind::AEntry;
    m.e = {g.edges[t].first, g.edges[t].second, Rational(0)};
    m.num = t;
    in.push_back({make_key(t), std::move(m)});
  }
  Round<Msg> r{"weights",
               [k](ReducerContext<Msg>& ctx) {
                 for (const auto& p : ctx.input()) {
                   const auto w = static_cast<std::int64_t>(ctx.rng().uniform(1, static_cast<std::uint64_t>(2 * k)));
                   const Rational x(pow2(w));
                   Msg a = p.value, b = p.value;
                   a.e.x = x;
                   a.num = w;
                   b.e = {p.value.e.j, p.value.e.i, Rational(-x)};
                   b.num = -1;
                   ctx.output(make_key(a.e.i, a.e.j), std::move(a));
                   ctx.output(make_key(b.e.i, b.e.j), std::move(b));
                 }
               },
               {}};
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  auto st = pipe.run(std::move(in), Program<Msg>::fixed({r}));
  WeightedMatrix out;
  out.weights.assign(static_cast<std::size_t>(k), 0);
  std::vector<Entry<Rational>> e;
  for (const auto& p : st.output) {
    e.push_back(p.value.e);
    if (p.value.num > 0) {
      const auto it = std::lower_bound(g.edges.begin(), g.edges.end(), std::pair{p.value.e.i, p.value.e.j});
      out.weights[static_cast<std::size_t>(it - g.edges.begin())] = p.value.num;
    }
  }
  out.B = FieldMatrix<Rational>(g.d, g.d, std::move(e));
  out.stats = pipe.stats();
  return out;
}

/// One trial. Never throws for the retry signals: success is false when
/// det(B) = 0 or the kept edges are not a perfect matching.
inline MatchingResult mvv_trial(const Graph& g, const MemoryBudget& budget, std::uint64_t seed,
                                Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  auto wm = build_weighted_matrix(g, seed, budget, mode, exec);
  MatchingResult res;
  res.weights = wm.weights;
  res.stats = wm.stats;
  if (g.d == 0) {
    res.success = true;
    res.det = 1;
    res.w = 0;
    return res;
  }
  auto da = det_adjugate(wm.B, LinalgConfig{budget, mix_stream(seed, 0xad), mode, exec});
  res.stats.append(da.stats);
  if (da.det.get_den() != 1) throw std::logic_error("determinant of an integer matrix is not an integer");
  res.det = da.det.get_num();
  res.parity.assign(g.k(), false);
  if (res.det == 0) return res;
  res.w = static_cast<std::int64_t>(mpz_scan1(res.det.get_mpz_t(), 0));
  for (std::size_t t = 0; t < g.k(); ++t) {
    const auto [i, j] = g.edges[t];
    const Rational v = wm.B.at(i, j) * da.adj.at(i, j);
    if (v.get_den() != 1 || v == 0) continue;
    const mpz_class num = v.get_num();
    // b adj / 2^W is an odd integer iff the lowest set bit sits at W.
    if (static_cast<std::int64_t>(mpz_scan1(num.get_mpz_t(), 0)) == res.w) {
      res.parity[t] = true;
      res.edges.push_back({i, j});
    }
  }
  res.success = is_perfect_matching(g, res.edges);
  return res;
}

/// One trial; the retry signals are exceptions.
inline MatchingResult mvv_matching(const Graph& g, const MemoryBudget& budget, std::uint64_t seed,
                                   Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  auto r = mvv_trial(g, budget, seed, mode, exec);
  if (r.det == 0) throw SingularWeighting("det(B) = 0 for this weighting");
  if (!r.success) throw NoPerfectMatchingFound("kept edges do not form a perfect matching");
  return r;
}

/// Local and aggregate words the matching pipeline is run with for d
/// vertices: the dense schedule with every power of B resident.
inline MemoryBudget matching_budget(std::int64_t d) {
  const auto n = static_cast<std::size_t>(std::max<std::int64_t>(1, d * d));
  const auto m = std::max<std::size_t>(4, n / 4);
  return MemoryBudget(m, 8 * n * static_cast<std::size_t>(std::max<std::int64_t>(1, d)));
}

}  // namespace mrmx
