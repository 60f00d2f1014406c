// Matrix inversion on the MR engine: lower triangular inversion by blocked
// recursion, the characteristic polynomial from traces of powers (Newton's
// identities), the inverse, determinant and adjugate derived from it, and
// the Newton iteration B <- (I + (I - B A)) B for approximate inverses.
//
// Products run through the dense schedule; element-wise sums, traces and
// norms are reductions keyed by cell or by index. Independent products of
// one phase share the aggregate budget and are overlaid round by round.
#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrmx/matmul_dense.hpp"
#include "mrmx/sparse_common.hpp"

namespace mrmx {

using Rational = mpq_class;

template <class F>
using FieldMatrix = CooMatrix<FieldSemiring<F>>;

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinalgConfig {
  MemoryBudget budget;
  std::uint64_t seed = 0;
  Mode mode = Mode::Strict;
  Execution exec = Execution::Parallel;
};

template <class F>
struct InverseResult {
  FieldMatrix<F> inv;
  RoundStats stats;
};

template <class F>
struct CharPoly {
  std::vector<F> c;                    // c[0..d], monic: c[d] = 1
  std::vector<F> s;                    // s[k] = tr(A^k), s[0] unused
  std::vector<FieldMatrix<F>> powers;  // A^0 .. A^d
  RoundStats stats;
};

namespace detail {

/// Counter-driven seeds for the sub-runs of one linalg call.
class SeedSeq {
 public:
  explicit SeedSeq(std::uint64_t s) : seed_(s) {}
  std::uint64_t next() { return mix_stream(seed_, ++n_); }

 private:
  std::uint64_t seed_;
  std::uint64_t n_ = 0;
};

template <class F>
FieldMatrix<F> sub_matrix(const FieldMatrix<F>& A, std::int64_t r0, std::int64_t c0, std::int64_t size) {
  std::vector<Entry<F>> e;
  for (const auto& x : A.entries()) {
    if (x.i >= r0 && x.i < r0 + size && x.j >= c0 && x.j < c0 + size) e.push_back({x.i - r0, x.j - c0, x.x});
  }
  return FieldMatrix<F>(size, size, std::move(e));
}

template <class F>
void place(std::vector<Entry<F>>& out, const FieldMatrix<F>& X, std::int64_t r0, std::int64_t c0, const F& scale) {
  for (const auto& x : X.entries()) out.push_back({x.i + r0, x.j + c0, F(x.x * scale)});
}

template <class F>
FieldMatrix<F> resize(const FieldMatrix<F>& A, std::int64_t d, bool pad_identity) {
  std::vector<Entry<F>> e;
  for (const auto& x : A.entries())
    if (x.i < d && x.j < d) e.push_back(x);
  if (pad_identity)
    for (std::int64_t i = A.rows(); i < d; ++i) e.push_back({i, i, F(1)});
  return FieldMatrix<F>(d, d, std::move(e));
}

template <class F>
MatmulResult<FieldSemiring<F>> mul(const FieldMatrix<F>& X, const FieldMatrix<F>& Y, const MemoryBudget& b,
                                   SeedSeq& seeds, const LinalgConfig& cfg) {
  return dd_multiply(X, Y, b, seeds.next(), cfg.mode, cfg.exec);
}

/// Trace and norm reductions need two 3-word children per tree node.
inline void require_reduction_budget(const MemoryBudget& b, std::int64_t d) {
  if (d >= 2 && b.m < 2) throw std::invalid_argument("reductions need local memory m >= 2");
}

/// Budget for one of `count` products sharing the aggregate memory.
inline MemoryBudget share(const MemoryBudget& b, std::size_t count) {
  return b.with(b.m, std::max(b.m, b.M / std::max<std::size_t>(1, count)));
}

/// Sum of scaled matrices, one reduction keyed by cell.
template <class F>
FieldMatrix<F> mr_linear_combination(Pipeline& pipe, const std::vector<const FieldMatrix<F>*>& xs,
                                     const std::vector<F>& coef, std::int64_t d) {
  PairSet<ScanMsg<F>> items;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (coef[t] == F(0)) continue;
    for (const auto& x : xs[t]->entries()) {
      items.push_back(scan_item<F>(x.i * d + x.j, static_cast<std::int64_t>(t), F(x.x * coef[t])));
    }
  }
  auto st = pipe_scan<F>(pipe, std::move(items), static_cast<std::int64_t>(xs.size()), true,
                         [](const F& a, const F& b) { return F(a + b); });
  std::vector<Entry<F>> e;
  for (const auto& p : st.output) e.push_back({p.value.seg / d, p.value.seg % d, p.value.vals.front()});
  return FieldMatrix<F>(d, d, std::move(e));
}

/// Inverse of a small lower triangular matrix by forward substitution.
template <class F>
std::vector<std::vector<F>> lower_inverse_dense(const std::vector<std::vector<F>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<F>> x(n, std::vector<F>(n, F(0)));
  for (std::size_t c = 0; c < n; ++c) {
    x[c][c] = F(1) / a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      F acc = F(0);
      for (std::size_t k = c; k < r; ++k) acc += a[r][k] * x[k][c];
      x[r][c] = F(-acc / a[r][r]);
    }
  }
  return x;
}

/// One round: a reducer per diagonal leaf block inverts it locally.
template <class F>
FieldMatrix<F> mr_leaf_inverses(Pipeline& pipe, const FieldMatrix<F>& P, std::int64_t leaf) {
  using Msg = MatMsg<F>;
  const std::int64_t D = P.rows();
  PairSet<Msg> in;
  for (const auto& x : P.entries()) {
    if (x.i / leaf != x.j / leaf) continue;
    Msg m;
    m.kind = Msg::Kind::AEntry;
    m.e = x;
    in.push_back({make_key(x.i, x.j), std::move(m)});
  }
  Round<Msg> r{"tri-leaf",
               [leaf](ReducerContext<Msg>& ctx) {
                 const std::int64_t base = ctx.key().v[0] * leaf;
                 std::vector<std::vector<F>> a(leaf, std::vector<F>(leaf, F(0)));
                 for (const auto& p : ctx.input()) a[p.value.e.i - base][p.value.e.j - base] = p.value.e.x;
                 // In place over the received triangle; only its fill-in slots are extra.
                 const auto tri = static_cast<std::size_t>(leaf * (leaf + 1) / 2);
                 ctx.declare_working(tri - std::min(tri, ctx.input().size()));
                 const auto x = lower_inverse_dense(a);
                 for (std::int64_t i = 0; i < leaf; ++i) {
                   for (std::int64_t j = 0; j <= i; ++j) {
                     if (x[i][j] == F(0)) continue;
                     Msg m;
                     m.kind = Msg::Kind::AEntry;
                     m.e = {base + i, base + j, x[i][j]};
                     ctx.output(make_key(base + i, base + j), std::move(m));
                   }
                 }
               },
               [leaf](const Pair<Msg>& p) { return make_key(p.value.e.i / leaf); }};
  auto st = pipe.run(std::move(in), Program<Msg>::fixed({r}));
  return collect_matrix<FieldSemiring<F>>(st.output, D, D);
}

}  // namespace detail

/// Leaf side used by the triangular recursion: the block side for m.
inline std::int64_t triangular_leaf(const MemoryBudget& b) { return block_side(b.m); }

/// Inverse of a nonsingular lower triangular matrix. The matrix is padded
/// with an identity tail to leaf * 2^levels; phase r merges pairs of
/// inverted blocks of side leaf * 2^r with -Y B21 X.
template <class F>
InverseResult<F> invert_lower_triangular(const FieldMatrix<F>& A, const LinalgConfig& cfg) {
  if (A.rows() != A.cols()) throw std::invalid_argument("triangular inversion needs a square matrix");
  const std::int64_t d = A.rows();
  for (const auto& x : A.entries())
    if (x.j > x.i) throw std::invalid_argument("matrix is not lower triangular");
  for (std::int64_t i = 0; i < d; ++i)
    if (A.at(i, i) == F(0)) throw SingularMatrix("zero on the diagonal of a triangular matrix");

  InverseResult<F> res;
  if (d == 0) {
    res.inv = A;
    return res;
  }
  const std::int64_t leaf = triangular_leaf(cfg.budget);
  std::int64_t levels = 0;
  while ((leaf << levels) < d) ++levels;
  const std::int64_t D = leaf << levels;
  const FieldMatrix<F> P = detail::resize(A, D, true);

  detail::SeedSeq seeds(cfg.seed);
  Pipeline pipe(RunConfig{cfg.budget, seeds.next(), cfg.mode, cfg.exec});
  FieldMatrix<F> inv = detail::mr_leaf_inverses(pipe, P, leaf);
  res.stats = pipe.stats();

  for (std::int64_t r = 0; r < levels; ++r) {
    const std::int64_t s = leaf << r;
    const std::int64_t pairs = D / (2 * s);
    const MemoryBudget part = detail::share(cfg.budget, static_cast<std::size_t>(pairs));
    std::vector<Entry<F>> next(inv.entries().begin(), inv.entries().end());
    std::vector<RoundStats> parts;
    for (std::int64_t w = 0; w < pairs; ++w) {
      const std::int64_t lo = 2 * w * s, hi = lo + s;
      const auto X = detail::sub_matrix(inv, lo, lo, s);
      const auto Y = detail::sub_matrix(inv, hi, hi, s);
      const auto B21 = detail::sub_matrix(P, hi, lo, s);
      auto t = detail::mul(B21, X, part, seeds, cfg);
      auto u = detail::mul(Y, t.C, part, seeds, cfg);
      detail::place(next, u.C, hi, lo, F(-1));
      RoundStats chain = t.stats;
      chain.append(u.stats);
      parts.push_back(std::move(chain));
    }
    res.stats.append(RoundStats::parallel(parts));
    inv = FieldMatrix<F>(D, D, std::move(next));
  }
  res.inv = detail::resize(inv, d, false);
  return res;
}

/// Characteristic polynomial det(lambda I - A) = sum c_k lambda^k.
/// Powers by repeated squaring, the other powers in parallel as products of
/// squares, traces by reduction, then the triangular system
/// L (c_{d-1}, ..., c_0)^T = -(s_1, ..., s_d)^T with L_kk = k and
/// L_kj = s_{k-j} below the diagonal.
template <class F>
CharPoly<F> char_poly(const FieldMatrix<F>& A, const LinalgConfig& cfg) {
  if (A.rows() != A.cols()) throw std::invalid_argument("characteristic polynomial needs a square matrix");
  const std::int64_t d = A.rows();
  detail::require_reduction_budget(cfg.budget, d);
  CharPoly<F> cp;
  cp.c.assign(static_cast<std::size_t>(d + 1), F(0));
  cp.c[static_cast<std::size_t>(d)] = F(1);
  cp.s.assign(static_cast<std::size_t>(d + 1), F(0));
  cp.powers.assign(static_cast<std::size_t>(d + 1), FieldMatrix<F>(d, d));
  cp.powers[0] = FieldMatrix<F>::identity(d);
  if (d == 0) return cp;
  cp.powers[1] = A;

  detail::SeedSeq seeds(cfg.seed);
  for (std::int64_t k = 2; k <= d; k *= 2) {
    auto r = detail::mul(cp.powers[k / 2], cp.powers[k / 2], cfg.budget, seeds, cfg);
    cp.powers[static_cast<std::size_t>(k)] = std::move(r.C);
    cp.stats.append(r.stats);
  }
  std::vector<std::int64_t> rest;
  for (std::int64_t k = 3; k <= d; ++k)
    if ((k & (k - 1)) != 0) rest.push_back(k);
  if (!rest.empty()) {
    const MemoryBudget part = detail::share(cfg.budget, rest.size());
    std::vector<RoundStats> parts;
    for (auto k : rest) {
      // Product of the squares named by the bits of k, lowest first.
      std::int64_t bit = k & -k;
      FieldMatrix<F> acc = cp.powers[static_cast<std::size_t>(bit)];
      RoundStats chain;
      for (std::int64_t b = bit * 2; b <= k; b *= 2) {
        if ((k & b) == 0) continue;
        auto r = detail::mul(acc, cp.powers[static_cast<std::size_t>(b)], part, seeds, cfg);
        acc = std::move(r.C);
        chain.append(r.stats);
      }
      cp.powers[static_cast<std::size_t>(k)] = std::move(acc);
      parts.push_back(std::move(chain));
    }
    cp.stats.append(RoundStats::parallel(parts));
  }

  Pipeline pipe(RunConfig{cfg.budget, seeds.next(), cfg.mode, cfg.exec});
  PairSet<ScanMsg<F>> diag;
  for (std::int64_t k = 1; k <= d; ++k)
    for (const auto& x : cp.powers[static_cast<std::size_t>(k)].entries())
      if (x.i == x.j) diag.push_back(scan_item<F>(k, x.i, x.x));
  auto tr = pipe_scan<F>(pipe, std::move(diag), d, true, [](const F& a, const F& b) { return F(a + b); });
  for (const auto& p : tr.output) cp.s[static_cast<std::size_t>(p.value.seg)] = p.value.vals.front();
  cp.stats.append(pipe.stats());

  std::vector<Entry<F>> le, se;
  for (std::int64_t k = 0; k < d; ++k) {
    le.push_back({k, k, F(k + 1)});
    for (std::int64_t j = 0; j < k; ++j) le.push_back({k, j, cp.s[static_cast<std::size_t>(k - j)]});
    se.push_back({k, 0, F(-cp.s[static_cast<std::size_t>(k + 1)])});
  }
  const FieldMatrix<F> L(d, d, std::move(le)), S(d, d, std::move(se));
  LinalgConfig sub = cfg;
  sub.seed = seeds.next();
  auto linv = invert_lower_triangular(L, sub);
  cp.stats.append(linv.stats);
  auto sol = detail::mul(linv.inv, S, cfg.budget, seeds, cfg);
  cp.stats.append(sol.stats);
  for (std::int64_t t = 0; t < d; ++t) cp.c[static_cast<std::size_t>(d - 1 - t)] = sol.C.at(t, 0);
  return cp;
}

namespace detail {

/// sum_{i=1..d} c_i A^{i-1} scaled by `scale`, as one reduction.
template <class F>
FieldMatrix<F> horner_sum(const CharPoly<F>& cp, const F& scale, const LinalgConfig& cfg, RoundStats& stats) {
  const auto d = static_cast<std::int64_t>(cp.c.size()) - 1;
  std::vector<const FieldMatrix<F>*> xs;
  std::vector<F> coef;
  for (std::int64_t i = 1; i <= d; ++i) {
    xs.push_back(&cp.powers[static_cast<std::size_t>(i - 1)]);
    coef.push_back(F(cp.c[static_cast<std::size_t>(i)] * scale));
  }
  Pipeline pipe(RunConfig{cfg.budget, mix_stream(cfg.seed, 0x4e), cfg.mode, cfg.exec});
  auto out = mr_linear_combination(pipe, xs, coef, d);
  stats.append(pipe.stats());
  return out;
}

}  // namespace detail

/// A^{-1} = -(1/c_0) sum_{i=1..d} c_i A^{i-1}.
template <class F>
InverseResult<F> invert_general(const FieldMatrix<F>& A, const LinalgConfig& cfg) {
  auto cp = char_poly(A, cfg);
  if (cp.c[0] == F(0)) throw SingularMatrix("matrix is singular");
  InverseResult<F> res;
  res.stats = cp.stats;
  res.inv = detail::horner_sum(cp, F(F(-1) / cp.c[0]), cfg, res.stats);
  return res;
}

template <class F>
struct DetAdj {
  F det{};
  FieldMatrix<F> adj;
  RoundStats stats;
};

/// det(A) = (-1)^d c_0 and adj(A) = (-1)^{d+1} sum_{i=1..d} c_i A^{i-1};
/// both hold for singular A.
template <class F>
DetAdj<F> det_adjugate(const FieldMatrix<F>& A, const LinalgConfig& cfg) {
  auto cp = char_poly(A, cfg);
  const std::int64_t d = A.rows();
  DetAdj<F> r;
  r.stats = cp.stats;
  r.det = d % 2 == 0 ? cp.c[0] : F(-cp.c[0]);
  r.adj = detail::horner_sum(cp, d % 2 == 0 ? F(-1) : F(1), cfg, r.stats);
  return r;
}

struct NewtonResult {
  FieldMatrix<double> B;
  int iterations = 0;
  std::vector<double> residuals;  // Frobenius norm of I - B_k A, k = 0, 1, ...
  double alpha = 0;
  RoundStats stats;
};

/// Iteration cap used when none is given: 40 ceil(log2 d) + 10.
inline int newton_default_iterations(std::int64_t d) {
  int lg = 0;
  while ((std::int64_t{1} << lg) < d) ++lg;
  return 40 * lg + 10;
}

/// Newton iteration from B_0 = A^T / (||A||_1 ||A||_inf). Stops at the first
/// k with ||I - B_k A||_F <= tol.
inline NewtonResult newton_inverse(const FieldMatrix<double>& A, const LinalgConfig& cfg, double tol = 1e-10,
                                   int max_iter = 0) {
  using F = double;
  if (A.rows() != A.cols()) throw std::invalid_argument("Newton iteration needs a square matrix");
  const std::int64_t d = A.rows();
  detail::require_reduction_budget(cfg.budget, d);
  if (max_iter <= 0) max_iter = newton_default_iterations(d);
  NewtonResult res;
  detail::SeedSeq seeds(cfg.seed);
  const auto stage = [&] { return Pipeline(RunConfig{cfg.budget, seeds.next(), cfg.mode, cfg.exec}); };
  const auto plus = [](const F& a, const F& b) { return a + b; };
  const auto maxf = [](const F& a, const F& b) { return std::max(a, b); };

  // Row and column absolute sums, then their maxima.
  Pipeline np = stage();
  PairSet<ScanMsg<F>> sums;
  for (const auto& x : A.entries()) {
    sums.push_back(scan_item<F>(x.i, x.j, std::abs(x.x)));
    sums.push_back(scan_item<F>(d + x.j, x.i, std::abs(x.x)));
  }
  auto rs = pipe_scan<F>(np, std::move(sums), d, true, plus);
  PairSet<ScanMsg<F>> maxima;
  for (const auto& p : rs.output) {
    maxima.push_back(scan_item<F>(p.value.seg < d ? 0 : 1, p.value.seg % d, p.value.vals.front()));
  }
  auto mx = pipe_scan<F>(np, std::move(maxima), d, true, maxf);
  res.stats.append(np.stats());
  F norm_inf = 0, norm_1 = 0;
  for (const auto& p : mx.output) (p.value.seg == 0 ? norm_inf : norm_1) = p.value.vals.front();
  if (norm_inf == 0 || norm_1 == 0) throw SingularMatrix("zero matrix");
  res.alpha = 1.0 / (norm_1 * norm_inf);

  std::vector<Entry<F>> bt;
  for (const auto& x : A.entries()) bt.push_back({x.j, x.i, x.x * res.alpha});
  FieldMatrix<F> B(d, d, std::move(bt));
  const auto I = FieldMatrix<F>::identity(d);

  for (int k = 0;; ++k) {
    auto ba = detail::mul(B, A, cfg.budget, seeds, cfg);
    res.stats.append(ba.stats);
    Pipeline rp = stage();
    const auto R = detail::mr_linear_combination<F>(rp, {&I, &ba.C}, {1.0, -1.0}, d);
    PairSet<ScanMsg<F>> sq;
    for (const auto& x : R.entries()) sq.push_back(scan_item<F>(0, x.i * d + x.j, x.x * x.x));
    auto fr = pipe_scan<F>(rp, std::move(sq), d * d, true, plus);
    res.stats.append(rp.stats());
    const F norm = fr.output.empty() ? 0.0 : std::sqrt(fr.output.front().value.vals.front());
    res.residuals.push_back(norm);
    if (norm <= tol) {
      res.B = std::move(B);
      res.iterations = k;
      return res;
    }
    if (k >= max_iter || !std::isfinite(norm)) {
      throw NoConvergence("Newton iteration stopped at residual " + std::to_string(norm) + " after " +
                          std::to_string(k) + " iterations");
    }
    Pipeline ip = stage();
    const auto IR = detail::mr_linear_combination<F>(ip, {&I, &R}, {1.0, 1.0}, d);
    res.stats.append(ip.stats());
    auto nb = detail::mul(IR, B, cfg.budget, seeds, cfg);
    res.stats.append(nb.stats);
    B = std::move(nb.C);
  }
}

}  // namespace mrmx
