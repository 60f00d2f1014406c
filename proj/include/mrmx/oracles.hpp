// Brute-force reference implementations. Nothing here touches the engine.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrmx/graph.hpp"
#include "mrmx/matrix.hpp"

namespace mrmx {

/// Triple loop over dense copies.
template <class S>
CooMatrix<S> naive_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  if (A.cols() != B.rows()) throw std::invalid_argument("dimension mismatch");
  const auto a = A.to_dense();
  const auto b = B.to_dense();
  std::vector<Entry<typename S::value_type>> out;
  for (std::int64_t i = 0; i < A.rows(); ++i) {
    for (std::int64_t j = 0; j < B.cols(); ++j) {
      auto acc = S::zero();
      for (std::int64_t k = 0; k < A.cols(); ++k) acc = S::add(acc, S::mul(a[i][k], b[k][j]));
      out.push_back({i, j, acc});
    }
  }
  return CooMatrix<S>(A.rows(), B.cols(), std::move(out));
}

struct DistinctProducts {
  std::size_t count = 0;                  // distinct output cells hit by a nonzero product
  std::vector<std::int64_t> stream;       // j + i*d for every nonzero elementary product
};

/// Enumerates all nonzero elementary products a_{i,k} b_{k,j}.
template <class S>
DistinctProducts exact_distinct_products(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  DistinctProducts r;
  std::set<std::int64_t> cells;
  const std::int64_t d = B.cols();
  for (const auto& a : A.entries()) {
    for (const auto& b : B.entries()) {
      if (b.i != a.j) continue;
      const std::int64_t v = b.j + a.i * d;
      r.stream.push_back(v);
      cells.insert(v);
    }
  }
  r.count = cells.size();
  return r;
}

/// Count of nonzero elementary products, the sum over k of a_k b_k.
template <class S>
std::int64_t elementary_product_count(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  std::vector<std::int64_t> col(A.cols(), 0), row(B.rows(), 0);
  for (const auto& e : A.entries()) ++col[e.j];
  for (const auto& e : B.entries()) ++row[e.i];
  std::int64_t s = 0;
  for (std::size_t k = 0; k < col.size() && k < row.size(); ++k) s += col[k] * row[k];
  return s;
}

template <class F>
using DenseField = std::vector<std::vector<F>>;

/// Determinant by fraction-free (Bareiss) elimination with row pivoting.
template <class F>
F oracle_determinant(DenseField<F> a) {
  const std::size_t n = a.size();
  if (n == 0) return F(1);
  F sign = F(1), prev = F(1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a[k][k] == F(0)) {
      std::size_t p = k + 1;
      while (p < n && a[p][k] == F(0)) ++p;
      if (p == n) return F(0);
      std::swap(a[k], a[p]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] = F((a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev);
    }
    prev = a[k][k];
  }
  return F(sign * a[n - 1][n - 1]);
}

/// Gauss-Jordan inverse, or nothing when singular.
template <class F>
std::optional<DenseField<F>> oracle_inverse(DenseField<F> a) {
  const std::size_t n = a.size();
  DenseField<F> x(n, std::vector<F>(n, F(0)));
  for (std::size_t i = 0; i < n; ++i) x[i][i] = F(1);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && a[p][c] == F(0)) ++p;
    if (p == n) return std::nullopt;
    std::swap(a[c], a[p]);
    std::swap(x[c], x[p]);
    const F inv = F(1) / a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] *= inv;
      x[c][j] *= inv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == F(0)) continue;
      const F f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        x[r][j] -= f * x[c][j];
      }
    }
  }
  return x;
}

/// Adjugate from cofactors: adj_{j,i} = (-1)^{i+j} det(minor_{i,j}).
template <class F>
DenseField<F> oracle_adjugate(const DenseField<F>& a) {
  const std::size_t n = a.size();
  DenseField<F> adj(n, std::vector<F>(n, F(0)));
  if (n == 1) {
    adj[0][0] = F(1);
    return adj;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      DenseField<F> minor;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == i) continue;
        std::vector<F> row;
        for (std::size_t c = 0; c < n; ++c)
          if (c != j) row.push_back(a[r][c]);
        minor.push_back(std::move(row));
      }
      const F det = oracle_determinant(std::move(minor));
      adj[j][i] = (i + j) % 2 == 0 ? det : F(-det);
    }
  }
  return adj;
}

template <class F>
struct OracleInverse {
  DenseField<F> inv;
  F det;
  DenseField<F> adj;
};

/// Inverse, determinant and adjugate. The adjugate comes from cofactors up
/// to d = 8 and from det * inverse beyond.
template <class F>
OracleInverse<F> oracle_inverse_det_adjugate(const DenseField<F>& a) {
  for (const auto& row : a)
    if (row.size() != a.size()) throw std::invalid_argument("oracle needs a square matrix");
  OracleInverse<F> r;
  r.det = oracle_determinant(a);
  if (r.det == F(0)) throw SingularMatrix("oracle: singular matrix");
  r.inv = *oracle_inverse(a);
  if (a.size() <= 8) {
    r.adj = oracle_adjugate(a);
  } else {
    r.adj = r.inv;
    for (auto& row : r.adj)
      for (auto& x : row) x *= r.det;
  }
  return r;
}

/// Coefficients c_0..c_d of det(lambda I - A), from its values at
/// lambda = 0..d and Lagrange interpolation.
template <class F>
std::vector<F> oracle_char_poly(const DenseField<F>& a) {
  const std::size_t n = a.size();
  std::vector<F> xs, ys;
  for (std::size_t t = 0; t <= n; ++t) {
    DenseField<F> m(n, std::vector<F>(n, F(0)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m[i][j] = F((i == j ? F(static_cast<long>(t)) : F(0)) - a[i][j]);
    xs.push_back(F(static_cast<long>(t)));
    ys.push_back(oracle_determinant(std::move(m)));
  }
  std::vector<F> c(n + 1, F(0));
  for (std::size_t t = 0; t <= n; ++t) {
    // Basis polynomial prod_{u != t} (x - x_u) / (x_t - x_u).
    std::vector<F> basis{F(1)};
    F denom = F(1);
    for (std::size_t u = 0; u <= n; ++u) {
      if (u == t) continue;
      std::vector<F> next(basis.size() + 1, F(0));
      for (std::size_t k = 0; k < basis.size(); ++k) {
        next[k + 1] += basis[k];
        next[k] -= basis[k] * xs[u];
      }
      basis = std::move(next);
      denom *= xs[t] - xs[u];
    }
    for (std::size_t k = 0; k <= n; ++k) c[k] += ys[t] * basis[k] / denom;
  }
  return c;
}

/// All perfect matchings: the lowest uncovered vertex is paired with each
/// uncovered neighbour in turn.
inline std::vector<Matching> exhaustive_perfect_matchings(const Graph& g) {
  if (g.d > 16) throw std::invalid_argument("exhaustive matching oracle is limited to 16 vertices");
  std::vector<Matching> out;
  if (g.d % 2 != 0) return out;
  std::vector<std::vector<std::int64_t>> adj(static_cast<std::size_t>(g.d));
  for (auto [u, v] : g.edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> used(static_cast<std::size_t>(g.d), false);
  Matching cur;
  std::function<void()> rec = [&] {
    std::int64_t u = 0;
    while (u < g.d && used[u]) ++u;
    if (u == g.d) {
      Matching m = cur;
      std::sort(m.begin(), m.end());
      out.push_back(std::move(m));
      return;
    }
    used[u] = true;
    for (auto v : adj[u]) {
      if (used[v]) continue;
      used[v] = true;
      cur.push_back({std::min(u, v), std::max(u, v)});
      rec();
      cur.pop_back();
      used[v] = false;
    }
    used[u] = false;
  };
  rec();
  return out;
}

}  // namespace mrmx
