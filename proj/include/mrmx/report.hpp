// CSV report rows and the round bound expressions printed beside them.
// Every bound is the leading expression with unit constants.
#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "mrmx/engine.hpp"
#include "mrmx/matmul_dense.hpp"
#include "mrmx/sparse_common.hpp"

namespace mrmx {

inline constexpr const char* kCsvHeader =
    "algo,n,nnz_a,nnz_b,nnz_c,m,M,seed,rounds,max_local_words,max_agg_words,max_products_per_round,theory_bound";

struct ReportRow {
  std::string algo;
  std::int64_t n = 0;  // entries of the square matrix, dim^2
  std::size_t nnz_a = 0, nnz_b = 0, nnz_c = 0;
  std::size_t m = 0, M = 0;
  std::uint64_t seed = 0;
  std::size_t rounds = 0, max_local = 0, max_agg = 0, max_products = 0;
  double bound = 0;
};

inline ReportRow make_row(std::string algo, std::int64_t dim, std::size_t nnz_a, std::size_t nnz_b, std::size_t nnz_c,
                          const MemoryBudget& b, std::uint64_t seed, const RoundStats& st, double bound) {
  ReportRow r;
  r.algo = std::move(algo);
  r.n = dim * dim;
  r.nnz_a = nnz_a;
  r.nnz_b = nnz_b;
  r.nnz_c = nnz_c;
  r.m = b.m;
  r.M = b.M;
  r.seed = seed;
  r.rounds = st.rounds();
  r.max_local = st.max_local_words();
  r.max_agg = st.max_agg_words();
  r.max_products = st.max_products_per_round();
  r.bound = bound;
  return r;
}

inline void write_row(std::ostream& os, const ReportRow& r) {
  std::ostringstream b;
  b << std::setprecision(6) << r.bound;
  os << r.algo << ',' << r.n << ',' << r.nnz_a << ',' << r.nnz_b << ',' << r.nnz_c << ',' << r.m << ',' << r.M << ','
     << r.seed << ',' << r.rounds << ',' << r.max_local << ',' << r.max_agg << ',' << r.max_products << ',' << b.str()
     << '\n';
}

namespace bounds {

inline double nd(std::int64_t dim) { return std::max(2.0, static_cast<double>(dim) * static_cast<double>(dim)); }
inline double lgm(double x, const MemoryBudget& b) { return std::max(1.0, log_base_m(x, b.m)); }

inline double dense(std::int64_t dim, const MemoryBudget& b) { return dense_bound(dim, b); }

/// ceil(nt min(nt, sqrt n) / M) log_m M
inline double d1(std::int64_t nt, std::int64_t dim, const MemoryBudget& b) {
  const double x = static_cast<double>(nt) * std::min<double>(static_cast<double>(nt), static_cast<double>(dim));
  return std::ceil(x / static_cast<double>(b.M)) * lgm(static_cast<double>(b.M), b) + 1;
}

/// ceil((nt + ot) sqrt n / (M sqrt m)) log_m M, shared by D2 and R1.
inline double d2(std::int64_t nt, std::int64_t ot, std::int64_t dim, const MemoryBudget& b) {
  const double x = static_cast<double>(nt + ot) * static_cast<double>(dim) /
                   (static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m)));
  return std::ceil(x) * lgm(static_cast<double>(b.M), b) + 1;
}

inline double estimate(std::int64_t nt, std::int64_t dim, const MemoryBudget& b) {
  return static_cast<double>(nt) * static_cast<double>(dim) /
             (static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m))) +
         lgm(static_cast<double>(b.M), b);
}

inline double log2_over_logm(std::int64_t dim, const MemoryBudget& b) {
  const double l = std::log2(nd(dim));
  return l * l / std::max(1.0, std::log2(static_cast<double>(b.m)));
}

inline double triangular(std::int64_t dim, const MemoryBudget& b) {
  return std::pow(nd(dim), 1.5) / (static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m))) +
         log2_over_logm(dim, b);
}

inline double charpoly(std::int64_t dim, const MemoryBudget& b) {
  const double n = nd(dim);
  return n * n * std::log2(n) / (static_cast<double>(b.M) * std::sqrt(static_cast<double>(b.m))) +
         log2_over_logm(dim, b);
}

/// Theta(log n) iterations of two dense products and a reduction each.
inline double newton(std::int64_t dim, const MemoryBudget& b) {
  return std::log2(nd(dim)) * (2 * dense(dim, b) + lgm(nd(dim), b));
}

}  // namespace bounds

}  // namespace mrmx
