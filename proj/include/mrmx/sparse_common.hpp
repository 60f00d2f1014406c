// Pieces shared by the sparse algorithms: scans run inside a pipeline,
// the column/row profile a_k = nnz(A[:, k]), b_k = nnz(B[k, :]), and the
// sum of a_k b_k as an upper bound on the output size.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mrmx/matrix.hpp"
#include "mrmx/pipeline.hpp"
#include "mrmx/primitives.hpp"

namespace mrmx {

using ScanI = ScanMsg<std::int64_t>;

/// Runs a scan (or a reduction when reduce_only) as the next sub-program of
/// `pipe`. `resident` words stay alive beside it.
template <class T>
RunState<ScanMsg<T>> pipe_scan(Pipeline& pipe, PairSet<ScanMsg<T>> items, std::int64_t range, bool reduce_only,
                               std::function<T(const T&, const T&)> op, std::size_t resident = 0,
                               std::size_t resident_local = 0) {
  if (items.empty()) return {};
  ScanOptions<T> opt;
  opt.op = std::move(op);
  opt.range = std::max<std::int64_t>(1, range);
  opt.fan_in = scan_fan_in(pipe.budget());
  opt.to_output = true;
  opt.reduce_only = reduce_only;
  return pipe.run(std::move(items), scan_program<T>(opt), resident, resident_local);
}

/// Integer sums.
inline RunState<ScanI> pipe_sum(Pipeline& pipe, PairSet<ScanI> items, std::int64_t range, bool reduce_only,
                                std::size_t resident = 0, std::size_t resident_local = 0) {
  return pipe_scan<std::int64_t>(pipe, std::move(items), range, reduce_only, std::plus<std::int64_t>{}, resident,
                                 resident_local);
}

template <class S>
std::int64_t n_tilde(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  return static_cast<std::int64_t>(std::max(A.nnz(), B.nnz()));
}

/// Words of the input pairs (k, (i, j, x)).
template <class S>
std::size_t coo_words(const CooMatrix<S>& A, const CooMatrix<S>& B) {
  return 4 * (A.nnz() + B.nnz());
}

/// Radix used to pack small counters into one word. Counters up to 2d fit.
inline std::int64_t profile_radix(std::int64_t dim) { return 2 * dim + 1; }

struct ColRowProfile {
  std::vector<std::int64_t> a;  // nonzeros per column of A
  std::vector<std::int64_t> b;  // nonzeros per row of B
  /// Reduction results keyed by k, value a_k * R + b_k with R = profile_radix.
  PairSet<ScanI> totals;
};

/// Reduction over one segment per inner index k: A entries of column k sit at
/// positions [0, d), B entries of row k at [d, 2d).
template <class S>
ColRowProfile mr_col_row_counts(Pipeline& pipe, const CooMatrix<S>& A, const CooMatrix<S>& B,
                                std::size_t resident) {
  const std::int64_t d = A.cols();
  const std::int64_t R = profile_radix(d);
  PairSet<ScanI> items;
  items.reserve(A.nnz() + B.nnz());
  for (const auto& e : A.entries()) items.push_back(scan_item<std::int64_t>(e.j, e.i, R));
  for (const auto& e : B.entries()) items.push_back(scan_item<std::int64_t>(e.i, d + e.j, 1));
  auto st = pipe_sum(pipe, std::move(items), 2 * d, true, resident);
  ColRowProfile prof;
  prof.a.assign(static_cast<std::size_t>(d), 0);
  prof.b.assign(static_cast<std::size_t>(d), 0);
  for (const auto& p : st.output) {
    const std::int64_t v = p.value.vals.front();
    prof.a[static_cast<std::size_t>(p.value.seg)] = v / R;
    prof.b[static_cast<std::size_t>(p.value.seg)] = v % R;
  }
  prof.totals = std::move(st.output);
  return prof;
}

struct OutputBound {
  std::int64_t bound = 0;
  RoundStats stats;
};

/// Sum over k of a_k b_k: at least the output size and at most sqrt(n)
/// times it. A profile reduction followed by a sum over k.
template <class S>
OutputBound sqrt_n_upper_bound(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                               std::uint64_t seed = 0, Mode mode = Mode::Strict,
                               Execution exec = Execution::Parallel) {
  if (A.cols() != B.rows()) throw std::invalid_argument("dimension mismatch");
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  OutputBound r;
  auto prof = mr_col_row_counts(pipe, A, B, 0);
  const std::int64_t R = profile_radix(A.cols());
  PairSet<ScanI> items;
  for (const auto& p : prof.totals) {
    const std::int64_t v = p.value.vals.front();
    const std::int64_t w = (v / R) * (v % R);
    if (w > 0) items.push_back(scan_item<std::int64_t>(0, p.value.seg, w));
  }
  auto st = pipe_sum(pipe, std::move(items), A.cols(), true);
  for (const auto& p : st.output) r.bound += p.value.vals.front();
  r.stats = pipe.stats();
  return r;
}

/// log_m x with a base-2 fallback for m < 2.
inline double log_base_m(double x, std::size_t m) {
  x = std::max(x, 2.0);
  return m >= 2 ? std::log(x) / std::log(static_cast<double>(m)) : std::log2(x);
}

}  // namespace mrmx
