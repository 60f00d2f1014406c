// Entry points built on D1, D2 and the fixed-K schedule: the randomized R1,
// the deterministic dispatcher and sparse-dense interleaving.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "mrmx/estimate.hpp"
#include "mrmx/matmul_d1.hpp"
#include "mrmx/matmul_d2.hpp"
#include "mrmx/matmul_dense.hpp"

namespace mrmx {

/// Sketch accuracy used by R1 for matrices with n = d^2 entries.
inline SketchParams r1_sketch_params(std::int64_t dim) {
  const double n = std::max(2.0, static_cast<double>(dim) * static_cast<double>(dim));
  return sketch_params(0.5, 1.0 / (2.0 * n));
}

/// Local words R1 needs: a bin merges two sketches of t * Delta words, which
/// is 32 ceil(log2(2n)) = O(log n).
inline std::size_t r1_min_local(std::int64_t dim) { return sketch_min_local(r1_sketch_params(dim)); }

/// K = max(1, min(M / (n~ + 2 o^), q)).
inline std::int64_t r1_groups(const MemoryBudget& b, std::int64_t nt, double o_hat, std::int64_t q) {
  const double denom = static_cast<double>(nt) + 2.0 * std::max(0.0, o_hat);
  const auto k = static_cast<std::int64_t>(std::floor(static_cast<double>(b.M) / std::max(1.0, denom)));
  return std::clamp<std::int64_t>(k, 1, std::max<std::int64_t>(1, q));
}

template <class S>
MatmulResult<S> r1_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                            std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel,
                            double* o_hat_out = nullptr) {
  check_square_pair(A, B);
  const std::int64_t d = A.rows();
  MatmulResult<S> res;
  res.algo = "r1";
  const std::int64_t nt = n_tilde(A, B);
  if (budget.m >= static_cast<std::size_t>(2 * nt)) {
    Pipeline pipe(RunConfig{budget, seed, mode, exec});
    auto st = pipe.run(coo_input(A, B), sequential_program<S>());
    res.C = collect_matrix<S>(st.output, d, d);
    res.K = 1;
    res.stats = pipe.stats();
    return res;
  }
  if (mode == Mode::Strict && budget.m < r1_min_local(d)) {
    throw BudgetError("r1 needs m >= " + std::to_string(r1_min_local(d)) + " local words for its sketches", 0);
  }
  EstimateOptions eo;
  eo.eps = 0.5;
  eo.delta = 1.0 / (2.0 * std::max(2.0, static_cast<double>(d) * static_cast<double>(d)));
  auto est = estimate_output_nnz(A, B, eo, budget, mix_stream(seed, 0x71), mode, exec);
  if (o_hat_out != nullptr) *o_hat_out = est.estimate;

  const BlockLayout L = block_layout(d, budget.m);
  const FixedSchedule sch = fixed_schedule(L, r1_groups(budget, nt, est.estimate, L.q), budget);
  Pipeline pipe(RunConfig{budget, mix_stream(seed, 0x72), mode, exec});
  auto st = pipe.run(coo_input(A, B), fixed_k_program<S>(L, sch, budget));
  res.C = collect_matrix<S>(st.output, d, d);
  res.K = sch.K;
  res.stats = est.stats;
  res.stats.append(pipe.stats());
  return res;
}

/// Work terms of the dispatcher. D1 costs n~ min(n~, sqrt n); D2 costs
/// (n~ + o_upper) sqrt(n / m).
struct DispatchTerms {
  double d1 = 0;
  double d2 = 0;
};

inline DispatchTerms dispatch_terms(std::int64_t nt, std::int64_t o_upper, std::int64_t dim, std::size_t m) {
  const double sn = static_cast<double>(dim);  // sqrt of n = d^2
  const double x = static_cast<double>(nt);
  DispatchTerms t;
  t.d1 = x * std::min(x, sn);
  t.d2 = (x + static_cast<double>(o_upper)) * sn / std::sqrt(static_cast<double>(std::max<std::size_t>(1, m)));
  return t;
}

/// Runs D1 or D2, whichever has the smaller work term. With allow_random,
/// R1 replaces D2 when the local memory holds its sketches. The result's
/// algo field names the choice.
template <class S>
MatmulResult<S> sparse_multiply_auto(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                                     std::uint64_t seed = 0, bool allow_random = false, Mode mode = Mode::Strict,
                                     Execution exec = Execution::Parallel) {
  check_square_pair(A, B);
  const std::int64_t d = A.rows();
  const std::int64_t nt = n_tilde(A, B);
  auto ub = sqrt_n_upper_bound(A, B, budget, mix_stream(seed, 0xa0), mode, exec);
  const std::int64_t o_upper = std::min<std::int64_t>(ub.bound, d * d);
  const DispatchTerms t = dispatch_terms(nt, o_upper, d, budget.m);
  MatmulResult<S> res;
  std::string choice;
  if (t.d1 <= t.d2) {
    res = d1_multiply(A, B, budget, seed, mode, exec);
    choice = "d1";
  } else if (allow_random && budget.m >= r1_min_local(d)) {
    res = r1_multiply(A, B, budget, seed, mode, exec);
    choice = "r1";
  } else {
    res = d2_multiply(A, B, budget, seed, mode, exec);
    choice = "d2";
  }
  RoundStats all = ub.stats;
  all.append(res.stats);
  res.stats = std::move(all);
  res.algo = choice;
  return res;
}

/// Round bounds compared by sd_multiply, for a sparse A with n~ nonzeros.
struct SdBounds {
  double d1 = 0;
  double dense = 0;
};

inline SdBounds sd_bounds(std::int64_t nnz_a, std::int64_t dim, const MemoryBudget& b) {
  const double n = std::max(2.0, static_cast<double>(dim) * static_cast<double>(dim));
  SdBounds r;
  r.d1 = std::ceil(static_cast<double>(nnz_a) * std::sqrt(n) / static_cast<double>(b.M)) *
         log_base_m(static_cast<double>(b.M), b.m);
  r.dense = dense_bound(dim, b);
  return r;
}

/// Sparse A times dense B: D1 when its bound is smaller, else the dense
/// schedule.
template <class S>
MatmulResult<S> sd_multiply(const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& budget,
                            std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  check_square_pair(A, B);
  const SdBounds b = sd_bounds(static_cast<std::int64_t>(A.nnz()), A.rows(), budget);
  MatmulResult<S> res = b.d1 <= b.dense ? d1_multiply(A, B, budget, seed, mode, exec)
                                        : dd_multiply(A, B, budget, seed, mode, exec);
  return res;
}

}  // namespace mrmx
