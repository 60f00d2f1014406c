// Seeded random inputs for benchmarks and sweeps.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mrmx/matrix.hpp"

namespace mrmx {

/// Each cell is nonzero with probability `density`; values in [1, hi].
template <class S>
CooMatrix<S> random_matrix(std::int64_t dim, double density, std::uint64_t seed, std::int64_t hi = 9) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<std::int64_t> val(1, hi);
  std::vector<Entry<typename S::value_type>> e;
  for (std::int64_t i = 0; i < dim; ++i)
    for (std::int64_t j = 0; j < dim; ++j)
      if (keep(gen)) e.push_back({i, j, static_cast<typename S::value_type>(val(gen))});
  return CooMatrix<S>(dim, dim, std::move(e));
}

/// Exactly `nnz` distinct random cells.
template <class S>
CooMatrix<S> random_sparse(std::int64_t dim, std::int64_t nnz, std::uint64_t seed, std::int64_t hi = 9) {
  std::mt19937_64 gen(seed);
  const std::int64_t cells = dim * dim;
  nnz = std::min(nnz, cells);
  std::vector<std::int64_t> pick(static_cast<std::size_t>(cells));
  for (std::int64_t c = 0; c < cells; ++c) pick[static_cast<std::size_t>(c)] = c;
  for (std::int64_t k = 0; k < nnz; ++k) {
    std::uniform_int_distribution<std::int64_t> u(k, cells - 1);
    std::swap(pick[static_cast<std::size_t>(k)], pick[static_cast<std::size_t>(u(gen))]);
  }
  std::uniform_int_distribution<std::int64_t> val(1, hi);
  std::vector<Entry<typename S::value_type>> e;
  for (std::int64_t k = 0; k < nnz; ++k) {
    const auto c = pick[static_cast<std::size_t>(k)];
    e.push_back({c / dim, c % dim, static_cast<typename S::value_type>(val(gen))});
  }
  return CooMatrix<S>(dim, dim, std::move(e));
}

}  // namespace mrmx
