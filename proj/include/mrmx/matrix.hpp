// Sparse matrices in coordinate form, their block decomposition and the
// group scheme used by the blocked multiplication algorithms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mrmx/semiring.hpp"

namespace mrmx {

/// No inverse exists (zero determinant or a zero triangular pivot).
class SingularMatrix : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <class V>
struct Entry {
  std::int64_t i = 0;
  std::int64_t j = 0;
  V x{};
  bool operator==(const Entry&) const = default;
};

/// Row-major list of nonzero entries. The position of an entry in the list
/// is its progressive key: the number of nonzeros before it in a row-major
/// scan.
template <class S>
class CooMatrix {
 public:
  using value_type = typename S::value_type;

  CooMatrix() = default;
  CooMatrix(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
  }

  /// Drops zeros, sorts row-major, rejects duplicates and out-of-range entries.
  CooMatrix(std::int64_t rows, std::int64_t cols, std::vector<Entry<value_type>> entries) : CooMatrix(rows, cols) {
    for (auto& e : entries) {
      if (e.i < 0 || e.i >= rows || e.j < 0 || e.j >= cols) throw std::out_of_range("matrix entry out of range");
      if (!S::is_zero(e.x)) entries_.push_back(std::move(e));
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const auto& a, const auto& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    for (std::size_t k = 1; k < entries_.size(); ++k) {
      if (entries_[k].i == entries_[k - 1].i && entries_[k].j == entries_[k - 1].j)
        throw std::invalid_argument("duplicate matrix entry");
    }
  }

  static CooMatrix identity(std::int64_t d) {
    std::vector<Entry<value_type>> e;
    for (std::int64_t i = 0; i < d; ++i) e.push_back({i, i, S::one()});
    return CooMatrix(d, d, std::move(e));
  }

  static CooMatrix from_dense(const std::vector<std::vector<value_type>>& rows) {
    const auto r = static_cast<std::int64_t>(rows.size());
    const auto c = r == 0 ? 0 : static_cast<std::int64_t>(rows.front().size());
    std::vector<Entry<value_type>> e;
    for (std::int64_t i = 0; i < r; ++i) {
      if (static_cast<std::int64_t>(rows[i].size()) != c) throw std::invalid_argument("ragged dense matrix");
      for (std::int64_t j = 0; j < c; ++j) e.push_back({i, j, rows[i][j]});
    }
    return CooMatrix(r, c, std::move(e));
  }

  std::vector<std::vector<value_type>> to_dense() const {
    std::vector<std::vector<value_type>> d(rows_, std::vector<value_type>(cols_, S::zero()));
    for (const auto& e : entries_) d[e.i][e.j] = e.x;
    return d;
  }

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry<value_type>>& entries() const { return entries_; }

  value_type at(std::int64_t i, std::int64_t j) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{i, j}, [](const auto& e, const auto& key) {
      return e.i != key.first ? e.i < key.first : e.j < key.second;
    });
    if (it != entries_.end() && it->i == i && it->j == j) return it->x;
    return S::zero();
  }

  bool operator==(const CooMatrix&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<Entry<value_type>> entries_;
};

/// Entry of a block in block-local coordinates.
template <class V>
struct BlockEntry {
  std::int32_t r = 0;
  std::int32_t c = 0;
  V x{};
  bool operator==(const BlockEntry&) const = default;
};

/// A side x side submatrix stored as its nonzeros in row-major order. A
/// local index fits in the same word as the value, so a block costs one
/// word per nonzero.
template <class V>
struct Block {
  std::int32_t side = 0;
  std::vector<BlockEntry<V>> entries;

  std::size_t words() const { return entries.size(); }
  bool operator==(const Block&) const = default;
};

/// C += A * B on blocks of equal side. Returns the number of elementary
/// products performed.
template <class S>
std::size_t block_multiply_add(Block<typename S::value_type>& C, const Block<typename S::value_type>& A,
                               const Block<typename S::value_type>& B) {
  using V = typename S::value_type;
  const std::int32_t side = A.side;
  // Row starts of B for direct access to row k.
  std::vector<std::int32_t> brow(side + 1, 0);
  for (const auto& e : B.entries) ++brow[e.r + 1];
  for (std::int32_t k = 0; k < side; ++k) brow[k + 1] += brow[k];

  std::vector<V> acc(static_cast<std::size_t>(side) * side, S::zero());
  std::vector<char> present(acc.size(), 0);
  for (const auto& e : C.entries) {
    const auto p = static_cast<std::size_t>(e.r) * side + e.c;
    acc[p] = e.x;
    present[p] = 1;
  }
  std::size_t products = 0;
  for (const auto& a : A.entries) {
    for (std::int32_t t = brow[a.c]; t < brow[a.c + 1]; ++t) {
      const auto& b = B.entries[t];
      const auto p = static_cast<std::size_t>(a.r) * side + b.c;
      const V prod = S::mul(a.x, b.x);
      acc[p] = present[p] ? S::add(acc[p], prod) : prod;
      present[p] = 1;
      ++products;
    }
  }
  C.side = side;
  C.entries.clear();
  for (std::int32_t r = 0; r < side; ++r) {
    for (std::int32_t c = 0; c < side; ++c) {
      const auto p = static_cast<std::size_t>(r) * side + c;
      if (present[p] && !S::is_zero(acc[p])) C.entries.push_back({r, c, acc[p]});
    }
  }
  return products;
}

/// Structural nonzeros of A * B for two blocks (values ignored).
template <class V>
std::size_t block_product_structure(const Block<V>& A, const Block<V>& B) {
  const std::int32_t side = A.side;
  std::vector<std::vector<std::int32_t>> brow(side);
  for (const auto& e : B.entries) brow[e.r].push_back(e.c);
  std::vector<char> occ(static_cast<std::size_t>(side) * side, 0);
  std::size_t count = 0;
  for (const auto& a : A.entries) {
    for (auto c : brow[a.c]) {
      auto& o = occ[static_cast<std::size_t>(a.r) * side + c];
      if (!o) {
        o = 1;
        ++count;
      }
    }
  }
  return count;
}

/// Side of the blocks used for local memory m: the largest s with s^2 <= m.
inline std::int64_t block_side(std::size_t m) {
  auto s = static_cast<std::int64_t>(std::sqrt(static_cast<double>(m)));
  while ((s + 1) * (s + 1) <= static_cast<std::int64_t>(m)) ++s;
  while (s > 1 && s * s > static_cast<std::int64_t>(m)) --s;
  return std::max<std::int64_t>(1, s);
}

/// Blocks per side: ceil(dim / side) rounded up to a power of two.
inline std::int64_t blocks_per_side(std::int64_t dim, std::int64_t side) {
  const std::int64_t need = std::max<std::int64_t>(1, (dim + side - 1) / side);
  std::int64_t q = 1;
  while (q < need) q *= 2;
  return q;
}

template <class S>
struct BlockGrid {
  using value_type = typename S::value_type;
  std::int64_t q = 1;     // blocks per side
  std::int64_t side = 1;  // block side
  std::int64_t rows = 0;  // original dimensions
  std::int64_t cols = 0;
  std::vector<Block<value_type>> blocks;  // row-major q x q

  const Block<value_type>& at(std::int64_t i, std::int64_t j) const { return blocks[i * q + j]; }
  Block<value_type>& at(std::int64_t i, std::int64_t j) { return blocks[i * q + j]; }
  std::int64_t padded_dim() const { return q * side; }

  CooMatrix<S> reassemble() const {
    std::vector<Entry<value_type>> e;
    for (std::int64_t bi = 0; bi < q; ++bi) {
      for (std::int64_t bj = 0; bj < q; ++bj) {
        for (const auto& x : at(bi, bj).entries) {
          const std::int64_t i = bi * side + x.r;
          const std::int64_t j = bj * side + x.c;
          if (i < rows && j < cols) e.push_back({i, j, x.x});
        }
      }
    }
    return CooMatrix<S>(rows, cols, std::move(e));
  }
};

/// Splits X into side x side blocks with side = floor(sqrt(m)); the grid is
/// padded with zero blocks to a power-of-two number of blocks per side.
template <class S>
BlockGrid<S> partition_blocks(const CooMatrix<S>& X, std::size_t m) {
  if (m < 1) throw std::invalid_argument("partition_blocks requires m >= 1");
  BlockGrid<S> g;
  g.side = block_side(m);
  g.rows = X.rows();
  g.cols = X.cols();
  g.q = blocks_per_side(std::max(X.rows(), X.cols()), g.side);
  g.blocks.assign(static_cast<std::size_t>(g.q * g.q), Block<typename S::value_type>{});
  for (auto& b : g.blocks) b.side = static_cast<std::int32_t>(g.side);
  for (const auto& e : X.entries()) {
    g.at(e.i / g.side, e.j / g.side)
        .entries.push_back({static_cast<std::int32_t>(e.i % g.side), static_cast<std::int32_t>(e.j % g.side), e.x});
  }
  return g;
}

/// Member h of group l for output block (i, j): the product A_{i,h} B_{h,j}.
inline std::int64_t group_member(std::int64_t i, std::int64_t j, std::int64_t l, std::int64_t q) {
  return ((i + j + l) % q + q) % q;
}

}  // namespace mrmx
