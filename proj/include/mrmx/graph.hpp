// Simple undirected graphs and their text format: "d k" then k lines "u v".
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mrmx {

struct Graph {
  std::int64_t d = 0;                                        // vertices
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;  // u < v, sorted

  Graph() = default;
  /// Normalizes each edge to u < v and sorts; rejects loops, duplicates and
  /// endpoints outside [0, d).
  Graph(std::int64_t n, std::vector<std::pair<std::int64_t, std::int64_t>> e) : d(n) {
    if (n < 0) throw std::invalid_argument("negative vertex count");
    for (auto& [u, v] : e) {
      if (u < 0 || v < 0 || u >= n || v >= n) throw std::invalid_argument("edge endpoint out of range");
      if (u == v) throw std::invalid_argument("self-loop");
      if (u > v) std::swap(u, v);
    }
    std::sort(e.begin(), e.end());
    if (std::adjacent_find(e.begin(), e.end()) != e.end()) throw std::invalid_argument("duplicate edge");
    edges = std::move(e);
  }

  std::size_t k() const { return edges.size(); }
  bool operator==(const Graph&) const = default;
};

inline Graph read_graph(std::istream& is) {
  std::int64_t d = 0, k = 0;
  if (!(is >> d >> k) || d < 0 || k < 0) throw std::invalid_argument("bad graph header");
  std::vector<std::pair<std::int64_t, std::int64_t>> e;
  for (std::int64_t t = 0; t < k; ++t) {
    std::int64_t u = 0, v = 0;
    if (!(is >> u >> v)) throw std::invalid_argument("truncated edge list");
    e.push_back({u, v});
  }
  return Graph(d, std::move(e));
}

/// True when `m` covers every vertex exactly once with edges of g.
using Matching = std::vector<std::pair<std::int64_t, std::int64_t>>;

inline bool is_perfect_matching(const Graph& g, const Matching& m) {
  if (static_cast<std::int64_t>(m.size()) * 2 != g.d) return false;
  const std::set<std::pair<std::int64_t, std::int64_t>> es(g.edges.begin(), g.edges.end());
  std::vector<int> deg(static_cast<std::size_t>(g.d), 0);
  for (auto [u, v] : m) {
    if (u > v) std::swap(u, v);
    if (!es.count({u, v})) return false;
    if (++deg[u] > 1 || ++deg[v] > 1) return false;
  }
  return true;
}

}  // namespace mrmx
