// Bottom-t distinct-elements sketch with Delta independent repetitions.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mrmx/rng.hpp"

namespace mrmx {

/// Hash modulus 2^61 - 1. Domains up to 2^20 satisfy n^3 <= p.
inline constexpr std::uint64_t kHashPrime = (std::uint64_t{1} << 61) - 1;
inline constexpr std::uint64_t kMaxSketchDomain = std::uint64_t{1} << 20;

inline std::uint64_t mulmod_p(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 x = static_cast<unsigned __int128>(a) * b;
  std::uint64_t r = static_cast<std::uint64_t>(x & kHashPrime) + static_cast<std::uint64_t>(x >> 61);
  if (r >= kHashPrime) r -= kHashPrime;
  return r;
}

/// x -> (a x + b) mod p with a in [1, p), b in [0, p).
struct PairwiseHash {
  std::uint64_t a = 1;
  std::uint64_t b = 0;

  std::uint64_t operator()(std::uint64_t x) const {
    std::uint64_t r = mulmod_p(a, x % kHashPrime) + b;
    if (r >= kHashPrime) r -= kHashPrime;
    return r;
  }
  static PairwiseHash draw(CounterRng& rng) {
    return {1 + rng.uniform(0, kHashPrime - 2), rng.uniform(0, kHashPrime - 1)};
  }
  bool operator==(const PairwiseHash&) const = default;
};

class HashMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptySketch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct SketchParams {
  std::size_t t = 16;     // values kept per list
  std::size_t delta = 3;  // number of lists (odd)
  std::size_t words() const { return t * delta; }
};

/// t = ceil(4 / eps^2), Delta = ceil(log2(1 / delta)) rounded up to odd.
inline SketchParams sketch_params(double eps, double delta) {
  if (!(eps > 0) || !(delta > 0 && delta < 1)) throw std::invalid_argument("sketch needs eps > 0 and 0 < delta < 1");
  SketchParams p;
  p.t = static_cast<std::size_t>(std::ceil(4.0 / (eps * eps) - 1e-9));
  p.delta = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log2(1.0 / delta) - 1e-9)));
  if (p.delta % 2 == 0) ++p.delta;
  return p;
}

class NnzSketch {
 public:
  NnzSketch() = default;

  /// Draws Delta hash functions from `seed`; items must lie in [0, domain).
  NnzSketch(SketchParams prm, std::uint64_t domain, std::uint64_t seed) : t_(prm.t), domain_(domain) {
    if (prm.t == 0 || prm.delta == 0) throw std::invalid_argument("sketch needs t >= 1 and Delta >= 1");
    if (domain == 0 || domain > kMaxSketchDomain) throw std::invalid_argument("sketch domain must lie in [1, 2^20]");
    CounterRng rng(mix_stream(seed, 0x5e7c));
    hashes_.reserve(prm.delta);
    for (std::size_t w = 0; w < prm.delta; ++w) hashes_.push_back(PairwiseHash::draw(rng));
    lists_.assign(prm.delta, {});
  }

  /// Empty sketch sharing the hash family of `other`.
  static NnzSketch like(const NnzSketch& other) {
    NnzSketch s = other;
    for (auto& l : s.lists_) l.clear();
    return s;
  }

  void insert(std::uint64_t item) {
    if (item >= domain_) throw std::out_of_range("sketch item outside domain");
    for (std::size_t w = 0; w < hashes_.size(); ++w) add_value(lists_[w], hashes_[w](item));
  }

  void merge(const NnzSketch& o) {
    if (!same_family(o)) throw HashMismatch("sketches use different hash families");
    for (std::size_t w = 0; w < lists_.size(); ++w) {
      std::vector<std::uint64_t> u;
      u.reserve(lists_[w].size() + o.lists_[w].size());
      std::set_union(lists_[w].begin(), lists_[w].end(), o.lists_[w].begin(), o.lists_[w].end(), std::back_inserter(u));
      if (u.size() > t_) u.resize(t_);
      lists_[w] = std::move(u);
    }
  }

  bool same_family(const NnzSketch& o) const {
    return t_ == o.t_ && domain_ == o.domain_ && hashes_ == o.hashes_;
  }

  bool empty() const { return lists_.empty() || lists_.front().empty(); }

  /// True while fewer than t distinct items were seen.
  bool exact() const {
    return std::all_of(lists_.begin(), lists_.end(), [&](const auto& l) { return l.size() < t_; });
  }

  /// Exact count in the under-full regime, otherwise the lower median of
  /// t p / v_w over the lists.
  double estimate() const {
    if (empty()) throw EmptySketch("estimate of an empty sketch");
    if (exact()) return static_cast<double>(lists_.front().size());
    std::vector<double> e;
    e.reserve(lists_.size());
    for (const auto& l : lists_) {
      const auto kth = static_cast<double>(std::max<std::uint64_t>(1, l.back()));
      e.push_back(static_cast<double>(t_) * static_cast<double>(kHashPrime) / kth);
    }
    std::sort(e.begin(), e.end());
    return e[(e.size() - 1) / 2];
  }

  /// Stored hash values; the hash family is shared program state.
  std::size_t words() const {
    std::size_t w = 0;
    for (const auto& l : lists_) w += l.size();
    return std::max<std::size_t>(1, w);
  }

  std::size_t t() const { return t_; }
  std::size_t delta() const { return lists_.size(); }
  std::uint64_t domain() const { return domain_; }
  const std::vector<PairwiseHash>& hashes() const { return hashes_; }
  const std::vector<std::vector<std::uint64_t>>& lists() const { return lists_; }

  /// "t Delta p" then one line per list: "a b v_1 ... v_k".
  std::string serialize() const {
    std::ostringstream os;
    os << t_ << ' ' << lists_.size() << ' ' << kHashPrime << '\n';
    for (std::size_t w = 0; w < lists_.size(); ++w) {
      os << hashes_[w].a << ' ' << hashes_[w].b;
      for (auto v : lists_[w]) os << ' ' << v;
      os << '\n';
    }
    return os.str();
  }

  static NnzSketch parse(std::string_view text, std::uint64_t domain = kMaxSketchDomain) {
    std::istringstream is{std::string(text)};
    NnzSketch s;
    std::size_t delta = 0;
    std::uint64_t p = 0;
    if (!(is >> s.t_ >> delta >> p)) throw std::invalid_argument("bad sketch header");
    if (p != kHashPrime) throw HashMismatch("sketch uses a different modulus");
    s.domain_ = domain;
    std::string line;
    std::getline(is, line);
    for (std::size_t w = 0; w < delta; ++w) {
      if (!std::getline(is, line)) throw std::invalid_argument("truncated sketch");
      std::istringstream ls(line);
      PairwiseHash h;
      if (!(ls >> h.a >> h.b)) throw std::invalid_argument("bad sketch list");
      std::vector<std::uint64_t> l;
      for (std::uint64_t v; ls >> v;) l.push_back(v);
      if (l.size() > s.t_ || !std::is_sorted(l.begin(), l.end()) ||
          std::adjacent_find(l.begin(), l.end()) != l.end())
        throw std::invalid_argument("sketch list must be sorted, distinct and at most t long");
      s.hashes_.push_back(h);
      s.lists_.push_back(std::move(l));
    }
    return s;
  }

  bool operator==(const NnzSketch&) const = default;

 private:
  void add_value(std::vector<std::uint64_t>& l, std::uint64_t v) const {
    if (l.size() == t_ && v >= l.back()) return;
    auto it = std::lower_bound(l.begin(), l.end(), v);
    if (it != l.end() && *it == v) return;
    l.insert(it, v);
    if (l.size() > t_) l.pop_back();
  }

  std::size_t t_ = 0;
  std::uint64_t domain_ = 0;
  std::vector<PairwiseHash> hashes_;
  std::vector<std::vector<std::uint64_t>> lists_;
};

}  // namespace mrmx
