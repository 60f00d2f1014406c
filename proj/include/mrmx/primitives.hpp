// Prefix, segmented reduction and sorting as MR programs.
//
// Scans run on an f-ary tree over the position range of each segment. Only
// nodes with two or more present children park state for the down-sweep;
// single-child chains are skipped, so a segment with few items in a large
// range costs O(items) words at every level. Up-sweep
// rounds combine children left to right; down-sweep rounds push exclusive
// offsets back to the leaves. A scan over a range R takes 2*ceil(log_f R)-1
// rounds, a reduction ceil(log_f R).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "mrmx/engine.hpp"
#include "mrmx/pipeline.hpp"

namespace mrmx {

template <class T>
struct ScanMsg {
  enum class Kind : std::uint8_t { Item, Up, Park, Offset, Result };
  Kind kind = Kind::Item;
  std::int64_t seg = 0;
  std::int64_t pos = 0;
  std::vector<std::int64_t> digits;
  std::vector<T> vals;
};

/// Segment and position travel in the key. An Up pair carries one packed
/// child identity in `digits`; a Park pair one identity per child.
template <class T>
std::size_t word_size(const ScanMsg<T>& m) {
  return m.digits.size() + m.vals.size();
}

/// Fan-in used by scan trees for a given budget: every node's children and
/// the parked state must fit in the local cap.
inline std::size_t scan_fan_in(const MemoryBudget& b) {
  const auto cap = static_cast<std::size_t>(b.local_cap());
  return std::max<std::size_t>(2, std::min(cap / 3, cap > 3 ? (cap - 3) / 2 : 0));
}

/// Smallest h >= 1 with f^h >= range.
inline std::size_t tree_levels(std::int64_t range, std::size_t fan_in) {
  std::size_t h = 1;
  long double cover = static_cast<long double>(fan_in);
  while (cover < static_cast<long double>(range)) {
    cover *= static_cast<long double>(fan_in);
    ++h;
  }
  return h;
}

inline std::int64_t ipow(std::int64_t base, std::size_t e) {
  std::int64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

template <class T>
struct ScanOptions {
  std::function<T(const T&, const T&)> op;
  std::int64_t range = 1;  // positions lie in [0, range)
  std::size_t fan_in = 2;
  bool to_output = false;  // results go to O_r rather than to the next round
  bool reduce_only = false;
};

/// A scan item: segment id, position within the segment, value.
template <class T>
Pair<ScanMsg<T>> scan_item(std::int64_t seg, std::int64_t pos, T value) {
  ScanMsg<T> m;
  m.kind = ScanMsg<T>::Kind::Item;
  m.seg = seg;
  m.pos = pos;
  m.vals.push_back(std::move(value));
  return {make_key(seg, pos), std::move(m)};
}

namespace detail {

/// A tree child is either an item (level -1, id = position) or the parked
/// node (level, id) at the bottom of a chain of single-child nodes, which
/// are never materialized. Both fit one word.
inline std::int64_t pack_child(std::int64_t level, std::int64_t id, std::size_t levels) {
  return id * static_cast<std::int64_t>(levels + 1) + (level + 1);
}
inline std::pair<std::int64_t, std::int64_t> unpack_child(std::int64_t c, std::size_t levels) {
  const auto r = static_cast<std::int64_t>(levels + 1);
  return {c % r - 1, c / r};
}

/// Digit of a child below a node of the given level.
inline std::int64_t child_digit(std::int64_t child, std::size_t level, std::size_t levels, std::int64_t f) {
  auto [lvl, id] = unpack_child(child, levels);
  for (auto l = static_cast<std::int64_t>(level) - 1; l > lvl; --l) id /= f;
  return id % f;
}

template <class T>
void scan_distribute(ReducerContext<ScanMsg<T>>& ctx, const ScanOptions<T>& opt, std::int64_t seg,
                     std::size_t levels, const std::vector<std::int64_t>& children,
                     const std::vector<T>& prefixes, const std::optional<T>& base) {
  using Msg = ScanMsg<T>;
  for (std::size_t t = 0; t < children.size(); ++t) {
    std::optional<T> excl;
    if (t == 0) {
      excl = base;
    } else {
      excl = base ? opt.op(*base, prefixes[t - 1]) : prefixes[t - 1];
    }
    const auto [lvl, id] = unpack_child(children[t], levels);
    Msg out;
    out.seg = seg;
    out.pos = id;
    if (lvl < 0) {
      out.kind = Msg::Kind::Result;
      out.vals.push_back(base ? opt.op(*base, prefixes[t]) : prefixes[t]);
      if (excl) out.vals.push_back(*excl);
      const Key k = make_key(seg, id);
      if (opt.to_output) {
        ctx.output(k, std::move(out));
      } else {
        ctx.emit(k, std::move(out));
      }
    } else {
      out.kind = Msg::Kind::Offset;
      if (excl) out.vals.push_back(*excl);
      ctx.emit(make_key(seg, lvl, id, 1), std::move(out));
    }
  }
}

template <class T>
void scan_up(ReducerContext<ScanMsg<T>>& ctx, const ScanOptions<T>& opt, std::size_t level, std::size_t levels) {
  using Msg = ScanMsg<T>;
  const Key& k = ctx.key();
  const bool is_node = k.v[1] == static_cast<std::int64_t>(level) && k.v[3] == 0;
  if (!is_node) {
    forward_all(ctx);
    return;
  }
  const auto f = static_cast<std::int64_t>(opt.fan_in);
  const std::int64_t seg = k.v[0];
  const std::int64_t node = k.v[2];
  struct Child {
    std::int64_t digit;
    std::int64_t id;
    const T* val;
  };
  std::vector<Child> children;
  children.reserve(ctx.input().size());
  for (const auto& p : ctx.input()) {
    const std::int64_t id =
        p.value.kind == Msg::Kind::Item ? pack_child(-1, p.value.pos, levels) : p.value.digits.front();
    children.push_back({child_digit(id, level, levels, f), id, &p.value.vals.front()});
  }
  std::sort(children.begin(), children.end(), [](const auto& a, const auto& b) { return a.digit < b.digit; });
  std::vector<std::int64_t> ids;
  std::vector<T> prefixes;
  ids.reserve(children.size());
  prefixes.reserve(children.size());
  for (const auto& c : children) {
    ids.push_back(c.id);
    prefixes.push_back(prefixes.empty() ? *c.val : opt.op(prefixes.back(), *c.val));
  }
  const bool root = level + 1 == levels;
  if (root && opt.reduce_only) {
    Msg r;
    r.kind = Msg::Kind::Result;
    r.seg = seg;
    r.vals.push_back(prefixes.back());
    if (opt.to_output) {
      ctx.output(make_key(seg), std::move(r));
    } else {
      ctx.emit(make_key(seg), std::move(r));
    }
    return;
  }
  if (root) {
    scan_distribute<T>(ctx, opt, seg, levels, ids, prefixes, std::nullopt);
    return;
  }
  Msg up;
  up.kind = Msg::Kind::Up;
  up.seg = seg;
  up.vals.push_back(prefixes.back());
  if (ids.size() == 1 || opt.reduce_only) {
    // Nothing to remember on the way down: pass the chain bottom upward.
    up.digits.push_back(ids.size() == 1 ? ids.front() : pack_child(static_cast<std::int64_t>(level), node, levels));
  } else {
    up.digits.push_back(pack_child(static_cast<std::int64_t>(level), node, levels));
    Msg park;
    park.kind = Msg::Kind::Park;
    park.seg = seg;
    park.pos = node;
    park.digits = std::move(ids);
    park.vals = std::move(prefixes);
    ctx.emit(make_key(seg, static_cast<std::int64_t>(level), node, 1), std::move(park));
  }
  ctx.emit(make_key(seg, static_cast<std::int64_t>(level) + 1, node / f, 0), std::move(up));
}

template <class T>
void scan_down(ReducerContext<ScanMsg<T>>& ctx, const ScanOptions<T>& opt, std::size_t level, std::size_t levels) {
  using Msg = ScanMsg<T>;
  const Key& k = ctx.key();
  if (!(k.v[1] == static_cast<std::int64_t>(level) && k.v[3] == 1)) {
    forward_all(ctx);
    return;
  }
  const Msg* park = nullptr;
  std::optional<T> base;
  for (const auto& p : ctx.input()) {
    if (p.value.kind == Msg::Kind::Park) park = &p.value;
    if (p.value.kind == Msg::Kind::Offset && !p.value.vals.empty()) base = p.value.vals.front();
  }
  if (park == nullptr) return;
  scan_distribute<T>(ctx, opt, k.v[0], levels, park->digits, park->vals, base);
}

}  // namespace detail

/// Rounds of a segmented scan (or reduction) over `opt.range` positions.
/// Input pairs must be scan items; results are Result messages keyed by
/// (segment, position) carrying {inclusive, exclusive?} (or {total} keyed by
/// segment for reductions).
template <class T>
Program<ScanMsg<T>> scan_program(ScanOptions<T> opt) {
  const std::size_t levels = tree_levels(opt.range, opt.fan_in);
  const std::size_t total = opt.reduce_only ? levels : 2 * levels - 1;
  auto shared = std::make_shared<ScanOptions<T>>(std::move(opt));
  return Program<ScanMsg<T>>{[shared, levels, total](const PairSet<ScanMsg<T>>&,
                                                     std::size_t r) -> std::optional<Round<ScanMsg<T>>> {
    if (r >= total) return std::nullopt;
    Round<ScanMsg<T>> round;
    if (r < levels) {
      round.label = shared->reduce_only ? "reduce" : "scan-up";
      round.reduce = [shared, r, levels](ReducerContext<ScanMsg<T>>& ctx) {
        detail::scan_up<T>(ctx, *shared, r, levels);
      };
      if (r == 0) {
        const auto f = static_cast<std::int64_t>(shared->fan_in);
        round.rekey = [f](const Pair<ScanMsg<T>>& p) {
          if (p.value.kind != ScanMsg<T>::Kind::Item) return p.key;
          return make_key(p.value.seg, 0, p.value.pos / f, 0);
        };
      }
    } else {
      const std::size_t level = levels - 2 - (r - levels);
      round.label = "scan-down";
      round.reduce = [shared, level, levels](ReducerContext<ScanMsg<T>>& ctx) {
        detail::scan_down<T>(ctx, *shared, level, levels);
      };
    }
    return round;
  }};
}

/// Rounds a scan over `range` takes at fan-in f.
inline std::size_t scan_rounds(std::int64_t range, std::size_t fan_in) {
  return 2 * tree_levels(range, fan_in) - 1;
}

template <class T>
struct IndexedItem {
  std::int64_t index = 0;
  T value{};
  bool operator==(const IndexedItem&) const = default;
};

template <class T>
struct PrimitiveResult {
  std::vector<IndexedItem<T>> items;
  RoundStats stats;
};

/// b_i = a_0 (+) ... (+) a_i for items indexed 0..n-1.
template <class T>
PrimitiveResult<T> mr_prefix(const std::vector<IndexedItem<T>>& items, std::function<T(const T&, const T&)> op,
                             const MemoryBudget& budget, std::uint64_t seed = 0, Mode mode = Mode::Strict,
                             Execution exec = Execution::Parallel) {
  PrimitiveResult<T> res;
  if (items.empty()) return res;
  PairSet<ScanMsg<T>> input;
  input.reserve(items.size());
  for (const auto& it : items) input.push_back(scan_item<T>(0, it.index, it.value));
  ScanOptions<T> opt;
  opt.op = std::move(op);
  opt.range = static_cast<std::int64_t>(items.size());
  opt.fan_in = scan_fan_in(budget);
  opt.to_output = true;
  auto run = run_program(std::move(input), scan_program<T>(opt), budget, seed, mode, exec);
  res.items.resize(items.size());
  for (const auto& p : run.output) {
    res.items[static_cast<std::size_t>(p.value.pos)] = {p.value.pos, p.value.vals.front()};
  }
  res.stats = std::move(run.stats);
  return res;
}

}  // namespace mrmx
