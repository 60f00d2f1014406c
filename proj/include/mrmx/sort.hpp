// Distribution sort as an MR program.
//
// Items live in chunks keyed (depth, bucket path, chunk). Each splitting
// round, every chunk of a bucket holds the same random sample of that bucket
// (broadcast by the routers of the previous level), uses the sample elements
// as splitters and routes its items to random chunks of the sub-buckets,
// sampling them for the next level on the way. A bucket estimated to fit in
// one chunk becomes a leaf, is sorted locally and parked. A scan over the
// leaf sizes, in bucket-path order, gives every leaf its global offset.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include "mrmx/primitives.hpp"

namespace mrmx {

template <class T>
struct SortMsg {
  enum class Kind : std::uint8_t { Item, Sample, Park, Count, Offset, Result };
  Kind kind = Kind::Item;
  std::int64_t num = 0;               // Count/Offset payload
  std::vector<std::int64_t> indices;  // original indices
  std::vector<T> values;
};

template <class T>
std::size_t word_size(const SortMsg<T>& m) {
  const bool scalar = m.kind == SortMsg<T>::Kind::Count || m.kind == SortMsg<T>::Kind::Offset;
  return (scalar ? 1 : 0) + m.indices.size() + m.values.size();
}

/// Local slack the sort needs: bucket sizes are estimated from random
/// samples, and the largest of many buckets overshoots its estimate by a
/// logarithmic factor. With c_local below this the sort stays correct but
/// may exceed the local cap.
inline constexpr double kSortLocalConstant = 16.0;

/// Chunk keys are (depth, bucket path, chunk, estimated bucket size).
struct SortParams {
  std::size_t chunk = 1;    // target items per router chunk
  std::size_t sample = 1;   // target sample size per bucket
  std::size_t leaf = 1;     // buckets estimated at most this large are sorted locally
  std::size_t gap = 4;      // samples per splitter gap
  std::size_t max_fan = 3;  // sub-buckets per bucket never exceed this
  std::int64_t max_depth = 0;  // split levels; past this a bucket is sorted whole
};

inline SortParams sort_params(const MemoryBudget& b, std::size_t n) {
  SortParams p;
  p.chunk = std::max<std::size_t>(1, b.m / 2);
  p.sample = std::max<std::size_t>(1, b.m / 2);
  p.leaf = std::max<std::size_t>(1, b.m / 4);
  p.gap = 1;
  p.max_fan = std::max<std::size_t>(3, p.sample / p.gap + 1);
  // Bucket paths run up to max_fan^max_depth and index the leaf-size scan,
  // whose tree keys multiply positions by the level count: stay below
  // min(n^2, 2^56).
  const double n2 = std::max(4.0, static_cast<double>(n) * static_cast<double>(n));
  const double limit = std::min(n2, std::ldexp(1.0, 56));
  double reach = 1;
  while (reach * static_cast<double>(p.max_fan) <= limit) {
    reach *= static_cast<double>(p.max_fan);
    ++p.max_depth;
  }
  p.max_depth = std::max<std::int64_t>(1, p.max_depth);
  return p;
}

namespace detail {

constexpr std::int64_t kLeafChunk = -1;
constexpr std::int64_t kParkChunk = -2;
constexpr std::int64_t kCountChunk = -3;

template <class T>
bool item_less(const std::pair<T, std::int64_t>& a, const std::pair<T, std::int64_t>& b) {
  if (a.first < b.first) return true;
  if (b.first < a.first) return false;
  return a.second < b.second;
}

template <class T>
SortMsg<T> single(typename SortMsg<T>::Kind kind, std::int64_t idx, const T& value) {
  SortMsg<T> m;
  m.kind = kind;
  m.indices.push_back(idx);
  m.values.push_back(value);
  return m;
}

inline std::int64_t bucket_chunks(std::int64_t est, const SortParams& prm) {
  const auto c = static_cast<std::int64_t>(prm.chunk);
  return std::max<std::int64_t>(1, (est + c - 1) / c);
}

inline double sample_rate(std::int64_t est, const SortParams& prm) {
  return std::min(1.0, static_cast<double>(prm.sample) / static_cast<double>(std::max<std::int64_t>(1, est)));
}

/// Routes one item into bucket (depth, path) of estimated size est.
template <class T>
void route_item(ReducerContext<SortMsg<T>>& ctx, const SortParams& prm, std::int64_t depth, std::int64_t path,
                std::int64_t est, std::int64_t idx, const T& value) {
  using Msg = SortMsg<T>;
  if (est <= static_cast<std::int64_t>(prm.leaf)) {
    ctx.emit(make_key(depth, path, kLeafChunk), single<T>(Msg::Kind::Item, idx, value));
    return;
  }
  const std::int64_t chunks = bucket_chunks(est, prm);
  const auto c = static_cast<std::int64_t>(ctx.rng().uniform(0, static_cast<std::uint64_t>(chunks - 1)));
  ctx.emit(make_key(depth, path, c, est), single<T>(Msg::Kind::Item, idx, value));
  if (ctx.rng().unit() < sample_rate(est, prm)) {
    for (std::int64_t t = 0; t < chunks; ++t)
      ctx.emit(make_key(depth, path, t, est), single<T>(Msg::Kind::Sample, idx, value));
  }
}

template <class T>
void sort_leaf(ReducerContext<SortMsg<T>>& ctx) {
  std::vector<std::pair<T, std::int64_t>> items;
  for (const auto& p : ctx.input()) items.emplace_back(p.value.values.front(), p.value.indices.front());
  std::sort(items.begin(), items.end(), item_less<T>);
  SortMsg<T> park;
  park.kind = SortMsg<T>::Kind::Park;
  for (auto& [v, i] : items) {
    park.indices.push_back(i);
    park.values.push_back(std::move(v));
  }
  SortMsg<T> count;
  count.kind = SortMsg<T>::Kind::Count;
  count.num = static_cast<std::int64_t>(items.size());
  const Key& k = ctx.key();
  ctx.emit(make_key(k.v[0], k.v[1], kParkChunk), std::move(park));
  ctx.emit(make_key(k.v[0], k.v[1], kCountChunk), std::move(count));
}

template <class T>
void sort_split(ReducerContext<SortMsg<T>>& ctx, const SortParams& prm) {
  using Msg = SortMsg<T>;
  const Key& k = ctx.key();
  if (k.v[2] == kLeafChunk) {
    sort_leaf(ctx);
    return;
  }
  if (k.v[2] < 0) {
    forward_all(ctx);
    return;
  }
  std::vector<std::pair<T, std::int64_t>> items;
  std::vector<std::pair<T, std::int64_t>> sample;
  for (const auto& p : ctx.input()) {
    auto& dst = p.value.kind == Msg::Kind::Item ? items : sample;
    dst.emplace_back(p.value.values.front(), p.value.indices.front());
  }
  const std::int64_t depth = k.v[0];
  const std::int64_t path = k.v[1];
  if (items.empty()) return;
  const auto width = static_cast<std::int64_t>(prm.max_fan);
  if (sample.empty()) {
    // No sample reached this bucket, so it is probably smaller than
    // estimated: redistribute it in place with half the estimate. Depth and
    // path are kept so the path encoding only grows on real splits.
    for (const auto& [v, i] : items) route_item(ctx, prm, depth, path, k.v[3] / 2, i, v);
    return;
  }
  if (depth + 1 > prm.max_depth) {
    // Out of split levels: sort the bucket in one reducer. Correct, but the
    // local cap is then only met when the bucket really is small.
    for (const auto& [v, i] : items) route_item(ctx, prm, depth, path, 0, i, v);
    return;
  }
  std::sort(sample.begin(), sample.end(), item_less<T>);
  // Every gap-th sample element becomes a splitter; the samples falling in a
  // gap estimate the size of the sub-bucket.
  std::size_t gap = std::min(prm.gap, std::max<std::size_t>(1, sample.size() / 2));
  gap = std::max(gap, (sample.size() + prm.max_fan - 2) / (prm.max_fan - 1));
  std::vector<std::pair<T, std::int64_t>> splitters;
  for (std::size_t t = gap - 1; t < sample.size(); t += gap) splitters.push_back(sample[t]);
  const double rate = sample_rate(k.v[3], prm);
  std::vector<std::int64_t> gap_count(splitters.size() + 1, 0);
  for (const auto& s : sample)
    ++gap_count[std::upper_bound(splitters.begin(), splitters.end(), s, item_less<T>) - splitters.begin()];
  std::vector<std::int64_t> child_est(gap_count.size());
  for (std::size_t b = 0; b < gap_count.size(); ++b) {
    child_est[b] = rate >= 1.0 ? gap_count[b]
                               : static_cast<std::int64_t>(std::ceil(static_cast<double>(gap_count[b] + 1) / rate));
  }
  for (const auto& it : items) {
    const auto beta = static_cast<std::size_t>(
        std::upper_bound(splitters.begin(), splitters.end(), it, item_less<T>) - splitters.begin());
    route_item(ctx, prm, depth + 1, path * width + static_cast<std::int64_t>(beta), child_est[beta], it.second,
               it.first);
  }
}

}  // namespace detail

/// Output: items re-keyed by rank, index = rank. Ties broken by original index.
template <class T>
PrimitiveResult<T> mr_sort(const std::vector<IndexedItem<T>>& items, const MemoryBudget& budget,
                           std::uint64_t seed = 0, Mode mode = Mode::Strict, Execution exec = Execution::Parallel) {
  using Msg = SortMsg<T>;
  PrimitiveResult<T> res;
  const auto n = static_cast<std::int64_t>(items.size());
  if (n == 0) return res;
  Pipeline pipe(RunConfig{budget, seed, mode, exec});
  const SortParams prm = sort_params(budget, items.size());

  PairSet<Msg> input;
  input.reserve(items.size());
  for (const auto& it : items) {
    Msg m;
    m.indices.push_back(it.index);
    m.values.push_back(it.value);
    input.push_back({make_key(it.index), std::move(m)});
  }

  // Fits one reducer: a single local sort.
  if (static_cast<double>(3 * items.size()) <= budget.local_cap()) {
    Round<Msg> one{"sort-local", [](ReducerContext<Msg>& ctx) {
                     std::vector<std::pair<T, std::int64_t>> v;
                     for (const auto& p : ctx.input()) v.emplace_back(p.value.values.front(), p.value.indices.front());
                     std::sort(v.begin(), v.end(), detail::item_less<T>);
                     for (std::size_t r = 0; r < v.size(); ++r) {
                       Msg out;
                       out.kind = Msg::Kind::Result;
                       out.indices.push_back(static_cast<std::int64_t>(r));
                       out.values.push_back(v[r].first);
                       ctx.output(make_key(static_cast<std::int64_t>(r)), std::move(out));
                     }
                   },
                   [](const Pair<Msg>&) { return make_key(0); }};
    auto st = pipe.run(std::move(input), Program<Msg>::fixed({one}));
    res.items.resize(items.size());
    for (const auto& p : st.output) res.items[p.value.indices.front()] = {p.value.indices.front(), p.value.values.front()};
    res.stats = pipe.stats();
    return res;
  }

  const auto chunk = static_cast<std::int64_t>(prm.chunk);
  Round<Msg> sample_round{"sort-sample",
                          [=](ReducerContext<Msg>& ctx) {
                            for (const auto& p : ctx.input())
                              detail::route_item(ctx, prm, 0, 0, n, p.value.indices.front(), p.value.values.front());
                          },
                          [=](const Pair<Msg>& p) { return make_key(-1, p.value.indices.front() / chunk); }};

  Program<Msg> split{[=](const PairSet<Msg>& pending, std::size_t r) -> std::optional<Round<Msg>> {
    if (r == 0) return sample_round;
    const bool active = std::any_of(pending.begin(), pending.end(),
                                    [](const Pair<Msg>& p) { return p.key.v[2] >= detail::kLeafChunk; });
    if (!active) return std::nullopt;
    return Round<Msg>{"sort-split", [prm](ReducerContext<Msg>& ctx) { detail::sort_split<T>(ctx, prm); }, {}};
  }};
  auto split_state = pipe.run(std::move(input), split);

  // Parked leaves wait while the leaf sizes are scanned in bucket order.
  std::int64_t depth = 0;
  PairSet<Msg> parks;
  PairSet<ScanMsg<std::int64_t>> counts;
  for (const auto& p : split_state.pending) depth = std::max(depth, p.key.v[0]);
  const auto width = static_cast<std::int64_t>(prm.max_fan);
  for (auto& p : split_state.pending) {
    if (p.key.v[2] == detail::kParkChunk) {
      parks.push_back(std::move(p));
    } else {
      const std::int64_t pos = p.key.v[1] * ipow(width, static_cast<std::size_t>(depth - p.key.v[0]));
      auto item = scan_item<std::int64_t>(0, pos, p.value.num);
      item.value.digits = {p.key.v[0], p.key.v[1]};
      counts.push_back(std::move(item));
    }
  }
  // Keep the leaf identity alongside the scan position.
  std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> leaf_of_pos;
  for (const auto& c : counts) leaf_of_pos.emplace_back(c.value.pos, c.value.digits[0], c.value.digits[1]);
  for (auto& c : counts) c.value.digits.clear();
  std::sort(leaf_of_pos.begin(), leaf_of_pos.end());

  std::size_t park_words = total_words(parks);
  std::size_t park_local = 0;
  for (const auto& p : parks) park_local = std::max(park_local, pair_words(p));

  ScanOptions<std::int64_t> opt;
  opt.op = [](const std::int64_t& a, const std::int64_t& b) { return a + b; };
  opt.range = ipow(width, static_cast<std::size_t>(depth));
  opt.fan_in = scan_fan_in(budget);
  auto scanned = pipe.run(std::move(counts), scan_program<std::int64_t>(opt), park_words, park_local);

  for (const auto& r : scanned.pending) {
    const auto probe = std::make_tuple(r.value.pos, std::int64_t{-1}, std::int64_t{-1});
    auto it = std::lower_bound(leaf_of_pos.begin(), leaf_of_pos.end(), probe);
    Msg off;
    off.kind = Msg::Kind::Offset;
    off.num = r.value.vals.size() > 1 ? r.value.vals[1] : 0;
    parks.push_back({make_key(std::get<1>(*it), std::get<2>(*it), detail::kParkChunk), std::move(off)});
  }
  Round<Msg> emit_round{"sort-emit", [](ReducerContext<Msg>& ctx) {
                          const Msg* park = nullptr;
                          std::int64_t base = 0;
                          for (const auto& p : ctx.input()) {
                            if (p.value.kind == Msg::Kind::Park) park = &p.value;
                            if (p.value.kind == Msg::Kind::Offset) base = p.value.num;
                          }
                          if (park == nullptr) return;
                          for (std::size_t i = 0; i < park->values.size(); ++i) {
                            Msg out;
                            out.kind = Msg::Kind::Result;
                            const std::int64_t rank = base + static_cast<std::int64_t>(i);
                            out.indices.push_back(rank);
                            out.values.push_back(park->values[i]);
                            ctx.output(make_key(rank), std::move(out));
                          }
                        },
                        {}};
  auto done = pipe.run(std::move(parks), Program<Msg>::fixed({emit_round}));
  res.items.resize(items.size());
  for (const auto& p : done.output) {
    const auto rank = static_cast<std::size_t>(p.value.indices.front());
    res.items[rank] = {p.value.indices.front(), p.value.values.front()};
  }
  res.stats = pipe.stats();
  return res;
}

/// Rounds bound checked by tests: 2*ceil(log_m n) + 3.
inline std::size_t log_rounds_bound(std::size_t n, std::size_t m) {
  if (n <= 1) return 3;
  const double lm = std::log(static_cast<double>(n)) / std::log(static_cast<double>(std::max<std::size_t>(2, m)));
  return 2 * static_cast<std::size_t>(std::ceil(lm - 1e-12)) + 3;
}

}  // namespace mrmx
