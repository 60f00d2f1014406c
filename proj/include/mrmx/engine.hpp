// Round-structured MapReduce simulator under local/aggregate memory budgets.
//
// A program is a sequence of rounds. Each round optionally re-keys every pair
// (the map step), groups the pairs by key and applies one reducer per group.
// Reducers emit pairs to the next round and/or to the final output. Memory is
// accounted in words: a pair costs 1 word for its key plus word_size(value).
#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "mrmx/rng.hpp"

namespace mrmx {

/// Opaque comparable key. Unused trailing components stay zero.
struct Key {
  std::array<std::int64_t, 4> v{};
  auto operator<=>(const Key&) const = default;
};

inline Key make_key(std::int64_t a, std::int64_t b = 0, std::int64_t c = 0,
                    std::int64_t d = 0) {
  return Key{{a, b, c, d}};
}

/// Key-only payload.
struct Unit {
  bool operator==(const Unit&) const = default;
};
inline std::size_t word_size(const Unit&) { return 0; }

template <class T>
  requires std::is_arithmetic_v<T>
std::size_t word_size(const T&) {
  return 1;
}

template <class V>
struct Pair {
  Key key;
  V value;
};

template <class V>
using PairSet = std::vector<Pair<V>>;

template <class V>
std::size_t pair_words(const Pair<V>& p) {
  return 1 + word_size(p.value);
}

template <class V>
std::size_t total_words(std::span<const Pair<V>> pairs) {
  std::size_t w = 0;
  for (const auto& p : pairs) w += pair_words(p);
  return w;
}

template <class V>
std::size_t total_words(const PairSet<V>& pairs) {
  return total_words(std::span<const Pair<V>>(pairs));
}

struct MemoryBudget {
  std::size_t m = 1;  // local words
  std::size_t M = 1;  // aggregate words
  double c_local = 4.0;
  double c_agg = 4.0;

  MemoryBudget() = default;
  MemoryBudget(std::size_t local, std::size_t aggregate, double cl = 4.0, double ca = 4.0);

  double local_cap() const { return c_local * static_cast<double>(m); }
  double agg_cap() const { return c_agg * static_cast<double>(M); }
  /// Same slack constants, different sizes.
  MemoryBudget with(std::size_t local, std::size_t aggregate) const;
};

class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, std::size_t round) : std::runtime_error(what), round_(round) {}
  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

class LocalBudgetExceeded : public BudgetError {
 public:
  using BudgetError::BudgetError;
};

class AggregateBudgetExceeded : public BudgetError {
 public:
  using BudgetError::BudgetError;
};

enum class Mode { Strict, Audit };
enum class Execution { Serial, Parallel };

struct RoundRecord {
  std::string label;
  std::size_t groups = 0;
  std::size_t agg_words = 0;
  std::size_t max_local_words = 0;
  std::size_t output_words = 0;  // words sent to O_r in this round
  std::size_t products = 0;
  std::vector<std::string> violations;

  bool operator==(const RoundRecord&) const = default;
};

/// Per-run accounting. Composite algorithms concatenate sub-runs with
/// append() or overlay concurrently running sub-programs with parallel().
class RoundStats {
 public:
  std::size_t rounds() const { return records_.size(); }
  std::size_t max_local_words() const;
  std::size_t max_agg_words() const;
  std::size_t output_words() const;
  std::vector<std::size_t> elementary_products_per_round() const;
  std::size_t max_products_per_round() const;
  std::size_t rounds_labeled(std::string_view label) const;

  const std::vector<RoundRecord>& records() const { return records_; }
  const std::vector<std::string>& input_violations() const { return input_violations_; }
  std::vector<std::string> all_violations() const;
  bool clean() const { return all_violations().empty(); }

  void push(RoundRecord r) { records_.push_back(std::move(r)); }
  void add_input_violation(std::string v) { input_violations_.push_back(std::move(v)); }

  /// Sequential composition: other's rounds run after ours.
  void append(const RoundStats& other);
  /// Sub-programs with disjoint key spaces executed in lock-step: round i
  /// of the result sums the word and product counts of every round i.
  static RoundStats parallel(const std::vector<RoundStats>& parts);

  /// One line per round: round=<r> agg_words=<w> max_local=<w> products=<p> violations=<list>
  void write_audit_log(std::ostream& os) const;

  bool operator==(const RoundStats&) const = default;

 private:
  std::vector<RoundRecord> records_;
  std::vector<std::string> input_violations_;
};

std::size_t count_elementary_products_max(const RoundStats& stats);
std::vector<std::size_t> count_elementary_products(const RoundStats& stats);

template <class V>
class ReducerContext {
 public:
  ReducerContext(const Key& key, std::span<const Pair<V>> input, CounterRng rng)
      : key_(key), input_(input), rng_(rng) {}

  const Key& key() const { return key_; }
  std::span<const Pair<V>> input() const { return input_; }
  CounterRng& rng() { return rng_; }

  void emit(const Key& k, V v) { next_.push_back({k, std::move(v)}); }
  void output(const Key& k, V v) { out_.push_back({k, std::move(v)}); }
  /// Working space beyond the input, in words.
  void declare_working(std::size_t words) { working_ += words; }
  /// Instrumentation hook: semiring multiplications performed.
  void count_products(std::size_t n) { products_ += n; }

  PairSet<V>& next() { return next_; }
  PairSet<V>& out() { return out_; }
  std::size_t working() const { return working_; }
  std::size_t products() const { return products_; }

 private:
  Key key_;
  std::span<const Pair<V>> input_;
  CounterRng rng_;
  PairSet<V> next_;
  PairSet<V> out_;
  std::size_t working_ = 0;
  std::size_t products_ = 0;
};

template <class V>
struct Round {
  std::string label;
  std::function<void(ReducerContext<V>&)> reduce;
  /// Optional map step applied to every pair before grouping.
  std::function<Key(const Pair<V>&)> rekey;
};

/// Identity reducer: forwards every pair to the next round.
template <class V>
void forward_all(ReducerContext<V>& ctx) {
  for (const auto& p : ctx.input()) ctx.emit(p.key, p.value);
}

/// Stateful simulator for one run. Not copyable; movable between threads.
template <class V>
class Engine {
 public:
  Engine(MemoryBudget budget, std::uint64_t seed, Mode mode = Mode::Strict,
         Execution exec = Execution::Parallel)
      : budget_(budget), seed_(seed), mode_(mode), exec_(exec) {}

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;
  Engine(Engine&&) noexcept = default;
  Engine& operator=(Engine&&) noexcept = default;

  void load(PairSet<V> input);
  void run(const Round<V>& round);

  const PairSet<V>& pending() const { return pending_; }
  bool idle() const { return pending_.empty(); }
  const PairSet<V>& output() const { return output_; }
  PairSet<V> take_output() { return std::move(output_); }
  const RoundStats& stats() const { return stats_; }
  const MemoryBudget& budget() const { return budget_; }
  std::uint64_t seed() const { return seed_; }

  /// Words held by pairs of a concurrently running program (or parked data)
  /// that pass through every round of this one. Charged to each round's
  /// aggregate; `largest_group` is charged to the local maximum.
  void set_resident(std::size_t words, std::size_t largest_group = 0) {
    resident_words_ = words;
    resident_local_ = largest_group;
  }

 private:
  void violation(RoundRecord& rec, bool local, std::string msg);

  MemoryBudget budget_;
  std::uint64_t seed_;
  Mode mode_;
  Execution exec_;
  PairSet<V> pending_;
  PairSet<V> output_;
  std::size_t cumulative_output_ = 0;
  std::size_t resident_words_ = 0;
  std::size_t resident_local_ = 0;
  RoundStats stats_;
};

/// Either a fixed list of rounds or an adaptive driver that sees the pending
/// multiset and returns the next round (nullopt ends the program).
template <class V>
struct Program {
  std::function<std::optional<Round<V>>(const PairSet<V>& pending, std::size_t round)> next;

  static Program fixed(std::vector<Round<V>> rounds) {
    auto shared = std::make_shared<std::vector<Round<V>>>(std::move(rounds));
    return Program{[shared](const PairSet<V>&, std::size_t r) -> std::optional<Round<V>> {
      if (r < shared->size()) return (*shared)[r];
      return std::nullopt;
    }};
  }
};

template <class V>
struct RunResult {
  PairSet<V> output;
  RoundStats stats;
};

/// Runs rounds until the program returns nullopt. Pairs still pending at the
/// end are returned as `pending` so composite algorithms can hand them to the
/// next sub-program.
template <class V>
struct RunState {
  PairSet<V> output;
  PairSet<V> pending;
  RoundStats stats;
};

template <class V>
RunState<V> drive(Engine<V>& engine, const Program<V>& program) {
  for (std::size_t r = 0;; ++r) {
    // A round over an empty multiset would do nothing.
    if (r > 0 && engine.idle()) break;
    auto round = program.next ? program.next(engine.pending(), r) : std::nullopt;
    if (!round) break;
    engine.run(*round);
  }
  PairSet<V> pending = engine.pending();
  return {engine.take_output(), std::move(pending), engine.stats()};
}

template <class V>
RunResult<V> run_program(PairSet<V> input, const Program<V>& program, const MemoryBudget& budget,
                         std::uint64_t seed, Mode mode = Mode::Strict,
                         Execution exec = Execution::Parallel) {
  Engine<V> engine(budget, seed, mode, exec);
  engine.load(std::move(input));
  auto st = drive(engine, program);
  return {std::move(st.output), std::move(st.stats)};
}

}  // namespace mrmx

#include "mrmx/engine_impl.hpp"
