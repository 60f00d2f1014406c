// Template definitions for Engine; included from engine.hpp.
#pragma once

#include <algorithm>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mrmx {

namespace detail {

inline std::uint64_t key_stream(std::uint64_t seed, std::size_t round, const Key& k) {
  std::uint64_t s = mix_stream(seed, round);
  for (auto c : k.v) s = mix_stream(s, static_cast<std::uint64_t>(c));
  return s;
}

}  // namespace detail

template <class V>
void Engine<V>::violation(RoundRecord& rec, bool local, std::string msg) {
  rec.violations.push_back(msg);
  if (mode_ != Mode::Strict) return;
  const std::size_t r = stats_.rounds() + 1;
  stats_.push(rec);
  if (local) throw LocalBudgetExceeded(msg, r);
  throw AggregateBudgetExceeded(msg, r);
}

template <class V>
void Engine<V>::load(PairSet<V> input) {
  const std::size_t w = total_words(input) + resident_words_;
  if (static_cast<double>(w) > budget_.agg_cap()) {
    std::ostringstream os;
    os << "input:" << w << ">" << budget_.agg_cap();
    stats_.add_input_violation(os.str());
    if (mode_ == Mode::Strict) throw AggregateBudgetExceeded(os.str(), 0);
  }
  pending_ = std::move(input);
}

template <class V>
void Engine<V>::run(const Round<V>& round) {
  PairSet<V> current = std::move(pending_);
  pending_.clear();
  if (round.rekey) {
    for (auto& p : current) p.key = round.rekey(p);
  }
  std::stable_sort(current.begin(), current.end(),
                   [](const Pair<V>& a, const Pair<V>& b) { return a.key < b.key; });

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (i == 0 || current[i - 1].key != current[i].key) starts.push_back(i);
  }
  starts.push_back(current.size());
  const std::size_t groups = starts.size() - 1;
  const std::size_t round_index = stats_.rounds();

  std::vector<ReducerContext<V>> contexts;
  contexts.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const Key& k = current[starts[g]].key;
    contexts.emplace_back(k, std::span<const Pair<V>>(current.data() + starts[g], starts[g + 1] - starts[g]),
                          CounterRng(detail::key_stream(seed_, round_index, k)));
  }

  const auto body = [&](std::size_t g) { round.reduce(contexts[g]); };
  if (exec_ == Execution::Parallel && groups > 1) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(groups); ++g) body(static_cast<std::size_t>(g));
  } else {
    for (std::size_t g = 0; g < groups; ++g) body(g);
  }

  RoundRecord rec;
  rec.label = round.label;
  rec.groups = groups;
  std::size_t worst_group = 0;
  rec.agg_words = resident_words_;
  rec.max_local_words = resident_local_;
  for (std::size_t g = 0; g < groups; ++g) {
    auto& ctx = contexts[g];
    const std::size_t local = total_words(ctx.input()) + ctx.working();
    rec.agg_words += local;
    if (local > rec.max_local_words) {
      rec.max_local_words = local;
      worst_group = g;
    }
    rec.products += ctx.products();
    rec.output_words += total_words(ctx.out());
  }
  cumulative_output_ += rec.output_words;

  for (std::size_t g = 0; g < groups; ++g) {
    auto& ctx = contexts[g];
    for (auto& p : ctx.next()) pending_.push_back(std::move(p));
    for (auto& p : ctx.out()) output_.push_back(std::move(p));
  }

  if (static_cast<double>(rec.max_local_words) > budget_.local_cap()) {
    std::ostringstream os;
    os << "local:" << rec.max_local_words << ">" << budget_.local_cap() << "@group" << worst_group;
    violation(rec, true, os.str());
  }
  if (static_cast<double>(rec.agg_words) > budget_.agg_cap()) {
    std::ostringstream os;
    os << "aggregate:" << rec.agg_words << ">" << budget_.agg_cap();
    violation(rec, false, os.str());
  }
  if (static_cast<double>(cumulative_output_) > budget_.agg_cap()) {
    std::ostringstream os;
    os << "output:" << cumulative_output_ << ">" << budget_.agg_cap();
    violation(rec, false, os.str());
  }
  stats_.push(std::move(rec));
}

}  // namespace mrmx
