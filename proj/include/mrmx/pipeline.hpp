// Sequential composition of MR sub-programs sharing one budget and one
// RoundStats ledger. Pairs flow from one sub-program to the next exactly as
// they would flow between two consecutive rounds.
#pragma once

#include <optional>

#include "mrmx/engine.hpp"

namespace mrmx {

struct RunConfig {
  MemoryBudget budget;
  std::uint64_t seed = 0;
  Mode mode = Mode::Strict;
  Execution exec = Execution::Parallel;
};

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(cfg) {}

  template <class V>
  RunState<V> run(PairSet<V> input, const Program<V>& program, std::size_t resident = 0,
                  std::size_t resident_local = 0, std::optional<MemoryBudget> budget = std::nullopt) {
    Engine<V> engine(budget.value_or(cfg_.budget), next_seed(), cfg_.mode, cfg_.exec);
    engine.set_resident(resident, resident_local);
    try {
      engine.load(std::move(input));
      auto st = drive(engine, program);
      stats_.append(st.stats);
      return st;
    } catch (...) {
      stats_.append(engine.stats());
      throw;
    }
  }

  RoundStats& stats() { return stats_; }
  const RoundStats& stats() const { return stats_; }
  const RunConfig& config() const { return cfg_; }
  const MemoryBudget& budget() const { return cfg_.budget; }

  std::uint64_t next_seed() { return mix_stream(cfg_.seed, ++counter_); }

 private:
  RunConfig cfg_;
  RoundStats stats_;
  std::uint64_t counter_ = 0;
};

}  // namespace mrmx
