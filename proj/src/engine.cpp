#include "mrmx/engine.hpp"

#include <algorithm>
#include <ostream>

namespace mrmx {

MemoryBudget::MemoryBudget(std::size_t local, std::size_t aggregate, double cl, double ca)
    : m(local), M(aggregate), c_local(cl), c_agg(ca) {
  if (m < 1 || M < m) throw std::invalid_argument("memory budget requires 1 <= m <= M");
  if (c_local <= 0.0 || c_agg <= 0.0) throw std::invalid_argument("slack constants must be positive");
}

MemoryBudget MemoryBudget::with(std::size_t local, std::size_t aggregate) const {
  return MemoryBudget(local, aggregate, c_local, c_agg);
}

std::size_t RoundStats::max_local_words() const {
  std::size_t w = 0;
  for (const auto& r : records_) w = std::max(w, r.max_local_words);
  return w;
}

std::size_t RoundStats::max_agg_words() const {
  std::size_t w = 0;
  for (const auto& r : records_) w = std::max(w, r.agg_words);
  return w;
}

std::size_t RoundStats::output_words() const {
  std::size_t w = 0;
  for (const auto& r : records_) w += r.output_words;
  return w;
}

std::vector<std::size_t> RoundStats::elementary_products_per_round() const {
  std::vector<std::size_t> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.products);
  return out;
}

std::size_t RoundStats::max_products_per_round() const {
  std::size_t p = 0;
  for (const auto& r : records_) p = std::max(p, r.products);
  return p;
}

std::size_t RoundStats::rounds_labeled(std::string_view label) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const RoundRecord& r) { return r.label == label; }));
}

std::vector<std::string> RoundStats::all_violations() const {
  std::vector<std::string> v = input_violations_;
  for (const auto& r : records_) v.insert(v.end(), r.violations.begin(), r.violations.end());
  return v;
}

void RoundStats::append(const RoundStats& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
  input_violations_.insert(input_violations_.end(), other.input_violations_.begin(),
                           other.input_violations_.end());
}

RoundStats RoundStats::parallel(const std::vector<RoundStats>& parts) {
  RoundStats out;
  std::size_t rounds = 0;
  for (const auto& p : parts) rounds = std::max(rounds, p.rounds());
  out.records_.resize(rounds);
  for (const auto& p : parts) {
    out.input_violations_.insert(out.input_violations_.end(), p.input_violations_.begin(),
                                 p.input_violations_.end());
    for (std::size_t i = 0; i < p.rounds(); ++i) {
      const auto& src = p.records_[i];
      auto& dst = out.records_[i];
      if (dst.label.empty()) dst.label = src.label;
      dst.groups += src.groups;
      dst.agg_words += src.agg_words;
      dst.max_local_words = std::max(dst.max_local_words, src.max_local_words);
      dst.output_words += src.output_words;
      dst.products += src.products;
      dst.violations.insert(dst.violations.end(), src.violations.begin(), src.violations.end());
    }
  }
  return out;
}

void RoundStats::write_audit_log(std::ostream& os) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    os << "round=" << (i + 1) << " agg_words=" << r.agg_words << " max_local=" << r.max_local_words
       << " products=" << r.products << " violations=";
    for (std::size_t k = 0; k < r.violations.size(); ++k) os << (k ? "," : "") << r.violations[k];
    os << '\n';
  }
}

std::vector<std::size_t> count_elementary_products(const RoundStats& stats) {
  return stats.elementary_products_per_round();
}

std::size_t count_elementary_products_max(const RoundStats& stats) {
  return stats.max_products_per_round();
}

}  // namespace mrmx
