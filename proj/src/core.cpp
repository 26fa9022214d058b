#include "convgame/core.hpp"

#include <numeric>
#include <string>

#include "convgame/errors.hpp"

namespace convgame {

void PayoffRule::validate() const {
  if (!(reward > 0 && penalty < 0)) {
    throw ConfigError("payoffs must satisfy reward > 0 > penalty (got reward=" +
                      std::to_string(reward) + ", penalty=" + std::to_string(penalty) + ")");
  }
}

Outcome apply_payoff(NameId a, NameId b, const NamePool& pool, const PayoffRule& rule) {
  if (!pool.contains(a) || !pool.contains(b)) {
    throw PoolMembershipError("apply_payoff: name outside pool");
  }
  const bool success = a == b;
  return {success, rule.payoff(success)};
}

Outcome apply_payoff(std::string_view a, std::string_view b, const NamePool& pool,
                     const PayoffRule& rule) {
  return apply_payoff(pool.require(a), pool.require(b), pool, rule);
}

InteractionRecord InteractionRecord::make(std::uint64_t round_index, NameId own, NameId partner,
                                          const PayoffRule& rule) {
  const bool success = own == partner;
  return {round_index, own, partner, success, rule.payoff(success)};
}

MemoryWindow::MemoryWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("memory capacity must be positive");
}

int MemoryWindow::score() const {
  return std::accumulate(records_.begin(), records_.end(), 0,
                         [](int acc, const InteractionRecord& r) { return acc + r.payoff; });
}

std::uint64_t MemoryWindow::next_round_index() const {
  return records_.empty() ? 1 : records_.back().round_index + 1;
}

void MemoryWindow::append(const InteractionRecord& r) {
  if (!records_.empty() && r.round_index <= records_.back().round_index) {
    throw OrderingError("round index " + std::to_string(r.round_index) +
                        " does not follow newest stored index " +
                        std::to_string(records_.back().round_index));
  }
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(r);
}

MemoryWindow memory_append(MemoryWindow w, const InteractionRecord& r) {
  w.append(r);
  return w;
}

std::vector<NameId> presentation_order(const NamePool& pool, Rng& rng) {
  auto order = pool.ids();
  shuffle_in_place(order, rng);
  return order;
}

}  // namespace convgame
