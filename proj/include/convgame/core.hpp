#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "convgame/names.hpp"
#include "convgame/random.hpp"

namespace convgame {

struct PayoffRule {
  int reward = 100;
  int penalty = -50;

  /// Throws ConfigError unless reward > 0 > penalty.
  void validate() const;

  int payoff(bool success) const { return success ? reward : penalty; }

  friend bool operator==(const PayoffRule&, const PayoffRule&) = default;
};

struct Outcome {
  bool success = false;
  int payoff = 0;  // identical for both players
};

Outcome apply_payoff(NameId a, NameId b, const NamePool& pool, const PayoffRule& rule);
Outcome apply_payoff(std::string_view a, std::string_view b, const NamePool& pool,
                     const PayoffRule& rule);

/// One interaction as seen by one agent. round_index counts that agent's
/// own interactions, starting at 1.
struct InteractionRecord {
  std::uint64_t round_index = 0;
  NameId own{};
  NameId partner{};
  bool success = false;
  int payoff = 0;

  static InteractionRecord make(std::uint64_t round_index, NameId own, NameId partner,
                                const PayoffRule& rule);

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Bounded FIFO of the most recent interactions, oldest first.
class MemoryWindow {
 public:
  explicit MemoryWindow(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::deque<InteractionRecord>& records() const { return records_; }
  const InteractionRecord& newest() const { return records_.back(); }

  /// Sum of payoffs over the stored records.
  int score() const;

  /// Round number the agent is about to play: one past the newest stored
  /// index, or 1 for an empty window.
  std::uint64_t next_round_index() const;

  /// Evicts the oldest record when full. Throws OrderingError unless
  /// r.round_index exceeds the newest stored index.
  void append(const InteractionRecord& r);

  friend bool operator==(const MemoryWindow&, const MemoryWindow&) = default;

 private:
  std::size_t capacity_;
  std::deque<InteractionRecord> records_;
};

/// Value form of MemoryWindow::append.
[[nodiscard]] MemoryWindow memory_append(MemoryWindow w, const InteractionRecord& r);

/// Uniformly random permutation of the pool, as shown to one agent for one
/// decision.
std::vector<NameId> presentation_order(const NamePool& pool, Rng& rng);

}  // namespace convgame
