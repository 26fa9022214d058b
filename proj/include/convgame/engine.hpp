#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convgame/agents.hpp"
#include "convgame/config.hpp"
#include "convgame/core.hpp"
#include "convgame/random.hpp"

namespace convgame {

class LlmSession;
class Transport;

/// One micro-interaction. In speaker-hearer mode agents[0] is the speaker
/// and both name slots hold the uttered word.
struct RunEvent {
  std::uint64_t trial_id = 0;
  std::uint64_t index = 0;  // 1-based, contiguous within a trial
  std::array<std::uint32_t, 2> agents{};
  std::array<NameId, 2> names{};
  bool success = false;
  std::array<int, 2> payoffs{};
  /// Windowed scores right after the interaction (0 in speaker-hearer mode).
  std::array<int, 2> scores{};
  std::array<std::vector<NameId>, 2> orders;
  std::array<std::vector<std::string>, 2> raw;
  std::array<int, 2> retries{};
  std::array<bool, 2> fallback{};

  friend bool operator==(const RunEvent&, const RunEvent&) = default;
};

/// Per population round (N interactions): success rate and name production
/// counts, two productions per interaction.
class MetricSeries {
 public:
  MetricSeries() = default;
  MetricSeries(std::size_t population, std::size_t num_names);

  void record(const RunEvent& e);

  std::size_t population() const { return population_; }
  std::size_t num_names() const { return num_names_; }
  /// Rounds seen so far; the last one may be partial.
  std::size_t rounds() const { return interactions_.size(); }
  std::size_t complete_rounds() const;

  std::size_t interactions_in(std::size_t round) const { return interactions_[round]; }
  std::size_t successes_in(std::size_t round) const { return successes_[round]; }
  double success_rate(std::size_t round) const;
  std::vector<double> success_rates() const;

  const std::vector<std::uint32_t>& name_counts(std::size_t round) const { return counts_[round]; }
  double production_probability(NameId name, std::size_t round) const;
  std::vector<double> production_series(NameId name) const;

  friend bool operator==(const MetricSeries&, const MetricSeries&) = default;

 private:
  std::size_t population_ = 0;
  std::size_t num_names_ = 0;
  std::vector<std::uint32_t> interactions_;
  std::vector<std::uint32_t> successes_;
  std::vector<std::vector<std::uint32_t>> counts_;
};

struct FlipCriterion {
  double threshold = 0.95;
  std::size_t window = 72;  // interactions
  /// Only the first horizon_rounds * N interactions are examined; 0 = all.
  std::size_t horizon_rounds = 30;

  /// 95% of the trailing 3N interactions, 30 population rounds.
  static FlipCriterion standard(std::size_t population) {
    return {0.95, 3 * population, 30};
  }
};

struct FlipResult {
  bool flipped = false;
  std::optional<std::uint64_t> interaction;  // index of the first qualifying event

  friend bool operator==(const FlipResult&, const FlipResult&) = default;
};

/// Sliding-window flip check, fed one event at a time.
class FlipTracker {
 public:
  FlipTracker(double threshold, std::size_t window, NameId target, std::size_t num_names);

  /// True when the window ending at `e` succeeds often enough and target is
  /// the unique modal production.
  bool push(const RunEvent& e);

 private:
  double threshold_;
  std::size_t window_;
  NameId target_;
  std::deque<std::pair<bool, std::array<NameId, 2>>> entries_;
  std::size_t successes_ = 0;
  std::vector<std::size_t> counts_;
};

/// Throws InsufficientDataError when the events do not fill one window.
FlipResult detect_flip(std::span<const RunEvent> events, const FlipCriterion& criterion,
                       NameId target, std::size_t num_names, std::size_t population);

/// Two distinct agents, uniform over ordered pairs, so the unordered pair is
/// uniform and the first element (the speaker) is a fair coin between them.
std::pair<std::size_t, std::size_t> select_pair(std::size_t population, Rng& rng);

/// Mutable population driven by step(). Construction applies the configured
/// initialization (empty, or full consensus with M pre-filled successes).
class Population {
 public:
  explicit Population(const TrialConfig& config, LlmSession* session = nullptr);

  /// One micro-interaction. Policy errors propagate and leave the
  /// population unusable for further steps.
  RunEvent step();

  std::uint64_t interactions() const { return counter_; }
  const std::vector<MemoryWindow>& memories() const { return memories_; }
  const std::vector<Lexicon>& lexicons() const { return lexicons_; }
  const TrialConfig& config() const { return config_; }

 private:
  RunEvent step_simultaneous(std::size_t a, std::size_t b);
  RunEvent step_speaker_hearer(std::size_t speaker, std::size_t hearer);

  TrialConfig config_;
  std::vector<std::unique_ptr<Policy>> policies_;
  std::vector<MemoryWindow> memories_;
  std::vector<Lexicon> lexicons_;
  std::vector<std::uint64_t> local_rounds_;
  std::vector<Rng> agent_rngs_;
  Rng trial_rng_;
  std::uint64_t counter_ = 0;
};

enum class TrialStatus { completed, converged, flipped, aborted };
const char* to_string(TrialStatus status);

struct RunLog {
  TrialConfig config;
  std::vector<RunEvent> events;
  MetricSeries metrics;
  TrialStatus status = TrialStatus::completed;
  std::string abort_reason;
  /// Set when the final sustain window is all successes on a single name.
  std::optional<NameId> consensus;
  /// Index of the last failed interaction, 0 if none.
  std::uint64_t last_failure = 0;
  std::optional<FlipResult> flip;
  std::vector<MemoryWindow> final_memories;
  std::vector<Lexicon> final_lexicons;
  double fallback_rate = 0.0;
};

/// The single name produced in the last complete round, provided the last
/// max(sustain_rounds, 1) complete rounds were all successes.
std::optional<NameId> consensus_of(const MetricSeries& metrics, std::size_t sustain_rounds);

/// Runs horizon_rounds * N interactions or until a stop condition fires.
/// A policy error (e.g. transport failure) marks the trial aborted and keeps
/// the partial log.
RunLog run_trial(const TrialConfig& config, LlmSession* session = nullptr);

/// Trial `i` of an ensemble uses trial_index = base.trial_index + i.
using TransportFactory = std::function<std::unique_ptr<Transport>(std::uint64_t trial_index)>;

struct EnsembleOptions {
  std::size_t threads = 0;  // 0 = hardware concurrency
  bool keep_events = true;
  TransportFactory transports;  // required for llm policies
};

std::vector<RunLog> run_ensemble(const TrialConfig& base, std::size_t runs,
                                 const EnsembleOptions& options = {});

/// Rebuilds every agent's memory window from the initial state and the
/// event stream.
std::vector<MemoryWindow> replay_memories(const TrialConfig& config,
                                          std::span<const RunEvent> events);

/// Memory windows at the start of a trial.
std::vector<MemoryWindow> initial_memories(const TrialConfig& config);

}  // namespace convgame
