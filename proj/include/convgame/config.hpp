#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convgame/core.hpp"
#include "convgame/names.hpp"

namespace convgame {

inline constexpr int kSchemaVersion = 1;

enum class InteractionMode { simultaneous, speaker_hearer };

enum class PolicyKind { minimal, biased_minimal, surrogate, committed, llm };

const char* to_string(InteractionMode mode);
const char* to_string(PolicyKind kind);
InteractionMode parse_interaction_mode(std::string_view text);
PolicyKind parse_policy_kind(std::string_view text);

/// Keep/switch behavior of the scripted stand-in for an LLM agent.
struct SurrogateParameters {
  double p_keep_after_success = 0.994;
  double p_switch_after_failure = 0.973;
  /// Weights over the pool in canonical order; empty means uniform.
  std::vector<double> first_round;

  friend bool operator==(const SurrogateParameters&, const SurrogateParameters&) = default;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::surrogate;
  /// biased_minimal: probability of the designated name whenever the agent
  /// has a choice that includes it.
  double bias = 0.5;
  std::string designated;
  SurrogateParameters surrogate;
  /// committed: the fixed name.
  std::string committed_name;

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

struct CommittedSpec {
  std::size_t count = 0;
  std::string name;      // the convention committed agents promote
  std::string majority;  // the consensus the rest of the population starts in

  friend bool operator==(const CommittedSpec&, const CommittedSpec&) = default;
};

struct LlmParams {
  double temperature = 0.5;
  int top_k = 10;
  int max_tokens = 6;
  std::string model;
  /// Base URL of an OpenAI-compatible server, e.g. "https://host:443".
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "CONVGAME_API_KEY";
  int parse_retries = 3;
  int transport_retries = 4;
  std::chrono::milliseconds backoff_base{500};
  double requests_per_minute = 0.0;  // 0 = unlimited
  /// The "for K rounds" figure quoted in the game description.
  int prompt_total_rounds = 100;

  void validate() const;

  friend bool operator==(const LlmParams&, const LlmParams&) = default;
};

struct StopConditions {
  /// Stop once the success rate has been 1.0 for this many consecutive
  /// population rounds. 0 disables.
  std::size_t sustain_rounds = 5;
  /// Stop at the first detected flip onto this name (committed-minority runs).
  std::optional<std::string> flip_target;
  double flip_threshold = 0.95;
  /// Trailing window for flips, in interactions. 0 means 3N.
  std::size_t flip_window = 0;

  friend bool operator==(const StopConditions&, const StopConditions&) = default;
};

struct TrialConfig {
  int schema_version = kSchemaVersion;
  std::size_t population_size = 24;
  NamePool pool{"Q", "M"};
  std::size_t memory_length = 5;
  PayoffRule payoffs;
  InteractionMode mode = InteractionMode::simultaneous;
  std::optional<CommittedSpec> committed;
  /// Full-consensus initialization without committed agents.
  std::optional<std::string> initial_consensus;
  std::size_t horizon_rounds = 30;
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
  PolicySpec policy;
  /// Per-agent overrides of the default policy, keyed by agent id.
  std::map<std::size_t, PolicySpec> agent_policies;
  StopConditions stop;
  LlmParams llm;
  /// Keep per-agent presentation orders in events.
  bool record_orders = true;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  std::size_t committed_count() const { return committed ? committed->count : 0; }
  bool is_committed(std::size_t agent) const {
    return agent >= population_size - committed_count();
  }
  /// Committed agents occupy the last c ids.
  PolicySpec policy_for(std::size_t agent) const;
  std::optional<std::string> consensus_name() const;
  std::size_t flip_window() const {
    return stop.flip_window ? stop.flip_window : 3 * population_size;
  }

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

}  // namespace convgame
