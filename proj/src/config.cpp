#include "convgame/config.hpp"

#include <string>

#include "convgame/errors.hpp"

namespace convgame {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

bool speaker_hearer_kind(PolicyKind k) {
  return k == PolicyKind::minimal || k == PolicyKind::biased_minimal ||
         k == PolicyKind::committed;
}

bool simultaneous_kind(PolicyKind k) {
  return k == PolicyKind::surrogate || k == PolicyKind::committed || k == PolicyKind::llm;
}

void validate_policy(const PolicySpec& p, const TrialConfig& c, const std::string& where) {
  const bool ok = c.mode == InteractionMode::speaker_hearer ? speaker_hearer_kind(p.kind)
                                                            : simultaneous_kind(p.kind);
  require(ok, where + ": policy '" + to_string(p.kind) + "' cannot run in " +
                  to_string(c.mode) + " mode");
  switch (p.kind) {
    case PolicyKind::biased_minimal:
      require(is_probability(p.bias), where + ": bias must lie in [0,1]");
      require(c.pool.find(p.designated).has_value(),
              where + ": designated name '" + p.designated + "' not in pool");
      break;
    case PolicyKind::surrogate: {
      const auto& s = p.surrogate;
      require(is_probability(s.p_keep_after_success) && is_probability(s.p_switch_after_failure),
              where + ": surrogate probabilities must lie in [0,1]");
      if (!s.first_round.empty()) {
        require(s.first_round.size() == c.pool.size(),
                where + ": first_round weights must match the pool size");
        double total = 0.0;
        for (double w : s.first_round) {
          require(w >= 0.0, where + ": first_round weights must be non-negative");
          total += w;
        }
        require(total > 0.0, where + ": first_round weights must have positive sum");
      }
      break;
    }
    case PolicyKind::committed:
      require(c.pool.find(p.committed_name).has_value(),
              where + ": committed name '" + p.committed_name + "' not in pool");
      break;
    case PolicyKind::llm:
      c.llm.validate();
      break;
    case PolicyKind::minimal:
      break;
  }
}

}  // namespace

const char* to_string(InteractionMode mode) {
  return mode == InteractionMode::simultaneous ? "simultaneous" : "speaker_hearer";
}

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::minimal: return "minimal";
    case PolicyKind::biased_minimal: return "biased_minimal";
    case PolicyKind::surrogate: return "surrogate";
    case PolicyKind::committed: return "committed";
    case PolicyKind::llm: return "llm";
  }
  return "?";
}

InteractionMode parse_interaction_mode(std::string_view text) {
  if (text == "simultaneous" || text == "simultaneous-coordination") {
    return InteractionMode::simultaneous;
  }
  if (text == "speaker_hearer" || text == "speaker-hearer") return InteractionMode::speaker_hearer;
  throw ConfigError("unknown interaction mode: " + std::string(text));
}

PolicyKind parse_policy_kind(std::string_view text) {
  for (auto k : {PolicyKind::minimal, PolicyKind::biased_minimal, PolicyKind::surrogate,
                 PolicyKind::committed, PolicyKind::llm}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown policy kind: " + std::string(text));
}

void LlmParams::validate() const {
  require(temperature > 0.0, "llm: temperature must be positive");
  require(top_k >= 1, "llm: top_k must be at least 1");
  require(max_tokens >= 1, "llm: max_tokens must be at least 1");
  require(parse_retries >= 0 && transport_retries >= 0, "llm: retry budgets must be >= 0");
  require(requests_per_minute >= 0.0, "llm: requests_per_minute must be >= 0");
  require(prompt_total_rounds >= 1, "llm: prompt_total_rounds must be >= 1");
}

void TrialConfig::validate() const {
  require(schema_version == kSchemaVersion,
          "unsupported schema_version " + std::to_string(schema_version));
  require(population_size >= 2, "population_size must be at least 2");
  require(pool.size() >= 2, "name pool must contain at least two names");
  require(memory_length >= 1, "memory_length must be at least 1");
  require(horizon_rounds >= 1, "horizon_rounds must be at least 1");
  payoffs.validate();

  if (committed) {
    require(committed->count <= population_size,
            "committed count " + std::to_string(committed->count) + " exceeds population size " +
                std::to_string(population_size));
    require(pool.find(committed->name).has_value(),
            "committed name '" + committed->name + "' not in pool");
    require(pool.find(committed->majority).has_value(),
            "majority name '" + committed->majority + "' not in pool");
    require(!initial_consensus || *initial_consensus == committed->majority,
            "initial_consensus conflicts with committed.majority");
  }
  if (initial_consensus) {
    require(pool.find(*initial_consensus).has_value(),
            "initial consensus name '" + *initial_consensus + "' not in pool");
  }
  if (stop.flip_target) {
    require(pool.find(*stop.flip_target).has_value(),
            "flip target '" + *stop.flip_target + "' not in pool");
  }
  require(stop.flip_threshold > 0.0 && stop.flip_threshold <= 1.0,
          "flip threshold must lie in (0,1]");

  validate_policy(policy, *this, "policy");
  for (const auto& [agent, spec] : agent_policies) {
    require(agent < population_size, "agent policy override for unknown agent " +
                                         std::to_string(agent));
    validate_policy(spec, *this, "agent " + std::to_string(agent));
  }
}

PolicySpec TrialConfig::policy_for(std::size_t agent) const {
  if (committed && is_committed(agent)) {
    PolicySpec spec;
    spec.kind = PolicyKind::committed;
    spec.committed_name = committed->name;
    return spec;
  }
  if (auto it = agent_policies.find(agent); it != agent_policies.end()) return it->second;
  return policy;
}

std::optional<std::string> TrialConfig::consensus_name() const {
  if (committed) return committed->majority;
  return initial_consensus;
}

}  // namespace convgame
