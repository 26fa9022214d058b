#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convgame/config.hpp"
#include "convgame/core.hpp"
#include "convgame/names.hpp"
#include "convgame/random.hpp"

namespace convgame {

class LlmSession;

/// Word inventory of a minimal naming-game agent. Kept sorted so draws are
/// reproducible.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::initializer_list<NameId> words);

  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }
  const std::vector<NameId>& words() const { return words_; }
  bool contains(NameId w) const;

  void insert(NameId w);
  /// Reduce to exactly {w}.
  void collapse(NameId w);

  friend bool operator==(const Lexicon&, const Lexicon&) = default;

 private:
  std::vector<NameId> words_;
};

struct BiasParameter {
  NameId designated{};
  double b = 0.5;
};

/// Speaker choice in the minimal naming game: a uniform draw from the
/// lexicon, or from the pool when the lexicon is empty. With a bias, the
/// designated name is produced with probability b whenever it is among at
/// least two options, and the remaining mass is spread uniformly.
NameId choose_minimal(const Lexicon& lexicon, const NamePool& pool,
                      const std::optional<BiasParameter>& bias, Rng& rng);

struct MinimalUpdate {
  Lexicon speaker;
  Lexicon hearer;
  bool success = false;
};

/// Success collapses both lexicons to {uttered}; failure teaches the hearer
/// the word and leaves the speaker unchanged.
MinimalUpdate update_minimal(Lexicon speaker, Lexicon hearer, NameId uttered);

/// In-place variant used by the engine. A frozen hearer (committed agent)
/// never changes its lexicon.
bool apply_minimal_update(Lexicon& speaker, Lexicon& hearer, NameId uttered,
                          bool speaker_frozen = false, bool hearer_frozen = false);

/// Depth-1 keep/switch rule. After a success the agent repeats its name with
/// probability p_keep and otherwise produces a different name; after a
/// failure it adopts the partner's name with probability p_switch.
NameId choose_surrogate(const MemoryWindow& memory, std::span<const NameId> order,
                        const SurrogateParameters& params, const NamePool& pool, Rng& rng);

constexpr NameId choose_committed(NameId committed) { return committed; }

struct DecisionContext {
  const NamePool& pool;
  const MemoryWindow& memory;
  const Lexicon& lexicon;
  std::span<const NameId> presented;
};

struct Decision {
  NameId name{};
  int retries = 0;
  bool fallback = false;
  std::vector<std::string> raw;
  /// Set when the policy re-shuffled the presentation (LLM retries).
  std::optional<std::vector<NameId>> final_order;

  static Decision of(NameId name) {
    Decision d;
    d.name = name;
    return d;
  }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  virtual Decision decide(const DecisionContext& ctx, Rng& rng) = 0;
  /// Committed agents ignore feedback entirely.
  virtual bool frozen() const { return false; }
};

class MinimalPolicy final : public Policy {
 public:
  explicit MinimalPolicy(std::optional<BiasParameter> bias = std::nullopt) : bias_(bias) {}
  PolicyKind kind() const override {
    return bias_ ? PolicyKind::biased_minimal : PolicyKind::minimal;
  }
  Decision decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  std::optional<BiasParameter> bias_;
};

class SurrogatePolicy final : public Policy {
 public:
  explicit SurrogatePolicy(SurrogateParameters params) : params_(std::move(params)) {}
  PolicyKind kind() const override { return PolicyKind::surrogate; }
  Decision decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  SurrogateParameters params_;
};

class CommittedPolicy final : public Policy {
 public:
  explicit CommittedPolicy(NameId name) : name_(name) {}
  PolicyKind kind() const override { return PolicyKind::committed; }
  Decision decide(const DecisionContext&, Rng&) override {
    return Decision::of(choose_committed(name_));
  }
  bool frozen() const override { return true; }
  NameId name() const { return name_; }

 private:
  NameId name_;
};

/// Delegates to the gateway: prompt rendering, exchange, parsing, retries.
class LlmPolicy final : public Policy {
 public:
  explicit LlmPolicy(LlmSession& session) : session_(&session) {}
  PolicyKind kind() const override { return PolicyKind::llm; }
  Decision decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  LlmSession* session_;
};

/// Throws ConfigError for an llm spec without a session.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const NamePool& pool,
                                    LlmSession* session = nullptr);

}  // namespace convgame
