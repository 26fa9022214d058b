#include "convgame/agents.hpp"

#include <algorithm>

#include "convgame/errors.hpp"
#include "convgame/llm.hpp"

namespace convgame {

Lexicon::Lexicon(std::initializer_list<NameId> words) {
  for (NameId w : words) insert(w);
}

bool Lexicon::contains(NameId w) const {
  return std::binary_search(words_.begin(), words_.end(), w);
}

void Lexicon::insert(NameId w) {
  auto it = std::lower_bound(words_.begin(), words_.end(), w);
  if (it == words_.end() || *it != w) words_.insert(it, w);
}

void Lexicon::collapse(NameId w) {
  words_.assign(1, w);
}

NameId choose_minimal(const Lexicon& lexicon, const NamePool& pool,
                      const std::optional<BiasParameter>& bias, Rng& rng) {
  const std::vector<NameId> invention = lexicon.empty() ? pool.ids() : std::vector<NameId>{};
  const std::vector<NameId>& options = lexicon.empty() ? invention : lexicon.words();

  if (bias && options.size() >= 2 &&
      std::find(options.begin(), options.end(), bias->designated) != options.end()) {
    if (bernoulli(rng, bias->b)) return bias->designated;
    const std::size_t pick = uniform_index(rng, options.size() - 1);
    std::size_t seen = 0;
    for (NameId w : options) {
      if (w == bias->designated) continue;
      if (seen++ == pick) return w;
    }
  }
  return options[uniform_index(rng, options.size())];
}

bool apply_minimal_update(Lexicon& speaker, Lexicon& hearer, NameId uttered, bool speaker_frozen,
                          bool hearer_frozen) {
  if (hearer.contains(uttered)) {
    if (!speaker_frozen) speaker.collapse(uttered);
    if (!hearer_frozen) hearer.collapse(uttered);
    return true;
  }
  if (!hearer_frozen) hearer.insert(uttered);
  return false;
}

MinimalUpdate update_minimal(Lexicon speaker, Lexicon hearer, NameId uttered) {
  const bool success = apply_minimal_update(speaker, hearer, uttered);
  return {std::move(speaker), std::move(hearer), success};
}

NameId choose_surrogate(const MemoryWindow& memory, std::span<const NameId> /*order*/,
                        const SurrogateParameters& params, const NamePool& pool, Rng& rng) {
  if (memory.empty()) {
    if (params.first_round.empty()) return name_at(uniform_index(rng, pool.size()));
    return name_at(weighted_index(rng, params.first_round));
  }
  const InteractionRecord& last = memory.newest();
  if (last.success) {
    if (bernoulli(rng, params.p_keep_after_success)) return last.own;
    // Any other name, uniformly.
    std::size_t pick = uniform_index(rng, pool.size() - 1);
    if (pick >= index_of(last.own)) ++pick;
    return name_at(pick);
  }
  return bernoulli(rng, params.p_switch_after_failure) ? last.partner : last.own;
}

Decision MinimalPolicy::decide(const DecisionContext& ctx, Rng& rng) {
  return Decision::of(choose_minimal(ctx.lexicon, ctx.pool, bias_, rng));
}

Decision SurrogatePolicy::decide(const DecisionContext& ctx, Rng& rng) {
  return Decision::of(choose_surrogate(ctx.memory, ctx.presented, params_, ctx.pool, rng));
}

Decision LlmPolicy::decide(const DecisionContext& ctx, Rng& rng) {
  return choose_llm(*session_, ctx.memory, ctx.presented, rng);
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const NamePool& pool,
                                    LlmSession* session) {
  switch (spec.kind) {
    case PolicyKind::minimal:
      return std::make_unique<MinimalPolicy>();
    case PolicyKind::biased_minimal:
      return std::make_unique<MinimalPolicy>(BiasParameter{pool.require(spec.designated), spec.bias});
    case PolicyKind::surrogate:
      return std::make_unique<SurrogatePolicy>(spec.surrogate);
    case PolicyKind::committed:
      return std::make_unique<CommittedPolicy>(pool.require(spec.committed_name));
    case PolicyKind::llm:
      if (session == nullptr) throw ConfigError("llm policy requires a configured transport");
      return std::make_unique<LlmPolicy>(*session);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace convgame
