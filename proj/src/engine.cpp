#include "convgame/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "convgame/errors.hpp"
#include "convgame/llm.hpp"

namespace convgame {

// ---------------------------------------------------------------------------
// MetricSeries

MetricSeries::MetricSeries(std::size_t population, std::size_t num_names)
    : population_(population), num_names_(num_names) {}

void MetricSeries::record(const RunEvent& e) {
  const std::size_t round = (e.index - 1) / population_;
  if (round >= interactions_.size()) {
    interactions_.resize(round + 1, 0);
    successes_.resize(round + 1, 0);
    counts_.resize(round + 1, std::vector<std::uint32_t>(num_names_, 0));
  }
  ++interactions_[round];
  if (e.success) ++successes_[round];
  ++counts_[round][index_of(e.names[0])];
  ++counts_[round][index_of(e.names[1])];
}

std::size_t MetricSeries::complete_rounds() const {
  std::size_t n = 0;
  for (auto c : interactions_) {
    if (c == population_) ++n;
  }
  return n;
}

double MetricSeries::success_rate(std::size_t round) const {
  return interactions_[round] == 0
             ? 0.0
             : static_cast<double>(successes_[round]) / static_cast<double>(interactions_[round]);
}

std::vector<double> MetricSeries::success_rates() const {
  std::vector<double> out(rounds());
  for (std::size_t r = 0; r < rounds(); ++r) out[r] = success_rate(r);
  return out;
}

double MetricSeries::production_probability(NameId name, std::size_t round) const {
  const auto productions = 2.0 * static_cast<double>(interactions_[round]);
  return productions == 0.0 ? 0.0 : counts_[round][index_of(name)] / productions;
}

std::vector<double> MetricSeries::production_series(NameId name) const {
  std::vector<double> out(rounds());
  for (std::size_t r = 0; r < rounds(); ++r) out[r] = production_probability(name, r);
  return out;
}

// ---------------------------------------------------------------------------
// Flip detection

FlipTracker::FlipTracker(double threshold, std::size_t window, NameId target,
                         std::size_t num_names)
    : threshold_(threshold), window_(window), target_(target), counts_(num_names, 0) {
  if (window_ == 0) throw std::invalid_argument("flip window must be at least 1");
  if (!(threshold_ > 0.0 && threshold_ <= 1.0)) {
    throw std::invalid_argument("flip threshold must lie in (0,1]");
  }
}

bool FlipTracker::push(const RunEvent& e) {
  entries_.emplace_back(e.success, e.names);
  if (e.success) ++successes_;
  ++counts_[index_of(e.names[0])];
  ++counts_[index_of(e.names[1])];
  if (entries_.size() > window_) {
    const auto& [ok, names] = entries_.front();
    if (ok) --successes_;
    --counts_[index_of(names[0])];
    --counts_[index_of(names[1])];
    entries_.pop_front();
  }
  if (entries_.size() < window_) return false;
  // Integer comparison avoids 0.95 * 72 rounding surprises.
  const double needed = std::ceil(threshold_ * static_cast<double>(window_) - 1e-9);
  if (static_cast<double>(successes_) < needed) return false;
  const std::size_t target_count = counts_[index_of(target_)];
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (i != index_of(target_) && counts_[i] >= target_count) return false;
  }
  return true;
}

FlipResult detect_flip(std::span<const RunEvent> events, const FlipCriterion& criterion,
                       NameId target, std::size_t num_names, std::size_t population) {
  if (events.size() < criterion.window) {
    throw InsufficientDataError("flip window of " + std::to_string(criterion.window) +
                                " interactions exceeds log length " +
                                std::to_string(events.size()));
  }
  if (index_of(target) >= num_names) throw PoolMembershipError("flip target outside pool");
  const std::size_t limit = criterion.horizon_rounds == 0
                                ? events.size()
                                : std::min(events.size(), criterion.horizon_rounds * population);
  FlipTracker tracker(criterion.threshold, criterion.window, target, num_names);
  for (std::size_t i = 0; i < limit; ++i) {
    if (tracker.push(events[i])) return {true, events[i].index};
  }
  return {false, std::nullopt};
}

// ---------------------------------------------------------------------------
// Population

std::pair<std::size_t, std::size_t> select_pair(std::size_t population, Rng& rng) {
  if (population < 2) throw ConfigError("pair selection needs at least two agents");
  const std::size_t a = uniform_index(rng, population);
  std::size_t b = uniform_index(rng, population - 1);
  if (b >= a) ++b;
  return {a, b};
}

std::vector<MemoryWindow> initial_memories(const TrialConfig& config) {
  std::vector<MemoryWindow> memories(config.population_size, MemoryWindow(config.memory_length));
  const auto consensus = config.consensus_name();
  if (consensus && config.mode == InteractionMode::simultaneous) {
    const NameId x = config.pool.require(*consensus);
    for (auto& m : memories) {
      for (std::size_t i = 1; i <= config.memory_length; ++i) {
        m.append(InteractionRecord::make(i, x, x, config.payoffs));
      }
    }
  }
  return memories;
}

Population::Population(const TrialConfig& config, LlmSession* session)
    : config_((config.validate(), config)),
      memories_(initial_memories(config)),
      lexicons_(config.population_size),
      local_rounds_(config.population_size, 0),
      trial_rng_(make_rng(config.master_seed, Stream::trial, config.trial_index)) {
  const std::size_t n = config_.population_size;
  policies_.reserve(n);
  agent_rngs_.reserve(n);
  const auto consensus = config_.consensus_name();
  for (std::size_t i = 0; i < n; ++i) {
    const PolicySpec spec = config_.policy_for(i);
    policies_.push_back(make_policy(spec, config_.pool, session));
    agent_rngs_.push_back(make_rng(config_.master_seed, Stream::agent, config_.trial_index, i));
    if (spec.kind == PolicyKind::committed) {
      lexicons_[i] = Lexicon{config_.pool.require(spec.committed_name)};
    } else if (consensus) {
      lexicons_[i] = Lexicon{config_.pool.require(*consensus)};
    }
    local_rounds_[i] = memories_[i].empty() ? 0 : memories_[i].newest().round_index;
  }
}

RunEvent Population::step() {
  const auto [a, b] = select_pair(config_.population_size, trial_rng_);
  return config_.mode == InteractionMode::simultaneous ? step_simultaneous(a, b)
                                                       : step_speaker_hearer(a, b);
}

RunEvent Population::step_simultaneous(std::size_t a, std::size_t b) {
  const NamePool& pool = config_.pool;
  RunEvent e;
  e.trial_id = config_.trial_index;
  e.index = counter_ + 1;
  e.agents = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};

  const std::array<std::size_t, 2> side{a, b};
  for (int s = 0; s < 2; ++s) {
    const std::size_t id = side[s];
    std::vector<NameId> order = presentation_order(pool, agent_rngs_[id]);
    Decision d = policies_[id]->decide({pool, memories_[id], lexicons_[id], order}, agent_rngs_[id]);
    if (!pool.contains(d.name)) {
      throw PoolMembershipError("agent " + std::to_string(id) + " produced a name outside the pool");
    }
    e.names[s] = d.name;
    e.retries[s] = d.retries;
    e.fallback[s] = d.fallback;
    e.raw[s] = std::move(d.raw);
    if (config_.record_orders) e.orders[s] = d.final_order ? std::move(*d.final_order) : std::move(order);
  }

  const Outcome outcome = apply_payoff(e.names[0], e.names[1], pool, config_.payoffs);
  e.success = outcome.success;
  e.payoffs = {outcome.payoff, outcome.payoff};
  for (int s = 0; s < 2; ++s) {
    const std::size_t id = side[s];
    memories_[id].append(InteractionRecord::make(++local_rounds_[id], e.names[s], e.names[1 - s],
                                                 config_.payoffs));
    e.scores[s] = memories_[id].score();
  }
  ++counter_;
  return e;
}

RunEvent Population::step_speaker_hearer(std::size_t speaker, std::size_t hearer) {
  const NamePool& pool = config_.pool;
  RunEvent e;
  e.trial_id = config_.trial_index;
  e.index = counter_ + 1;
  e.agents = {static_cast<std::uint32_t>(speaker), static_cast<std::uint32_t>(hearer)};

  const Decision d = policies_[speaker]->decide(
      {pool, memories_[speaker], lexicons_[speaker], {}}, agent_rngs_[speaker]);
  if (!pool.contains(d.name)) {
    throw PoolMembershipError("agent " + std::to_string(speaker) +
                              " produced a name outside the pool");
  }
  e.names = {d.name, d.name};
  // An invented word enters the speaker's own lexicon.
  if (lexicons_[speaker].empty() && !policies_[speaker]->frozen()) lexicons_[speaker].insert(d.name);
  e.success = apply_minimal_update(lexicons_[speaker], lexicons_[hearer], d.name,
                                   policies_[speaker]->frozen(), policies_[hearer]->frozen());
  const int payoff = config_.payoffs.payoff(e.success);
  e.payoffs = {payoff, payoff};
  ++local_rounds_[speaker];
  ++local_rounds_[hearer];
  ++counter_;
  return e;
}

// ---------------------------------------------------------------------------
// Trials

const char* to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::completed: return "completed";
    case TrialStatus::converged: return "converged";
    case TrialStatus::flipped: return "flipped";
    case TrialStatus::aborted: return "aborted";
  }
  return "?";
}

namespace {

bool sustained_success(const MetricSeries& m, std::size_t sustain) {
  const std::size_t complete = m.complete_rounds();
  if (sustain == 0 || complete < sustain) return false;
  for (std::size_t r = complete - sustain; r < complete; ++r) {
    if (m.successes_in(r) != m.interactions_in(r)) return false;
  }
  return true;
}

std::optional<NameId> single_name(const MetricSeries& m, std::size_t round) {
  std::optional<NameId> found;
  const auto& counts = m.name_counts(round);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    if (found) return std::nullopt;
    found = name_at(i);
  }
  return found;
}

}  // namespace

std::optional<NameId> consensus_of(const MetricSeries& metrics, std::size_t sustain_rounds) {
  if (!sustained_success(metrics, std::max<std::size_t>(sustain_rounds, 1))) return std::nullopt;
  return single_name(metrics, metrics.complete_rounds() - 1);
}

RunLog run_trial(const TrialConfig& config, LlmSession* session) {
  config.validate();
  RunLog log;
  log.config = config;
  log.metrics = MetricSeries(config.population_size, config.pool.size());
  const std::uint64_t total = config.horizon_rounds * config.population_size;
  log.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(total, 1u << 20)));

  Population population(config, session);
  std::optional<FlipTracker> flips;
  if (config.stop.flip_target) {
    flips.emplace(config.stop.flip_threshold, config.flip_window(),
                  config.pool.require(*config.stop.flip_target), config.pool.size());
    log.flip = FlipResult{};
  }

  const std::size_t n = config.population_size;
  for (std::uint64_t t = 0; t < total; ++t) {
    try {
      log.events.push_back(population.step());
    } catch (const Error& err) {
      log.status = TrialStatus::aborted;
      log.abort_reason = "interaction " + std::to_string(t + 1) + ": " + err.what();
      break;
    }
    const RunEvent& e = log.events.back();
    log.metrics.record(e);
    if (!e.success) log.last_failure = e.index;
    if (flips && flips->push(e)) {
      log.flip = FlipResult{true, e.index};
      log.status = TrialStatus::flipped;
      break;
    }
    if (e.index % n == 0 && sustained_success(log.metrics, config.stop.sustain_rounds)) {
      log.status = TrialStatus::converged;
      break;
    }
  }

  log.consensus = consensus_of(log.metrics, config.stop.sustain_rounds);
  log.final_memories = population.memories();
  log.final_lexicons = population.lexicons();
  if (session) log.fallback_rate = session->fallback_rate();
  return log;
}

std::vector<RunLog> run_ensemble(const TrialConfig& base, std::size_t runs,
                                 const EnsembleOptions& options) {
  base.validate();
  std::vector<RunLog> logs(runs);
  bool needs_llm = base.policy.kind == PolicyKind::llm;
  for (const auto& [_, spec] : base.agent_policies) needs_llm |= spec.kind == PolicyKind::llm;
  if (needs_llm && !options.transports) {
    throw ConfigError("llm ensemble requires a transport factory");
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs; i = next++) {
      try {
        TrialConfig cfg = base;
        cfg.trial_index = base.trial_index + i;
        if (needs_llm) {
          auto transport = options.transports(cfg.trial_index);
          LlmSession session(*transport, cfg.llm, cfg.pool, cfg.payoffs);
          logs[i] = run_trial(cfg, &session);
        } else {
          logs[i] = run_trial(cfg);
        }
        if (!options.keep_events) {
          logs[i].events.clear();
          logs[i].events.shrink_to_fit();
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(runs, 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return logs;
}

std::vector<MemoryWindow> replay_memories(const TrialConfig& config,
                                          std::span<const RunEvent> events) {
  std::vector<MemoryWindow> memories = initial_memories(config);
  if (config.mode != InteractionMode::simultaneous) return memories;
  std::vector<std::uint64_t> rounds(config.population_size, 0);
  for (std::size_t i = 0; i < memories.size(); ++i) {
    rounds[i] = memories[i].empty() ? 0 : memories[i].newest().round_index;
  }
  for (const RunEvent& e : events) {
    for (int s = 0; s < 2; ++s) {
      const auto id = e.agents[s];
      memories[id].append(
          InteractionRecord::make(++rounds[id], e.names[s], e.names[1 - s], config.payoffs));
    }
  }
  return memories;
}

}  // namespace convgame
