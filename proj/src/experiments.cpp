#include "convgame/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "convgame/errors.hpp"

namespace convgame {

namespace {

Decision decide_once(Policy& policy, const NamePool& pool, const MemoryWindow& memory, Rng& rng) {
  static const Lexicon kEmptyLexicon;
  const std::vector<NameId> order = presentation_order(pool, rng);
  return policy.decide(DecisionContext{pool, memory, kEmptyLexicon, order}, rng);
}

std::uint64_t total_of(std::span<const std::uint64_t> counts) {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

// Cohort agents in the forward simulation remember their whole history.
constexpr std::size_t kCohortMemory = 16;

}  // namespace

stats::TestResult bias_test(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) throw std::invalid_argument("bias test needs at least two names");
  if (counts.size() == 2) return stats::binom_exact_two_tailed(counts[0], counts[0] + counts[1], 0.5);
  return stats::chi2_uniform(counts);
}

BiasProbeResult probe_first_round_bias(const PolicySpec& spec, const NamePool& pool,
                                       std::uint64_t trials, std::uint64_t seed,
                                       LlmSession* session) {
  if (trials == 0) throw ConfigError("probe needs at least one trial");
  auto policy = make_policy(spec, pool, session);
  Rng rng = make_rng(seed, Stream::probe);
  const MemoryWindow empty(1);

  BiasProbeResult result{pool, std::vector<std::uint64_t>(pool.size(), 0), trials, 0, {}};
  for (std::uint64_t t = 0; t < trials; ++t) {
    const Decision d = decide_once(*policy, pool, empty, rng);
    ++result.counts[index_of(d.name)];
    if (d.fallback) ++result.fallbacks;
  }
  result.test = bias_test(result.counts);
  return result;
}

double ConsensusDistribution::share(NameId name) const {
  const std::uint64_t converged = total_of(counts);
  return converged ? static_cast<double>(counts[index_of(name)]) / static_cast<double>(converged)
                   : 0.0;
}

double ConsensusDistribution::mean_convergence_time() const {
  if (convergence_times.empty()) return 0.0;
  const double sum = std::accumulate(convergence_times.begin(), convergence_times.end(), 0.0);
  return sum / static_cast<double>(convergence_times.size());
}

ConsensusDistribution consensus_distribution(const TrialConfig& config, std::size_t runs,
                                             const EnsembleOptions& options) {
  EnsembleOptions opts = options;
  opts.keep_events = false;
  const std::vector<RunLog> logs = run_ensemble(config, runs, opts);

  ConsensusDistribution out{.pool = config.pool,
                            .counts = std::vector<std::uint64_t>(config.pool.size(), 0),
                            .convergence_times = {},
                            .test = {}};
  out.runs = runs;
  for (const RunLog& log : logs) {
    if (log.status == TrialStatus::aborted) {
      ++out.aborted;
    } else if (log.consensus) {
      ++out.counts[index_of(*log.consensus)];
      out.convergence_times.push_back(log.last_failure);
    } else {
      ++out.not_converged;
    }
  }
  if (total_of(out.counts) > 0) out.test = bias_test(out.counts);
  return out;
}

std::string configuration_key(const MemoryWindow& memory, const NamePool& pool) {
  std::string key;
  for (const auto& r : memory.records()) {
    if (!key.empty()) key += ',';
    key += pool.token(r.own) + ':' + pool.token(r.partner);
  }
  return key;
}

const ConfigurationEstimate* InteractionLevel::find(std::string_view key) const {
  for (const auto& c : configurations) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

MicrodynamicsTable build_microdynamics_table(const PolicySpec& spec, const NamePool& pool,
                                             std::string_view designated, std::uint64_t seed,
                                             const MicrodynamicsOptions& options,
                                             LlmSession* session) {
  if (pool.size() != 2) throw ConfigError("micro-dynamics analysis needs exactly two names");
  if (options.cohort == 0 || options.samples == 0) {
    throw ConfigError("micro-dynamics needs a positive cohort and sample size");
  }
  if (options.depth < 1 || options.depth > kCohortMemory) {
    throw ConfigError("micro-dynamics depth must lie in [1, " + std::to_string(kCohortMemory) + "]");
  }
  auto policy = make_policy(spec, pool, session);
  const NameId target = pool.require(designated);
  const std::size_t agents = 2 * options.cohort;

  MicrodynamicsTable table{.pool = pool,
                           .designated = target,
                           .levels = {},
                           .first_round_counts = std::vector<std::uint64_t>(pool.size(), 0)};

  std::vector<MemoryWindow> memories(agents, MemoryWindow(kCohortMemory));
  std::vector<NameId> choice(agents);

  // Interaction 1 draws in the probe's order from the probe's stream.
  {
    Rng rng = make_rng(seed, Stream::probe);
    const MemoryWindow empty(1);
    for (std::size_t i = 0; i < agents; ++i) {
      choice[i] = decide_once(*policy, pool, empty, rng).name;
      ++table.first_round_counts[index_of(choice[i])];
    }
  }

  // Every (own, partner) sequence of the given length.
  auto reachable = [&](std::size_t length) {
    std::vector<std::string> keys{""};
    for (std::size_t l = 0; l < length; ++l) {
      std::vector<std::string> next;
      for (const auto& k : keys) {
        for (const auto& own : pool.tokens()) {
          for (const auto& partner : pool.tokens()) {
            next.push_back(k + (k.empty() ? "" : ",") + own + ':' + partner);
          }
        }
      }
      keys = std::move(next);
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  };

  for (std::size_t k = 1; k <= options.depth; ++k) {
    InteractionLevel level;
    level.interaction = k;

    std::map<std::string, std::uint64_t> occurrences;
    std::map<std::string, std::size_t> representative;
    std::uint64_t produced = 0;
    Rng sim = make_rng(seed, Stream::micro, k, 0);

    if (k > 1) {
      for (std::size_t i = 0; i < agents; ++i) {
        const std::string key = configuration_key(memories[i], pool);
        ++occurrences[key];
        representative.emplace(key, i);
        choice[i] = decide_once(*policy, pool, memories[i], sim).name;
      }
    } else {
      occurrences[""] = agents;
    }
    for (std::size_t i = 0; i < agents; ++i) produced += choice[i] == target ? 1 : 0;

    Rng est = make_rng(seed, Stream::micro, k, 1);
    Rng boot = make_rng(seed, Stream::bootstrap, k);
    double weighted = 0.0;
    std::uint64_t weight = 0;
    for (const std::string& key : reachable(k - 1)) {
      ConfigurationEstimate c;
      c.key = key;
      const auto it = occurrences.find(key);
      if (it != occurrences.end()) c.occurrences = it->second;
      if (c.observed()) {
        std::vector<std::uint8_t> outcomes;
        if (k == 1) {
          for (std::size_t i = 0; i < agents; ++i) outcomes.push_back(choice[i] == target);
        } else {
          const MemoryWindow& memory = memories[representative.at(key)];
          outcomes.reserve(options.samples);
          for (std::size_t s = 0; s < options.samples; ++s) {
            outcomes.push_back(decide_once(*policy, pool, memory, est).name == target);
          }
        }
        c.samples = outcomes.size();
        c.designated = std::accumulate(outcomes.begin(), outcomes.end(), std::uint64_t{0});
        const double p = static_cast<double>(c.designated) / static_cast<double>(c.samples);
        c.probability = p;
        c.p_binomial = stats::binom_exact_two_tailed(c.designated, c.samples, 0.5).p_value;
        if (options.run_bootstrap) {
          c.p_bootstrap = stats::bootstrap_bias(outcomes, p, options.bootstrap, boot);
        }
        weighted += p * static_cast<double>(c.occurrences);
        weight += c.occurrences;
      }
      level.configurations.push_back(std::move(c));
    }
    level.total = weight;
    level.aggregate = weight ? weighted / static_cast<double>(weight) : 0.0;
    level.aggregate_test = stats::binom_exact_two_tailed(produced, agents, 0.5);
    table.levels.push_back(std::move(level));

    if (k == options.depth) break;
    // Random pairing among the cohort, then everyone records the outcome.
    std::vector<std::size_t> ids(agents);
    std::iota(ids.begin(), ids.end(), 0);
    if (k > 1) shuffle_in_place(ids, sim);
    std::vector<MemoryWindow> next = memories;
    for (std::size_t p = 0; p + 1 < agents; p += 2) {
      const std::size_t a = ids[p];
      const std::size_t b = ids[p + 1];
      next[a].append(InteractionRecord::make(k, choice[a], choice[b], PayoffRule{}));
      next[b].append(InteractionRecord::make(k, choice[b], choice[a], PayoffRule{}));
    }
    memories = std::move(next);
  }
  return table;
}

StabilityResult run_stability(TrialConfig config, LlmSession* session) {
  if (config.committed && config.committed->count > 0) {
    throw ConfigError("stability runs take no committed agents");
  }
  const auto name = config.consensus_name();
  if (!name) throw ConfigError("stability runs need an initial consensus");
  config.initial_consensus = *name;
  config.committed.reset();
  config.stop.sustain_rounds = 0;
  config.stop.flip_target.reset();

  StabilityResult result;
  result.consensus = config.pool.require(*name);
  result.log = run_trial(config, session);
  const MetricSeries& m = result.log.metrics;
  for (std::size_t r = 0; r < m.complete_rounds(); ++r) {
    result.production.push_back(m.production_probability(result.consensus, r));
  }
  result.minimum = result.production.empty()
                       ? 0.0
                       : *std::min_element(result.production.begin(), result.production.end());
  return result;
}

CriticalMassResult sweep_committed_minority(const TrialConfig& config, const std::string& majority,
                                            const std::string& minority,
                                            const SweepOptions& options) {
  if (majority == minority) throw ConfigError("majority and minority names must differ");
  if (options.seeds == 0) throw ConfigError("sweep needs at least one seed");
  if (!(options.required_fraction > 0.0 && options.required_fraction <= 1.0)) {
    throw ConfigError("required fraction must lie in (0, 1]");
  }
  const std::size_t c_max = options.c_max ? options.c_max : config.population_size;
  if (options.c_min > c_max) throw ConfigError("empty committed-count range");

  CriticalMassResult result;
  result.majority = majority;
  result.minority = minority;
  result.required_fraction = options.required_fraction;
  const auto needed = static_cast<std::size_t>(
      std::ceil(options.required_fraction * static_cast<double>(options.seeds) - 1e-9));

  std::vector<bool> met;
  for (std::size_t c = options.c_min; c <= c_max; ++c) {
    TrialConfig cfg = config;
    cfg.committed = CommittedSpec{c, minority, majority};
    cfg.initial_consensus.reset();
    cfg.stop.sustain_rounds = 0;
    cfg.stop.flip_target = minority;
    cfg.trial_index = options.seed_offset;
    cfg.validate();

    EnsembleOptions eo;
    eo.threads = options.threads;
    eo.keep_events = false;
    eo.transports = options.transports;
    const std::vector<RunLog> logs = run_ensemble(cfg, options.seeds, eo);

    CriticalMassPoint point;
    point.committed = c;
    point.seeds = options.seeds;
    for (const RunLog& log : logs) {
      if (log.status == TrialStatus::aborted) ++point.aborted;
      const bool flipped = log.flip && log.flip->flipped;
      point.flips += flipped ? 1 : 0;
      point.flip_times.push_back(flipped ? log.flip->interaction : std::nullopt);
    }
    const bool ok = point.flips >= needed;
    met.push_back(ok);
    result.points.push_back(std::move(point));
    if (ok && !result.critical) {
      result.critical = c;
      if (options.stop_at_first) break;
    }
  }
  for (std::size_t i = 0; i + 1 < met.size(); ++i) {
    if (met[i] && !met[i + 1]) result.monotonicity_violations.push_back(result.points[i].committed);
  }
  return result;
}

}  // namespace convgame
