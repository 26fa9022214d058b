#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convgame/config.hpp"
#include "convgame/engine.hpp"
#include "convgame/stats.hpp"

namespace convgame {

struct BiasProbeResult {
  NamePool pool;
  std::vector<std::uint64_t> counts;  // canonical pool order, sums to trials
  std::uint64_t trials = 0;
  std::uint64_t fallbacks = 0;
  /// Binomial on the first name for W = 2, chi-squared against uniform
  /// otherwise.
  stats::TestResult test;
};

/// T independent empty-memory decisions, each with a fresh presentation
/// shuffle. LLM policies need a session.
BiasProbeResult probe_first_round_bias(const PolicySpec& spec, const NamePool& pool,
                                       std::uint64_t trials, std::uint64_t seed,
                                       LlmSession* session = nullptr);

/// Test for a probe from counts alone (e.g. read back from CSV).
stats::TestResult bias_test(std::span<const std::uint64_t> counts);

struct ConsensusDistribution {
  NamePool pool;
  std::vector<std::uint64_t> counts;
  std::uint64_t runs = 0;
  std::uint64_t not_converged = 0;
  std::uint64_t aborted = 0;
  /// Last failed interaction of each converged run, in run order.
  std::vector<std::uint64_t> convergence_times;
  stats::TestResult test;

  double share(NameId name) const;
  double mean_convergence_time() const;
};

ConsensusDistribution consensus_distribution(const TrialConfig& config, std::size_t runs,
                                             const EnsembleOptions& options = {});

/// A memory configuration is the agent's record sequence, oldest first,
/// rendered as "own:partner" pairs joined by ','. The empty memory is "".
std::string configuration_key(const MemoryWindow& memory, const NamePool& pool);

struct ConfigurationEstimate {
  std::string key;
  std::uint64_t occurrences = 0;
  /// Decisions drawn from this configuration to estimate the probability.
  std::uint64_t samples = 0;
  std::uint64_t designated = 0;
  std::optional<double> probability;  // absent when never observed
  std::optional<double> p_binomial;   // against an unbiased agent
  std::optional<double> p_bootstrap;  // resamples more extreme than observed

  bool observed() const { return occurrences > 0; }
};

struct InteractionLevel {
  std::size_t interaction = 0;  // 1, 2 or 3
  std::vector<ConfigurationEstimate> configurations;  // reachable ones, sorted by key
  /// Production probability weighted by configuration frequency.
  double aggregate = 0.0;
  std::uint64_t total = 0;
  stats::TestResult aggregate_test;

  const ConfigurationEstimate* find(std::string_view key) const;
};

struct MicrodynamicsTable {
  NamePool pool;
  NameId designated{};
  std::vector<InteractionLevel> levels;
  /// Empty-memory decisions behind interaction 1, identical to a probe run
  /// with the same seed and 2 * cohort trials.
  std::vector<std::uint64_t> first_round_counts;
};

struct MicrodynamicsOptions {
  std::size_t cohort = 5'000;  // pairs per interaction in the forward simulation
  std::size_t samples = 10'000;  // decisions per observed configuration
  std::size_t depth = 3;
  stats::BootstrapOptions bootstrap{};
  bool run_bootstrap = true;
};

/// Forward simulation of a cohort of fresh agents paired at random in
/// lockstep for `depth` interactions, then a fixed-size resample of the
/// decision from every configuration seen. W must be 2.
MicrodynamicsTable build_microdynamics_table(const PolicySpec& spec, const NamePool& pool,
                                             std::string_view designated, std::uint64_t seed,
                                             const MicrodynamicsOptions& options = {},
                                             LlmSession* session = nullptr);

struct StabilityResult {
  RunLog log;
  NameId consensus{};
  std::vector<double> production;  // per complete round
  double minimum = 1.0;
  bool stable() const { return log.status != TrialStatus::aborted && minimum == 1.0; }
};

/// Full-consensus start, no committed agents and no early stop.
StabilityResult run_stability(TrialConfig config, LlmSession* session = nullptr);

struct CriticalMassPoint {
  std::size_t committed = 0;
  std::size_t seeds = 0;
  std::size_t flips = 0;
  std::size_t aborted = 0;
  /// First qualifying interaction per seed; empty when that seed did not flip.
  std::vector<std::optional<std::uint64_t>> flip_times;

  double flip_fraction() const {
    return seeds ? static_cast<double>(flips) / static_cast<double>(seeds) : 0.0;
  }
};

struct CriticalMassResult {
  std::string majority;
  std::string minority;
  double required_fraction = 1.0;
  std::vector<CriticalMassPoint> points;  // ascending c
  /// Smallest c meeting the criterion, if any within range.
  std::optional<std::size_t> critical;
  /// Values c that met the criterion while c + 1 did not.
  std::vector<std::size_t> monotonicity_violations;
};

struct SweepOptions {
  std::size_t c_min = 0;
  std::size_t c_max = 0;  // inclusive; 0 means N
  std::size_t seeds = 10;
  /// Trials use trial_index = seed_offset + s for seed s.
  std::uint64_t seed_offset = 0;
  /// Share of seeds that must flip; 1.0 means all.
  double required_fraction = 1.0;
  /// Stop scanning after the first c meeting the criterion.
  bool stop_at_first = false;
  std::size_t threads = 0;
  TransportFactory transports;
};

/// Linear scan over c. Each trial starts at full consensus on `majority`
/// with the last c agents committed to `minority` and stops at the first
/// flip or after the configured horizon.
CriticalMassResult sweep_committed_minority(const TrialConfig& config, const std::string& majority,
                                            const std::string& minority,
                                            const SweepOptions& options = {});

}  // namespace convgame
