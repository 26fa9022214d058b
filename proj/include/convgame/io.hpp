#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convgame/comprehension.hpp"
#include "convgame/config.hpp"
#include "convgame/engine.hpp"
#include "convgame/experiments.hpp"
#include "convgame/stats.hpp"

namespace convgame::io {

using nlohmann::json;

// --- configuration -------------------------------------------------------

json to_json(const TrialConfig& config);
/// Missing fields keep their defaults. Throws ConfigError on an unknown
/// schema version, a malformed field or a failed validation.
TrialConfig config_from_json(const json& j);
TrialConfig load_config(const std::filesystem::path& path);

json to_json(const PolicySpec& spec);
PolicySpec policy_from_json(const json& j);

// --- events and metrics ----------------------------------------------------

json to_json(const RunEvent& e, const NamePool& pool);
RunEvent event_from_json(const json& j, const NamePool& pool);

void write_events(std::ostream& out, const RunLog& log);
std::vector<RunEvent> read_events(std::istream& in, const NamePool& pool);

/// Rebuilds metrics, status-independent fields and final memories from a
/// config and its event stream.
RunLog rebuild_log(const TrialConfig& config, std::vector<RunEvent> events);

json summary(const RunLog& log);

/// round, interactions, success_rate, then one count column per name.
void write_metrics_csv(std::ostream& out, const RunLog& log);

/// sha256 over the config and the JSONL event stream.
std::string log_hash(const RunLog& log);

// --- experiment results ----------------------------------------------------

json to_json(const stats::TestResult& r);
json to_json(const BiasProbeResult& r);
json to_json(const ConsensusDistribution& r);
json to_json(const MicrodynamicsTable& t);
json to_json(const StabilityResult& r);
json to_json(const CriticalMassResult& r);
json to_json(const ComprehensionReport& r);

// --- figure data -------------------------------------------------------------

enum class Figure { success_rate, name_counts, consensus, production, critical_mass };
const char* to_string(Figure f);
Figure parse_figure(std::string_view text);

/// Success rate per population round: round, mean, run_0..run_{k-1}. Runs
/// that stopped early hold their last value.
void export_success_rate(std::ostream& out, std::span<const RunLog> logs);
/// Per-name production counts in consecutive bins of N interactions for one run.
void export_name_counts(std::ostream& out, const RunLog& log);
/// name, count over the runs' consensus names, plus a not_converged row.
void export_consensus(std::ostream& out, std::span<const RunLog> logs);
/// Production probability of `name` per round: round, mean, run_0...
void export_production(std::ostream& out, std::span<const RunLog> logs, NameId name);
/// committed, seeds, flips, flip_fraction, critical (0/1).
void export_critical_mass(std::ostream& out, const CriticalMassResult& r);
CriticalMassResult read_critical_mass(std::istream& in, const std::string& majority,
                                      const std::string& minority, double required_fraction);

/// Throws ConfigError unless all logs share schema version, pool and
/// population size.
void require_uniform(std::span<const RunLog> logs);

/// Rows of "name,count" (header optional).
std::vector<std::pair<std::string, std::uint64_t>> read_counts_csv(std::istream& in);

// --- run directory and manifest -----------------------------------------------

struct Artifact {
  std::string path;  // relative to the run directory
  std::string git_sha1;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  int schema_version = kSchemaVersion;
  std::string experiment;
  std::vector<std::string> argv;
  json config;
  std::uint64_t master_seed = 0;
  std::string started;
  std::string finished;
  std::string status = "ok";
  json error;
  std::vector<Artifact> artifacts;

  json to_json() const;
  static RunManifest from_json(const json& j);
};

/// out/<experiment>/<timestamp>/, made unique with a numeric suffix.
std::filesystem::path make_run_dir(const std::filesystem::path& out, const std::string& experiment);

std::string utc_timestamp();

/// Hashes every regular file under `dir` (except the manifest itself) into
/// the manifest and writes manifest.json.
void write_manifest(const std::filesystem::path& dir, RunManifest manifest);

void write_text(const std::filesystem::path& path, std::string_view text);
json read_json(const std::filesystem::path& path);

}  // namespace convgame::io
