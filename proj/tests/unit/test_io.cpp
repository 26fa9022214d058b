#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "convgame/errors.hpp"
#include "convgame/hash.hpp"
#include "convgame/io.hpp"

using namespace convgame;
namespace fs = std::filesystem;

namespace {

TrialConfig busy_config() {
  TrialConfig c;
  c.population_size = 10;
  c.pool = NamePool{"Q", "M", "Z"};
  c.memory_length = 4;
  c.payoffs = PayoffRule{120, -40};
  c.horizon_rounds = 12;
  c.master_seed = 99;
  c.trial_index = 3;
  c.policy.surrogate.first_round = {0.2, 0.5, 0.3};
  c.agent_policies[1].surrogate.p_keep_after_success = 0.9;
  c.committed = CommittedSpec{2, "Z", "Q"};
  c.stop.flip_target = "Z";
  c.stop.flip_window = 40;
  c.llm.model = "m";
  c.llm.backoff_base = std::chrono::milliseconds(250);
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("convgame_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(ConfigJson, RoundTrip) {
  const TrialConfig c = busy_config();
  const auto j = io::to_json(c);
  EXPECT_EQ(io::config_from_json(j), c);
  EXPECT_EQ(io::config_from_json(nlohmann::json::parse(j.dump())), c);
  TrialConfig plain;
  EXPECT_EQ(io::config_from_json(io::to_json(plain)), plain);
}

TEST(ConfigJson, Rejections) {
  auto j = io::to_json(busy_config());
  j["schema_version"] = 7;
  EXPECT_THROW(io::config_from_json(j), ConfigError);
  j = io::to_json(busy_config());
  j["memory_length"] = 0;
  EXPECT_THROW(io::config_from_json(j), ConfigError);
  j = io::to_json(busy_config());
  j["policy"]["kind"] = "oracle";
  EXPECT_THROW(io::config_from_json(j), ConfigError);
}

TEST(Events, JsonlRoundTripAndRebuild) {
  TrialConfig c = busy_config();
  c.committed.reset();
  c.stop.flip_target.reset();
  const RunLog log = run_trial(c);
  std::stringstream ss;
  io::write_events(ss, log);
  const auto events = io::read_events(ss, c.pool);
  EXPECT_EQ(events, log.events);

  const RunLog rebuilt = io::rebuild_log(c, events);
  EXPECT_EQ(rebuilt.metrics, log.metrics);
  EXPECT_EQ(rebuilt.last_failure, log.last_failure);
  EXPECT_EQ(rebuilt.consensus, log.consensus);
  EXPECT_EQ(rebuilt.status, log.status);
  EXPECT_EQ(rebuilt.final_memories, log.final_memories);
  EXPECT_EQ(io::log_hash(rebuilt), io::log_hash(log));
}

TEST(Events, TwoNamePoolOrdersStayLists) {
  TrialConfig c;
  c.population_size = 4;
  c.horizon_rounds = 3;
  const RunLog log = run_trial(c);
  std::stringstream ss;
  io::write_events(ss, log);
  const auto first = nlohmann::json::parse(ss.str().substr(0, ss.str().find('\n')));
  EXPECT_TRUE(first["orders"].is_array());
  EXPECT_EQ(io::read_events(ss, c.pool), log.events);
}

TEST(Events, BadLinesRejected) {
  NamePool pool{"Q", "M"};
  std::stringstream bad("{\"schema_version\": 1, \"trial\": 0}\n");
  EXPECT_THROW(io::read_events(bad, pool), std::exception);
}

TEST(Figures, NameCountBinsHoldTwoPerInteraction) {
  TrialConfig c = busy_config();
  c.committed.reset();
  c.stop.flip_target.reset();
  c.stop.sustain_rounds = 0;
  const RunLog log = run_trial(c);
  std::stringstream out;
  io::export_name_counts(out, log);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "bin,Q,M,Z");
  std::size_t rows = 0;
  while (std::getline(out, line)) {
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::uint64_t sum = 0;
    while (std::getline(row, cell, ',')) sum += std::stoull(cell);
    EXPECT_EQ(sum, 2 * c.population_size) << line;
    ++rows;
  }
  EXPECT_EQ(rows, c.horizon_rounds);
}

TEST(Figures, ConsensusHistogramCountsRuns) {
  TrialConfig c;
  c.population_size = 8;
  c.horizon_rounds = 60;
  c.master_seed = 4;
  const auto logs = run_ensemble(c, 12);
  std::stringstream out;
  io::export_consensus(out, logs);
  const auto rows = io::read_counts_csv(out);
  std::uint64_t total = 0;
  for (const auto& [name, count] : rows) total += count;
  EXPECT_EQ(total, 12u);
  EXPECT_EQ(rows.back().first, "not_converged");
}

TEST(Figures, SuccessRateHoldsLastValue) {
  TrialConfig c;
  c.population_size = 6;
  c.horizon_rounds = 40;
  c.master_seed = 2;
  const auto logs = run_ensemble(c, 3);
  std::stringstream out;
  io::export_success_rate(out, logs);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "round,mean,run_0,run_1,run_2");
  std::size_t rows = 0;
  while (std::getline(out, line)) ++rows;
  std::size_t longest = 0;
  for (const auto& l : logs) longest = std::max(longest, l.metrics.complete_rounds());
  EXPECT_EQ(rows, longest);
}

TEST(Figures, CriticalMassRoundTrip) {
  CriticalMassResult r;
  r.majority = "Q";
  r.minority = "M";
  r.required_fraction = 1.0;
  for (std::size_t c = 0; c < 4; ++c) {
    CriticalMassPoint p;
    p.committed = c;
    p.seeds = 2;
    p.flips = c >= 2 ? 2 : (c == 1 ? 1 : 0);
    p.flip_times = {c >= 1 ? std::optional<std::uint64_t>(100 + c) : std::nullopt,
                    c >= 2 ? std::optional<std::uint64_t>(50 * c) : std::nullopt};
    r.points.push_back(p);
  }
  r.critical = 2;
  std::stringstream first;
  io::export_critical_mass(first, r);
  const std::string text = first.str();
  std::stringstream in(text);
  const auto back = io::read_critical_mass(in, "Q", "M", 1.0);
  EXPECT_EQ(back.critical, r.critical);
  ASSERT_EQ(back.points.size(), r.points.size());
  EXPECT_EQ(back.points[1].flip_times, r.points[1].flip_times);
  std::stringstream second;
  io::export_critical_mass(second, back);
  EXPECT_EQ(second.str(), text);
}

TEST(Figures, ParseFigureNames) {
  EXPECT_EQ(io::parse_figure("success-rate"), io::Figure::success_rate);
  EXPECT_EQ(io::parse_figure(io::to_string(io::Figure::name_counts)), io::Figure::name_counts);
  EXPECT_EQ(io::parse_figure("critical-mass"), io::Figure::critical_mass);
  EXPECT_THROW(io::parse_figure("4"), ConfigError);
}

TEST(Figures, MixedLogsRejected) {
  TrialConfig a;
  a.population_size = 4;
  a.horizon_rounds = 3;
  TrialConfig b = a;
  b.pool = NamePool{"F", "J"};
  std::vector<RunLog> logs{run_trial(a), run_trial(b)};
  EXPECT_THROW(io::require_uniform(logs), ConfigError);
  logs[1] = run_trial(a);
  logs[1].config.schema_version = 2;
  EXPECT_THROW(io::require_uniform(logs), ConfigError);
  logs[1].config.schema_version = kSchemaVersion;
  EXPECT_NO_THROW(io::require_uniform(logs));
}

TEST(Counts, CsvWithAndWithoutHeader) {
  std::stringstream with("name,count\nQ,3\nM,4\n");
  std::stringstream without("Q,3\nM,4");
  EXPECT_EQ(io::read_counts_csv(with), io::read_counts_csv(without));
  std::stringstream bad("name,count\nQ,x\n");
  EXPECT_THROW(io::read_counts_csv(bad), ConfigError);
}

TEST(Manifest, HashesArtifacts) {
  const fs::path root = scratch("manifest");
  const fs::path dir = io::make_run_dir(root, "probe-bias");
  const fs::path again = io::make_run_dir(root, "probe-bias");
  EXPECT_NE(dir, again);
  io::write_text(dir / "counts.csv", "hello\n");
  io::RunManifest m;
  m.experiment = "probe-bias";
  m.argv = {"convgame", "probe-bias"};
  m.master_seed = 5;
  m.started = io::utc_timestamp();
  m.finished = m.started;
  io::write_manifest(dir, m);
  const auto back = io::RunManifest::from_json(io::read_json(dir / "manifest.json"));
  ASSERT_EQ(back.artifacts.size(), 1u);
  EXPECT_EQ(back.artifacts[0].path, "counts.csv");
  EXPECT_EQ(back.artifacts[0].git_sha1, "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(back.artifacts[0].bytes, 6u);
  EXPECT_EQ(back.master_seed, 5u);
  EXPECT_EQ(back.argv, m.argv);
  fs::remove_all(root);
}

TEST(Summary, CarriesStatus) {
  TrialConfig c;
  c.population_size = 4;
  c.horizon_rounds = 30;
  const auto s = io::summary(run_trial(c));
  EXPECT_TRUE(s.contains("status"));
  EXPECT_TRUE(s.contains("interactions"));
}
