#include "convgame/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "convgame/errors.hpp"
#include "convgame/hash.hpp"

namespace convgame::io {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json name_list(const std::vector<NameId>& ids, const NamePool& pool) {
  json a = json::array();
  for (NameId id : ids) a.push_back(pool.token(id));
  return a;
}

std::vector<NameId> ids_from(const json& a, const NamePool& pool) {
  std::vector<NameId> out;
  for (const auto& t : a) out.push_back(pool.require(t.get<std::string>()));
  return out;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<std::uint64_t> to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

std::uint64_t require_u64(const std::string& s, const char* what) {
  const auto v = to_u64(trim(s));
  if (!v) throw ConfigError(std::string("bad ") + what + " value '" + s + "'");
  return *v;
}

template <typename Get>
void export_per_round(std::ostream& out, std::span<const RunLog> logs, Get get) {
  require_uniform(logs);
  std::size_t rounds = 0;
  for (const auto& log : logs) rounds = std::max(rounds, log.metrics.complete_rounds());
  out << "round,mean";
  for (std::size_t i = 0; i < logs.size(); ++i) out << ",run_" << i;
  out << '\n';
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> values;
    for (const auto& log : logs) {
      const std::size_t done = log.metrics.complete_rounds();
      values.push_back(done == 0 ? 0.0 : get(log, std::min(r, done - 1)));
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.empty() ? 1.0 : static_cast<double>(values.size());
    out << r + 1 << ',' << fmt(mean);
    for (double v : values) out << ',' << fmt(v);
    out << '\n';
  }
}

}  // namespace

// --- configuration -------------------------------------------------------

json to_json(const PolicySpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"bias", spec.bias},
          {"designated", spec.designated},
          {"surrogate",
           {{"p_keep_after_success", spec.surrogate.p_keep_after_success},
            {"p_switch_after_failure", spec.surrogate.p_switch_after_failure},
            {"first_round", spec.surrogate.first_round}}},
          {"committed_name", spec.committed_name}};
}

PolicySpec policy_from_json(const json& j) {
  return guarded("policy", [&] {
    PolicySpec p;
    if (j.contains("kind")) p.kind = parse_policy_kind(j.at("kind").get<std::string>());
    p.bias = j.value("bias", p.bias);
    p.designated = j.value("designated", p.designated);
    if (j.contains("surrogate")) {
      const json& s = j.at("surrogate");
      p.surrogate.p_keep_after_success =
          s.value("p_keep_after_success", p.surrogate.p_keep_after_success);
      p.surrogate.p_switch_after_failure =
          s.value("p_switch_after_failure", p.surrogate.p_switch_after_failure);
      p.surrogate.first_round = s.value("first_round", p.surrogate.first_round);
    }
    p.committed_name = j.value("committed_name", p.committed_name);
    return p;
  });
}

json to_json(const TrialConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["population_size"] = c.population_size;
  j["pool"] = c.pool.tokens();
  j["memory_length"] = c.memory_length;
  j["payoffs"] = {{"reward", c.payoffs.reward}, {"penalty", c.payoffs.penalty}};
  j["mode"] = to_string(c.mode);
  j["committed"] = c.committed ? json{{"count", c.committed->count},
                                      {"name", c.committed->name},
                                      {"majority", c.committed->majority}}
                               : json(nullptr);
  j["initial_consensus"] = c.initial_consensus ? json(*c.initial_consensus) : json(nullptr);
  j["horizon_rounds"] = c.horizon_rounds;
  j["master_seed"] = c.master_seed;
  j["trial_index"] = c.trial_index;
  j["policy"] = to_json(c.policy);
  json overrides = json::object();
  for (const auto& [agent, spec] : c.agent_policies) overrides[std::to_string(agent)] = to_json(spec);
  j["agent_policies"] = overrides;
  j["stop"] = {{"sustain_rounds", c.stop.sustain_rounds},
               {"flip_target", c.stop.flip_target ? json(*c.stop.flip_target) : json(nullptr)},
               {"flip_threshold", c.stop.flip_threshold},
               {"flip_window", c.stop.flip_window}};
  j["llm"] = {{"temperature", c.llm.temperature},
              {"top_k", c.llm.top_k},
              {"max_tokens", c.llm.max_tokens},
              {"model", c.llm.model},
              {"endpoint", c.llm.endpoint},
              {"path", c.llm.path},
              {"api_key_env", c.llm.api_key_env},
              {"parse_retries", c.llm.parse_retries},
              {"transport_retries", c.llm.transport_retries},
              {"backoff_base_ms", c.llm.backoff_base.count()},
              {"requests_per_minute", c.llm.requests_per_minute},
              {"prompt_total_rounds", c.llm.prompt_total_rounds}};
  j["record_orders"] = c.record_orders;
  return j;
}

TrialConfig config_from_json(const json& j) {
  TrialConfig c = guarded("config", [&] {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    TrialConfig c;
    c.schema_version = j.value("schema_version", kSchemaVersion);
    if (c.schema_version != kSchemaVersion) {
      throw ConfigError("unsupported config schema_version " + std::to_string(c.schema_version));
    }
    c.population_size = j.value("population_size", c.population_size);
    if (j.contains("pool")) c.pool = NamePool(j.at("pool").get<std::vector<std::string>>());
    c.memory_length = j.value("memory_length", c.memory_length);
    if (j.contains("payoffs")) {
      c.payoffs.reward = j.at("payoffs").value("reward", c.payoffs.reward);
      c.payoffs.penalty = j.at("payoffs").value("penalty", c.payoffs.penalty);
    }
    if (j.contains("mode")) c.mode = parse_interaction_mode(j.at("mode").get<std::string>());
    if (j.contains("committed") && !j.at("committed").is_null()) {
      const json& m = j.at("committed");
      c.committed = CommittedSpec{m.at("count").get<std::size_t>(), m.at("name").get<std::string>(),
                                  m.at("majority").get<std::string>()};
    }
    if (j.contains("initial_consensus") && !j.at("initial_consensus").is_null()) {
      c.initial_consensus = j.at("initial_consensus").get<std::string>();
    }
    c.horizon_rounds = j.value("horizon_rounds", c.horizon_rounds);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.trial_index = j.value("trial_index", c.trial_index);
    if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"));
    if (j.contains("agent_policies")) {
      for (const auto& [key, spec] : j.at("agent_policies").items()) {
        const auto agent = to_u64(key);
        if (!agent) throw ConfigError("agent_policies key '" + key + "' is not an agent id");
        c.agent_policies[static_cast<std::size_t>(*agent)] = policy_from_json(spec);
      }
    }
    if (j.contains("stop")) {
      const json& s = j.at("stop");
      c.stop.sustain_rounds = s.value("sustain_rounds", c.stop.sustain_rounds);
      if (s.contains("flip_target") && !s.at("flip_target").is_null()) {
        c.stop.flip_target = s.at("flip_target").get<std::string>();
      }
      c.stop.flip_threshold = s.value("flip_threshold", c.stop.flip_threshold);
      c.stop.flip_window = s.value("flip_window", c.stop.flip_window);
    }
    if (j.contains("llm")) {
      const json& l = j.at("llm");
      c.llm.temperature = l.value("temperature", c.llm.temperature);
      c.llm.top_k = l.value("top_k", c.llm.top_k);
      c.llm.max_tokens = l.value("max_tokens", c.llm.max_tokens);
      c.llm.model = l.value("model", c.llm.model);
      c.llm.endpoint = l.value("endpoint", c.llm.endpoint);
      c.llm.path = l.value("path", c.llm.path);
      c.llm.api_key_env = l.value("api_key_env", c.llm.api_key_env);
      c.llm.parse_retries = l.value("parse_retries", c.llm.parse_retries);
      c.llm.transport_retries = l.value("transport_retries", c.llm.transport_retries);
      c.llm.backoff_base =
          std::chrono::milliseconds(l.value("backoff_base_ms", c.llm.backoff_base.count()));
      c.llm.requests_per_minute = l.value("requests_per_minute", c.llm.requests_per_minute);
      c.llm.prompt_total_rounds = l.value("prompt_total_rounds", c.llm.prompt_total_rounds);
    }
    c.record_orders = j.value("record_orders", c.record_orders);
    return c;
  });
  c.validate();
  return c;
}

TrialConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

// --- events and metrics ----------------------------------------------------

json to_json(const RunEvent& e, const NamePool& pool) {
  return {{"schema_version", kSchemaVersion},
          {"trial", e.trial_id},
          {"index", e.index},
          {"agents", e.agents},
          {"names", json::array({pool.token(e.names[0]), pool.token(e.names[1])})},
          {"success", e.success},
          {"payoffs", e.payoffs},
          {"scores", e.scores},
          {"orders", json::array({name_list(e.orders[0], pool), name_list(e.orders[1], pool)})},
          {"raw", e.raw},
          {"retries", e.retries},
          {"fallback", e.fallback}};
}

RunEvent event_from_json(const json& j, const NamePool& pool) {
  return guarded("event", [&] {
    if (j.value("schema_version", 0) != kSchemaVersion) {
      throw ConfigError("event schema_version mismatch");
    }
    RunEvent e;
    e.trial_id = j.at("trial").get<std::uint64_t>();
    e.index = j.at("index").get<std::uint64_t>();
    e.agents = j.at("agents").get<std::array<std::uint32_t, 2>>();
    for (int s = 0; s < 2; ++s) {
      e.names[s] = pool.require(j.at("names").at(s).get<std::string>());
      e.orders[s] = ids_from(j.at("orders").at(s), pool);
    }
    e.success = j.at("success").get<bool>();
    e.payoffs = j.at("payoffs").get<std::array<int, 2>>();
    e.scores = j.at("scores").get<std::array<int, 2>>();
    e.raw = j.at("raw").get<std::array<std::vector<std::string>, 2>>();
    e.retries = j.at("retries").get<std::array<int, 2>>();
    e.fallback = j.at("fallback").get<std::array<bool, 2>>();
    return e;
  });
}

void write_events(std::ostream& out, const RunLog& log) {
  for (const auto& e : log.events) out << to_json(e, log.config.pool).dump() << '\n';
}

std::vector<RunEvent> read_events(std::istream& in, const NamePool& pool) {
  std::vector<RunEvent> events;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("events line " + std::to_string(number) + ": " + e.what());
    }
    events.push_back(event_from_json(j, pool));
  }
  return events;
}

RunLog rebuild_log(const TrialConfig& config, std::vector<RunEvent> events) {
  config.validate();
  RunLog log;
  log.config = config;
  log.metrics = MetricSeries(config.population_size, config.pool.size());
  for (const auto& e : events) {
    log.metrics.record(e);
    if (!e.success) log.last_failure = e.index;
  }
  log.consensus = consensus_of(log.metrics, config.stop.sustain_rounds);
  if (config.stop.flip_target && events.size() >= config.flip_window()) {
    FlipCriterion criterion{config.stop.flip_threshold, config.flip_window(), 0};
    log.flip = detect_flip(events, criterion, config.pool.require(*config.stop.flip_target),
                           config.pool.size(), config.population_size);
  }
  if (log.flip && log.flip->flipped) {
    log.status = TrialStatus::flipped;
  } else if (log.consensus && events.size() < config.horizon_rounds * config.population_size) {
    log.status = TrialStatus::converged;
  }
  log.final_memories = replay_memories(config, events);

  // Lexicons only evolve in speaker-hearer mode.
  const auto consensus = config.consensus_name();
  log.final_lexicons.resize(config.population_size);
  for (std::size_t i = 0; i < config.population_size; ++i) {
    if (config.is_committed(i)) {
      log.final_lexicons[i] = Lexicon{config.pool.require(config.committed->name)};
    } else if (consensus) {
      log.final_lexicons[i] = Lexicon{config.pool.require(*consensus)};
    }
  }
  if (config.mode == InteractionMode::speaker_hearer) {
    for (const auto& e : events) {
      Lexicon& speaker = log.final_lexicons[e.agents[0]];
      if (speaker.empty() && !config.is_committed(e.agents[0])) speaker.insert(e.names[0]);
      apply_minimal_update(log.final_lexicons[e.agents[0]], log.final_lexicons[e.agents[1]],
                           e.names[0], config.is_committed(e.agents[0]),
                           config.is_committed(e.agents[1]));
    }
  }
  log.events = std::move(events);
  return log;
}

json summary(const RunLog& log) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["trial_index"] = log.config.trial_index;
  j["master_seed"] = log.config.master_seed;
  j["status"] = to_string(log.status);
  j["abort_reason"] = log.abort_reason;
  j["interactions"] = log.metrics.rounds() == 0 ? 0 : [&] {
    std::uint64_t n = 0;
    for (std::size_t r = 0; r < log.metrics.rounds(); ++r) n += log.metrics.interactions_in(r);
    return n;
  }();
  j["complete_rounds"] = log.metrics.complete_rounds();
  j["consensus"] = log.consensus ? json(log.config.pool.token(*log.consensus)) : json(nullptr);
  j["last_failure"] = log.last_failure;
  j["flip"] = log.flip ? json{{"flipped", log.flip->flipped},
                              {"interaction", log.flip->interaction ? json(*log.flip->interaction)
                                                                    : json(nullptr)}}
                       : json(nullptr);
  j["success_rates"] = log.metrics.success_rates();
  j["fallback_rate"] = log.fallback_rate;
  return j;
}

void write_metrics_csv(std::ostream& out, const RunLog& log) {
  const auto& m = log.metrics;
  out << "round,interactions,success_rate";
  for (const auto& t : log.config.pool.tokens()) out << ',' << t;
  out << '\n';
  for (std::size_t r = 0; r < m.rounds(); ++r) {
    out << r + 1 << ',' << m.interactions_in(r) << ',' << fmt(m.success_rate(r));
    for (auto c : m.name_counts(r)) out << ',' << c;
    out << '\n';
  }
}

std::string log_hash(const RunLog& log) {
  std::ostringstream s;
  s << to_json(log.config).dump() << '\n';
  write_events(s, log);
  return sha256_hex(s.str());
}

// --- experiment results ----------------------------------------------------

json to_json(const stats::TestResult& r) {
  return {{"test", r.test},
          {"statistic", r.statistic},
          {"p_value", r.p_value},
          {"sample_size", r.sample_size},
          {"null_hypothesis", r.null_hypothesis},
          {"degrees_of_freedom", r.degrees_of_freedom}};
}

namespace {

json counts_by_name(const NamePool& pool, std::span<const std::uint64_t> counts) {
  json j = json::object();
  for (std::size_t i = 0; i < counts.size(); ++i) j[pool.token(name_at(i))] = counts[i];
  return j;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const BiasProbeResult& r) {
  return {{"schema_version", kSchemaVersion},
          {"trials", r.trials},
          {"fallbacks", r.fallbacks},
          {"counts", counts_by_name(r.pool, r.counts)},
          {"test", to_json(r.test)}};
}

json to_json(const ConsensusDistribution& r) {
  return {{"schema_version", kSchemaVersion},
          {"runs", r.runs},
          {"counts", counts_by_name(r.pool, r.counts)},
          {"not_converged", r.not_converged},
          {"aborted", r.aborted},
          {"mean_convergence_time", r.mean_convergence_time()},
          {"test", to_json(r.test)}};
}

json to_json(const MicrodynamicsTable& t) {
  json levels = json::array();
  for (const auto& level : t.levels) {
    json configs = json::array();
    for (const auto& c : level.configurations) {
      configs.push_back({{"configuration", c.key},
                         {"observed", c.observed()},
                         {"occurrences", c.occurrences},
                         {"samples", c.samples},
                         {"designated", c.designated},
                         {"probability", optional_json(c.probability)},
                         {"p_binomial", optional_json(c.p_binomial)},
                         {"p_bootstrap", optional_json(c.p_bootstrap)}});
    }
    levels.push_back({{"interaction", level.interaction},
                      {"aggregate", level.aggregate},
                      {"total", level.total},
                      {"aggregate_test", to_json(level.aggregate_test)},
                      {"configurations", configs}});
  }
  return {{"schema_version", kSchemaVersion},
          {"designated", t.pool.token(t.designated)},
          {"first_round_counts", counts_by_name(t.pool, t.first_round_counts)},
          {"levels", levels}};
}

json to_json(const StabilityResult& r) {
  return {{"schema_version", kSchemaVersion},
          {"consensus", r.log.config.pool.token(r.consensus)},
          {"status", to_string(r.log.status)},
          {"abort_reason", r.log.abort_reason},
          {"stable", r.stable()},
          {"minimum", r.minimum},
          {"production", r.production}};
}

json to_json(const CriticalMassResult& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json times = json::array();
    for (const auto& t : p.flip_times) times.push_back(optional_json(t));
    points.push_back({{"committed", p.committed},
                      {"seeds", p.seeds},
                      {"flips", p.flips},
                      {"aborted", p.aborted},
                      {"flip_fraction", p.flip_fraction()},
                      {"flip_times", times}});
  }
  return {{"schema_version", kSchemaVersion},
          {"majority", r.majority},
          {"minority", r.minority},
          {"required_fraction", r.required_fraction},
          {"critical", r.critical ? json(*r.critical) : json("not found in range")},
          {"monotonicity_violations", r.monotonicity_violations},
          {"points", points}};
}

json to_json(const ComprehensionReport& r) {
  json types = json::object();
  for (const auto& [type, tally] : r.tallies) {
    types[to_string(type)] = {{"category", category_of(type)},
                              {"asked", tally.asked},
                              {"correct", tally.correct},
                              {"accuracy", tally.accuracy()}};
  }
  json categories = json::object();
  for (const char* c : {"rules", "time", "state"}) categories[c] = r.category_accuracy(c);
  return {{"schema_version", kSchemaVersion},
          {"agent", r.agent},
          {"interactions", r.interactions},
          {"questions", types},
          {"categories", categories}};
}

// --- figure data -------------------------------------------------------------

const char* to_string(Figure f) {
  switch (f) {
    case Figure::success_rate: return "success-rate";
    case Figure::name_counts: return "name-counts";
    case Figure::consensus: return "consensus";
    case Figure::production: return "production";
    case Figure::critical_mass: return "critical-mass";
  }
  return "?";
}

Figure parse_figure(std::string_view text) {
  for (Figure f : {Figure::success_rate, Figure::name_counts, Figure::consensus,
                   Figure::production, Figure::critical_mass}) {
    if (text == to_string(f)) return f;
  }
  throw ConfigError("unknown figure kind: " + std::string(text));
}

void require_uniform(std::span<const RunLog> logs) {
  if (logs.empty()) return;
  const TrialConfig& first = logs.front().config;
  for (const auto& log : logs) {
    if (log.config.schema_version != first.schema_version) {
      throw ConfigError("logs mix schema versions " + std::to_string(first.schema_version) +
                        " and " + std::to_string(log.config.schema_version));
    }
    if (!(log.config.pool == first.pool) ||
        log.config.population_size != first.population_size) {
      throw ConfigError("logs mix populations or name pools");
    }
  }
}

void export_success_rate(std::ostream& out, std::span<const RunLog> logs) {
  export_per_round(out, logs,
                   [](const RunLog& log, std::size_t r) { return log.metrics.success_rate(r); });
}

void export_name_counts(std::ostream& out, const RunLog& log) {
  const auto& m = log.metrics;
  out << "bin";
  for (const auto& t : log.config.pool.tokens()) out << ',' << t;
  out << '\n';
  for (std::size_t r = 0; r < m.complete_rounds(); ++r) {
    out << r + 1;
    for (auto c : m.name_counts(r)) out << ',' << c;
    out << '\n';
  }
}

void export_consensus(std::ostream& out, std::span<const RunLog> logs) {
  require_uniform(logs);
  if (logs.empty()) {
    out << "name,count\n";
    return;
  }
  const NamePool& pool = logs.front().config.pool;
  std::vector<std::uint64_t> counts(pool.size(), 0);
  std::uint64_t none = 0;
  for (const auto& log : logs) {
    if (log.consensus) {
      ++counts[index_of(*log.consensus)];
    } else {
      ++none;
    }
  }
  out << "name,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) out << pool.token(name_at(i)) << ',' << counts[i] << '\n';
  out << "not_converged," << none << '\n';
}

void export_production(std::ostream& out, std::span<const RunLog> logs, NameId name) {
  export_per_round(out, logs, [name](const RunLog& log, std::size_t r) {
    return log.metrics.production_probability(name, r);
  });
}

void export_critical_mass(std::ostream& out, const CriticalMassResult& r) {
  out << "committed,seeds,flips,aborted,flip_fraction,critical,flip_times\n";
  for (const auto& p : r.points) {
    out << p.committed << ',' << p.seeds << ',' << p.flips << ',' << p.aborted << ','
        << fmt(p.flip_fraction()) << ',' << (r.critical == p.committed ? 1 : 0) << ',';
    for (std::size_t i = 0; i < p.flip_times.size(); ++i) {
      if (i) out << ';';
      if (p.flip_times[i]) {
        out << *p.flip_times[i];
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
}

CriticalMassResult read_critical_mass(std::istream& in, const std::string& majority,
                                      const std::string& minority, double required_fraction) {
  CriticalMassResult r;
  r.majority = majority;
  r.minority = minority;
  r.required_fraction = required_fraction;
  std::string line;
  std::getline(in, line);
  if (trim(line) != "committed,seeds,flips,aborted,flip_fraction,critical,flip_times") {
    throw ConfigError("not a critical-mass table");
  }
  std::vector<bool> met;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 7) throw ConfigError("critical-mass row has " + std::to_string(cells.size()) + " cells");
    CriticalMassPoint p;
    p.committed = require_u64(cells[0], "committed");
    p.seeds = require_u64(cells[1], "seeds");
    p.flips = require_u64(cells[2], "flips");
    p.aborted = require_u64(cells[3], "aborted");
    if (require_u64(cells[5], "critical") == 1) r.critical = p.committed;
    if (!cells[6].empty()) {
      for (const auto& t : split(cells[6], ';')) {
        p.flip_times.push_back(t == "-" ? std::nullopt
                                        : std::optional<std::uint64_t>(require_u64(t, "flip time")));
      }
    }
    r.points.push_back(std::move(p));
  }
  const auto needed = [&](const CriticalMassPoint& p) {
    return p.flips >= static_cast<std::size_t>(
                          std::ceil(required_fraction * static_cast<double>(p.seeds) - 1e-9));
  };
  for (std::size_t i = 0; i + 1 < r.points.size(); ++i) {
    if (needed(r.points[i]) && !needed(r.points[i + 1])) {
      r.monotonicity_violations.push_back(r.points[i].committed);
    }
  }
  return r;
}

std::vector<std::pair<std::string, std::uint64_t>> read_counts_csv(std::istream& in) {
  std::vector<std::pair<std::string, std::uint64_t>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2) throw ConfigError("expected 'name,count' rows, got '" + line + "'");
    const auto count = to_u64(trim(cells[1]));
    if (!count) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("bad count in row '" + line + "'");
    }
    first = false;
    rows.emplace_back(trim(cells[0]), *count);
  }
  return rows;
}

// --- run directory and manifest -----------------------------------------------

json RunManifest::to_json() const {
  json files = json::array();
  for (const auto& a : artifacts) {
    files.push_back({{"path", a.path}, {"git_sha1", a.git_sha1}, {"bytes", a.bytes}});
  }
  return {{"schema_version", schema_version},
          {"experiment", experiment},
          {"argv", argv},
          {"config", config},
          {"master_seed", master_seed},
          {"started", started},
          {"finished", finished},
          {"status", status},
          {"error", error},
          {"artifacts", files}};
}

RunManifest RunManifest::from_json(const json& j) {
  return guarded("manifest", [&] {
    RunManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    m.experiment = j.at("experiment").get<std::string>();
    m.argv = j.value("argv", std::vector<std::string>{});
    m.config = j.value("config", json());
    m.master_seed = j.value("master_seed", std::uint64_t{0});
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.status = j.value("status", "ok");
    m.error = j.value("error", json());
    for (const auto& a : j.value("artifacts", json::array())) {
      m.artifacts.push_back({a.at("path").get<std::string>(), a.at("git_sha1").get<std::string>(),
                             a.at("bytes").get<std::uintmax_t>()});
    }
    return m;
  });
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& out, const std::string& experiment) {
  std::string stamp = utc_timestamp();
  std::erase(stamp, '-');
  std::erase(stamp, ':');
  const fs::path base = out / experiment / stamp;
  fs::path dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, RunManifest manifest) {
  manifest.artifacts.clear();
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    manifest.artifacts.push_back(
        {fs::relative(f, dir).generic_string(), git_blob_sha1_file(f), fs::file_size(f)});
  }
  if (manifest.finished.empty()) manifest.finished = utc_timestamp();
  write_text(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace convgame::io
