#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "convgame/comprehension.hpp"
#include "convgame/errors.hpp"
#include "convgame/experiments.hpp"
#include "convgame/io.hpp"
#include "convgame/llm.hpp"

namespace fs = std::filesystem;
using namespace convgame;
using nlohmann::json;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, transport_error = 3, aborted_trials = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t runs = 0;
  std::string transport = "mock";
  std::string replay;
  std::size_t threads = 0;
};

// Owns the inner transport and the transcript file it is recorded to.
class RecordedTransport final : public Transport {
 public:
  RecordedTransport(std::unique_ptr<Transport> inner, const fs::path& path)
      : inner_(std::move(inner)), out_(path), recorder_(*inner_, out_) {
    if (!out_) throw ConfigError("cannot write transcript " + path.string());
  }
  std::string send(const ChatRequest& request) override { return recorder_.send(request); }

 private:
  std::unique_ptr<Transport> inner_;
  std::ofstream out_;
  RecordingTransport recorder_;
};

TrialConfig load(const Globals& g, bool required) {
  TrialConfig c;
  if (!g.config.empty()) {
    c = io::load_config(g.config);
  } else if (required) {
    throw ConfigError("--config is required for this subcommand");
  }
  if (g.seed) c.master_seed = *g.seed;
  c.validate();
  return c;
}

fs::path transcript_name(std::uint64_t trial) {
  return "transcript-" + std::to_string(trial) + ".jsonl";
}

TransportFactory make_factory(const Globals& g, const TrialConfig& c, const fs::path& dir) {
  if (g.transport == "mock") {
    const std::uint64_t seed = c.master_seed;
    return [seed, dir](std::uint64_t trial) -> std::unique_ptr<Transport> {
      return std::make_unique<RecordedTransport>(
          std::make_unique<HeuristicMockTransport>(derive_seed(seed, {trial})), dir / transcript_name(trial));
    };
  }
  if (g.transport == "live") {
    const LlmParams params = c.llm;
    return [params, dir](std::uint64_t trial) -> std::unique_ptr<Transport> {
      return std::make_unique<RecordedTransport>(std::make_unique<LiveTransport>(params),
                                                 dir / transcript_name(trial));
    };
  }
  if (g.replay.empty()) throw ConfigError("--transport replay needs --replay PATH");
  const fs::path source = g.replay;
  return [source](std::uint64_t trial) -> std::unique_ptr<Transport> {
    const fs::path file = fs::is_directory(source) ? source / transcript_name(trial) : source;
    return std::make_unique<ReplayTransport>(ReplayTransport::from_file(file));
  };
}

bool uses_llm(const TrialConfig& c) {
  if (c.policy.kind == PolicyKind::llm) return true;
  for (const auto& [id, spec] : c.agent_policies) {
    if (spec.kind == PolicyKind::llm) return true;
  }
  return false;
}

// One transport and session for experiments that drive a single population.
struct SingleSession {
  std::unique_ptr<Transport> transport;
  std::unique_ptr<LlmSession> session;

  SingleSession(const Globals& g, const TrialConfig& c, const fs::path& dir, bool needed) {
    if (!needed) return;
    transport = make_factory(g, c, dir)(c.trial_index);
    session = std::make_unique<LlmSession>(*transport, c.llm, c.pool, c.payoffs);
  }
  LlmSession* get() { return session.get(); }
};

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

template <class F>
void write_stream(const fs::path& path, F&& body) {
  std::ostringstream ss;
  body(ss);
  io::write_text(path, ss.str());
}

struct Context {
  Globals g;
  fs::path dir;
  io::RunManifest manifest;
};

int cmd_simulate(Context& ctx) {
  TrialConfig c = load(ctx.g, true);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  const std::size_t runs = ctx.g.runs ? ctx.g.runs : 1;
  EnsembleOptions opt;
  opt.threads = ctx.g.threads;
  if (uses_llm(c)) opt.transports = make_factory(ctx.g, c, ctx.dir);
  write_json(ctx.dir / "config.json", io::to_json(c));

  const auto logs = run_ensemble(c, runs, opt);
  json result = json::array();
  bool any_aborted = false;
  for (const auto& log : logs) {
    const auto i = log.config.trial_index;
    write_stream(ctx.dir / ("events-" + std::to_string(i) + ".jsonl"), [&](auto& o) { io::write_events(o, log); });
    write_stream(ctx.dir / ("metrics-" + std::to_string(i) + ".csv"), [&](auto& o) { io::write_metrics_csv(o, log); });
    auto s = io::summary(log);
    s["log_hash"] = io::log_hash(log);
    result.push_back(s);
    any_aborted = any_aborted || log.status == TrialStatus::aborted;
  }
  write_stream(ctx.dir / "metrics.csv", [&](auto& o) { io::export_success_rate(o, logs); });
  write_stream(ctx.dir / "consensus.csv", [&](auto& o) { io::export_consensus(o, logs); });
  write_json(ctx.dir / "result.json", result);
  if (any_aborted) {
    ctx.manifest.status = "aborted";
    ctx.manifest.error = {{"error", "aborted_trials"}, {"message", "one or more trials aborted"}};
    std::cerr << ctx.manifest.error.dump() << "\n";
    return aborted_trials;
  }
  return ok;
}

int cmd_probe(Context& ctx) {
  TrialConfig c = load(ctx.g, false);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  const std::uint64_t trials = ctx.g.runs ? ctx.g.runs : 10'000;
  SingleSession s(ctx.g, c, ctx.dir, c.policy.kind == PolicyKind::llm);
  const auto r = probe_first_round_bias(c.policy, c.pool, trials, c.master_seed, s.get());
  write_stream(ctx.dir / "counts.csv", [&](auto& o) {
    o << "name,count\n";
    for (std::size_t i = 0; i < r.counts.size(); ++i) o << r.pool.token(name_at(i)) << ',' << r.counts[i] << '\n';
  });
  const json j = io::to_json(r);
  write_json(ctx.dir / "result.json", j);
  std::cout << j.dump(2) << "\n";
  return ok;
}

int cmd_microdynamics(Context& ctx, const std::string& designated, const MicrodynamicsOptions& opt) {
  TrialConfig c = load(ctx.g, false);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  SingleSession s(ctx.g, c, ctx.dir, c.policy.kind == PolicyKind::llm);
  const std::string target = designated.empty() ? c.pool.tokens().front() : designated;
  const auto t = build_microdynamics_table(c.policy, c.pool, target, c.master_seed, opt, s.get());
  const json j = io::to_json(t);
  write_json(ctx.dir / "result.json", j);
  std::cout << j.dump(2) << "\n";
  return ok;
}

int cmd_stability(Context& ctx) {
  TrialConfig c = load(ctx.g, true);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  SingleSession s(ctx.g, c, ctx.dir, uses_llm(c));
  const auto r = run_stability(c, s.get());
  write_stream(ctx.dir / "events-0.jsonl", [&](auto& o) { io::write_events(o, r.log); });
  write_stream(ctx.dir / "metrics.csv", [&](auto& o) { io::write_metrics_csv(o, r.log); });
  write_stream(ctx.dir / "production.csv", [&](auto& o) {
    io::export_production(o, std::span<const RunLog>(&r.log, 1), r.consensus);
  });
  write_json(ctx.dir / "result.json", io::to_json(r));
  std::cout << io::to_json(r).dump(2) << "\n";
  return r.log.status == TrialStatus::aborted ? aborted_trials : ok;
}

struct SweepArgs {
  std::string majority;
  std::string minority;
  std::size_t c_min = 0;
  std::size_t c_max = 0;
  double required_fraction = 1.0;
  bool stop_at_first = false;
};

int cmd_sweep(Context& ctx, const SweepArgs& a) {
  TrialConfig c = load(ctx.g, false);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  const auto tokens = c.pool.tokens();
  SweepOptions opt;
  opt.c_min = a.c_min;
  opt.c_max = a.c_max;
  opt.seeds = ctx.g.runs ? ctx.g.runs : 10;
  opt.required_fraction = a.required_fraction;
  opt.stop_at_first = a.stop_at_first;
  opt.threads = ctx.g.threads;
  if (uses_llm(c)) opt.transports = make_factory(ctx.g, c, ctx.dir);
  if (opt.c_max > c.population_size) {
    throw ConfigError("committed count " + std::to_string(opt.c_max) + " exceeds population size " +
                      std::to_string(c.population_size));
  }
  const auto r = sweep_committed_minority(c, a.majority.empty() ? tokens.at(0) : a.majority,
                                          a.minority.empty() ? tokens.at(1) : a.minority, opt);
  write_stream(ctx.dir / "critical_mass.csv", [&](auto& o) { io::export_critical_mass(o, r); });
  const json j = io::to_json(r);
  write_json(ctx.dir / "result.json", j);
  std::cout << j.dump(2) << "\n";
  return ok;
}

struct MetaArgs {
  std::string events;
  std::size_t agent = 0;
  std::size_t memory_length = 0;
  std::string responder = "oracle";
};

int cmd_metaprompt(Context& ctx, const MetaArgs& a) {
  TrialConfig c = load(ctx.g, true);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  std::ifstream in(a.events);
  if (!in) throw ConfigError("cannot open events file " + a.events);
  const RunLog log = io::rebuild_log(c, io::read_events(in, c.pool));
  std::unique_ptr<Transport> transport;
  if (a.responder == "oracle") {
    transport = std::make_unique<ComprehensionOracleTransport>();
  } else if (a.responder == "scrambled") {
    transport = std::make_unique<ScrambledTransport>(c.master_seed);
  } else {
    transport = make_factory(ctx.g, c, ctx.dir)(c.trial_index);
  }
  const std::size_t memory = a.memory_length ? a.memory_length : c.memory_length;
  const auto report = run_comprehension_suite(log, a.agent, memory, *transport, c.llm, c.master_seed);
  const json j = io::to_json(report);
  write_json(ctx.dir / "result.json", j);
  std::cout << j.dump(2) << "\n";
  return ok;
}

struct StatsArgs {
  std::string counts;
  std::optional<std::uint64_t> k;
  std::optional<std::uint64_t> n;
  double p0 = 0.5;
};

int cmd_stats(Context& ctx, const StatsArgs& a) {
  json j;
  if (!a.counts.empty()) {
    std::ifstream in(a.counts);
    if (!in) throw ConfigError("cannot open counts file " + a.counts);
    const auto rows = io::read_counts_csv(in);
    std::vector<std::uint64_t> counts;
    j["counts"] = json::object();
    for (const auto& [name, count] : rows) {
      if (name == "not_converged") continue;
      counts.push_back(count);
      j["counts"][name] = count;
    }
    if (counts.size() < 2) throw ConfigError("need at least two categories in " + a.counts);
    j["test"] = io::to_json(bias_test(counts));
  } else if (a.k && a.n) {
    try {
      j["test"] = io::to_json(stats::binom_exact_two_tailed(*a.k, *a.n, a.p0));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("stats needs --counts FILE or --k and --n");
  }
  write_json(ctx.dir / "result.json", j);
  std::cout << j.dump(2) << "\n";
  return ok;
}

struct ExportArgs {
  std::string kind;
  std::vector<std::string> inputs;
  std::string name;
  std::string majority;
  std::string minority;
  double required_fraction = 1.0;
};

int cmd_export(Context& ctx, const ExportArgs& a) {
  const io::Figure figure = io::parse_figure(a.kind);
  const fs::path target = ctx.dir / (std::string(io::to_string(figure)) + ".csv");
  if (figure == io::Figure::critical_mass) {
    if (a.inputs.size() != 1) throw ConfigError("critical-mass export takes one CSV input");
    std::ifstream in(a.inputs.front());
    if (!in) throw ConfigError("cannot open " + a.inputs.front());
    const auto r = io::read_critical_mass(in, a.majority, a.minority, a.required_fraction);
    write_stream(target, [&](auto& o) { io::export_critical_mass(o, r); });
    return ok;
  }
  const TrialConfig c = load(ctx.g, true);
  ctx.manifest.config = io::to_json(c);
  ctx.manifest.master_seed = c.master_seed;
  std::vector<RunLog> logs;
  for (const auto& path : a.inputs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    auto events = io::read_events(in, c.pool);
    TrialConfig ci = c;
    if (!events.empty()) ci.trial_index = events.front().trial_id;
    logs.push_back(io::rebuild_log(ci, std::move(events)));
  }
  if (logs.empty()) throw ConfigError("export needs at least one --input");
  io::require_uniform(logs);
  write_stream(target, [&](auto& o) {
    switch (figure) {
      case io::Figure::success_rate: io::export_success_rate(o, logs); break;
      case io::Figure::name_counts: io::export_name_counts(o, logs.front()); break;
      case io::Figure::consensus: io::export_consensus(o, logs); break;
      case io::Figure::production:
        io::export_production(o, logs, c.pool.require(a.name.empty() ? c.pool.tokens().front() : a.name));
        break;
      case io::Figure::critical_mass: break;
    }
  });
  return ok;
}

json error_json(const std::string& kind, const std::string& message) {
  return {{"error", kind}, {"message", message}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convention formation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  Globals& g = ctx.g;
  app.add_option("--config", g.config, "Trial configuration JSON");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output root directory");
  app.add_option("--runs", g.runs, "Runs, trials or seeds, depending on the subcommand");
  app.add_option("--transport", g.transport, "LLM transport")->check(CLI::IsMember({"live", "replay", "mock"}));
  app.add_option("--replay", g.replay, "Transcript file or directory for --transport replay");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  auto* simulate = app.add_subcommand("simulate", "Run one trial or an ensemble");
  auto* probe = app.add_subcommand("probe-bias", "First-round bias probe");

  auto* micro = app.add_subcommand("microdynamics", "Early-interaction production table");
  std::string designated;
  MicrodynamicsOptions micro_opt;
  micro->add_option("--designated", designated, "Name whose production is tabulated");
  micro->add_option("--cohort", micro_opt.cohort);
  micro->add_option("--samples", micro_opt.samples);
  micro->add_option("--depth", micro_opt.depth);
  micro->add_option("--resamples", micro_opt.bootstrap.resamples);

  auto* stability = app.add_subcommand("stability", "Consensus stability from a full-consensus start");

  auto* sweep = app.add_subcommand("sweep-cm", "Committed-minority critical-mass sweep");
  SweepArgs sweep_args;
  sweep->add_option("--majority", sweep_args.majority);
  sweep->add_option("--minority", sweep_args.minority);
  sweep->add_option("--c-min", sweep_args.c_min);
  sweep->add_option("--c-max", sweep_args.c_max);
  sweep->add_option("--required-fraction", sweep_args.required_fraction);
  sweep->add_flag("--stop-at-first", sweep_args.stop_at_first);

  auto* meta = app.add_subcommand("metaprompt", "Prompt-comprehension questions over a recorded game");
  MetaArgs meta_args;
  meta->add_option("--events", meta_args.events, "Events JSONL of a simultaneous-mode trial")->required();
  meta->add_option("--agent", meta_args.agent);
  meta->add_option("--memory-length", meta_args.memory_length);
  meta->add_option("--responder", meta_args.responder)
      ->check(CLI::IsMember({"oracle", "scrambled", "transport"}));

  auto* stats_cmd = app.add_subcommand("stats", "Binomial or chi-squared test on counts");
  StatsArgs stats_args;
  stats_cmd->add_option("--counts", stats_args.counts, "CSV of name,count rows");
  stats_cmd->add_option("--k", stats_args.k);
  stats_cmd->add_option("--n", stats_args.n);
  stats_cmd->add_option("--p0", stats_args.p0);

  auto* exporter = app.add_subcommand("export-figure", "Figure-shaped CSV from logs");
  ExportArgs export_args;
  exporter->add_option("--kind", export_args.kind)->required();
  exporter->add_option("--input", export_args.inputs)->required();
  exporter->add_option("--name", export_args.name);
  exporter->add_option("--majority", export_args.majority);
  exporter->add_option("--minority", export_args.minority);
  exporter->add_option("--required-fraction", export_args.required_fraction);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << error_json("usage", e.what()).dump() << "\n";
    return code == 0 ? ok : config_error;
  }

  CLI::App* chosen = app.get_subcommands().front();
  ctx.manifest.experiment = chosen->get_name();
  ctx.manifest.argv.assign(argv, argv + argc);
  ctx.manifest.started = io::utc_timestamp();
  try {
    ctx.dir = io::make_run_dir(g.out, ctx.manifest.experiment);
  } catch (const std::exception& e) {
    std::cerr << error_json("io", e.what()).dump() << "\n";
    return failure;
  }

  int code = ok;
  try {
    if (chosen == simulate) code = cmd_simulate(ctx);
    else if (chosen == probe) code = cmd_probe(ctx);
    else if (chosen == micro) code = cmd_microdynamics(ctx, designated, micro_opt);
    else if (chosen == stability) code = cmd_stability(ctx);
    else if (chosen == sweep) code = cmd_sweep(ctx, sweep_args);
    else if (chosen == meta) code = cmd_metaprompt(ctx, meta_args);
    else if (chosen == stats_cmd) code = cmd_stats(ctx, stats_args);
    else if (chosen == exporter) code = cmd_export(ctx, export_args);
  } catch (const TransportError& e) {
    ctx.manifest.error = error_json("transport", e.what());
    code = transport_error;
  } catch (const ConfigError& e) {
    ctx.manifest.error = error_json("config", e.what());
    code = config_error;
  } catch (const PoolMembershipError& e) {
    ctx.manifest.error = error_json("config", e.what());
    code = config_error;
  } catch (const nlohmann::json::exception& e) {
    ctx.manifest.error = error_json("config", e.what());
    code = config_error;
  } catch (const std::exception& e) {
    ctx.manifest.error = error_json("internal", e.what());
    code = failure;
  }
  if (code != ok && !ctx.manifest.error.is_null() && ctx.manifest.status == "ok") {
    ctx.manifest.status = "error";
    std::cerr << ctx.manifest.error.dump() << "\n";
  }
  ctx.manifest.finished = io::utc_timestamp();
  try {
    io::write_manifest(ctx.dir, ctx.manifest);
  } catch (const std::exception& e) {
    std::cerr << error_json("io", e.what()).dump() << "\n";
    return code == ok ? failure : code;
  }
  std::cerr << "run directory: " << ctx.dir.string() << "\n";
  return code;
}
