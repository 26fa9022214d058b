#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "convgame/errors.hpp"
#include "convgame/experiments.hpp"
#include "convgame/io.hpp"
#include "convgame/llm.hpp"

namespace py = pybind11;
using namespace convgame;
using nlohmann::json;

namespace {

// Configs and results cross the boundary as JSON text; the Python package
// turns them into dicts.
TrialConfig parse_config(const std::string& text) {
  return io::config_from_json(json::parse(text));
}

TransportFactory mock_factory(std::uint64_t seed) {
  return [seed](std::uint64_t trial) -> std::unique_ptr<Transport> {
    return std::make_unique<HeuristicMockTransport>(derive_seed(seed, {trial}));
  };
}

bool uses_llm(const TrialConfig& c) {
  if (c.policy.kind == PolicyKind::llm) return true;
  for (const auto& [id, spec] : c.agent_policies) {
    if (spec.kind == PolicyKind::llm) return true;
  }
  return false;
}

json log_json(const RunLog& log, bool events) {
  json j = io::summary(log);
  j["log_hash"] = io::log_hash(log);
  if (events) {
    j["events"] = json::array();
    for (const auto& e : log.events) j["events"].push_back(io::to_json(e, log.config.pool));
  }
  return j;
}

std::string run_trial_json(const std::string& config, bool events, std::uint64_t mock_seed) {
  const TrialConfig c = parse_config(config);
  EnsembleOptions opt;
  opt.threads = 1;
  opt.keep_events = events;
  if (uses_llm(c)) opt.transports = mock_factory(mock_seed);
  py::gil_scoped_release release;
  return log_json(run_ensemble(c, 1, opt).front(), events).dump();
}

std::string run_ensemble_json(const std::string& config, std::size_t runs, std::size_t threads,
                              std::uint64_t mock_seed) {
  const TrialConfig c = parse_config(config);
  EnsembleOptions opt;
  opt.threads = threads;
  opt.keep_events = false;
  if (uses_llm(c)) opt.transports = mock_factory(mock_seed);
  py::gil_scoped_release release;
  json out = json::array();
  for (const auto& log : run_ensemble(c, runs, opt)) out.push_back(log_json(log, false));
  return out.dump();
}

std::string probe_json(const std::string& config, std::uint64_t trials, std::uint64_t seed) {
  const TrialConfig c = parse_config(config);
  py::gil_scoped_release release;
  return io::to_json(probe_first_round_bias(c.policy, c.pool, trials, seed)).dump();
}

std::string consensus_json(const std::string& config, std::size_t runs, std::size_t threads) {
  const TrialConfig c = parse_config(config);
  py::gil_scoped_release release;
  return io::to_json(consensus_distribution(c, runs, {.threads = threads, .keep_events = false, .transports = {}}))
      .dump();
}

std::string microdynamics_json(const std::string& config, const std::string& designated, std::size_t cohort,
                               std::size_t samples, std::size_t depth, std::size_t resamples) {
  const TrialConfig c = parse_config(config);
  MicrodynamicsOptions opt;
  opt.cohort = cohort;
  opt.samples = samples;
  opt.depth = depth;
  opt.bootstrap.resamples = resamples;
  opt.run_bootstrap = resamples > 0;
  py::gil_scoped_release release;
  return io::to_json(build_microdynamics_table(c.policy, c.pool, designated, c.master_seed, opt)).dump();
}

std::string stability_json(const std::string& config) {
  const TrialConfig c = parse_config(config);
  py::gil_scoped_release release;
  return io::to_json(run_stability(c)).dump();
}

std::string sweep_json(const std::string& config, const std::string& majority, const std::string& minority,
                       std::size_t seeds, std::size_t c_min, std::size_t c_max, double required_fraction,
                       std::size_t threads) {
  const TrialConfig c = parse_config(config);
  SweepOptions opt;
  opt.seeds = seeds;
  opt.c_min = c_min;
  opt.c_max = c_max;
  opt.required_fraction = required_fraction;
  opt.threads = threads;
  py::gil_scoped_release release;
  return io::to_json(sweep_committed_minority(c, majority, minority, opt)).dump();
}

py::tuple build_prompt_py(const std::vector<std::string>& pool_tokens,
                          const std::vector<std::pair<std::string, std::string>>& history,
                          const std::vector<std::string>& order, std::uint64_t round_index,
                          std::size_t memory_length, int reward, int penalty, int total_rounds) {
  const NamePool pool(pool_tokens);
  const PayoffRule payoffs{reward, penalty};
  MemoryWindow memory(memory_length);
  std::uint64_t r = round_index > history.size() ? round_index - history.size() : 1;
  for (const auto& [own, partner] : history) {
    memory.append(InteractionRecord::make(r++, pool.require(own), pool.require(partner), payoffs));
  }
  std::vector<NameId> ids;
  for (const auto& t : order) ids.push_back(pool.require(t));
  const auto b = build_prompt(pool, payoffs, total_rounds, memory, ids, round_index, memory.score());
  return py::make_tuple(b.system, b.user);
}

}  // namespace

PYBIND11_MODULE(_convgame, m) {
  m.doc() = "Naming-game population simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PoolMembershipError>(m, "PoolMembershipError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_RuntimeError);

  m.attr("schema_version") = kSchemaVersion;

  m.def("default_config", [] { return io::to_json(TrialConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) { return io::to_json(parse_config(text)).dump(); });
  m.def("run_trial", &run_trial_json, py::arg("config"), py::arg("events") = true, py::arg("mock_seed") = 0);
  m.def("run_ensemble", &run_ensemble_json, py::arg("config"), py::arg("runs"), py::arg("threads") = 0,
        py::arg("mock_seed") = 0);
  m.def("probe_first_round_bias", &probe_json, py::arg("config"), py::arg("trials"), py::arg("seed"));
  m.def("consensus_distribution", &consensus_json, py::arg("config"), py::arg("runs"), py::arg("threads") = 0);
  m.def("microdynamics", &microdynamics_json, py::arg("config"), py::arg("designated"), py::arg("cohort") = 5000,
        py::arg("samples") = 10000, py::arg("depth") = 3, py::arg("resamples") = 10000);
  m.def("run_stability", &stability_json, py::arg("config"));
  m.def("sweep_committed_minority", &sweep_json, py::arg("config"), py::arg("majority"), py::arg("minority"),
        py::arg("seeds") = 10, py::arg("c_min") = 0, py::arg("c_max") = 0, py::arg("required_fraction") = 1.0,
        py::arg("threads") = 0);

  m.def("binom_test", [](std::uint64_t k, std::uint64_t n, double p0) {
    return io::to_json(stats::binom_exact_two_tailed(k, n, p0)).dump();
  }, py::arg("k"), py::arg("n"), py::arg("p0") = 0.5);
  m.def("chi2_uniform", [](const std::vector<std::uint64_t>& counts) {
    return io::to_json(stats::chi2_uniform(counts)).dump();
  }, py::arg("counts"));
  m.def("chi2_survival", &stats::chi2_survival, py::arg("x"), py::arg("df"));

  m.def("build_prompt", &build_prompt_py, py::arg("pool"), py::arg("history"), py::arg("order"),
        py::arg("round_index"), py::arg("memory_length") = 5, py::arg("reward") = 100, py::arg("penalty") = -50,
        py::arg("total_rounds") = 100);
  m.def("parse_response", [](const std::string& raw, const std::vector<std::string>& pool) {
    const NamePool p(pool);
    return p.token(parse_response(raw, p));
  }, py::arg("raw"), py::arg("pool"));
  m.def("render_answer", &render_answer, py::arg("name"), py::arg("reason"));
}
