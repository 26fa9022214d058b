"""Naming-game population simulator.

Configurations are plain dicts in the same shape as the CLI's JSON files;
missing keys take their defaults.
"""

import json

try:
    from . import _convgame as _core
except ImportError:  # in-tree build: the extension sits next to the package
    import _convgame as _core

ConfigError = _core.ConfigError
PoolMembershipError = _core.PoolMembershipError
ParseError = _core.ParseError
TransportError = _core.TransportError
SCHEMA_VERSION = _core.schema_version

__all__ = [
    "ConfigError",
    "ParseError",
    "PoolMembershipError",
    "SCHEMA_VERSION",
    "TransportError",
    "binom_test",
    "build_prompt",
    "chi2_survival",
    "chi2_uniform",
    "consensus_distribution",
    "default_config",
    "microdynamics",
    "normalize_config",
    "parse_response",
    "probe_first_round_bias",
    "render_answer",
    "run_ensemble",
    "run_stability",
    "run_trial",
    "sweep_committed_minority",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def normalize_config(config):
    """Fill in defaults and validate."""
    return json.loads(_core.normalize_config(_dump(config)))


def run_trial(config, events=True, mock_seed=0):
    """One trial. LLM policies run against the offline mock transport."""
    return json.loads(_core.run_trial(_dump(config), events, mock_seed))


def run_ensemble(config, runs, threads=0, mock_seed=0):
    return json.loads(_core.run_ensemble(_dump(config), runs, threads, mock_seed))


def probe_first_round_bias(config, trials, seed=0):
    return json.loads(_core.probe_first_round_bias(_dump(config), trials, seed))


def consensus_distribution(config, runs, threads=0):
    return json.loads(_core.consensus_distribution(_dump(config), runs, threads))


def microdynamics(config, designated, cohort=5000, samples=10000, depth=3, resamples=10000):
    return json.loads(_core.microdynamics(_dump(config), designated, cohort, samples, depth, resamples))


def run_stability(config):
    return json.loads(_core.run_stability(_dump(config)))


def sweep_committed_minority(config, majority, minority, seeds=10, c_min=0, c_max=0,
                             required_fraction=1.0, threads=0):
    return json.loads(_core.sweep_committed_minority(
        _dump(config), majority, minority, seeds, c_min, c_max, required_fraction, threads))


def binom_test(k, n, p0=0.5):
    return json.loads(_core.binom_test(k, n, p0))


def chi2_uniform(counts):
    return json.loads(_core.chi2_uniform(list(counts)))


chi2_survival = _core.chi2_survival
build_prompt = _core.build_prompt
parse_response = _core.parse_response
render_answer = _core.render_answer
