import pytest

import convgame


def minimal(n=24, w=10, seed=1):
    return {
        "population_size": n,
        "pool": [chr(ord("A") + i) for i in range(w)],
        "mode": "speaker_hearer",
        "policy": {"kind": "minimal"},
        "horizon_rounds": 200,
        "master_seed": seed,
    }


def test_default_config_round_trips():
    c = convgame.default_config()
    assert c["schema_version"] == convgame.SCHEMA_VERSION
    assert convgame.normalize_config(c) == c
    assert c["policy"]["surrogate"]["p_keep_after_success"] == pytest.approx(0.994)


def test_minimal_trial_converges_and_is_reproducible():
    a = convgame.run_trial(minimal())
    b = convgame.run_trial(minimal())
    assert a["status"] == "converged"
    assert a["consensus"] in minimal()["pool"]
    assert a["log_hash"] == b["log_hash"]
    assert len(a["events"]) == a["interactions"]


def test_ensemble_reports_every_run():
    runs = convgame.run_ensemble(minimal(n=10, w=2), 8)
    assert [r["trial_index"] for r in runs] == list(range(8))


def test_llm_policy_runs_on_mock():
    c = {"population_size": 4, "pool": ["F", "J"], "policy": {"kind": "llm"},
         "horizon_rounds": 3, "llm": {"model": "mock"}}
    r = convgame.run_trial(c, mock_seed=5)
    assert r["status"] != "aborted"
    assert all(len(e["raw"][0]) >= 1 for e in r["events"])


def test_probe_and_stats():
    probe = convgame.probe_first_round_bias({"pool": ["Q", "M"]}, 4000, seed=2)
    assert sum(probe["counts"].values()) == 4000
    assert convgame.binom_test(7, 10)["p_value"] == 0.34375
    assert convgame.binom_test(5079, 10000)["p_value"] == pytest.approx(0.116, abs=0.002)
    assert convgame.chi2_uniform([5] * 10)["p_value"] == 1.0
    assert convgame.chi2_survival(2.0, 9.0) == pytest.approx(0.9914676066, abs=1e-9)


def test_consensus_and_sweep():
    d = convgame.consensus_distribution(minimal(n=10, w=2), 20)
    assert d["runs"] == 20
    r = convgame.sweep_committed_minority({"population_size": 8, "horizon_rounds": 30}, "Q", "M",
                                         seeds=2, c_min=7, c_max=8)
    assert [p["committed"] for p in r["points"]] == [7, 8]
    with pytest.raises(convgame.ConfigError):
        convgame.sweep_committed_minority({"population_size": 8}, "Q", "M", c_min=9, c_max=9)


def test_stability_and_microdynamics():
    s = convgame.run_stability({"initial_consensus": "M", "horizon_rounds": 10,
                                "policy": {"kind": "surrogate",
                                           "surrogate": {"p_keep_after_success": 1.0}}})
    assert s["minimum"] == 1.0
    t = convgame.microdynamics({"pool": ["Q", "M"]}, "Q", cohort=200, samples=500, resamples=0)
    assert len(t["levels"]) == 3


def test_prompt_and_parse():
    system, user = convgame.build_prompt(["F", "J"], [("F", "J")], ["F", "J"], 2)
    assert "'Player 1': F, 'Player 2': J, 'payoff': -50" in system
    assert user == "Answer saying which action Player 1 should play."
    answer = convgame.render_answer("J", "it worked")
    assert convgame.parse_response(answer, ["F", "J"]) == "J"
    with pytest.raises(convgame.ParseError):
        convgame.parse_response("no idea", ["F", "J"])


def test_bad_config_raises():
    with pytest.raises(convgame.ConfigError):
        convgame.run_trial({"memory_length": 0})
