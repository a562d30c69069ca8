import math

import pytest

import ehnode


def test_presets_listed():
    names = ehnode.preset_names()
    assert "fig5" in names and "linear-small" in names


def test_rate_function_round_trip():
    rf = ehnode.RateFunction.log_e()
    assert rf(10.0) == pytest.approx(math.log(11.0))
    assert rf.inverse(rf(3.0)) == pytest.approx(3.0)
    assert rf.name == "LOGE(1)"


def test_thresholds_fig5():
    t = ehnode.thresholds(ehnode.config("fig5"))
    assert t["g_of_EY"] == pytest.approx(math.log(11.0))
    assert abs(t["E_g_of_Y"] - 2.01) < 0.02


def test_simulate_is_reproducible():
    cfg = ehnode.config("fig5", horizon=20000, replications=2)
    a = ehnode.simulate(cfg, policy="TO", ex=1.0)
    b = ehnode.simulate(cfg, policy="TO", ex=1.0, jobs=2)
    assert a == b
    assert a["verdict"] == "STABLE"
    assert len(a["replication_means"]) == 2


def test_greedy_table_on_linear_model():
    table = ehnode.solve_mdp(ehnode.config("linear-small"), alpha=0.9)
    action = table["action"]
    assert action.shape == (21, 21)
    assert (action <= range(21)).all()


def test_waterfill_level():
    h0 = ehnode.waterfill_level([0.1, 0.5, 1.0, 2.2], [0.1, 0.3, 0.4, 0.2], 0.99)
    assert h0 == pytest.approx(0.4325, abs=1e-4)


def test_config_errors_raise():
    with pytest.raises(ehnode.ConfigError):
        ehnode.thresholds('{"bogus": 1}')
    with pytest.raises(ValueError):
        ehnode.simulate(ehnode.config("fig5"), policy="NOPE")


def test_cli_exit_codes():
    code, out, _ = ehnode.cli(["thresholds", "--preset", "fig9"])
    assert code == 0 and "wf_boundary" in out
    code, _, err = ehnode.cli(["simulate", "--preset", "missing"])
    assert code == 2 and '"config"' in err
