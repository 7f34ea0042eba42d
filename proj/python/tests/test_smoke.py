import math

import pytest

dfac = pytest.importorskip("dfac")


def test_table1_spec():
    spec = dfac.table1_spec()
    assert spec["agents"] == 2
    assert len(spec["payoff"]) == 9
    q = dfac.ground_truth_q()
    assert q[0] == 8.0
    assert q[8] == 6.0


def test_convolution():
    atoms, probs = dfac.convolve_pmf([0.0, 1.0], [0.5, 0.5], [0.0, 1.0], [0.5, 0.5])
    assert atoms == [0.0, 1.0, 2.0]
    assert probs == [0.25, 0.5, 0.25]
    a = [0.1, 0.2, 0.7]
    b = [0.5, 0.25, 0.25]
    for x, y in zip(dfac.convolve_direct(a, b), dfac.convolve_fft(a, b)):
        assert abs(x - y) < 1e-12


def test_projection_split():
    probs = dfac.project_categorical([2.5], [1.0], -20.0, 20.0, 41)
    assert probs[22] == pytest.approx(0.5, abs=1e-12)
    assert probs[23] == pytest.approx(0.5, abs=1e-12)


def test_shape_sum_has_zero_mean():
    levels = [0.125, 0.375, 0.625, 0.875]
    phi = dfac.shape_sum(levels, [[-3.0, 0.0, 1.0, 10.0], [1.0, 1.0, 2.0, 2.0]])
    assert abs(sum(phi)) < 1e-12


def test_exp_mixer_breaks_digm():
    safe = math.exp(2.0)
    risky = 0.5 + 0.5 * math.exp(3.0)
    v = dfac.check_digm([[2.0, 1.5]], lambda u: safe if u[0] == 0 else risky)
    assert not v["holds"]
    assert v["agent_argmax"] == [0]
    assert v["joint_argmax"] == [1]


def test_train_eval_export_round_trip():
    config = {
        "method": "ddn",
        "episodes": 60,
        "batch_size": 30,
        "agent_hidden": [8],
        "embed_hidden": [8],
        "cos_features": 8,
        "n_quantiles": 8,
        "n_target_quantiles": 8,
        "n_eval_quantiles": 8,
        "eval_interval": 20,
        "metric_grid": 200,
        "seed": 3,
    }
    r = dfac.train(config)
    assert [row["episode"] for row in r["log"]] == [20, 40, 60]
    assert all(d["holds"] for d in r["digm"])
    m = dfac.evaluate(r["checkpoint"], grid=200)
    assert m["qdist"] == pytest.approx(r["metrics"]["qdist"], rel=1e-9)
    e = dfac.export(r["checkpoint"], "B1,B2", grid=50)
    assert len(e["Z_jt"]) == 50
    assert len(e["Z_k"]) == 2


def test_errors_are_typed():
    with pytest.raises(dfac.FormatError):
        dfac.train({"method": "vdn", "bogus": 1})
    with pytest.raises(dfac.DfacError):
        dfac.train({"method": "nope"})


def test_verify_suite_passes():
    checks = dfac.verify()
    assert len(checks) >= 100
    assert all(c["passed"] for c in checks)
