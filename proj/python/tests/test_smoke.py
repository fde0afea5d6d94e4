import csv
import io
import json
import math

import numpy as np
import pytest

import calmreg


def test_z_quantile_closed_form():
    s = calmreg.SpectrumStats(4.0, 4.0, 1.0)
    z_sq, z = calmreg.z_quantile(s, 1.0)
    assert z_sq == pytest.approx(10.0)
    assert z == pytest.approx(2.0 + math.sqrt(2.0))


def test_crossover():
    sol = calmreg.solve_xc(20.0, calmreg.SpectrumStats(4.0, 4.0, 1.0))
    assert sol.x_c == pytest.approx(138.089, rel=1e-5)
    s = calmreg.SpectrumStats.identity(20)
    assert calmreg.solve_xc(calmreg.g_for_crossover(s, 2.5), s).x_c == pytest.approx(2.5, rel=1e-6)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        calmreg.SpectrumStats(4.0, 100.0, 1.0)
    with pytest.raises(calmreg.ValidationError):
        calmreg.tau34("cauchy", 1.0)


def test_tau():
    assert calmreg.tau34("gaussian", 2.0)["tau4"] == 0.0
    assert calmreg.tau34("rademacher", 1.0)["tau4"] == pytest.approx(2.0)


def test_penalty_balance():
    a = np.eye(4)
    w = calmreg.select_w_balance(a, np.eye(4), 1.0, 1.0)
    assert w == pytest.approx((math.sqrt(17.0) - 1.0) / 2.0)


def test_linear_fit_matches_lstsq():
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((3, 40))
    y = psi.T @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.standard_normal(40)
    res = calmreg.fit("linear", y, psi, np.zeros(3))
    assert res["converged"]
    np.testing.assert_allclose(res["theta"], np.linalg.lstsq(psi.T, y, rcond=None)[0], atol=1e-9)


def test_experiment_is_deterministic():
    a = calmreg.run_experiment("tail_upper", seed=5, replications=200, q=10, x=[1.0, 2.0])
    b = calmreg.run_experiment("tail_upper", seed=5, replications=200, q=10, x=[1.0, 2.0], threads=2)
    assert a[0] == b[0]
    rows = list(csv.DictReader(io.StringIO(a[0])))
    assert [r["label"] for r in rows] == ["upper_exceedance"] * 2
    assert json.loads(a[1])["seed"] == 5


def test_criterion_runs():
    ok, value, threshold, detail = calmreg.run_criterion(12)
    assert ok
