import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksconsume import monitors
from ksconsume.dynamics import BlowupConfig, ModelParams, StateUV, run, to_w
from ksconsume.grid import build_grid
from ksconsume.monitors import (
    MonitorConfig,
    growth_verdict,
    mass_bound_value,
    odi_bound,
    trend_test,
    window_integral,
)

KAPPA, MU = 1.0, 0.5
RATE = KAPPA / MU


@pytest.fixture(scope="module")
def steady():
    """Homogeneous data u0 = kappa/mu, v0 = 1 on 32 cells up to t = 2."""
    g = build_grid(1, [1.0], [32])
    s = StateUV(g.constant(RATE), g.constant(1.0))
    traj, report = run(s, ModelParams(1.0, KAPPA, MU), 2.0, energy_pr=(1.5, 0.3))
    return traj, report


@pytest.fixture(scope="module")
def bumpy():
    g = build_grid(1, [1.0], [32])
    (x,) = g.centers()
    s = StateUV(g.field(1 + np.exp(-((x - 0.5) ** 2) / 0.02)),
                g.field(1 + 0.3 * np.cos(math.pi * x)))
    return run(s, ModelParams(1.0, 1.0, 1.0), 0.5)


def test_mass_bound_value_example():
    assert mass_bound_value(1.0, ModelParams(1.0, 1.0, 0.25), 1.0) == 4.0
    assert mass_bound_value(10.0, ModelParams(1.0, 1.0, 0.25), 1.0) == 10.0


def test_window_integral_constant_and_linear():
    t = np.linspace(0, 3, 61)
    np.testing.assert_allclose(window_integral(t, np.full_like(t, 2.0)), 2 * np.minimum(t, 1))
    # y = t: int_{t-1}^t s ds = t - 1/2 once the window is full
    w = window_integral(t, t)
    full = t >= 1
    np.testing.assert_allclose(w[full], t[full] - 0.5, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3), st.floats(1e-3, 10.0))
def test_odi_bound(y0, C, a):
    b = odi_bound(y0, C, a)
    assert b == pytest.approx(y0 + C / (1 - math.exp(-a)))
    assert b >= y0 + C


@pytest.mark.parametrize("a", [0.0, -1.0])
def test_odi_bound_rejects_nonpositive_rate(a):
    with pytest.raises(ValueError):
        odi_bound(1.0, 1.0, a)


def test_growth_verdict_ceiling_first_crossing():
    t = np.linspace(0, 1, 11)
    s = np.linspace(0, 2e6, 11)
    v = growth_verdict(t, s, BlowupConfig(ceiling=1e6))
    assert v.flagged and v.reason == "ceiling" and v.time == pytest.approx(0.5)


def test_growth_verdict_superlinear_vs_bounded():
    t = np.linspace(0, 2, 41)
    fast = np.exp(10 * t**2)
    assert growth_verdict(t, fast, BlowupConfig(ceiling=math.inf)).flagged
    calm = 1 + 0.1 * np.sin(t)
    assert not growth_verdict(t, calm, BlowupConfig()).flagged


def test_trend_test():
    t = np.linspace(0, 10, 101)
    assert trend_test(t, np.ones_like(t))[2] == 0.0
    m1, m2, excess = trend_test(t, 1 + t)
    assert m2 == 11 and excess > 0.05


def test_steady_closed_forms(steady):
    traj, report = steady
    assert report.passed
    h = traj.grid.h
    dt = float(np.max(traj.steps["dt"]))
    slack = 10 * dt + 10 * h * h
    t = traj.steps["t"]
    for p in (1, 2, 4):
        exact = np.exp(-RATE * t)
        np.testing.assert_allclose(traj.steps[f"v_l{p:g}"], exact, rtol=slack)
    # window integral of int u^2 equals (kappa/mu)^2 |Omega| once full
    win = report["spacetime_u2"].values
    full = t >= 1
    np.testing.assert_allclose(win[full], RATE**2, rtol=slack)
    assert RATE**2 <= report["spacetime_u2"].bounds[0]
    # E(t) = (kappa/mu)^p exp(r (kappa/mu) t) |Omega|
    p, r = 1.5, 0.3
    np.testing.assert_allclose(traj.steps["energy"], RATE**p * np.exp(r * RATE * t), rtol=slack)
    # the lower barrier is met with equality up to the scheme error
    low = report["lower_bound_v"]
    np.testing.assert_allclose(low.values, low.bounds, rtol=slack)


def test_inadmissible_energy_pair_is_informational(steady):
    traj, report = steady
    # chi = 1 leaves no window in 1-D, so any pair is outside it
    assert report["energy_upvr"].passed is None
    assert report["energy_upvr"].kind == "info"


def test_energy_monitor_with_auto_pair():
    g = build_grid(1, [1.0], [32])
    (x,) = g.centers()
    s = StateUV(g.field(1 + np.exp(-((x - 0.5) ** 2) / 0.02)),
                g.field(1 + 0.3 * np.cos(math.pi * x)))
    traj, report = run(s, ModelParams(0.8, 1.0, 1.0), 0.3)
    assert traj.energy_pr == monitors.analysis.admissible_pair(0.8, 1.0, 1)
    for name in ("energy_upvr", "energy_upvr_step"):
        assert report[name].kind == "bound" and report[name].passed


def test_bumpy_report_and_json(bumpy):
    traj, report = bumpy
    assert report.passed, report.summary_lines()
    names = {e.name for e in report.entries}
    assert {"positivity", "mass_bound", "vinf_bound", "lower_bound_v",
            "vp_decay_p1", "vp_decay_p2", "vp_decay_p4"} <= names
    assert "oned_wx_l2" in names
    doc = json.loads(report.to_json())
    assert doc["passed"] is True
    entry = next(m for m in doc["monitors"] if m["name"] == "mass_bound")
    assert entry["verdict"] == "pass" and entry["bound_constant"] > 0
    assert len(entry["series"]["t"]) <= 2000


def test_json_decimation(bumpy):
    _, report = bumpy
    e = report["mass_bound"]
    d = e.as_dict(max_points=10)
    assert len(d["series"]["t"]) <= 10


def test_monitor_selection(bumpy):
    traj, _ = bumpy
    rep = monitors.evaluate(traj, MonitorConfig(enabled=("mass_bound",)))
    assert [e.name for e in rep.entries] == ["mass_bound"]


def test_tight_tolerance_fails(bumpy):
    traj, _ = bumpy
    # a negative tolerance turns an inequality met with slack into a failure
    rep = monitors.evaluate(traj, MonitorConfig(enabled=("mass_bound",), tol_mass=-0.9))
    assert not rep.passed and rep.failures() == ["mass_bound"]


def test_oned_suite_requires_1d():
    g = build_grid(2, [1.0, 1.0], [8, 8])
    s = StateUV(g.constant(1.0), g.constant(1.0))
    traj, _ = run(s, ModelParams(0.5, 1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        monitors.oned_suite(traj)


def test_oned_suite_uses_w_from_uw_run():
    g = build_grid(1, [1.0], [16])
    (x,) = g.centers()
    s = to_w(StateUV(g.field(1 + x), g.field(1 + 0.2 * np.cos(math.pi * x))))
    traj, report = run(s, ModelParams(2.0, 1.0, 0.25), 0.3)
    data = monitors.oned_series(traj)
    assert set(monitors.ONED_SERIES) <= set(data)
    # short horizons cannot host a trend test on window integrals
    assert report["oned_u6_window"].passed is None


def test_blowup_detector_on_bounded_run(bumpy):
    traj, _ = bumpy
    assert not monitors.blowup_detector(traj).flagged
    assert monitors.blowup_detector(traj, config=BlowupConfig(ceiling=1.0)).flagged


def test_extensibility_norm_constant():
    g = build_grid(1, [2.0], [8])
    val = monitors.extensibility_norm(np.full(8, 3.0), np.full(8, 1.0), g, 2.0)
    assert val == pytest.approx(3.0 + math.sqrt(2.0))
