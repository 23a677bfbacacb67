import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ksconsume.dynamics import (
    BlowupConfig,
    CFLViolation,
    ModelParams,
    StateUV,
    StateUW,
    advance_uv,
    advance_uw,
    reconstruct_v,
    regularized_sensitivity,
    run,
    source_term,
    suggest_dt,
    to_w,
    upwind_flux,
)
from ksconsume.grid import build_grid, divergence_array


def _state(u, v, dim=1, extent=1.0):
    g = build_grid(dim, [extent] * dim, list(np.shape(u)))
    return StateUV(g.field(u), g.field(v))


@pytest.mark.parametrize("kw", [dict(chi=0), dict(mu=0), dict(kappa=-1), dict(alpha=1.5),
                                dict(eta=0.0)])
def test_params_validation(kw):
    base = dict(chi=1.0, kappa=1.0, mu=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        ModelParams(**base)


def test_state_preconditions():
    g = build_grid(1, [1.0], [4])
    with pytest.raises(ValueError):
        StateUV(g.field([1, -1e-3, 1, 1]), g.constant(1.0))
    with pytest.raises(ValueError):
        StateUV(g.constant(1.0), g.field([1, 0, 1, 1]))


def test_source_term():
    g = build_grid(1, [1.0], [3])
    p = ModelParams(1.0, 2.0, 0.5)
    np.testing.assert_allclose(source_term(g.field([0, 1, 4]), p).values, [0, 1.5, 0])
    with pytest.raises(ValueError):
        source_term(g.field([0, -1, 4]), p)
    p3 = ModelParams(1.0, 1.0, 1.0, alpha=3.0)
    np.testing.assert_allclose(source_term(g.field([2.0, 0, 0]), p3).values, [2 - 8, 0, 0])


def test_sensitivity_pieces():
    g = build_grid(1, [1.0], [5])
    eta = 0.1
    v = g.field([0.01, 0.05, 0.075, 0.1, 1.0])
    s = regularized_sensitivity(v, 2.0, eta).values
    assert s[0] == pytest.approx(2 * 2.0 / eta)
    assert s[1] == pytest.approx(2 * 2.0 / eta)
    assert s[3] == pytest.approx(2.0 / 0.1)
    assert s[4] == pytest.approx(2.0)
    assert 2.0 / 0.075 < s[2] < 40.0


def test_sensitivity_continuous_and_monotone():
    g = build_grid(1, [1.0], [2001])
    eta = 1e-3
    v = np.linspace(0.3 * eta, 1.5 * eta, 2001)
    s = regularized_sensitivity(g.field(v), 1.0, eta).values
    assert np.all(np.diff(s) <= 1e-9 * s[:-1])
    assert np.max(np.abs(np.diff(s))) < 1e-2 * s.max()


def test_suggest_dt_pure_diffusion_limit():
    # u = 0 and constant v: no drift, no source growth beyond kappa
    st_ = _state(np.zeros((16, 16)), np.ones((16, 16)), dim=2)
    p = ModelParams(1.0, 0.0, 1.0)
    h = 1 / 16
    assert suggest_dt(st_, p, safety=1.0) == pytest.approx(h * h / 4)
    assert suggest_dt(st_, p, safety=0.5) == pytest.approx(h * h / 8)


def test_suggest_dt_source_limit():
    st_ = _state(np.full(4, 100.0), np.ones(4))
    p = ModelParams(1.0, 1.0, 1.0)
    assert suggest_dt(st_, p, safety=1.0) == pytest.approx(1 / (1 + 100))


def test_cfl_violation_raised():
    st_ = _state(np.ones(16), 1 + 0.3 * np.cos(np.linspace(0, math.pi, 16)))
    p = ModelParams(1.0, 1.0, 1.0)
    dt = suggest_dt(st_, p, safety=1.0)
    with pytest.raises(CFLViolation) as exc:
        advance_uv(st_, p, 1.1 * dt)
    assert exc.value.stage in ("diffusion", "advection", "source")
    with pytest.raises(CFLViolation):
        run(st_, p, 0.01, safety=1.2)


def test_upwind_flux_conservative():
    rng = np.random.default_rng(1)
    u = rng.uniform(0, 2, 10)
    a = np.concatenate([[0], rng.normal(size=9), [0]])
    f = upwind_flux(u, a, 0)
    assert f[0] == 0 and f[-1] == 0
    assert abs(divergence_array([f], (0.1,)).sum()) < 1e-12


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (12,), elements=st.floats(0.0, 20.0)),
       arrays(np.float64, (12,), elements=st.floats(1e-3, 5.0)),
       st.floats(0.1, 3.0))
def test_one_step_structure(u, v, chi):
    st_ = _state(u, v)
    p = ModelParams(chi, 1.0, 0.5)
    dt = suggest_dt(st_, p, safety=1.0)
    new, info = advance_uv(st_, p, dt)
    assert new.u.min() >= 0 and new.v.min() > 0
    assert new.v.max() <= v.max()
    for q in (1, 2, 4):
        assert np.sum(new.v.values**q) <= np.sum(v**q) * (1 + 1e-12)


def test_homogeneous_state_exact_update():
    st_ = _state(np.full(8, 2.0), np.ones(8))
    p = ModelParams(1.0, 1.0, 0.5)
    dt = 1e-3
    s = st_
    for _ in range(100):
        s, _ = advance_uv(s, p, dt)
    np.testing.assert_allclose(s.u.values, 2.0, rtol=1e-14)
    np.testing.assert_allclose(s.v.values, (1 + 2 * dt) ** -100, rtol=1e-12)


def test_w_roundtrip_and_uw_step():
    v = 1 + 0.4 * np.cos(np.linspace(0, math.pi, 10))
    st_ = _state(np.ones(10), v)
    sw = to_w(st_)
    assert sw.w.min() >= 0 and sw.v0_sup == pytest.approx(v.max())
    np.testing.assert_allclose(reconstruct_v(sw).values, v, rtol=1e-14)
    p = ModelParams(1.0, 1.0, 1.0)
    dt = suggest_dt(sw, p, safety=0.9)
    new, info = advance_uw(sw, p, dt)
    assert new.u.min() >= 0 and new.w.min() >= 0
    assert new.t == pytest.approx(dt)
    with pytest.raises(ValueError):
        StateUW(sw.u, sw.grid.field(-np.ones(10)), 1.0)


def test_formulations_agree_on_short_horizon():
    x = (np.arange(32) + 0.5) / 32
    u0 = 1 + 0.5 * np.exp(-((x - 0.5) ** 2) / 0.02)
    v0 = 1 + 0.3 * np.cos(math.pi * x)
    p = ModelParams(1.0, 1.0, 1.0)
    a = _state(u0, v0)
    b = to_w(a)
    dt = 0.5 * min(suggest_dt(a, p, safety=1.0), suggest_dt(b, p, safety=1.0))
    for _ in range(200):
        a, _ = advance_uv(a, p, dt)
        b, _ = advance_uw(b, p, dt)
    assert np.max(np.abs(a.v.values - reconstruct_v(b).values)) < 1e-3
    assert np.max(np.abs(a.u.values - b.u.values)) < 1e-2


def test_run_snapshot_cadence_and_record():
    st_ = _state(np.full(16, 2.0), np.ones(16))
    traj, report = run(st_, ModelParams(1.0, 1.0, 0.5), 0.2, snapshot_every=0.05)
    np.testing.assert_allclose(traj.times, [0, 0.05, 0.1, 0.15, 0.2], atol=1e-12)
    assert traj.completed and report.passed
    assert traj.steps["t"][-1] == pytest.approx(0.2)
    assert np.all(np.diff(traj.steps["t"]) > 0)


def test_run_ceiling_stops_with_blowup_status():
    st_ = _state(np.full(16, 2.0), np.ones(16))
    traj, _ = run(st_, ModelParams(1.0, 1.0, 0.25), 1.0, blowup=BlowupConfig(ceiling=2.5))
    assert traj.status == "blowup"
    assert traj.blowup.reason == "ceiling"
    assert traj.snapshots[-1].t < 1.0


def test_run_rejects_bad_input():
    st_ = _state(np.ones(8), np.ones(8))
    with pytest.raises(ValueError):
        run(st_, ModelParams(1.0, 1.0, 1.0), -1.0)
    with pytest.raises(TypeError):
        run("nope", ModelParams(1.0, 1.0, 1.0), 1.0)


def test_run_is_deterministic():
    x = (np.arange(16) + 0.5) / 16
    st_ = _state(1 + x, 1 + 0.2 * np.cos(math.pi * x))
    p = ModelParams(1.0, 1.0, 1.0)
    a, _ = run(st_, p, 0.1)
    b, _ = run(st_, p, 0.1)
    assert np.array_equal(a.snapshots[-1].u, b.snapshots[-1].u)
    assert np.array_equal(a.steps["v_l2"], b.steps["v_l2"])
