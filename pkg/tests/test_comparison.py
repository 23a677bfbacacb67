import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ksconsume.comparison import (
    Candidate,
    EvolutionProblem,
    barrier_tightness,
    canonical_barriers,
    discrete_defect,
    verify_ordering,
)
from ksconsume.dynamics import ModelParams, StateUV, run
from ksconsume.grid import build_grid

GRID = build_grid(1, [1.0], [8])
TIMES = np.linspace(0, 1, 5)


def _sampled(values):
    return Candidate.sampled(TIMES, values, GRID)


def test_pass_and_report_fields():
    prob = EvolutionProblem(GRID, 1.0)
    lo = _sampled(np.zeros((5, 8)))
    hi = _sampled(np.ones((5, 8)))
    rep = verify_ordering(prob, lo, hi)
    assert rep.passed and rep.min_gap == 1.0 and rep.first_violation is None
    assert rep.as_dict()["verdict"] == "pass"


def test_late_violation_is_a_failed_conclusion():
    prob = EvolutionProblem(GRID, 1.0)
    hi = np.ones((5, 8))
    hi[3, 2] = -0.5
    rep = verify_ordering(prob, _sampled(np.zeros((5, 8))), _sampled(hi))
    assert rep.verdict == "fail"
    assert rep.first_violation["time"] == pytest.approx(TIMES[3])
    assert rep.first_violation["index"] == [2]


def test_initial_violation_is_a_failed_hypothesis():
    prob = EvolutionProblem(GRID, 1.0)
    hi = np.ones((5, 8))
    hi[0, 0] = -1.0
    rep = verify_ordering(prob, _sampled(np.zeros((5, 8))), _sampled(hi))
    assert rep.verdict == "hypothesis-failed"


def test_slack_rate_absorbs_linear_drift():
    prob = EvolutionProblem(GRID, 1.0)
    hi = -1e-3 * TIMES[:, None] * np.ones((1, 8))
    zero = _sampled(np.zeros((5, 8)))
    assert not verify_ordering(prob, zero, _sampled(hi), tol=1e-8).passed
    assert verify_ordering(prob, zero, _sampled(hi), tol=1e-8, slack_rate=2e-3).passed


def test_closed_form_candidates():
    prob = EvolutionProblem(GRID, 1.0)
    lo = Candidate.closed_form(lambda t: np.full(8, math.exp(-t)), GRID)
    hi = Candidate.constant(1.0, GRID)
    assert verify_ordering(prob, lo, hi, times=TIMES).passed
    with pytest.raises(ValueError):
        verify_ordering(prob, lo, hi)


def test_mismatched_grids_and_times():
    prob = EvolutionProblem(GRID, 1.0)
    other = build_grid(1, [1.0], [16])
    with pytest.raises(ValueError):
        verify_ordering(prob, Candidate.sampled(TIMES, np.zeros((5, 16)), other),
                        _sampled(np.ones((5, 8))))
    with pytest.raises(ValueError):
        verify_ordering(prob, Candidate.sampled(TIMES[:4], np.zeros((4, 8)), GRID),
                        _sampled(np.ones((5, 8))))
    with pytest.raises(ValueError):
        verify_ordering(prob, _sampled(np.zeros((5, 7))), _sampled(np.ones((5, 7))))


def test_drift_must_vanish_on_boundary():
    prob = EvolutionProblem(GRID, 1.0, drift=[np.ones(9)])
    with pytest.raises(ValueError):
        prob.drift_at(0.0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 8), elements=st.floats(-5, 5)),
       arrays(np.float64, (5, 8), elements=st.floats(-5, 5)))
def test_swap_with_negation_symmetry(a, b):
    prob = EvolutionProblem(GRID, 1.0)
    fwd = verify_ordering(prob, _sampled(a), _sampled(b))
    back = verify_ordering(prob, _sampled(-b), _sampled(-a))
    assert fwd.verdict == back.verdict
    assert fwd.min_gap == back.min_gap


def test_defect_zero_for_constant_steady_state():
    # heat equation with f = 0: constants solve it exactly
    prob = EvolutionProblem(GRID, 1.0)
    d = discrete_defect(prob, TIMES, np.full((5, 8), 2.0))
    assert np.all(d == 0.0)
    rep = verify_ordering(prob, _sampled(np.zeros((5, 8))), _sampled(np.full((5, 8), 2.0)),
                          defect=True)
    assert rep.defect["super"]["fraction_consistent"] == 1.0


@pytest.fixture(scope="module")
def short_2d():
    g = build_grid(2, [1.0, 1.0], [12, 12])
    X, Y = g.mesh()
    s = StateUV(g.field(1 + 2 * np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.02)),
                g.field(1 + 0.3 * np.cos(math.pi * X) * np.cos(math.pi * Y)))
    return run(s, ModelParams(0.8, 1.0, 0.5), 0.5)[0]


def test_canonical_barriers_pass_on_2d_run(short_2d):
    pairs = canonical_barriers(short_2d)
    assert [p.name for p in pairs] == ["u-nonnegative", "v-lower-barrier", "v-upper-barrier"]
    for pair in pairs:
        rep = pair.verify(tol=1e-6, defect=True)
        assert rep.passed, rep.as_dict()


def test_lower_barrier_tight_on_homogeneous_run():
    g = build_grid(1, [1.0], [16])
    traj, _ = run(StateUV(g.constant(2.0), g.constant(1.0)), ModelParams(1.0, 1.0, 0.5), 1.0)
    pair = canonical_barriers(traj)[1]
    gaps = barrier_tightness(traj, pair)
    dt = float(traj.steps["dt"].max())
    assert np.all(gaps >= -1e-12)
    assert np.all(gaps <= 10 * (dt + g.h**2))
