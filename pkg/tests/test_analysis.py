import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from ksconsume import analysis
from ksconsume.analysis import (
    admissible_pair,
    bootstrap_sequence,
    exponent_window,
    phi,
    r_bounds,
    root_quadratic,
    theorem_gate,
    window_quadratic,
)


def test_r_bounds_example():
    lo, hi = r_bounds(2.0, 0.5)
    assert lo == pytest.approx(0.5 * (1 - math.sqrt(0.5)), rel=1e-14)
    assert hi == pytest.approx(0.5 * (1 + math.sqrt(0.5)), rel=1e-14)
    assert (round(lo, 6), round(hi, 6)) == (0.146447, 0.853553)


def test_r_bounds_degenerate_and_limits():
    chi = 0.5
    lo, hi = r_bounds(1 / chi**2, chi)
    assert lo == pytest.approx(hi) == pytest.approx((1 / chi**2 - 1) / 2)
    lo, hi = r_bounds(1 + 1e-9, chi)
    assert 0 < lo < hi < 1e-8


@pytest.mark.parametrize("p, chi", [(1.0, 0.5), (0.5, 0.5), (2.0, 0.0), (5.0, 0.5)])
def test_r_bounds_domain(p, chi):
    with pytest.raises(ValueError):
        r_bounds(p, chi)


def test_admissible_pair_examples():
    p, r = admissible_pair(0.7, 0.4, 3)
    assert p == pytest.approx((1.5 + 1 / 0.49) / 2, rel=1e-14)
    assert round(p, 4) == 1.7704
    assert exponent_window(p, 0.7, 0.4).contains(r)
    assert admissible_pair(1.0, 0.5, 2) is None
    for mu in (1e-3, 0.1, 1.0, 10.0):
        assert admissible_pair(0.5, mu, 2) is not None


def test_admissible_pair_for_the_2d_preset():
    p, r = admissible_pair(0.8, 0.5, 2)
    # p-interval (1, 1/0.64); mu = 1/2 adds no constraint
    assert p == pytest.approx(0.5 * (1 + 1 / 0.64))
    lo, hi = r_bounds(p, 0.8)
    assert r == pytest.approx(0.5 * (lo + min(hi, 0.5 * p)))


def test_admissible_pair_gate_failures_and_errors():
    assert admissible_pair(0.7, 0.2, 4) is None  # mu below (n-2)/(2n)
    with pytest.raises(ValueError):
        admissible_pair(0.0, 0.5, 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.01, 5.0), st.integers(1, 6))
def test_admissible_pair_rechecks(chi, mu, n):
    pair = admissible_pair(chi, mu, n)
    if pair is None:
        return
    p, r = pair
    assert max(1.0, n / 2) < p < 1 / chi**2
    assert (p - 1) / (2 * p) < mu
    lo, hi = r_bounds(p, chi)
    assert lo < r < min(hi, mu * p)
    assert window_quadratic(p, r, chi) < 0


@settings(max_examples=300, deadline=None)
@given(st.floats(1.01, 20.0), st.floats(0.01, 1.0), st.floats(0.0, 20.0))
def test_window_and_root_quadratic_agree(p, chi, r):
    assume(p * chi * chi < 1)
    lo, hi = r_bounds(p, chi)
    assume(min(abs(r - lo), abs(r - hi)) > 1e-6 * (1 + r))
    inside = lo < r < hi
    assert (root_quadratic(p, r, chi) < 0) == inside
    assert (window_quadratic(p, r, chi) < 0) == inside


def test_phi_values():
    assert phi(1.5, 2) == pytest.approx(2.25)
    assert phi(2.5, 2) == math.inf
    assert phi(1.0, 2) == pytest.approx(1.0 * 4 / (4 * 1.0))
    with pytest.raises(ValueError):
        phi(2.0, 2)


def test_bootstrap_examples():
    tr = bootstrap_sequence(1.5, 2)
    assert tr.values == [1.5, 2.25, math.inf]
    assert tr.terminated
    tr = bootstrap_sequence(2.0, 2)
    assert tr.values == [2.0, 1.5, 2.25, math.inf]
    assert tr.rules == ["exceptional", "phi", "phi"]
    tr = bootstrap_sequence(1.6, 3)
    assert tr.values[1] == pytest.approx(9.28 / 5.6, rel=1e-14)
    assert tr.terminated


@pytest.mark.parametrize("p0, n", [(1.0, 2), (0.9, 2), (1.5, 3)])
def test_bootstrap_rejects_low_start(p0, n):
    with pytest.raises(ValueError):
        bootstrap_sequence(p0, n)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.floats(1e-3, 1.0))
def test_bootstrap_increasing_until_exceptional(n, frac):
    p0 = n / 2 + frac * n
    tr = bootstrap_sequence(p0, n)
    assert tr.terminated and len(tr) <= 50
    for a, b, rule in zip(tr.values, tr.values[1:], tr.rules):
        if rule == "phi":
            assert b > a


@pytest.mark.parametrize(
    "n, chi, mu, expected",
    [
        (2, 0.5, 0.1, (True, True, True)),
        (4, 0.6, 0.3, (True, True, False)),
        (2, 1.0, 0.5, (False, True, True)),
        (3, 0.7, 0.1, (True, False, False)),
    ],
)
def test_theorem_gate(n, chi, mu, expected):
    g = theorem_gate(chi, mu, n)
    assert (g.chi_ok, g.mu_weak, g.mu_strict) == expected
    assert g.as_dict()["note"]


def test_one_dimensional_note():
    assert "n = 1" in theorem_gate(5.0, 0.01, 1).note()


def test_exceptional_tolerance():
    tr = bootstrap_sequence(2.0 + 0.5 * analysis.EXCEPTIONAL_TOL, 2)
    assert tr.rules[0] == "exceptional"
