"""Closed-form exponent calculus behind the global existence argument.

Everything here is pure arithmetic on (chi, mu, n, p, r):

* the window of exponents r for which ``int u^p v^-r`` grows at most like
  ``exp(p*kappa*t)``,
* a concrete admissible (p, r) pair for given (chi, mu, n),
* the integrability bootstrap ``p -> phi(p)`` that climbs from some
  ``p > n/2`` to infinity,
* the parameter gates on (chi, mu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EXCEPTIONAL_TOL = 1e-12
MAX_BOOTSTRAP_STEPS = 10_000


@dataclass(frozen=True)
class ExponentWindow:
    """Admissible r-range for a fixed p: ``r_minus < r < min(r_plus, mu*p)``."""

    p: float
    chi: float
    mu: float
    r_minus: float
    r_plus: float
    r_cap: float

    @property
    def r_high(self) -> float:
        return min(self.r_plus, self.r_cap)

    @property
    def nonempty(self) -> bool:
        return self.chi**2 * self.p < 1 and self.r_minus < self.r_high

    def contains(self, r: float) -> bool:
        return self.nonempty and self.r_minus < r < self.r_high


def r_bounds(p: float, chi: float) -> tuple[float, float]:
    """Roots ``r_-, r_+ = (p-1)/2 * (1 -+ sqrt(1 - p chi^2))``.

    ``r_-`` is evaluated in the rationalised form ``(p-1)/2 * p chi^2 / (1 + s)``
    so it keeps full relative precision when ``p chi^2`` is small.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if not chi > 0:
        raise ValueError(f"chi must be positive, got {chi}")
    x = p * chi * chi
    if x > 1:
        raise ValueError(f"p*chi^2 = {x} > 1: no real window")
    s = math.sqrt(1.0 - x)
    half = 0.5 * (p - 1.0)
    return half * x / (1.0 + s), half * (1.0 + s)


def exponent_window(p: float, chi: float, mu: float) -> ExponentWindow:
    r_minus, r_plus = r_bounds(p, chi)
    return ExponentWindow(p, chi, mu, r_minus, r_plus, mu * p)


def window_quadratic(p: float, r: float, chi: float) -> float:
    """Coefficient of ``int u^p v^(-r-2) |grad v|^2`` left after Young's inequality.

    Negative exactly when r lies strictly between ``r_-`` and ``r_+``.
    """
    a = p * (p - 1) * chi + 2 * p * r
    return a * a / (4 * p * (p - 1)) - (p * r * chi + r * (r + 1))


def root_quadratic(p: float, r: float, chi: float) -> float:
    """``r^2 - (p-1) r + p (p-1)^2 chi^2 / 4``; negative iff ``r_- < r < r_+``."""
    return r * r - (p - 1) * r + p * (p - 1) ** 2 * chi * chi / 4


def p_interval(chi: float, mu: float, n: int) -> tuple[float, float]:
    """Open interval of p with p > max(1, n/2), p chi^2 < 1 and (p-1)/(2p) < mu."""
    lo = max(1.0, n / 2)
    hi = 1.0 / (chi * chi)
    if mu < 0.5:
        # (p-1)/(2p) < mu  <=>  p (1 - 2 mu) < 1
        hi = min(hi, 1.0 / (1.0 - 2.0 * mu))
    return lo, hi


def admissible_pair(chi: float, mu: float, n: int) -> tuple[float, float] | None:
    """Midpoint choice of (p, r), or None when the gates leave nothing to pick."""
    if not (chi > 0 and mu > 0 and n >= 1):
        raise ValueError("need chi > 0, mu > 0, n >= 1")
    gate = theorem_gate(chi, mu, n)
    if not (gate.chi_ok and gate.mu_weak):
        return None
    lo, hi = p_interval(chi, mu, n)
    if not lo < hi:
        return None
    p = 0.5 * (lo + hi)
    win = exponent_window(p, chi, mu)
    if not win.nonempty:
        return None
    return p, 0.5 * (win.r_minus + win.r_high)


def phi(x: float, n: int) -> float:
    """Bootstrap map ``x (3n - 2x) / (4 (n - x))`` below n, infinity above."""
    if x > n:
        return math.inf
    if x == n:
        raise ValueError("phi is undefined at x = n; use the exceptional rule")
    return x * (3 * n - 2 * x) / (4 * (n - x))


@dataclass
class BootstrapTrace:
    n: int
    values: list[float] = field(default_factory=list)
    rules: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    @property
    def terminated(self) -> bool:
        return bool(self.values) and math.isinf(self.values[-1])


def bootstrap_sequence(p0: float, n: int) -> BootstrapTrace:
    """Iterate phi from p0 until infinity.

    When an iterate hits n (within 1e-12) the next one is 3n/4 instead, from
    where two more phi steps reach infinity. ``rules[k]`` names the rule that
    produced ``values[k+1]``.
    """
    if not p0 > n / 2:
        raise ValueError(f"p0 must exceed n/2 = {n / 2} (phi's fixed point), got {p0}")
    trace = BootstrapTrace(n, [float(p0)])
    p = float(p0)
    for _ in range(MAX_BOOTSTRAP_STEPS):
        if abs(p - n) <= EXCEPTIONAL_TOL:
            p, rule = 0.75 * n, "exceptional"
        elif p > n:
            p, rule = math.inf, "phi"
        else:
            p, rule = phi(p, n), "phi"
        trace.values.append(p)
        trace.rules.append(rule)
        if math.isinf(p):
            return trace
    raise RuntimeError(f"bootstrap did not terminate within {MAX_BOOTSTRAP_STEPS} steps")


@dataclass(frozen=True)
class GateReport:
    chi: float
    mu: float
    n: int
    chi_ok: bool
    mu_weak: bool
    mu_strict: bool

    @property
    def one_dimensional(self) -> bool:
        return self.n == 1

    def note(self) -> str:
        if self.n == 1:
            return "n = 1: boundedness holds for every chi > 0, mu > 0, kappa >= 0"
        if self.chi_ok and self.mu_strict:
            return "global existence guaranteed (chi and mu gates both pass)"
        if self.chi_ok and self.mu_weak:
            return "passes the weaker mu > (n-2)/(2n) gate only"
        return "outside the proven global-existence region"

    def as_dict(self) -> dict:
        return {
            "chi": self.chi,
            "mu": self.mu,
            "n": self.n,
            "chi_ok": self.chi_ok,
            "mu_weak": self.mu_weak,
            "mu_strict": self.mu_strict,
            "note": self.note(),
        }


def theorem_gate(chi: float, mu: float, n: int) -> GateReport:
    return GateReport(
        chi=chi,
        mu=mu,
        n=n,
        chi_ok=0 < chi < math.sqrt(2.0 / n),
        mu_weak=mu > (n - 2) / (2 * n),
        mu_strict=mu > (n - 2) / n,
    )
