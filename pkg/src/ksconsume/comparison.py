"""Sampled verification of sub/supersolution orderings.

The equation family is ``u_t = Lap u + div(b u) + f(x, t, u)`` on a grid with
no-flux boundaries (``b`` vanishes on boundary faces). Candidates are either
sampled on the same time grid or given as callables ``c(t) -> array``.

The module does not certify that a candidate *is* a sub- or supersolution; it
checks that the ordering holds on the samples and, optionally, reports the
sign pattern of the discrete defect so a user can judge the hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .grid import Grid, divergence_array, face_interior, laplacian_array, _pad_faces

DriftRule = Union[None, Sequence[np.ndarray], Callable[[float], Sequence[np.ndarray]]]


@dataclass
class EvolutionProblem:
    grid: Grid
    horizon: float
    # face velocities per axis, or a function of t returning them; None = no drift
    drift: DriftRule = None
    # f(t, u) -> array; the x-dependence lives inside the closure
    reaction: Callable[[float, np.ndarray], np.ndarray] | None = None
    lipschitz: float = 0.0

    def drift_at(self, t: float) -> list[np.ndarray] | None:
        b = self.drift(t) if callable(self.drift) else self.drift
        if b is None:
            return None
        b = [np.asarray(c, float) for c in b]
        for k, c in enumerate(b):
            if np.any(np.take(c, [0, -1], axis=k) != 0.0):
                raise ValueError("drift must vanish on boundary faces (no-flux)")
        return b

    def reaction_at(self, t: float, u: np.ndarray) -> np.ndarray:
        return np.zeros_like(u) if self.reaction is None else self.reaction(t, u)


@dataclass
class Candidate:
    """A sampled candidate ``values[k]`` at ``times[k]`` or a closed form ``func(t)``."""

    times: np.ndarray | None = None
    values: np.ndarray | None = None
    func: Callable[[float], np.ndarray] | None = None
    grid: Grid | None = None
    label: str = ""

    @classmethod
    def sampled(cls, times, values, grid: Grid | None = None, label: str = ""):
        return cls(np.asarray(times, float), np.asarray(values, float), None, grid, label)

    @classmethod
    def closed_form(cls, func, grid: Grid | None = None, label: str = ""):
        return cls(None, None, func, grid, label)

    @classmethod
    def constant(cls, c: float, grid: Grid, label: str = ""):
        return cls.closed_form(lambda t: np.full(grid.shape, float(c)), grid, label or f"{c:g}")

    def at(self, times: np.ndarray) -> np.ndarray:
        if self.func is not None:
            return np.stack([np.broadcast_to(np.asarray(self.func(t), float),
                                             self._shape(t)) for t in times])
        return self.values

    def _shape(self, t):
        return self.grid.shape if self.grid is not None else np.shape(self.func(t))


@dataclass
class OrderingReport:
    name: str
    verdict: str  # "pass", "fail" or "hypothesis-failed"
    min_gap: float
    min_gap_time: float
    min_gap_index: tuple[int, ...]
    tol: float
    slack_rate: float
    first_violation: dict | None = None
    initial_gap: float = math.nan
    defect: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "min_gap": self.min_gap,
            "min_gap_time": self.min_gap_time,
            "min_gap_index": list(self.min_gap_index),
            "initial_gap": self.initial_gap,
            "tol": self.tol,
            "slack_rate": self.slack_rate,
            "first_violation": self.first_violation,
            "defect": self.defect,
        }


def _resolve_times(sub: Candidate, sup: Candidate, times) -> np.ndarray:
    sampled = [c.times for c in (sub, sup) if c.func is None]
    if len(sampled) == 2 and (len(sampled[0]) != len(sampled[1])
                              or not np.allclose(sampled[0], sampled[1], rtol=0, atol=1e-12)):
        raise ValueError("sub and super are sampled at different times")
    if sampled:
        return sampled[0]
    if times is None:
        raise ValueError("two closed-form candidates need explicit sample times")
    return np.asarray(times, float)


def discrete_defect(problem: EvolutionProblem, times: np.ndarray,
                    values: np.ndarray) -> np.ndarray:
    """``(c_{k+1} - c_k)/dt - Lap c_k - div(b c_k) - f(t_k, c_k)`` per step.

    The drift flux uses the face average of c; this is a diagnostic, not the
    scheme's own upwind flux.
    """
    h = problem.grid.spacing
    out = []
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        c = values[k]
        d = (values[k + 1] - c) / dt - laplacian_array(c, h)
        b = problem.drift_at(times[k])
        if b is not None:
            fluxes = []
            for ax, bk in enumerate(b):
                cl, cr = face_interior(c, ax)
                inner = np.take(bk, np.arange(1, bk.shape[ax] - 1), axis=ax)
                fluxes.append(_pad_faces(inner * 0.5 * (cl + cr), ax))
            d = d - divergence_array(fluxes, h)
        out.append(d - problem.reaction_at(times[k], c))
    return np.array(out)


def _defect_summary(problem, times, values, want: str) -> dict:
    if len(times) < 2:
        return {}
    d = discrete_defect(problem, times, values)
    ok = d <= 0 if want == "sub" else d >= 0
    return {"role": want, "fraction_consistent": float(ok.mean()),
            "min": float(d.min()), "max": float(d.max())}


def verify_ordering(problem: EvolutionProblem, sub: Candidate, sup: Candidate,
                    tol: float = 1e-8, slack_rate: float = 0.0, times=None,
                    name: str = "ordering", defect: bool = False) -> OrderingReport:
    """Check ``sub <= sup`` at every sample within ``tol + slack_rate * t``.

    ``slack_rate`` absorbs the time-integration error of the scheme that
    produced sampled candidates. A violated initial ordering means the
    hypothesis failed, which is reported separately from a failed conclusion.
    """
    for c in (sub, sup):
        if c.grid is not None and c.grid != problem.grid:
            raise ValueError(f"candidate {c.label or '?'} lives on a different grid")
    times = _resolve_times(sub, sup, times)
    lo, hi = sub.at(times), sup.at(times)
    if lo.shape != hi.shape or lo.shape[1:] != problem.grid.shape:
        raise ValueError(f"candidate shapes differ: {lo.shape} vs {hi.shape} "
                         f"on grid {problem.grid.shape}")
    gap = hi - lo
    allowed = tol + slack_rate * (times - times[0])
    flat = gap.reshape(len(times), -1)
    per_time_min = flat.min(axis=1)
    k = int(np.argmin(per_time_min))
    idx = np.unravel_index(int(np.argmin(flat[k])), problem.grid.shape)

    initial_gap = float(per_time_min[0])
    bad = np.nonzero(per_time_min < -allowed)[0]
    first = None
    if bad.size:
        j = int(bad[0])
        first = {"time": float(times[j]), "gap": float(per_time_min[j]),
                 "index": [int(i) for i in np.unravel_index(int(np.argmin(flat[j])),
                                                           problem.grid.shape)]}
    if initial_gap < -tol:
        verdict = "hypothesis-failed"
    elif first is not None:
        verdict = "fail"
    else:
        verdict = "pass"

    info = {}
    if defect:
        info = {"sub": _defect_summary(problem, times, lo, "sub"),
                "super": _defect_summary(problem, times, hi, "super")}
    return OrderingReport(name, verdict, float(per_time_min[k]), float(times[k]),
                          tuple(int(i) for i in idx), tol, slack_rate, first,
                          initial_gap, info)


# ---------------------------------------------------------------------------
# canonical barriers of the model


@dataclass
class BarrierPair:
    name: str
    problem: EvolutionProblem
    sub: Candidate
    sup: Candidate
    slack_rate: float = 0.0

    def verify(self, tol: float = 1e-6, defect: bool = False) -> OrderingReport:
        return verify_ordering(self.problem, self.sub, self.sup, tol, self.slack_rate,
                               name=self.name, defect=defect)


def _uv_drift(grid: Grid, chi: float, v: np.ndarray) -> list[np.ndarray]:
    """Drift ``b = -chi grad(v)/v`` for the u equation written as ``+div(b u)``."""
    out = []
    for k, h in enumerate(grid.spacing):
        vl, vr = face_interior(v, k)
        vf = 2 * vl * vr / (vl + vr)
        out.append(_pad_faces(-chi * (vr - vl) / (h * vf), k))
    return out


def _piecewise(times: np.ndarray, frames: np.ndarray):
    def at(t):
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1))
        return frames[i]
    return at


def canonical_barriers(traj, params=None) -> list[BarrierPair]:
    """The three barrier pairs of the model, built from a finished trajectory.

    * ``u-nonnegative``: 0 below u.
    * ``v-lower-barrier``: ``inf v0 exp(-C(t) t)`` below v, with C the running
      sup of u before t. The scheme absorbs with ``1/(1 + dt u) >= exp(-dt u)``
      and its diffusion step cannot lower the minimum, so no slack is needed.
    * ``v-upper-barrier``: v below ``sup v0``.
    """
    from .monitors import running_sup_before

    params = params or traj.params
    grid = traj.grid
    times = traj.times
    us = np.stack([s.u for s in traj.snapshots])
    vs = np.stack([s.v for s in traj.snapshots])
    umax = float(us.max())

    u_problem = EvolutionProblem(
        grid, float(times[-1]),
        drift=lambda t, _v=_piecewise(times, vs): _uv_drift(grid, params.chi, _v(t)),
        reaction=lambda t, u: params.kappa * u - params.mu * np.maximum(u, 0) ** params.alpha,
        lipschitz=params.kappa + params.alpha * params.mu * umax ** (params.alpha - 1),
    )
    u_at = _piecewise(times, us)
    v_problem = EvolutionProblem(grid, float(times[-1]), drift=None,
                                 reaction=lambda t, v: -u_at(t) * v, lipschitz=umax)

    step_t, step_u = traj.steps["t"], traj.steps["u_inf"]
    C_steps = running_sup_before(step_t, step_u)
    C_snap = np.interp(times, step_t, C_steps)
    lower = traj.v0_inf * np.exp(-C_snap * (times - times[0]))

    zero = Candidate.sampled(times, np.zeros_like(us), grid, "0")
    u_c = Candidate.sampled(times, us, grid, "u")
    v_c = Candidate.sampled(times, vs, grid, "v")
    lower_frames = lower.reshape(-1, *([1] * grid.dim)) * np.ones_like(vs)
    low_c = Candidate.sampled(times, lower_frames, grid, "inf v0 exp(-Ct)")
    top_c = Candidate.sampled(times, np.full_like(vs, traj.v0_sup), grid, "sup v0")
    return [
        BarrierPair("u-nonnegative", u_problem, zero, u_c),
        BarrierPair("v-lower-barrier", v_problem, low_c, v_c),
        BarrierPair("v-upper-barrier", v_problem, v_c, top_c),
    ]


def barrier_tightness(traj, pair: BarrierPair) -> np.ndarray:
    """Per-sample ``min_x (sup - sub)``; near zero when the barrier is attained."""
    times = traj.times
    gap = pair.sup.at(times) - pair.sub.at(times)
    return gap.reshape(len(times), -1).min(axis=1)
