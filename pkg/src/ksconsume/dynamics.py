"""Explicit finite-volume time stepping for the consumption chemotaxis model.

Two formulations of the same dynamics are supported:

``uv``  u_t = Lap u - chi div(u/v grad v) + f(u),   v_t = Lap v - u v
``uw``  u_t = Lap u + chi div(u grad w) + f(u),     w_t = Lap w - |grad w|^2 + u

with ``w = -log(v / sup v0)``. Both use the same u update: explicit diffusion,
then an upwinded drift stage, then one clipped Euler step of the logistic
source ``f(u) = kappa u - mu u^alpha``. The v update absorbs ``-uv``
semi-implicitly before an explicit diffusion step, which keeps v positive and
its maximum non-increasing without any tolerance.

Each stage is positivity preserving under its own time-step limit;
:func:`suggest_dt` returns ``safety`` times the tightest of them and the
steppers refuse any dt beyond it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .grid import (
    Field,
    Grid,
    NonFiniteFieldError,
    divergence_array,
    face_differences,
    face_interior,
    laplacian_array,
    _axis_slice,
    _pad_faces,
)

logger = logging.getLogger(__name__)

DEFAULT_ETA_FACTOR = 1e-10


class CFLViolation(RuntimeError):
    """Requested dt exceeds the positivity limit of some stage."""

    def __init__(self, dt: float, bound: float, stage: str):
        self.dt, self.bound, self.stage = dt, bound, stage
        super().__init__(
            f"dt={dt:.6g} exceeds the {stage} stability limit {bound:.6g} "
            f"(ratio {dt / bound:.3g})"
        )


@dataclass(frozen=True)
class ModelParams:
    chi: float
    kappa: float
    mu: float
    alpha: float = 2.0
    # None -> DEFAULT_ETA_FACTOR * inf v0, resolved when a run starts
    eta: float | None = None

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if not self.alpha >= 2:
            raise ValueError(f"source exponent alpha must be >= 2, got {self.alpha}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    def with_default_eta(self, v0_inf: float) -> "ModelParams":
        if self.eta is not None:
            return self
        return replace(self, eta=DEFAULT_ETA_FACTOR * v0_inf)


@dataclass(frozen=True)
class StateUV:
    u: Field
    v: Field
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")
        if self.u.min() < 0:
            raise ValueError(f"u must be non-negative, min is {self.u.min():.3g}")
        if not self.v.min() > 0:
            raise ValueError(f"v must be positive, min is {self.v.min():.3g}")

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class StateUW:
    u: Field
    w: Field
    v0_sup: float
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.w.grid:
            raise ValueError("u and w live on different grids")
        if self.u.min() < 0:
            raise ValueError(f"u must be non-negative, min is {self.u.min():.3g}")
        if self.w.min() < 0:
            raise ValueError(f"w must be non-negative, min is {self.w.min():.3g}")
        if not self.v0_sup > 0:
            raise ValueError("v0_sup must be positive")

    @property
    def grid(self) -> Grid:
        return self.u.grid


def to_w(state: StateUV, v0_sup: float | None = None) -> StateUW:
    sup = state.v.max() if v0_sup is None else float(v0_sup)
    w = -np.log(state.v.values / sup)
    # v == sup gives -0.0 or a roundoff-sized negative
    w = np.maximum(w, 0.0)
    return StateUW(state.u, Field(state.grid, w), sup, state.t)


def reconstruct_v(state: StateUW) -> Field:
    return Field(state.grid, state.v0_sup * np.exp(-state.w.values))


# ---------------------------------------------------------------------------
# pointwise pieces


def _source(u: np.ndarray, p: ModelParams) -> np.ndarray:
    if p.alpha == 2.0:
        return u * (p.kappa - p.mu * u)
    return p.kappa * u - p.mu * u**p.alpha


def source_term(u: Field, params: ModelParams) -> Field:
    if u.min() < 0:
        raise ValueError("source_term got negative densities (corrupted state)")
    return Field(u.grid, _source(u.values, params))


def _smoothstep(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _sensitivity(v: np.ndarray, chi: float, eta: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        plain = chi / v
    cap = 2.0 * chi / eta
    low = v <= 0.5 * eta
    if not np.any(v < eta):
        return plain
    # weight of the capped value: 1 at v = eta/2, 0 at v = eta
    zeta = 1.0 - _smoothstep((v - 0.5 * eta) / (0.5 * eta))
    out = np.where(v >= eta, plain, zeta * cap + (1.0 - zeta) * plain)
    return np.where(low, cap, out)


def regularized_sensitivity(v: Field, chi: float, eta: float) -> Field:
    """``chi/v`` above eta, ``2 chi/eta`` below eta/2, smoothstep blend between."""
    if not v.min() > 0:
        raise ValueError("sensitivity needs v > 0")
    return Field(v.grid, _sensitivity(v.values, chi, eta))


def _face_mean(vl: np.ndarray, vr: np.ndarray, kind: str) -> np.ndarray:
    if kind == "harmonic":
        return 2.0 * vl * vr / (vl + vr)
    if kind == "arithmetic":
        return 0.5 * (vl + vr)
    raise ValueError(f"unknown face average {kind!r}")


# ---------------------------------------------------------------------------
# drift, fluxes and stage limits


@dataclass
class Drift:
    """Face velocities (padded, zero on boundary faces) plus bookkeeping."""

    faces: list[np.ndarray]
    guard_faces: int = 0
    # |grad w| on faces, only for the uw formulation
    w_slopes: list[np.ndarray] | None = None


def drift_uv(u, v: np.ndarray, grid: Grid, params: ModelParams,
             face_average: str = "harmonic") -> Drift:
    eta = params.eta if params.eta is not None else DEFAULT_ETA_FACTOR * float(v.min())
    faces, guarded = [], 0
    for k, h in enumerate(grid.spacing):
        vl, vr = face_interior(v, k)
        vf = _face_mean(vl, vr, face_average)
        guarded += int(np.count_nonzero(vf < eta))
        a = _sensitivity(vf, params.chi, eta) * (vr - vl) / h
        faces.append(_pad_faces(a, k))
    return Drift(faces, guarded)


def drift_uw(w: np.ndarray, grid: Grid, params: ModelParams) -> Drift:
    slopes = face_differences(w, grid.spacing)
    return Drift([-params.chi * g for g in slopes], 0, slopes)


def upwind_flux(u: np.ndarray, a: np.ndarray, axis: int) -> np.ndarray:
    """Donor-cell flux ``a * u_upwind`` on every face (boundary faces 0)."""
    ul, ur = face_interior(u, axis)
    ai = a[_axis_slice(a.ndim, axis, slice(1, -1))]
    return _pad_faces(np.where(ai > 0, ai * ul, ai * ur), axis)


def _outflow_rate(faces: Sequence[np.ndarray], grid: Grid) -> float:
    """max over cells of sum_k (outgoing face speeds)/h_k."""
    total = None
    for k, (a, h) in enumerate(zip(faces, grid.spacing)):
        left, right = face_interior(a, k)
        out = (np.maximum(right, 0.0) + np.maximum(-left, 0.0)) / h
        total = out if total is None else total + out
    return float(total.max())


def _slope_rate(slopes: Sequence[np.ndarray], grid: Grid) -> float:
    total = None
    for k, (g, h) in enumerate(zip(slopes, grid.spacing)):
        left, right = face_interior(np.abs(g), k)
        r = np.maximum(left, right) / h
        total = r if total is None else total + r
    return float(total.max())


@dataclass(frozen=True)
class StageLimits:
    diffusion: float
    advection: float
    source: float

    @property
    def bound(self) -> float:
        return min(self.diffusion, self.advection, self.source)

    @property
    def limiting(self) -> str:
        pairs = {"diffusion": self.diffusion, "advection": self.advection,
                 "source": self.source}
        return min(pairs, key=pairs.get)

    def fractions(self, dt: float) -> dict[str, float]:
        return {
            "cfl_diffusion": dt / self.diffusion,
            "cfl_advection": dt / self.advection if math.isfinite(self.advection) else 0.0,
            "cfl_source": dt / self.source if math.isfinite(self.source) else 0.0,
        }


def stage_limits(u: np.ndarray, drift: Drift, grid: Grid, params: ModelParams) -> StageLimits:
    diff = 1.0 / sum(2.0 / h**2 for h in grid.spacing)
    rate = _outflow_rate(drift.faces, grid)
    if drift.w_slopes is not None:
        rate = max(rate, _slope_rate(drift.w_slopes, grid))
    adv = 1.0 / rate if rate > 0 else math.inf
    umax = float(u.max())
    growth = params.kappa + params.mu * umax ** (params.alpha - 1.0)
    src = 1.0 / growth if growth > 0 else math.inf
    return StageLimits(diff, adv, src)


def _drift_for(state, params: ModelParams, face_average: str) -> Drift:
    if isinstance(state, StateUV):
        return drift_uv(state.u.values, state.v.values, state.grid, params, face_average)
    return drift_uw(state.w.values, state.grid, params)


def suggest_dt(state, params: ModelParams, grid: Grid | None = None,
               safety: float = 0.9, face_average: str = "harmonic") -> float:
    """``safety * min(diffusion, advection, source)`` positivity limits.

    diffusion: ``1 / sum_k 2/h_k^2`` (``h^2/(2 dim)`` on square cells);
    advection: inverse of the largest per-cell outflow rate, which is
    ``h/|drift|`` for a one-signed drift; source: ``1/(kappa + mu max u^(alpha-1))``.
    """
    if not safety > 0:
        raise ValueError("safety must be positive")
    grid = grid or state.grid
    drift = _drift_for(state, params, face_average)
    return safety * stage_limits(state.u.values, drift, grid, params).bound


# ---------------------------------------------------------------------------
# steppers


@dataclass
class StepInfo:
    dt: float
    limits: StageLimits
    guard_faces: int = 0
    u_clip: float = 0.0
    w_clip: float = 0.0


def _check_dt(dt: float, limits: StageLimits) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > limits.bound * (1.0 + 1e-12):
        raise CFLViolation(dt, limits.bound, limits.limiting)


def _advance_u(u: np.ndarray, drift: Drift, grid: Grid, params: ModelParams,
               dt: float) -> tuple[np.ndarray, float]:
    h = grid.spacing
    u1 = u + dt * laplacian_array(u, h)
    fluxes = [upwind_flux(u1, a, k) for k, a in enumerate(drift.faces)]
    u2 = u1 - dt * divergence_array(fluxes, h)
    # both stages are convex combinations under their limits; clear roundoff
    np.maximum(u2, 0.0, out=u2)
    u3 = u2 + dt * _source(u2, params)
    neg = np.minimum(u3, 0.0)
    clip = float(-neg.sum() * grid.cell_volume)
    return np.maximum(u3, 0.0), clip


def _finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteFieldError(f"{name} became non-finite")


def advance_uv(state: StateUV, params: ModelParams, dt: float,
               face_average: str = "harmonic", drift: Drift | None = None,
               limits: StageLimits | None = None) -> tuple[StateUV, StepInfo]:
    grid = state.grid
    u, v = state.u.values, state.v.values
    if drift is None:
        drift, limits = drift_uv(u, v, grid, params, face_average), None
    limits = limits or stage_limits(u, drift, grid, params)
    _check_dt(dt, limits)

    u_new, clip = _advance_u(u, drift, grid, params, dt)
    v_star = v / (1.0 + dt * u)
    v_new = v_star + dt * laplacian_array(v_star, grid.spacing)
    _finite(u_new, "u")
    _finite(v_new, "v")
    if not v_new.min() > 0:
        raise FloatingPointError("v lost positivity (underflow?)")
    new = StateUV(Field(grid, u_new), Field(grid, v_new), state.t + dt)
    return new, StepInfo(dt, limits, drift.guard_faces, clip)


def step_uv(state: StateUV, params: ModelParams, dt: float,
            face_average: str = "harmonic") -> StateUV:
    return advance_uv(state, params, dt, face_average)[0]


def gradient_squared_cells(w: np.ndarray, grid: Grid,
                           slopes: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """|grad w|^2 at cells: per axis, the mean of the two squared face slopes."""
    slopes = slopes if slopes is not None else face_differences(w, grid.spacing)
    total = None
    for k, g in enumerate(slopes):
        left, right = face_interior(g * g, k)
        avg = 0.5 * (left + right)
        total = avg if total is None else total + avg
    return total


def advance_uw(state: StateUW, params: ModelParams, dt: float,
               drift: Drift | None = None, limits: StageLimits | None = None,
               **_ignored) -> tuple[StateUW, StepInfo]:
    grid = state.grid
    u, w = state.u.values, state.w.values
    if drift is None:
        drift, limits = drift_uw(w, grid, params), None
    limits = limits or stage_limits(u, drift, grid, params)
    _check_dt(dt, limits)

    u_new, clip = _advance_u(u, drift, grid, params, dt)
    w_new = w + dt * (laplacian_array(w, grid.spacing)
                      - gradient_squared_cells(w, grid, drift.w_slopes) + u)
    neg = np.minimum(w_new, 0.0)
    w_clip = float(-neg.sum() * grid.cell_volume)
    w_new = np.maximum(w_new, 0.0)
    _finite(u_new, "u")
    _finite(w_new, "w")
    new = StateUW(Field(grid, u_new), Field(grid, w_new), state.v0_sup, state.t + dt)
    return new, StepInfo(dt, limits, 0, clip, w_clip)


def step_uw(state: StateUW, params: ModelParams, dt: float) -> StateUW:
    return advance_uw(state, params, dt)[0]


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray | None = None


@dataclass
class BlowupVerdict:
    flagged: bool = False
    reason: str = ""
    time: float | None = None
    value: float | None = None

    def as_dict(self) -> dict:
        return {"flagged": self.flagged, "reason": self.reason,
                "time": self.time, "value": self.value}


@dataclass
class BlowupConfig:
    ceiling: float = 1e6
    q: float | None = None          # None -> dim + 1
    window: float = 1.0             # time units inspected by the growth test
    growth_factor: float = 1e3      # minimal rise over the window to flag
    dt_floor: float = 1e-12


@dataclass
class Trajectory:
    formulation: str
    grid: Grid
    params: ModelParams
    v0_sup: float
    v0_inf: float
    snapshots: list[Snapshot] = field(default_factory=list)
    steps: dict[str, np.ndarray] = field(default_factory=dict)
    p_list: tuple[float, ...] = (1.0, 2.0, 4.0)
    energy_pr: tuple[float, float] | None = None
    status: str = "running"
    blowup: BlowupVerdict = field(default_factory=BlowupVerdict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def u0(self) -> np.ndarray:
        return self.snapshots[0].u

    @property
    def v0(self) -> np.ndarray:
        return self.snapshots[0].v

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def energy_density(u: np.ndarray, v: np.ndarray, w: np.ndarray | None,
                   v0_sup: float, p: float, r: float) -> np.ndarray:
    """Pointwise ``u^p v^-r``; via ``exp(r w)`` when w is available (no underflow)."""
    if w is not None:
        return u**p * np.exp(r * w) * v0_sup ** (-r)
    return u**p * v ** (-r)


def state_scalars(u: np.ndarray, v: np.ndarray, w: np.ndarray | None, grid: Grid,
                  p_list: Sequence[float], energy_pr, v0_sup: float) -> dict[str, float]:
    """The per-step scalar record used by the structural monitors."""
    cv = grid.cell_volume
    out = {
        "int_u": float(u.sum() * cv),
        "int_u2": float((u * u).sum() * cv),
        "u_inf": float(u.max()),
        "u_min": float(u.min()),
        "v_min": float(v.min()),
        "v_max": float(v.max()),
    }
    for p in p_list:
        out[f"v_l{p:g}"] = float(((v**p).sum() * cv) ** (1.0 / p))
    if energy_pr is not None:
        out["energy"] = float(energy_density(u, v, w, v0_sup, *energy_pr).sum() * cv)
    return out


def _split(state) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    if isinstance(state, StateUV):
        return state.u.values, state.v.values, None
    return state.u.values, reconstruct_v(state).values, state.w.values


def check_initial_data(state) -> None:
    """u0 >= 0 and v0 > 0 everywhere (the admissible initial data)."""
    if not isinstance(state, (StateUV, StateUW)):
        raise TypeError(f"unsupported initial state {type(state).__name__}")
    if state.u.min() < 0:
        raise ValueError("initial u must be non-negative")
    if isinstance(state, StateUV) and not state.v.min() > 0:
        raise ValueError("initial v must be strictly positive")


def run(initial, params: ModelParams, t_end: float, monitor_config=None,
        snapshot_every: float = 0.05, safety: float = 0.9, dt: float | None = None,
        face_average: str = "harmonic", blowup: BlowupConfig | None = None,
        energy_pr: tuple[float, float] | None | str = "auto",
        p_list: Sequence[float] = (1.0, 2.0, 4.0),
        on_snapshot: Callable[[Snapshot], None] | None = None):
    """Integrate to ``t_end`` and evaluate the monitors.

    ``dt`` fixes the step (still checked against the stage limits); otherwise
    each step uses ``suggest_dt(..., safety)``. A ``safety`` above 1 will trip
    :class:`CFLViolation`. ``energy_pr="auto"`` picks the admissible (p, r) for
    the parameters and grid dimension, if there is one.

    Returns ``(trajectory, report)``. A suspected blow-up ends the run early
    with ``trajectory.status == "blowup"``.
    """
    from . import analysis, monitors

    check_initial_data(initial)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not snapshot_every > 0:
        raise ValueError("snapshot_every must be positive")
    blowup = blowup or BlowupConfig()
    monitor_config = monitor_config or monitors.MonitorConfig()
    grid = initial.grid

    if isinstance(initial, StateUV):
        formulation = "uv"
        v0_sup, v0_inf = initial.v.max(), initial.v.min()
        advance = advance_uv
    elif isinstance(initial, StateUW):
        formulation = "uw"
        v0 = reconstruct_v(initial)
        v0_sup, v0_inf = initial.v0_sup, v0.min()
        advance = advance_uw
    else:
        raise TypeError(f"unsupported initial state {type(initial).__name__}")
    params = params.with_default_eta(v0_inf)
    if energy_pr == "auto":
        energy_pr = analysis.admissible_pair(params.chi, params.mu, grid.dim)

    traj = Trajectory(formulation, grid, params, v0_sup, v0_inf,
                      p_list=tuple(p_list), energy_pr=energy_pr)
    q = blowup.q if blowup.q is not None else grid.dim + 1
    rows: list[dict[str, float]] = []
    detector_t: list[float] = []
    detector_s: list[float] = []
    diag = {"steps": 0, "guard_faces": 0, "guard_steps": 0, "u_clip": 0.0,
            "w_clip": 0.0, "max_cfl": 0.0}

    def record(state, info: StepInfo | None):
        u, v, w = _split(state)
        row = state_scalars(u, v, w, grid, traj.p_list, energy_pr, v0_sup)
        row["t"] = state.t
        row["dt"] = info.dt if info else 0.0
        rows.append(row)
        return u, v, w

    def snapshot(state, u, v, w) -> bool:
        snap = Snapshot(state.t, u.copy(), v.copy(), None if w is None else w.copy())
        traj.snapshots.append(snap)
        if on_snapshot:
            on_snapshot(snap)
        s = monitors.extensibility_norm(u, v, grid, q)
        detector_t.append(state.t)
        detector_s.append(s)
        verdict = monitors.growth_verdict(np.array(detector_t), np.array(detector_s), blowup)
        if verdict.flagged:
            traj.blowup = verdict
            return True
        return False

    state = initial
    u, v, w = record(state, None)
    snapshot(state, u, v, w)
    n_snap = 1
    stop = False
    while not stop and state.t < t_end * (1 - 1e-14):
        target = min(n_snap * snapshot_every, t_end)
        drift = _drift_for(state, params, face_average)
        limits = stage_limits(state.u.values, drift, grid, params)
        step = dt if dt is not None else safety * limits.bound
        remaining = target - state.t
        hit = remaining <= step * (1 + 1e-9)
        if hit:
            step = remaining
        if step < blowup.dt_floor:
            traj.blowup = BlowupVerdict(True, "step-size collapse", state.t, step)
            break
        state, info = advance(state, params, step, face_average=face_average, drift=drift,
                              limits=limits)
        if hit:
            state = replace(state, t=target)
        diag["steps"] += 1
        diag["guard_faces"] += info.guard_faces
        diag["guard_steps"] += info.guard_faces > 0
        diag["u_clip"] += info.u_clip
        diag["w_clip"] += info.w_clip
        diag["max_cfl"] = max(diag["max_cfl"], step / limits.bound)
        u, v, w = record(state, info)
        if rows[-1]["u_inf"] > blowup.ceiling:
            traj.blowup = BlowupVerdict(True, "ceiling", state.t, rows[-1]["u_inf"])
            stop = True
        if hit:
            stop = snapshot(state, u, v, w) or stop
            n_snap += 1
    if traj.snapshots[-1].t != state.t:
        snapshot(state, u, v, w)

    traj.steps = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    traj.diagnostics = diag
    traj.status = "blowup" if traj.blowup.flagged else "completed"
    if diag["guard_faces"]:
        logger.warning("sensitivity guard was active on %d faces over %d steps",
                       diag["guard_faces"], diag["guard_steps"])
    report = monitors.evaluate(traj, monitor_config)
    return traj, report
