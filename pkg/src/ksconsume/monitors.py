"""Trajectory monitors for the a-priori estimates of the model.

Each monitor turns a trajectory into a :class:`MonitorEntry`: a time series of
(value, bound) pairs, the largest relative violation and a verdict. Bounds with
explicit constants are computed from the parameters and the initial data only.
Estimates whose constant is only known to exist (the one-dimensional suite) are
checked with a trend test instead: the maximum over the second half of the run
may exceed the maximum over the first half by at most ``tol_growth``.

Scalar monitors read the per-step record ``trajectory.steps`` when it carries
the quantity they need, so they see every accepted step and not just the
snapshots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import analysis
from .grid import face_differences, laplacian_array

if TYPE_CHECKING:
    from .dynamics import BlowupConfig, BlowupVerdict, ModelParams, Trajectory

MAX_WINDOW_CADENCE = 0.05


@dataclass
class MonitorConfig:
    enabled: tuple[str, ...] | None = None
    tol_positivity: float = 1e-6
    tol_mass: float = 1e-3
    tol_spacetime: float = 1e-2
    tol_vp: float = 1e-6
    tol_vinf: float = 1e-6
    tol_energy_end: float = 1e-3
    tol_energy_step: float = 1e-6
    tol_lower: float = 1e-6
    tol_growth: float = 0.05
    p_list: tuple[float, ...] = (1.0, 2.0, 4.0)

    def wants(self, name: str) -> bool:
        return self.enabled is None or name in self.enabled

    def tolerances(self) -> dict[str, float]:
        return {k: v for k, v in self.__dict__.items() if k.startswith("tol_")}


@dataclass
class MonitorEntry:
    name: str
    tag: str
    kind: str  # "bound" (hard inequality), "trend", or "info"
    times: np.ndarray
    values: np.ndarray
    bounds: np.ndarray
    tolerance: float
    max_violation: float
    passed: bool | None
    note: str = ""

    def as_dict(self, max_points: int = 2000) -> dict:
        n = len(self.times)
        idx = np.arange(n)
        if n > max_points:
            idx = np.unique(np.linspace(0, n - 1, max_points).astype(int))

        def clean(a):
            return [None if not math.isfinite(x) else float(x) for x in np.asarray(a)[idx]]

        return {
            "name": self.name,
            "tag": self.tag,
            "kind": self.kind,
            "bound_constant": _scalar_bound(self.bounds),
            "max_relative_violation": float(self.max_violation),
            "tolerance": self.tolerance,
            "verdict": {True: "pass", False: "fail", None: "info"}[self.passed],
            "note": self.note,
            "series": {"t": clean(self.times), "value": clean(self.values),
                       "bound": clean(self.bounds)},
        }


def _scalar_bound(bounds: np.ndarray):
    b = np.asarray(bounds, float)
    if b.size and np.all(b == b[0]) and math.isfinite(b[0]):
        return float(b[0])
    return None


@dataclass
class MonitorReport:
    entries: list[MonitorEntry] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=dict)
    blowup: "BlowupVerdict | None" = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> MonitorEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed is not False for e in self.entries)

    def failures(self) -> list[str]:
        return [e.name for e in self.entries if e.passed is False]

    def summary_lines(self) -> list[str]:
        lines = []
        for e in self.entries:
            verdict = {True: "PASS", False: "FAIL", None: "info"}[e.passed]
            lines.append(f"{verdict:4s} {e.name:24s} max rel. violation "
                         f"{e.max_violation:+.3e} (tol {e.tolerance:g}) {e.note}")
        if self.blowup is not None and self.blowup.flagged:
            lines.append(f"BLOW-UP suspected: {self.blowup.reason} at t={self.blowup.time}")
        return lines

    def as_dict(self) -> dict:
        return {
            **self.meta,
            "passed": self.passed,
            "tolerances": self.tolerances,
            "blowup": self.blowup.as_dict() if self.blowup is not None else None,
            "monitors": [e.as_dict() for e in self.entries],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


# ---------------------------------------------------------------------------
# helpers


def _make(name, tag, times, values, bounds, violations, tol, note="", kind="bound"):
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    bounds = np.broadcast_to(np.asarray(bounds, float), values.shape).copy()
    viol = np.asarray(violations, float)
    worst = float(np.max(viol)) if viol.size else 0.0
    passed = None if kind == "info" else bool(worst <= tol)
    return MonitorEntry(name, tag, kind, times, values, bounds, tol, worst, passed, note)


def _rel(value, bound):
    value, bound = np.asarray(value, float), np.asarray(bound, float)
    scale = np.maximum(np.abs(bound), 1e-300)
    return (value - bound) / scale


def series(traj: "Trajectory", key: str) -> tuple[np.ndarray, np.ndarray]:
    """(t, values) of a scalar, preferring the per-step record."""
    if key in traj.steps:
        return traj.steps["t"], traj.steps[key]
    from .dynamics import state_scalars

    t, vals = [], []
    for s in traj.snapshots:
        row = state_scalars(s.u, s.v, s.w, traj.grid, traj.p_list, traj.energy_pr, traj.v0_sup)
        if key not in row:
            raise KeyError(f"scalar {key!r} is not available")
        t.append(s.t)
        vals.append(row[key])
    return np.array(t), np.array(vals)


def window_integral(t: np.ndarray, y: np.ndarray, width: float = 1.0) -> np.ndarray:
    """``int_{max(0, t_j - width)}^{t_j} y`` for every sample, y piecewise linear."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    dt = np.diff(t)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (y[1:] + y[:-1]))])

    def primitive(s):
        i = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
        h = s - t[i]
        span = np.where(dt[i] > 0, dt[i], 1.0)
        slope = (y[i + 1] - y[i]) / span
        return cum[i] + y[i] * h + 0.5 * slope * h * h

    if len(t) < 2:
        return np.zeros_like(y)
    lower = np.maximum(t - width, t[0])
    return cum - primitive(lower)


# ---------------------------------------------------------------------------
# monitors with explicit constants


def mass_bound_value(int_u0: float, params: "ModelParams", volume: float) -> float:
    return max(int_u0, params.kappa * volume / params.mu)


def positivity(traj: "Trajectory", tol: float = 1e-6) -> MonitorEntry:
    t, umin = series(traj, "u_min")
    _, vmin = series(traj, "v_min")
    scale = max(1.0, float(traj.u0.max()))
    viol = np.maximum(-umin / scale, np.where(vmin > 0, -np.inf, np.inf))
    return _make("positivity", "u>=0,v>0", t, np.minimum(umin, vmin), 0.0, viol, tol,
                 note=f"min u {umin.min():.3e}, min v {vmin.min():.3e}")


def mass_bound(traj: "Trajectory", params: "ModelParams" = None, tol: float = 1e-3) -> MonitorEntry:
    params = params or traj.params
    t, mass = series(traj, "int_u")
    m = mass_bound_value(mass[0], params, traj.grid.volume)
    return _make("mass_bound", "L1 bound on u", t, mass, m, _rel(mass, m), tol,
                 note=f"m = {m:.6g}")


def spacetime_u2(traj: "Trajectory", params: "ModelParams" = None, tol: float = 1e-2) -> MonitorEntry:
    params = params or traj.params
    t, mass = series(traj, "int_u")
    _, u2 = series(traj, "int_u2")
    m = mass_bound_value(mass[0], params, traj.grid.volume)
    bound = (params.kappa + 1.0) * m / params.mu
    win = window_integral(t, u2, 1.0)
    return _make("spacetime_u2", "window L2 bound on u", t, win, bound, _rel(win, bound),
                 tol, note=f"C = (kappa+1) m / mu = {bound:.6g}")


def odi_bound(y0: float, C: float, a: float) -> float:
    """Bound ``y0 + C/(1 - exp(-a))`` for ``y' + a y <= h`` with unit-window integrals of h below C."""
    if not a > 0:
        raise ValueError(f"decay rate a must be positive, got {a}")
    return y0 + C / (-math.expm1(-a))


def vp_decay(traj: "Trajectory", p_list: Sequence[float] = (1.0, 2.0, 4.0),
             tol: float = 1e-6) -> list[MonitorEntry]:
    out = []
    for p in p_list:
        t, norm = series(traj, f"v_l{p:g}")
        prev = np.concatenate([[norm[0]], norm[:-1]])
        viol = np.where(prev > 0, norm / np.maximum(prev, 1e-300) - 1.0, 0.0)
        out.append(_make(f"vp_decay_p{p:g}", f"||v||_{p:g} non-increasing", t, norm, prev,
                         viol, tol))
    return out


def vinf_bound(traj: "Trajectory", tol: float = 1e-6) -> MonitorEntry:
    t, vmax = series(traj, "v_max")
    prev = np.concatenate([[traj.v0_sup], vmax[:-1]])
    viol = np.maximum(vmax / prev - 1.0, vmax / traj.v0_sup - 1.0)
    return _make("vinf_bound", "sup v <= sup v0", t, vmax, prev, viol, tol)


def energy_upvr(traj: "Trajectory", p: float, r: float, params: "ModelParams" = None,
                tol_end: float = 1e-3, tol_step: float = 1e-6) -> list[MonitorEntry]:
    """Groenwall control of ``E(t) = int u^p v^-r``: ``E(t) <= exp(p kappa t) E(0)``.

    Returns the endpoint entry and the per-step ratio entry. For (p, r) outside
    the admissible window both are informational.
    """
    from .dynamics import energy_density

    params = params or traj.params
    if traj.energy_pr is not None and tuple(traj.energy_pr) == (p, r) and "energy" in traj.steps:
        t, E = traj.steps["t"], traj.steps["energy"]
    else:
        cv = traj.grid.cell_volume
        t = traj.times
        E = np.array([energy_density(s.u, s.v, s.w, traj.v0_sup, p, r).sum() * cv
                      for s in traj.snapshots])
    admissible = p > 1 and p * params.chi**2 < 1 and analysis.exponent_window(
        p, params.chi, params.mu).contains(r)
    kind = "bound" if admissible else "info"
    note = f"p={p:.6g}, r={r:.6g}"
    if not admissible:
        note += "; not covered by the admissible window (informational)"

    growth = np.exp(p * params.kappa * (t - t[0]))
    end_bound = growth * E[0]
    end_viol = np.where(end_bound > 0, _rel(E, end_bound), np.where(E > 0, np.inf, 0.0))
    end = _make("energy_upvr", "int u^p v^-r Groenwall", t, E, end_bound, end_viol,
                tol_end, note, kind)

    ratio = np.ones_like(E)
    ratio[1:] = np.where(E[:-1] > 0, E[1:] / np.maximum(E[:-1], 1e-300), 1.0)
    allowed = np.ones_like(E)
    allowed[1:] = np.exp(p * params.kappa * np.diff(t))
    step = _make("energy_upvr_step", "per-step Groenwall ratio", t, ratio, allowed,
                 ratio / allowed - 1.0, tol_step, note, kind)

    if np.all(E > 0):
        # the ratio record must telescope to the endpoint ratio
        lhs = np.sum(np.log(ratio[1:]))
        rhs = math.log(E[-1] / E[0])
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs)), "energy ratios do not telescope"
    return [end, step]


def running_sup_before(t: np.ndarray, umax: np.ndarray) -> np.ndarray:
    """C(t_k) = max_{j<k} ||u(t_j)||_inf (the rate that acted on [0, t_k])."""
    c = np.maximum.accumulate(umax)
    return np.concatenate([[umax[0]], c[:-1]])


def lower_bound_v(traj: "Trajectory", tol: float = 1e-6) -> MonitorEntry:
    t, vmin = series(traj, "v_min")
    _, umax = series(traj, "u_inf")
    C = running_sup_before(t, umax)
    barrier = traj.v0_inf * np.exp(-C * (t - t[0]))
    viol = np.where(barrier > 0, (barrier - vmin) / np.maximum(barrier, 1e-300), 0.0)
    return _make("lower_bound_v", "v >= inf v0 exp(-C t)", t, vmin, barrier, viol, tol,
                 note=f"C(T) = {C[-1]:.6g}")


# ---------------------------------------------------------------------------
# one-dimensional suite (existence-only bounds, trend tested)

ONED_SERIES = ("wx_l2", "wxx2_window", "wx6_window", "u_l2", "ux2_window",
               "u6_window", "wx4")


def _snapshot_w(traj: "Trajectory", snap) -> np.ndarray:
    if snap.w is not None:
        return snap.w
    with np.errstate(divide="ignore"):
        return np.maximum(-np.log(snap.v / traj.v0_sup), 0.0)


def oned_series(traj: "Trajectory") -> dict[str, np.ndarray]:
    """Time series of the seven one-dimensional quantities at the snapshots."""
    grid = traj.grid
    if grid.dim != 1:
        raise ValueError("the one-dimensional suite needs a 1-D grid")
    h = grid.spacing[0]
    t = traj.times
    if len(t) > 2 and np.max(np.diff(t)[:-1], initial=0.0) > MAX_WINDOW_CADENCE * (1 + 1e-9):
        raise ValueError(f"window monitors need snapshot cadence <= {MAX_WINDOW_CADENCE}")
    rows = {k: [] for k in ("wx2", "wxx2", "wx6", "u2", "ux2", "u6", "wx4", "u_inf")}
    for s in traj.snapshots:
        w = _snapshot_w(traj, s)
        wx = face_differences(w, grid.spacing)[0]
        ux = face_differences(s.u, grid.spacing)[0]
        wxx = laplacian_array(w, grid.spacing)
        rows["wx2"].append(np.sum(wx**2) * h)
        rows["wxx2"].append(np.sum(wxx**2) * h)
        rows["wx6"].append(np.sum(wx**6) * h)
        rows["u2"].append(np.sum(s.u**2) * h)
        rows["ux2"].append(np.sum(ux**2) * h)
        rows["u6"].append(np.sum(s.u**6) * h)
        rows["wx4"].append(np.sum(wx**4) * h)
        rows["u_inf"].append(float(s.u.max()))
    r = {k: np.array(v) for k, v in rows.items()}
    return {
        "t": t,
        "wx_l2": np.sqrt(r["wx2"]),
        "wxx2_window": window_integral(t, r["wxx2"]),
        "wx6_window": window_integral(t, r["wx6"]),
        "u_l2": np.sqrt(r["u2"]),
        "ux2_window": window_integral(t, r["ux2"]),
        "u6_window": window_integral(t, r["u6"]),
        "wx4": r["wx4"],
        "u_inf": r["u_inf"],
    }


def trend_test(t: np.ndarray, values: np.ndarray, tol_growth: float = 0.05,
               split: float | None = None) -> tuple[float, float, float]:
    """(first-half max, second-half max, relative excess of the second over the first)."""
    split = 0.5 * (t[0] + t[-1]) if split is None else split
    first = values[t <= split]
    second = values[t >= split]
    m1 = float(np.max(first)) if first.size else 0.0
    m2 = float(np.max(second)) if second.size else 0.0
    if m1 > 0:
        excess = m2 / m1 - 1.0
    else:
        excess = 0.0 if m2 <= 0 else math.inf
    return m1, m2, excess


def oned_suite(traj: "Trajectory", params: "ModelParams" = None,
               tol_growth: float = 0.05) -> list[MonitorEntry]:
    data = oned_series(traj)
    t = data["t"]
    out = []
    for name in (*ONED_SERIES, "u_inf"):
        vals = data[name]
        # partially filled windows (t < t0 + 1) would fake growth
        start = t[0] + 1.0 if name.endswith("_window") else t[0]
        sel = t >= start - 1e-12
        kind, note = "trend", ""
        if t[-1] - start <= 0 or sel.sum() < 2:
            kind, note = "info", "horizon too short for a trend test; "
            sel = np.ones_like(t, dtype=bool)
        m1, m2, excess = trend_test(t[sel], vals[sel], tol_growth)
        running = np.maximum.accumulate(vals)
        out.append(_make(f"oned_{name}", "uniformly bounded (trend)", t, vals, running,
                         [excess], tol_growth,
                         note=note + f"max first half {m1:.4g}, second {m2:.4g}", kind=kind))
    return out


# ---------------------------------------------------------------------------
# blow-up heuristic


def extensibility_norm(u: np.ndarray, v: np.ndarray, grid, q: float) -> float:
    """``||u||_inf + (||v||_q^q + ||grad v||_q^q)^(1/q)`` on the grid."""
    cv = grid.cell_volume
    total = np.sum(np.abs(v) ** q) * cv
    for g in face_differences(v, grid.spacing):
        total += np.sum(np.abs(g) ** q) * cv
    return float(np.max(u) + total ** (1.0 / q))


def growth_verdict(t: np.ndarray, s: np.ndarray, config: "BlowupConfig") -> "BlowupVerdict":
    from .dynamics import BlowupVerdict

    over = np.nonzero(s >= config.ceiling)[0]
    if over.size:
        i = int(over[0])
        return BlowupVerdict(True, "ceiling", float(t[i]), float(s[i]))
    if len(t) < 5 or t[-1] - t[0] < config.window:
        return BlowupVerdict()
    sel = t >= t[-1] - config.window
    if sel.sum() < 5:
        return BlowupVerdict()
    tw, sw = t[sel], np.log(np.maximum(s[sel], 1e-300))
    if sw[-1] - sw[0] < math.log(config.growth_factor):
        return BlowupVerdict()
    c2, c1, _ = np.polyfit(tw - tw[0], sw, 2)
    if c2 > 0 and c1 + 2 * c2 * (tw[-1] - tw[0]) > 0:
        return BlowupVerdict(True, "superlinear growth of log-norm", float(t[-1]), float(s[-1]))
    return BlowupVerdict()


def blowup_detector(traj: "Trajectory", q: float | None = None,
                    config: "BlowupConfig | None" = None) -> "BlowupVerdict":
    """Heuristic check of the extensibility norm along the snapshots. Never a proof."""
    from .dynamics import BlowupConfig

    config = config or BlowupConfig()
    q = q if q is not None else (config.q or traj.grid.dim + 1)
    s = np.array([extensibility_norm(sn.u, sn.v, traj.grid, q) for sn in traj.snapshots])
    return growth_verdict(traj.times, s, config)


# ---------------------------------------------------------------------------


def evaluate(traj: "Trajectory", config: MonitorConfig | None = None) -> MonitorReport:
    config = config or MonitorConfig()
    params = traj.params
    report = MonitorReport(tolerances=config.tolerances(), blowup=traj.blowup)
    e = report.entries
    if config.wants("positivity"):
        e.append(positivity(traj, config.tol_positivity))
    if config.wants("mass_bound"):
        e.append(mass_bound(traj, params, config.tol_mass))
    if config.wants("spacetime_u2"):
        e.append(spacetime_u2(traj, params, config.tol_spacetime))
    if config.wants("vp_decay"):
        e.extend(vp_decay(traj, config.p_list, config.tol_vp))
    if config.wants("vinf_bound"):
        e.append(vinf_bound(traj, config.tol_vinf))
    if config.wants("energy_upvr") and traj.energy_pr is not None:
        e.extend(energy_upvr(traj, *traj.energy_pr, params,
                             config.tol_energy_end, config.tol_energy_step))
    if config.wants("lower_bound_v"):
        e.append(lower_bound_v(traj, config.tol_lower))
    if config.wants("oned_suite") and traj.grid.dim == 1:
        e.extend(oned_suite(traj, params, config.tol_growth))
    report.meta.update({
        "formulation": traj.formulation,
        "status": traj.status,
        "t_final": float(traj.snapshots[-1].t),
        "energy_pr": list(traj.energy_pr) if traj.energy_pr is not None else None,
        "diagnostics": {k: float(v) for k, v in traj.diagnostics.items()},
    })
    return report
