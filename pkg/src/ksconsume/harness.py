"""Library side of the command line: runs, sweeps, refinement studies and
barrier verification, plus their CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, comparison, monitors
from .config import RunConfig, SweepConfig
from .dynamics import Trajectory, advance_uv, advance_uw, reconstruct_v, run, stage_limits, \
    _drift_for

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_MONITOR, EXIT_BLOWUP, EXIT_CONFIG = 0, 2, 3, 4


@dataclass
class RunResult:
    formulation: str
    trajectory: Trajectory
    report: monitors.MonitorReport

    @property
    def exit_code(self) -> int:
        if self.trajectory.blowup.flagged:
            return EXIT_BLOWUP
        return EXIT_OK if self.report.passed else EXIT_MONITOR


def simulate(cfg: RunConfig, formulation: str, grid=None, dt=None, **kw) -> RunResult:
    grid = grid or cfg.grid()
    state = cfg.initial_state(formulation, grid)
    traj, report = run(state, cfg.params(), cfg.t_end, monitor_config=cfg.monitors,
                       snapshot_every=cfg.snapshot_every, safety=cfg.safety,
                       dt=dt if dt is not None else cfg.dt, face_average=cfg.face_average,
                       blowup=cfg.blowup, energy_pr=cfg.energy_pr(),
                       p_list=cfg.monitors.p_list, **kw)
    report.meta["config_hash"] = cfg.config_hash()
    report.meta["name"] = cfg.name
    return RunResult(formulation, traj, report)


def combined_exit(results) -> int:
    codes = [r.exit_code for r in results]
    if EXIT_BLOWUP in codes:
        return EXIT_BLOWUP
    return EXIT_MONITOR if EXIT_MONITOR in codes else EXIT_OK


# ---------------------------------------------------------------------------
# writers


def series_table(traj: Trajectory) -> dict[str, np.ndarray]:
    cv = traj.grid.cell_volume
    cols: dict[str, list] = {k: [] for k in ("t", "u_l1", "u_l2", "u_inf", "v_l1",
                                             "v_inf", "v_min")}
    if traj.energy_pr is not None:
        cols["energy"] = []
    from .dynamics import energy_density

    for s in traj.snapshots:
        cols["t"].append(s.t)
        cols["u_l1"].append(np.abs(s.u).sum() * cv)
        cols["u_l2"].append(math.sqrt((s.u**2).sum() * cv))
        cols["u_inf"].append(np.abs(s.u).max())
        cols["v_l1"].append(np.abs(s.v).sum() * cv)
        cols["v_inf"].append(np.abs(s.v).max())
        cols["v_min"].append(s.v.min())
        if traj.energy_pr is not None:
            cols["energy"].append(energy_density(s.u, s.v, s.w, traj.v0_sup,
                                                 *traj.energy_pr).sum() * cv)
    out = {k: np.asarray(v, float) for k, v in cols.items()}
    if traj.grid.dim == 1:
        try:
            oned = monitors.oned_series(traj)
        except ValueError as exc:  # cadence too coarse for window integrals
            logger.warning("1-D suite columns omitted: %s", exc)
        else:
            for k in monitors.ONED_SERIES:
                out[k] = oned[k]
    return out


def write_series_csv(path: Path, traj: Trajectory, config_hash: str) -> None:
    table = series_table(traj)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh)
        w.writerow(list(table))
        for row in zip(*table.values()):
            w.writerow([repr(float(x)) for x in row])


def write_field_dumps(directory: Path, traj: Trajectory, config_hash: str) -> int:
    directory.mkdir(parents=True, exist_ok=True)
    grid = traj.grid
    header = "t,dim,nx" + (",ny" if grid.dim == 2 else "")
    for i, s in enumerate(traj.snapshots):
        for name, arr in (("u", s.u), ("v", s.v)):
            with open(directory / f"{name}_{i:05d}.csv", "w") as fh:
                fh.write(f"# config_hash={config_hash}\n{header}\n")
                fh.write(",".join([repr(float(s.t)), str(grid.dim)]
                                  + [str(n) for n in grid.cells]) + "\n")
                rows = arr.reshape(grid.cells[0], -1)
                for row in rows:
                    fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return len(traj.snapshots)


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def write_run_outputs(out: Path, cfg: RunConfig, result: RunResult) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.name}_{result.formulation}"
    h = cfg.config_hash()
    series = out / f"{stem}_series.csv"
    report = out / f"{stem}_report.json"
    write_series_csv(series, result.trajectory, h)
    write_json(report, result.report.as_dict())
    paths = [series, report]
    if cfg.dump_fields:
        d = out / f"{stem}_fields"
        write_field_dumps(d, result.trajectory, h)
        paths.append(d)
    return paths


# ---------------------------------------------------------------------------
# sweeps


def _sweep_one(args):
    base, point = args
    cfg = replace(base, **point)
    n = cfg.dim
    gate = analysis.theorem_gate(cfg.chi, cfg.mu, n)
    row = {"chi": cfg.chi, "mu": cfg.mu, "kappa": cfg.kappa,
           "chi_ok": gate.chi_ok, "mu_weak": gate.mu_weak, "mu_strict": gate.mu_strict,
           "in_proven_region": gate.one_dimensional or (gate.chi_ok and gate.mu_strict)}
    try:
        res = simulate(cfg, cfg.formulations()[0])
    except Exception as exc:  # an exploratory point may break the integrator
        row.update(monitors_passed=0, monitors_failed=0, blowup=True,
                   final_u_inf=math.nan, status=f"error: {exc}")
        return row
    entries = [e for e in res.report.entries if e.passed is not None]
    row.update(monitors_passed=sum(e.passed for e in entries),
               monitors_failed=sum(not e.passed for e in entries),
               blowup=res.trajectory.blowup.flagged,
               final_u_inf=float(res.trajectory.snapshots[-1].u.max()),
               status=res.trajectory.status)
    return row


def sweep(sc: SweepConfig) -> list[dict]:
    jobs = [(sc.base, p) for p in sc.points()]
    if sc.workers > 1:
        with ProcessPoolExecutor(sc.workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    for row in rows:
        row["verdict"] = ("pass" if row["monitors_failed"] == 0 and not row["blowup"]
                          else "fail")
        if not row["in_proven_region"]:
            row["verdict"] = "exploratory-" + row["verdict"]
    return rows


def write_table_csv(path: Path, rows: list[dict], config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# formulation comparison


@dataclass
class CompareLevel:
    level: int
    cells: tuple[int, ...]
    h: float
    dt: float
    steps: int
    discrepancy: float
    order: float | None = None


def _fixed_dt_run(state, params, t_end, dt, advance):
    n = int(round(t_end / dt))
    if not math.isclose(n * dt, t_end, rel_tol=1e-9):
        raise ValueError("t_end must be an integer multiple of dt")
    for _ in range(n):
        state, _ = advance(state, params, dt)
    return state


def compare_formulations(cfg: RunConfig, levels: int = 3,
                         dt0: float | None = None) -> list[CompareLevel]:
    """uv against uw at cells x 2^k with dt / 4^k, sup-norm v discrepancy at t_end.

    The empirical order is with respect to h (dt shrinks like h^2).
    """
    grid0 = cfg.grid()
    params = cfg.params()
    u0, v0 = cfg.initial_arrays(grid0)
    params = params.with_default_eta(float(v0.min()))
    if dt0 is None:
        limits = []
        for form in ("uv", "uw"):
            st = cfg.initial_state(form, grid0)
            limits.append(stage_limits(st.u.values, _drift_for(st, params, cfg.face_average),
                                       grid0, params).bound)
        # half the initial limit leaves room for the limits to tighten in time
        dt0 = 0.5 * min(limits)
        n0 = math.ceil(cfg.t_end / dt0)
        dt0 = cfg.t_end / n0
    out: list[CompareLevel] = []
    for k in range(levels):
        cells = tuple(c * 2**k for c in cfg.cells)
        grid = replace(cfg, cells=cells).grid()
        dt = dt0 / 4**k
        uv = _fixed_dt_run(cfg.initial_state("uv", grid), params, cfg.t_end, dt, advance_uv)
        uw = _fixed_dt_run(cfg.initial_state("uw", grid), params, cfg.t_end, dt, advance_uw)
        disc = float(np.max(np.abs(uv.v.values - reconstruct_v(uw).values)))
        lvl = CompareLevel(k, cells, grid.h, dt, int(round(cfg.t_end / dt)), disc)
        if out and disc > 0 and out[-1].discrepancy > 0:
            lvl.order = math.log(out[-1].discrepancy / disc) / math.log(out[-1].h / grid.h)
        out.append(lvl)
    return out


# ---------------------------------------------------------------------------
# barrier verification


def verify_barriers(traj: Trajectory, tol: float = 1e-6) -> list[comparison.OrderingReport]:
    return [pair.verify(tol, defect=False) for pair in comparison.canonical_barriers(traj)]
