"""Run and sweep configuration: INI files, presets, env overrides, hashing.

Layout of a run file::

    [run]
    preset = 2d-thm1        ; optional base, any key below overrides it
    formulation = uv        ; uv, uw or both
    t_end = 20
    snapshot_every = 0.05
    safety = 0.9
    seed = 0
    [grid]    dim, extents, cells (comma separated per axis)
    [params]  chi, kappa, mu, alpha, eta
    [u0] / [v0]  kind = constant | gaussian | cosine, base, amplitude, width,
                 center, mode, noise
    [monitors]  enabled = all | comma list, energy = auto | none | "p, r",
                and any tol_* field of MonitorConfig
    [blowup]  ceiling, q, window, growth_factor
    [output]  dump_fields = true | false
    [sweep]   chi, mu, kappa lists, max_runs, workers (sweep files only)

Environment variables ``KSCONSUME_<SECTION>__<KEY>`` override any key, e.g.
``KSCONSUME_PARAMS__CHI=0.5`` or ``KSCONSUME_RUN__T_END=2``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import presets
from .dynamics import BlowupConfig, ModelParams, StateUV, to_w
from .grid import Grid, build_grid
from .monitors import MAX_WINDOW_CADENCE, MonitorConfig

ENV_PREFIX = "KSCONSUME_"
FORMULATIONS = ("uv", "uw", "both")
INITIAL_KINDS = ("constant", "gaussian", "cosine")
WINDOW_MONITORS = ("spacetime_u2", "oned_suite")
MONITOR_NAMES = ("positivity", "mass_bound", "spacetime_u2", "vp_decay", "vinf_bound",
                 "energy_upvr", "lower_bound_v", "oned_suite")


class ConfigError(ValueError):
    pass


@dataclass
class InitialSpec:
    kind: str = "constant"
    base: float = 1.0
    amplitude: float = 0.0
    width: float = 0.1
    center: tuple[float, ...] | None = None   # default: middle of the domain
    mode: int = 1
    noise: float = 0.0                        # relative uniform noise, seeded

    def build(self, grid: Grid, rng: np.random.Generator) -> np.ndarray:
        X = grid.mesh()
        if self.kind == "constant":
            f = np.full(grid.shape, self.base)
        elif self.kind == "gaussian":
            c = self.center or tuple(0.5 * e for e in grid.extents)
            if len(c) != grid.dim:
                raise ConfigError("gaussian center needs one coordinate per axis")
            r2 = sum((x - ck) ** 2 for x, ck in zip(X, c))
            f = self.base + self.amplitude * np.exp(-r2 / (2 * self.width**2))
        elif self.kind == "cosine":
            prod = np.ones(grid.shape)
            for x, L in zip(X, grid.extents):
                prod = prod * np.cos(self.mode * math.pi * x / L)
            f = self.base + self.amplitude * prod
        else:
            raise ConfigError(f"unknown initial-data kind {self.kind!r}")
        if self.noise:
            f = f * (1.0 + self.noise * rng.uniform(-1, 1, grid.shape))
        return f


@dataclass
class RunConfig:
    name: str = "run"
    preset: str | None = None
    formulation: str = "uv"
    dim: int = 1
    extents: tuple[float, ...] = (1.0,)
    cells: tuple[int, ...] = (64,)
    chi: float = 1.0
    kappa: float = 1.0
    mu: float = 1.0
    alpha: float = 2.0
    eta: float | None = None
    u0: InitialSpec = field(default_factory=InitialSpec)
    v0: InitialSpec = field(default_factory=InitialSpec)
    t_end: float = 1.0
    snapshot_every: float = 0.05
    safety: float = 0.9
    dt: float | None = None
    face_average: str = "harmonic"
    seed: int = 0
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    energy: str = "auto"
    blowup: BlowupConfig = field(default_factory=BlowupConfig)
    dump_fields: bool = False

    def validate(self) -> "RunConfig":
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}")
        if self.face_average not in ("harmonic", "arithmetic"):
            raise ConfigError("face_average must be harmonic or arithmetic")
        for spec in (self.u0, self.v0):
            if spec.kind not in INITIAL_KINDS:
                raise ConfigError(f"unknown initial-data kind {spec.kind!r}")
        if not self.t_end > 0 or not self.snapshot_every > 0 or not self.safety > 0:
            raise ConfigError("t_end, snapshot_every and safety must be positive")
        windows = any(self.monitors.wants(m) for m in WINDOW_MONITORS)
        if windows and self.snapshot_every > MAX_WINDOW_CADENCE:
            raise ConfigError(f"snapshot_every must be <= {MAX_WINDOW_CADENCE} "
                              "while window monitors are enabled")
        try:
            self.grid()
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        u0, v0 = self.initial_arrays()
        if u0.min() < 0:
            raise ConfigError("initial u must be non-negative")
        if not v0.min() > 0:
            raise ConfigError("initial v must be strictly positive everywhere")
        self.energy_pr()
        return self

    def grid(self) -> Grid:
        return build_grid(self.dim, self.extents, self.cells)

    def params(self) -> ModelParams:
        return ModelParams(self.chi, self.kappa, self.mu, self.alpha, self.eta)

    def initial_arrays(self, grid: Grid | None = None):
        grid = grid or self.grid()
        rng = np.random.default_rng(self.seed)
        return self.u0.build(grid, rng), self.v0.build(grid, rng)

    def initial_state(self, formulation: str, grid: Grid | None = None):
        grid = grid or self.grid()
        u0, v0 = self.initial_arrays(grid)
        state = StateUV(grid.field(u0), grid.field(v0))
        return state if formulation == "uv" else to_w(state)

    def energy_pr(self):
        e = self.energy.strip().lower()
        if e == "auto":
            return "auto"
        if e == "none":
            return None
        try:
            p, r = (float(x) for x in e.split(","))
        except ValueError:
            raise ConfigError(f"energy must be auto, none or 'p, r', got {self.energy!r}")
        return p, r

    def formulations(self) -> tuple[str, ...]:
        return ("uv", "uw") if self.formulation == "both" else (self.formulation,)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SweepConfig:
    base: RunConfig
    chi: tuple[float, ...] = ()
    mu: tuple[float, ...] = ()
    kappa: tuple[float, ...] = ()
    max_runs: int = 64
    workers: int = 1

    def points(self) -> list[dict[str, float]]:
        axes = {k: getattr(self, k) for k in ("chi", "mu", "kappa") if getattr(self, k)}
        total = math.prod(len(v) for v in axes.values()) if axes else 1
        if total > self.max_runs:
            raise ConfigError(f"sweep has {total} runs, cap is {self.max_runs}")
        pts = [{}]
        for k, values in axes.items():
            pts = [{**p, k: v} for p in pts for v in values]
        return pts

    def config_hash(self) -> str:
        blob = json.dumps({"base": self.base.as_dict(), "chi": self.chi, "mu": self.mu,
                           "kappa": self.kappa}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# parsing


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _optional_float(s: str) -> float | None:
    return None if s.strip().lower() in ("", "none", "default") else float(s)


def _merge(sections: dict[str, dict[str, str]], parser: configparser.ConfigParser):
    for sec in parser.sections():
        sections.setdefault(sec, {}).update(parser[sec])


def _env_overrides(sections: dict[str, dict[str, str]], environ=None) -> None:
    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key[len(ENV_PREFIX):]:
            continue
        sec, opt = key[len(ENV_PREFIX):].split("__", 1)
        sections.setdefault(sec.lower(), {})[opt.lower()] = value


def load_sections(path: str | Path | None = None, text: str | None = None,
                  environ=None) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), strict=False)
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            with open(path) as fh:
                parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    user: dict[str, dict[str, str]] = {}
    _merge(user, parser)
    _env_overrides(user, environ)
    preset = user.get("run", {}).get("preset")
    sections: dict[str, dict[str, str]] = {}
    if preset:
        if preset not in presets.PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {presets.names()}")
        for sec, vals in presets.PRESETS[preset].items():
            sections[sec] = dict(vals)
    for sec, vals in user.items():
        if sec in ("u0", "v0") and "kind" in vals and preset:
            # a new kind replaces the preset's initial data wholesale
            sections[sec] = {}
        sections.setdefault(sec, {}).update(vals)
    return sections


def _initial(d: dict[str, str]) -> InitialSpec:
    spec = InitialSpec()
    for k, v in d.items():
        if k == "kind":
            spec.kind = v.strip()
        elif k in ("base", "amplitude", "width", "noise"):
            setattr(spec, k, float(v))
        elif k == "mode":
            spec.mode = int(v)
        elif k == "center":
            spec.center = _floats(v)
        else:
            raise ConfigError(f"unknown initial-data key {k!r}")
    return spec


_RUN_KEYS = {"preset": str, "formulation": str, "t_end": float, "snapshot_every": float,
             "safety": float, "dt": _optional_float, "face_average": str, "seed": int,
             "name": str}


def run_config_from_sections(sections: dict[str, dict[str, str]],
                             seed: int | None = None) -> RunConfig:
    cfg = RunConfig()
    try:
        for k, v in sections.get("run", {}).items():
            if k not in _RUN_KEYS:
                raise ConfigError(f"unknown [run] key {k!r}")
            setattr(cfg, k, _RUN_KEYS[k](v.strip()) if _RUN_KEYS[k] is not str else v.strip())
        if cfg.preset and cfg.name == "run":
            cfg.name = cfg.preset
        g = sections.get("grid", {})
        if "dim" in g:
            cfg.dim = int(g["dim"])
        if "extents" in g:
            cfg.extents = _floats(g["extents"])
        if "cells" in g:
            cfg.cells = tuple(int(c) for c in _floats(g["cells"]))
        for k, v in sections.get("params", {}).items():
            if k not in ("chi", "kappa", "mu", "alpha", "eta"):
                raise ConfigError(f"unknown [params] key {k!r}")
            setattr(cfg, k, _optional_float(v) if k == "eta" else float(v))
        if "u0" in sections:
            cfg.u0 = _initial(sections["u0"])
        if "v0" in sections:
            cfg.v0 = _initial(sections["v0"])
        mon = MonitorConfig()
        for k, v in sections.get("monitors", {}).items():
            if k == "enabled":
                names = tuple(x.strip() for x in v.split(",") if x.strip())
                if names != ("all",):
                    unknown = set(names) - set(MONITOR_NAMES)
                    if unknown:
                        raise ConfigError(f"unknown monitors {sorted(unknown)}")
                    mon.enabled = names
            elif k == "energy":
                cfg.energy = v
            elif k == "p_list":
                mon.p_list = _floats(v)
            elif k.startswith("tol_") and hasattr(mon, k):
                setattr(mon, k, float(v))
            else:
                raise ConfigError(f"unknown [monitors] key {k!r}")
        cfg.monitors = mon
        bl = BlowupConfig()
        for k, v in sections.get("blowup", {}).items():
            if k not in ("ceiling", "q", "window", "growth_factor", "dt_floor"):
                raise ConfigError(f"unknown [blowup] key {k!r}")
            setattr(bl, k, _optional_float(v) if k == "q" else float(v))
        cfg.blowup = bl
        for k, v in sections.get("output", {}).items():
            if k != "dump_fields":
                raise ConfigError(f"unknown [output] key {k!r}")
            cfg.dump_fields = _bool(v)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if seed is not None:
        cfg.seed = seed
    return cfg.validate()


def load_run_config(path=None, text=None, seed=None, environ=None) -> RunConfig:
    return run_config_from_sections(load_sections(path, text, environ), seed)


def preset_config(name: str, seed: int | None = None, **run_overrides) -> RunConfig:
    text = f"[run]\npreset = {name}\n"
    for k, v in run_overrides.items():
        text += f"{k} = {v}\n"
    return load_run_config(text=text, seed=seed, environ={})


def load_sweep_config(path=None, text=None, seed=None, environ=None) -> SweepConfig:
    sections = load_sections(path, text, environ)
    sweep = sections.pop("sweep", None)
    if sweep is None:
        raise ConfigError("a sweep config needs a [sweep] section")
    base = run_config_from_sections(sections, seed)
    sc = SweepConfig(base)
    try:
        for k, v in sweep.items():
            if k in ("chi", "mu", "kappa"):
                setattr(sc, k, _floats(v))
            elif k in ("max_runs", "workers"):
                setattr(sc, k, int(v))
            else:
                raise ConfigError(f"unknown [sweep] key {k!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad sweep value: {exc}") from exc
    sc.points()
    return sc
