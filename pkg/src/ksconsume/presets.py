"""Named scenarios. Each preset is a set of INI-style sections that a config
file may reference with ``[run] preset = NAME`` and then override key by key."""

from __future__ import annotations

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    # homogeneous data with u0 = kappa/mu: u stays put, v = exp(-(kappa/mu) t)
    "steady-decay": {
        "run": {"formulation": "uv", "t_end": "5", "snapshot_every": "0.05"},
        "grid": {"dim": "1", "extents": "1.0", "cells": "128"},
        "params": {"chi": "1.0", "kappa": "1.0", "mu": "0.5"},
        "u0": {"kind": "constant", "base": "2.0"},
        "v0": {"kind": "constant", "base": "1.0"},
    },
    # two-dimensional run inside the proven global-existence region
    "2d-thm1": {
        "run": {"formulation": "uv", "t_end": "20", "snapshot_every": "0.05"},
        "grid": {"dim": "2", "extents": "2.0, 2.0", "cells": "64, 64"},
        # guard threshold far below anything the run reaches, see README
        "params": {"chi": "0.8", "kappa": "1.0", "mu": "0.5", "eta": "1e-300"},
        "u0": {"kind": "gaussian", "base": "1.0", "amplitude": "4.0", "width": "0.2"},
        "v0": {"kind": "cosine", "base": "1.0", "amplitude": "0.3", "mode": "1"},
    },
    # one-dimensional run with large chi and small mu; w formulation avoids
    # underflow of v over the long horizon
    "1d-bounded": {
        "run": {"formulation": "uw", "t_end": "100", "snapshot_every": "0.05"},
        "grid": {"dim": "1", "extents": "10.0", "cells": "256"},
        "params": {"chi": "2.0", "kappa": "1.0", "mu": "0.25"},
        "u0": {"kind": "gaussian", "base": "1.0", "amplitude": "2.0", "width": "1.0"},
        "v0": {"kind": "cosine", "base": "1.0", "amplitude": "0.2", "mode": "1"},
    },
    # short perturbed 1-D scenario for formulation comparisons
    "perturbed-1d": {
        "run": {"formulation": "both", "t_end": "0.25", "snapshot_every": "0.05"},
        "grid": {"dim": "1", "extents": "1.0", "cells": "32"},
        "params": {"chi": "1.0", "kappa": "1.0", "mu": "1.0"},
        "u0": {"kind": "gaussian", "base": "1.0", "amplitude": "1.0", "width": "0.15"},
        "v0": {"kind": "cosine", "base": "1.0", "amplitude": "0.3", "mode": "1"},
    },
}


def names() -> list[str]:
    return sorted(PRESETS)
