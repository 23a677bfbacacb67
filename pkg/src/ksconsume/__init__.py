"""Finite-volume simulation and a-priori-estimate monitors for a consumption
chemotaxis model with singular sensitivity and a logistic source."""

from .analysis import (
    admissible_pair,
    bootstrap_sequence,
    exponent_window,
    phi,
    r_bounds,
    theorem_gate,
)
from .dynamics import (
    BlowupConfig,
    CFLViolation,
    ModelParams,
    StateUV,
    StateUW,
    Trajectory,
    reconstruct_v,
    run,
    step_uv,
    step_uw,
    suggest_dt,
    to_w,
)
from .grid import (
    Field,
    FaceFlux,
    Grid,
    NonFiniteFieldError,
    build_grid,
    divergence,
    gradient_faces,
    integrate,
    laplacian_neumann,
    lp_norm,
)
from .monitors import MonitorConfig, MonitorReport, evaluate

__version__ = "0.1.0"
