"""Cell-centred uniform grids on intervals and rectangles.

Values live at cell centres. Neumann (no-flux) boundaries are handled by mirror
ghost cells, which is the same as forcing every boundary face flux to zero.
Because of that, ``divergence(gradient_faces(f))`` reproduces
``laplacian_neumann(f)`` exactly and every discrete divergence integrates to
zero under the midpoint rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NonFiniteFieldError(FloatingPointError):
    """A field picked up NaN or Inf entries."""


@dataclass(frozen=True)
class Grid:
    dim: int
    extents: tuple[float, ...]
    cells: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)
    volume: float = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"only dim 1 or 2 is supported, got {self.dim}")
        if len(self.extents) != self.dim or len(self.cells) != self.dim:
            raise ValueError("extents and cells must have one entry per axis")
        if any(not (e > 0 and math.isfinite(e)) for e in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")
        if any(int(n) != n or n < 3 for n in self.cells):
            raise ValueError(f"need at least 3 cells per axis, got {self.cells}")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(
            self, "spacing", tuple(e / n for e, n in zip(self.extents, self.cells))
        )
        object.__setattr__(self, "volume", float(math.prod(self.extents)))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def cell_volume(self) -> float:
        return float(math.prod(self.spacing))

    @property
    def h(self) -> float:
        """Smallest spacing."""
        return min(self.spacing)

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates per axis (1-D arrays)."""
        return [
            (np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)
        ]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.centers(), indexing="ij"))

    def field(self, values) -> "Field":
        return Field(self, np.broadcast_to(np.asarray(values, float), self.shape).copy())

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.shape, float(c)))


def build_grid(dim: int, extents: Sequence[float], cells_per_axis: Sequence[int]) -> Grid:
    return Grid(int(dim), tuple(extents), tuple(cells_per_axis))


@dataclass(frozen=True)
class Field:
    """Scalar cell values on a grid. Construction rejects NaN/Inf."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteFieldError("field contains NaN or Inf")
        object.__setattr__(self, "values", values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class FaceFlux:
    """One array per axis; along axis k it has ``cells[k] + 1`` faces.

    The first and last face on each axis are boundary faces and always carry 0.
    """

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dim:
            raise ValueError("one flux component per axis is required")
        for k, c in enumerate(comps):
            expected = list(self.grid.shape)
            expected[k] += 1
            if c.shape != tuple(expected):
                raise ValueError(f"axis {k}: expected shape {tuple(expected)}, got {c.shape}")
            if np.any(np.take(c, [0, -1], axis=k) != 0.0):
                raise ValueError(f"axis {k}: boundary faces must carry zero flux")
        object.__setattr__(self, "components", comps)

    def max_abs(self) -> float:
        return max(float(np.abs(c).max()) for c in self.components)


# ---------------------------------------------------------------------------
# array kernels; the public wrappers below add the Field/FaceFlux plumbing


def _axis_slice(ndim: int, axis: int, sl: slice) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def _pad_faces(interior: np.ndarray, axis: int) -> np.ndarray:
    shape = list(interior.shape)
    shape[axis] += 2
    out = np.zeros(shape)
    out[_axis_slice(interior.ndim, axis, slice(1, -1))] = interior
    return out


def face_differences(values: np.ndarray, spacing: Sequence[float]) -> list[np.ndarray]:
    """Two-point gradients on all faces, zero on the boundary faces."""
    out = []
    for k, h in enumerate(spacing):
        out.append(_pad_faces(np.diff(values, axis=k) / h, k))
    return out


def divergence_array(components: Sequence[np.ndarray], spacing: Sequence[float]) -> np.ndarray:
    total = None
    for k, (c, h) in enumerate(zip(components, spacing)):
        d = np.diff(c, axis=k) / h
        total = d if total is None else total + d
    return total


def laplacian_array(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    return divergence_array(face_differences(values, spacing), spacing)


def face_interior(values: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Left/right cell values adjacent to every interior face along ``axis``."""
    return (values[_axis_slice(values.ndim, axis, slice(None, -1))],
            values[_axis_slice(values.ndim, axis, slice(1, None))])


# ---------------------------------------------------------------------------


def laplacian_neumann(f: Field) -> Field:
    return Field(f.grid, laplacian_array(f.values, f.grid.spacing))


def gradient_faces(f: Field) -> FaceFlux:
    return FaceFlux(f.grid, tuple(face_differences(f.values, f.grid.spacing)))


def divergence(flux: FaceFlux) -> Field:
    return Field(flux.grid, divergence_array(flux.components, flux.grid.spacing))


def integrate(f: Field) -> float:
    return float(f.values.sum() * f.grid.cell_volume)


def lp_norm(f: Field, p: float) -> float:
    if p == math.inf:
        return float(np.abs(f.values).max())
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))
