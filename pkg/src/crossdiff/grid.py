"""One-dimensional finite-volume grids, fields, and conservative fluxes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateProfile,
    GridMismatch,
    NegativeProfile,
    SimplexViolation,
)
from .model import RENORMALIZE_ABOVE, SIMPLEX_TOL, InteractionMatrix, _frozen_array

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of m cells on the interval [0, L]."""

    L: float
    m: int

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0.0):
            raise GridMismatch(f"domain length must be positive, got {self.L}")
        if int(self.m) != self.m or self.m < 2:
            raise GridMismatch(f"need at least 2 cells, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def dx(self) -> float:
        return self.L / self.m

    @cached_property
    def centers(self) -> np.ndarray:
        return _frozen_array((np.arange(self.m) + 0.5) * self.dx)


@dataclass(frozen=True)
class Field:
    """Cell-averaged densities, one row per cell, one column per species.

    Every row must be a valid simplex point: entries in [-1e-12, 0) are
    zeroed, rows whose sum deviates from one by at most 1e-12 are
    renormalized, anything worse is rejected.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 2:
            raise SimplexViolation(f"expected a (cells, species) array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise SimplexViolation("densities must be finite")
        if np.any(vals < -SIMPLEX_TOL):
            c, i = np.argwhere(vals < -SIMPLEX_TOL)[0]
            raise SimplexViolation(f"cell {c}, species {i}: density {vals[c, i]} is negative")
        vals = np.where(vals < 0.0, 0.0, vals)
        sums = vals.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
            c = int(np.argmax(np.abs(sums - 1.0)))
            raise SimplexViolation(
                f"cell {c}: densities sum to {sums[c]}, expected 1 within {SIMPLEX_TOL}"
            )
        off = np.abs(sums - 1.0) > RENORMALIZE_ABOVE
        if np.any(off):
            vals = np.where(off[:, None], vals / sums[:, None], vals)
        object.__setattr__(self, "values", _frozen_array(vals))

    @property
    def cells(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1

    def species(self, i: int) -> np.ndarray:
        return self.values[:, i]


@dataclass(frozen=True)
class FaceFluxes:
    """Per-face, per-species fluxes, boundary faces pinned to zero.

    Stored on all m+1 faces; the species fluxes cancel at every face, the
    discrete image of the conserved total density.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 3:
            raise GridMismatch(f"expected a (faces, species) array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise GridMismatch("fluxes must be finite")
        if np.any(vals[0] != 0.0) or np.any(vals[-1] != 0.0):
            raise GridMismatch("boundary faces must carry zero flux")
        scale = max(1.0, float(np.abs(vals).max()))
        sums = vals.sum(axis=1)
        if np.any(np.abs(sums) > 1e-10 * scale):
            f = int(np.argmax(np.abs(sums)))
            raise GridMismatch(f"face {f}: species fluxes sum to {sums[f]}, expected 0")
        object.__setattr__(self, "values", _frozen_array(vals))

    @property
    def faces(self) -> int:
        return self.values.shape[0]


def _check_grid(field: Field, grid: Grid1D):
    if field.cells != grid.m:
        raise GridMismatch(f"field has {field.cells} cells but grid has {grid.m}")


def init_field(grid: Grid1D, profile) -> Field:
    """Sample a density profile at cell centers and renormalize each cell.

    The profile is either a callable mapping the center array to a
    (cells, species) array (a constant species vector also works), or a
    sequence of per-species callables.  Values must be nonnegative and
    every cell must carry positive total density.
    """
    x = grid.centers
    if callable(profile):
        raw = np.asarray(profile(x), dtype=float)
        if raw.ndim == 1:
            raw = np.tile(raw, (grid.m, 1))
    else:
        cols = [np.broadcast_to(np.asarray(f(x), dtype=float), x.shape) for f in profile]
        raw = np.stack(cols, axis=1)
    if raw.shape[0] != grid.m or raw.ndim != 2:
        raise GridMismatch(f"profile produced shape {raw.shape}, expected ({grid.m}, species)")
    if not np.all(np.isfinite(raw)):
        raise NegativeProfile("profile produced non-finite values")
    if np.any(raw < 0.0):
        c, i = np.argwhere(raw < 0.0)[0]
        raise NegativeProfile(f"profile is negative at cell {c}, species {i}: {raw[c, i]}")
    sums = raw.sum(axis=1)
    if np.any(sums <= 0.0):
        c = int(np.argmin(sums))
        raise DegenerateProfile(f"profile sums to {sums[c]} at cell {c}")
    return Field(raw / sums[:, None])


def assemble_fluxes(model: InteractionMatrix, field: Field, grid: Grid1D) -> FaceFluxes:
    """Pairwise antisymmetric fluxes at interior faces, zero at the boundary.

    At each interior face, F_i = sum_j K_ij (ubar_j du_i - ubar_i du_j) / dx
    with arithmetic-mean face values and right-minus-left differences.
    """
    _check_grid(field, grid)
    u = field.values
    K = model.K
    ub = 0.5 * (u[:-1] + u[1:])
    du = u[1:] - u[:-1]
    interior = ((ub @ K.T) * du - ub * (du @ K.T)) / grid.dx
    F = np.zeros((grid.m + 1, u.shape[1]))
    F[1:-1] = interior
    return FaceFluxes(F)


def apply_divergence(fluxes: FaceFluxes, grid: Grid1D) -> np.ndarray:
    """Per-cell density rates from face fluxes: rate_c = (F_right - F_left) / dx.

    Telescoping makes the total rate vanish per species, so an explicit
    Euler application preserves species masses exactly.
    """
    F = fluxes.values
    if F.shape[0] != grid.m + 1:
        raise GridMismatch(f"fluxes have {F.shape[0]} faces but grid has {grid.m + 1}")
    return (F[1:] - F[:-1]) / grid.dx


def write_snapshot(path, field: Field, grid: Grid1D):
    """Write a field as CSV with columns x, u_0, ..., u_n."""
    _check_grid(field, grid)
    header = "x," + ",".join(f"u_{i}" for i in range(field.n + 1))
    data = np.column_stack([grid.centers, field.values])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=FLOAT_FMT)


def read_snapshot(path) -> tuple[np.ndarray, Field]:
    """Read a snapshot CSV back into cell centers and a field."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], Field(data[:, 1:])
