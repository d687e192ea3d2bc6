"""Entropy functionals, their grid versions, and the run report.

The entropy density is h(u) = sum_i lam(u_i) with lam(s) = s log s - s + 1
extended continuously by lam(0) = 1.  The relative density is the Bregman
distance of h, nonnegative and zero only at equality.  Grid functionals sum
cell densities weighted by the cell width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    GridMismatch,
    HypothesisH3Violated,
    OutOfRange,
    ReferenceNotPositive,
)
from .grid import FLOAT_FMT, Field, Grid1D, _check_grid
from .model import (
    InteractionMatrix,
    SimplexPoint,
    SpeciesClassification,
    _frozen_array,
    classify_species,
)


def _lambda_array(a: np.ndarray) -> np.ndarray:
    out = np.ones_like(a)
    mask = a > 0.0
    am = a[mask]
    out[mask] = am * np.log(am) - am + 1.0
    return out


def lambda_density(s: float) -> float:
    """Entropy density of a single fraction: s log s - s + 1, with value 1 at 0."""
    if not (0.0 <= s <= 1.0):
        raise OutOfRange(f"argument {s} outside [0, 1]")
    if s == 0.0:
        return 1.0
    return float(s * np.log(s) - s + 1.0)


def entropy_density(u) -> float:
    """Pointwise entropy h(u) = sum_i lam(u_i)."""
    uv = np.asarray(getattr(u, "u", u), dtype=float)
    return float(_lambda_array(uv).sum())


def relative_density(u, ref) -> float:
    """Pointwise relative entropy sum_i [u_i log(u_i/ref_i) - u_i + ref_i].

    Nonnegative, zero exactly at u = ref; requires a strictly positive
    reference.  The convention 0 log 0 = 0 applies throughout.
    """
    uv = np.asarray(getattr(u, "u", u), dtype=float)
    rv = np.asarray(getattr(ref, "u", ref), dtype=float)
    if np.any(rv <= 0.0):
        raise ReferenceNotPositive("relative entropy needs a strictly positive reference")
    terms = np.where(uv > 0.0, uv * np.log(np.where(uv > 0.0, uv, 1.0) / rv), 0.0)
    return float(np.sum(terms - uv + rv))


def grid_entropy(field: Field, grid: Grid1D) -> float:
    """Total entropy: cell sums of h weighted by the cell width."""
    _check_grid(field, grid)
    return float(_lambda_array(field.values).sum() * grid.dx)


def grid_relative_entropy(field: Field, reference, grid: Grid1D) -> float:
    """Total relative entropy against a constant state or a reference field."""
    _check_grid(field, grid)
    u = field.values
    if isinstance(reference, Field):
        if reference.cells != field.cells or reference.n != field.n:
            raise GridMismatch("field and reference live on different grids")
        r = reference.values
    else:
        rv = np.asarray(getattr(reference, "u", reference), dtype=float)
        r = np.broadcast_to(rv, u.shape)
    if np.any(r <= 0.0):
        raise ReferenceNotPositive("relative entropy needs a strictly positive reference")
    logs = np.where(u > 0.0, u * np.log(np.where(u > 0.0, u, 1.0) / r), 0.0)
    return float((logs - u + r).sum() * grid.dx)


def grid_mass(field: Field, grid: Grid1D) -> np.ndarray:
    """Per-species masses: column sums weighted by the cell width."""
    _check_grid(field, grid)
    return field.values.sum(axis=0) * grid.dx


def grid_dissipation(
    model: InteractionMatrix, field: Field, grid: Grid1D, theta: float = 1e-10
) -> float:
    """Face-based discrete dissipation in square-root form.

    Each interior face contributes 2 sum_ij K_ij |sbar_j ds_i - sbar_i ds_j|^2
    per unit length, with s = sqrt(u), arithmetic-mean face values, and
    right-minus-left differences.  Faces whose two neighbours both carry at
    most theta of fully connected species mass are excluded, the discrete
    stand-in for the indicator on the set of positive type-A mass.
    """
    _check_grid(field, grid)
    try:
        cls = classify_species(model)
        a_idx = list(cls.type_a)
    except HypothesisH3Violated:
        return 0.0
    u = field.values
    s = np.sqrt(u)
    sb = 0.5 * (s[:-1] + s[1:])
    ds = s[1:] - s[:-1]
    # W[f, i, j] = sbar_j ds_i - sbar_i ds_j
    W = ds[:, :, None] * sb[:, None, :] - sb[:, :, None] * ds[:, None, :]
    per_face = 2.0 * np.einsum("ij,fij->f", model.K, W**2) / grid.dx**2
    amass = u[:, a_idx].sum(axis=1)
    include = (amass[:-1] > theta) | (amass[1:] > theta)
    return float(np.sum(per_face[include]) * grid.dx)


class CsiszarKullbackGap(NamedTuple):
    """Both sides of the L1-versus-relative-entropy inequality."""

    lhs: float
    rhs: float


def csiszar_kullback_gap(
    field: Field, reference: SimplexPoint, grid: Grid1D
) -> CsiszarKullbackGap:
    """Squared L1 distance against 2 |domain| (n+1) times the relative entropy.

    The right-hand side uses the componentwise quadratic lower bound of the
    relative density, valid for fractions in [0, 1], so lhs <= rhs holds for
    every field and every strictly positive constant reference.
    """
    _check_grid(field, grid)
    rv = np.asarray(getattr(reference, "u", reference), dtype=float)
    if np.any(rv <= 0.0):
        raise ReferenceNotPositive("reference state must be strictly positive")
    diff = np.abs(field.values - rv[None, :]).sum() * grid.dx
    hrel = grid_relative_entropy(field, reference, grid)
    c_ck = 2.0 * grid.L * (field.n + 1)
    return CsiszarKullbackGap(lhs=float(diff**2), rhs=float(c_ck * hrel))


def degenerate_fraction(
    field: Field, classification: SpeciesClassification, theta: float = 1e-10
) -> float:
    """Fraction of cells whose fully connected species carry at most theta mass."""
    a_idx = list(classification.type_a)
    amass = field.values[:, a_idx].sum(axis=1)
    return float(np.mean(amass <= theta))


REPORT_NUMERIC = ("t", "H", "H_rel", "dissipation", "degenerate_fraction")


@dataclass(frozen=True)
class EntropyReport:
    """Per-step diagnostics of a run: masses, entropy, dissipation, and more.

    Columns: time, per-species masses, entropy, relative entropy against the
    run's steady state, discrete dissipation, degenerate-cell fraction, and
    Newton iterations.  Times must be strictly increasing, entropies
    nonnegative; relative entropies within -1e-12 of zero are clamped.
    """

    t: np.ndarray
    mass: np.ndarray
    entropy: np.ndarray
    relative_entropy: np.ndarray
    dissipation: np.ndarray
    degenerate_fraction: np.ndarray
    newton_iterations: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        H = np.asarray(self.entropy, dtype=float)
        Hrel = np.asarray(self.relative_entropy, dtype=float)
        diss = np.asarray(self.dissipation, dtype=float)
        frac = np.asarray(self.degenerate_fraction, dtype=float)
        iters = np.asarray(self.newton_iterations, dtype=int)
        rows = t.size
        if mass.ndim != 2 or any(
            a.shape[0] != rows for a in (mass, H, Hrel, diss, frac, iters)
        ):
            raise GridMismatch("report columns have inconsistent lengths")
        if rows > 1 and np.any(np.diff(t) <= 0.0):
            raise GridMismatch("report times must be strictly increasing")
        for name, col in (("t", t), ("mass", mass), ("H", H), ("H_rel", Hrel),
                          ("dissipation", diss), ("degenerate_fraction", frac)):
            if not np.all(np.isfinite(col)):
                raise GridMismatch(f"report column {name} contains non-finite values")
        if np.any(H < 0.0):
            raise GridMismatch("entropy column must be nonnegative")
        if np.any(Hrel < -1e-12):
            raise GridMismatch("relative entropy column must be nonnegative")
        Hrel = np.where(Hrel < 0.0, 0.0, Hrel)
        object.__setattr__(self, "t", _frozen_array(t))
        object.__setattr__(self, "mass", _frozen_array(mass))
        object.__setattr__(self, "entropy", _frozen_array(H))
        object.__setattr__(self, "relative_entropy", _frozen_array(Hrel))
        object.__setattr__(self, "dissipation", _frozen_array(diss))
        object.__setattr__(self, "degenerate_fraction", _frozen_array(frac))
        object.__setattr__(self, "newton_iterations", _frozen_array(iters, dtype=int))

    @property
    def rows(self) -> int:
        return self.t.size

    @property
    def n(self) -> int:
        return self.mass.shape[1] - 1

    def header(self) -> str:
        masses = ",".join(f"m_{i}" for i in range(self.mass.shape[1]))
        return f"t,{masses},H,H_rel,dissipation,degenerate_fraction,newton_iters"

    def to_csv(self, path):
        data = np.column_stack(
            [
                self.t,
                self.mass,
                self.entropy,
                self.relative_entropy,
                self.dissipation,
                self.degenerate_fraction,
                self.newton_iterations.astype(float),
            ]
        )
        np.savetxt(path, data, delimiter=",", header=self.header(), comments="", fmt=FLOAT_FMT)

    def to_json(self, path=None):
        payload = {
            "t": self.t.tolist(),
            "mass": self.mass.tolist(),
            "H": self.entropy.tolist(),
            "H_rel": self.relative_entropy.tolist(),
            "dissipation": self.dissipation.tolist(),
            "degenerate_fraction": self.degenerate_fraction.tolist(),
            "newton_iters": self.newton_iterations.tolist(),
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "EntropyReport":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n_species = data.shape[1] - 6
        return cls(
            t=data[:, 0],
            mass=data[:, 1 : 1 + n_species],
            entropy=data[:, 1 + n_species],
            relative_entropy=data[:, 2 + n_species],
            dissipation=data[:, 3 + n_species],
            degenerate_fraction=data[:, 4 + n_species],
            newton_iterations=data[:, 5 + n_species].astype(int),
        )
