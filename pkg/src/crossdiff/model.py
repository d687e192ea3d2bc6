"""Interaction coefficients, hypothesis checks, and species classification.

The model consists of n+1 species indexed 0..n exchanging places at
symmetric nonnegative rates K[i][j].  Species are classified by their
interaction pattern: type A species interact with everybody, type B species
interact only with type A species, the remainder is type C.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricCoefficients,
    EpsilonTooLarge,
    HypothesisH3Violated,
    NegativeCoefficient,
    NonFiniteCoefficient,
    NonSquareInput,
    NonzeroDiagonal,
    OutOfRange,
    SimplexViolation,
)

SIMPLEX_TOL = 1e-12
# Sums already at rounding level are passed through unchanged, so that
# embedding and projection maps compose to the exact identity.
RENORMALIZE_ABOVE = 1e-15


def _frozen_array(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class InteractionMatrix:
    """Validated table of pairwise exchange rates for n+1 species.

    Construction enforces: square shape with at least two species, finite
    entries, exact zero diagonal, symmetry, and nonnegativity.  Instances
    are immutable and safe to share between threads.
    """

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 2:
            raise NonSquareInput(
                f"expected a square table with at least 2 species, got shape {K.shape}"
            )
        if not np.all(np.isfinite(K)):
            raise NonFiniteCoefficient("exchange rates must be finite")
        diag = np.diagonal(K)
        if np.any(diag != 0.0):
            i = int(np.nonzero(diag)[0][0])
            raise NonzeroDiagonal(
                f"diagonal entry K[{i}][{i}] = {diag[i]} must be zero"
            )
        if not np.array_equal(K, K.T):
            i, j = np.argwhere(K != K.T)[0]
            raise AsymmetricCoefficients(
                f"K[{i}][{j}] = {K[i, j]} but K[{j}][{i}] = {K[j, i]}"
            )
        neg = K < 0.0
        if np.any(neg):
            i, j = np.argwhere(neg)[0]
            raise NegativeCoefficient(f"K[{i}][{j}] = {K[i, j]} is negative")
        object.__setattr__(self, "K", _frozen_array(K))

    @property
    def n(self) -> int:
        """Species count minus one."""
        return self.K.shape[0] - 1

    @property
    def n_species(self) -> int:
        return self.K.shape[0]

    def offdiagonal(self) -> np.ndarray:
        """All off-diagonal entries as a flat array."""
        mask = ~np.eye(self.n_species, dtype=bool)
        return self.K[mask]


@dataclass(frozen=True)
class HypothesisReport:
    """Which structural hypotheses a coefficient table satisfies.

    h1: symmetry, h2: nonnegativity, h2star: full interaction (all
    off-diagonal rates positive), h3: at least one fully connected species
    (with witness index i0).
    """

    h1: bool
    h2: bool
    h2star: bool
    h3: bool
    i0: int | None

    def as_dict(self) -> dict:
        return {
            "H1": self.h1,
            "H2": self.h2,
            "H2star": self.h2star,
            "H3": self.h3,
            "i0": self.i0,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


@dataclass(frozen=True)
class SpeciesClassification:
    """Partition of the species indices into types A, B, and C."""

    type_a: tuple
    type_b: tuple
    type_c: tuple
    i0: int

    def as_dict(self) -> dict:
        return {
            "A": list(self.type_a),
            "B": list(self.type_b),
            "C": list(self.type_c),
            "i0": self.i0,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def validate_hypotheses(table) -> tuple[InteractionMatrix, HypothesisReport]:
    """Validate a raw coefficient table and report which hypotheses hold.

    Construction fails on shape problems, non-finite entries, a nonzero
    diagonal, asymmetry, or negative rates.  Full interaction and the
    existence of a fully connected species are advisory flags only.
    """
    model = InteractionMatrix(np.asarray(table, dtype=float))
    off = model.offdiagonal()
    h2star = bool(np.all(off > 0.0))
    i0 = None
    for i in range(model.n_species):
        row = np.delete(model.K[i], i)
        if np.all(row > 0.0):
            i0 = i
            break
    report = HypothesisReport(h1=True, h2=True, h2star=h2star, h3=i0 is not None, i0=i0)
    return model, report


def classify_species(model: InteractionMatrix) -> SpeciesClassification:
    """Partition species into types A, B, C based on their couplings.

    A species is of type A when it exchanges with every other species at a
    strictly positive rate.  A non-A species is of type B when all its
    couplings to other non-A species vanish; the rest is type C.  Entries
    count as positive only when they exceed zero exactly, since rates are
    modelling inputs rather than computed values.
    """
    K = model.K
    ns = model.n_species
    a_set = [
        i for i in range(ns) if np.all(np.delete(K[i], i) > 0.0)
    ]
    if not a_set:
        raise HypothesisH3Violated("no species interacts with every other species")
    non_a = [i for i in range(ns) if i not in a_set]
    b_set = []
    c_set = []
    for i in non_a:
        others = [l for l in non_a if l != i]
        if all(K[i, l] == 0.0 for l in others):
            b_set.append(i)
        else:
            c_set.append(i)
    return SpeciesClassification(
        type_a=tuple(a_set), type_b=tuple(b_set), type_c=tuple(c_set), i0=a_set[0]
    )


def regularize(model: InteractionMatrix, eps: float) -> InteractionMatrix:
    """Raise every off-diagonal rate to at least eps.

    Requires 0 < eps <= min positive rate, so the regularized table agrees
    with the original wherever the original is already at least eps.  The
    result always satisfies full interaction.
    """
    if not np.isfinite(eps) or eps <= 0.0:
        raise OutOfRange(f"regularization level must be positive, got {eps}")
    off = model.offdiagonal()
    positive = off[off > 0.0]
    if positive.size and eps > positive.min():
        raise EpsilonTooLarge(
            f"eps = {eps} exceeds the smallest positive rate {positive.min()}"
        )
    K = np.maximum(model.K, eps)
    np.fill_diagonal(K, 0.0)
    return InteractionMatrix(K)


def kappa(model: InteractionMatrix) -> float:
    """Smallest off-diagonal exchange rate."""
    return float(model.offdiagonal().min())


def kappa_alpha(model: InteractionMatrix, alpha: int) -> float:
    """Half the smallest off-diagonal rate in row alpha."""
    if not 0 <= alpha < model.n_species:
        raise OutOfRange(f"species index {alpha} out of range")
    row = np.delete(model.K[alpha], alpha)
    return 0.5 * float(row.min())


@dataclass(frozen=True)
class SimplexPoint:
    """Vector of n+1 nonnegative densities summing to one.

    Inputs whose sum deviates from one by at most 1e-12 are renormalized by
    dividing by the sum; larger deviations are rejected.  Entries in
    [-1e-12, 0) are treated as zero.
    """

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.size < 2:
            raise SimplexViolation(f"expected a density vector of length >= 2, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise SimplexViolation("densities must be finite")
        if np.any(u < -SIMPLEX_TOL):
            i = int(np.argmin(u))
            raise SimplexViolation(f"density u[{i}] = {u[i]} is negative")
        u = np.where(u < 0.0, 0.0, u)
        s = u.sum()
        if abs(s - 1.0) > SIMPLEX_TOL:
            raise SimplexViolation(f"densities sum to {s}, expected 1 within {SIMPLEX_TOL}")
        if abs(s - 1.0) > RENORMALIZE_ABOVE:
            u = u / s
        object.__setattr__(self, "u", _frozen_array(u))

    @property
    def n(self) -> int:
        return self.u.size - 1


@dataclass(frozen=True)
class ReducedPoint:
    """Vector of n densities with nonnegative vacancy v = 1 - sum(U).

    The vacancy is derived from the densities when not supplied.  Callers
    that know it to higher accuracy than the cancellation-prone 1 - sum(U)
    (the exponential-normalization map does) may pass it explicitly; it
    must then agree with the derived value within 1e-12.
    """

    U: np.ndarray
    v: float | None = None

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 1 or U.size < 1:
            raise SimplexViolation(f"expected a density vector of length >= 1, got shape {U.shape}")
        if not np.all(np.isfinite(U)):
            raise SimplexViolation("densities must be finite")
        if np.any(U < -SIMPLEX_TOL):
            i = int(np.argmin(U))
            raise SimplexViolation(f"density U[{i}] = {U[i]} is negative")
        U = np.where(U < 0.0, 0.0, U)
        s = U.sum()
        if s > 1.0 + SIMPLEX_TOL:
            raise SimplexViolation(f"densities sum to {s} > 1")
        if s > 1.0:
            U = U / s
            s = 1.0
        derived = max(0.0, 1.0 - s)
        if self.v is None:
            v = derived
        else:
            v = float(self.v)
            if not np.isfinite(v) or abs(v - derived) > SIMPLEX_TOL:
                raise SimplexViolation(
                    f"supplied vacancy {v} disagrees with 1 - sum(U) = {derived}"
                )
            v = min(max(v, 0.0), 1.0)
        object.__setattr__(self, "U", _frozen_array(U))
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.U.size
