"""Closed-form matrix objects of the cross-diffusion system.

Everything here is a pure function of an interaction model and a pointwise
state: the diffusion and mobility matrices on the full simplex, their
reduced n-species counterparts after eliminating species 0, the entropy
Hessians, the dissipation quadratic form with its coercivity bounds, and
the dual (log-ratio) change of variables that parametrizes the interior of
the constraint set by all of R^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotTangent, SingularAtBoundary
from .model import InteractionMatrix, ReducedPoint, SimplexPoint

TANGENT_TOL = 1e-12


def _vec(x, attr: str) -> np.ndarray:
    """Accept either a wrapped point or a plain array."""
    return np.asarray(getattr(x, attr, x), dtype=float)


@dataclass(frozen=True)
class TangentVector:
    """Direction tangent to the simplex: components sum to zero."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim != 1 or xi.size < 2:
            raise NotTangent(f"expected a vector of length >= 2, got shape {xi.shape}")
        if abs(xi.sum()) > TANGENT_TOL * max(1.0, np.abs(xi).max()):
            raise NotTangent(f"components sum to {xi.sum()}, expected 0")
        out = xi.copy()
        out.setflags(write=False)
        object.__setattr__(self, "xi", out)


def _require_tangent(xi: np.ndarray):
    if abs(xi.sum()) > TANGENT_TOL * max(1.0, np.abs(xi).max()):
        raise NotTangent(f"components sum to {xi.sum()}, expected 0")


def diffusion_matrix(model: InteractionMatrix, u) -> np.ndarray:
    """Quasilinear diffusion matrix A with A[i][j] = d_ij sum_k K[i][k] u_k - K[i][j] u_i."""
    K = model.K
    uv = _vec(u, "u")
    sig = K @ uv
    return np.diag(sig) - K * uv[:, None]


def mobility(model: InteractionMatrix, u) -> np.ndarray:
    """Onsager mobility M with M[i][l] = u_i (d_il sum_k K[i][k] u_k - K[i][l] u_l).

    Symmetric positive semidefinite on the closed simplex; the all-ones
    vector spans its kernel direction enforcing mass conservation.
    """
    K = model.K
    uv = _vec(u, "u")
    sig = K @ uv
    M = -(uv[:, None] * K * uv[None, :])
    M[np.diag_indices_from(M)] += uv * sig
    return M


def hessian_entropy(u) -> np.ndarray:
    """Hessian of the Boltzmann entropy density: diag(1/u_i)."""
    uv = _vec(u, "u")
    if np.any(uv <= 0.0):
        raise SingularAtBoundary("entropy Hessian requires strictly positive densities")
    return np.diag(1.0 / uv)


def reduced_hessian(U) -> np.ndarray:
    """Hessian of the pulled-back entropy: diag(1/U_i) + (1/v) * ones."""
    Uv = _vec(U, "U")
    v = 1.0 - Uv.sum()
    if np.any(Uv <= 0.0) or v <= 0.0:
        raise SingularAtBoundary("reduced Hessian requires an interior state")
    return np.diag(1.0 / Uv) + np.ones((Uv.size, Uv.size)) / v


def _split_reduced(U) -> tuple[np.ndarray, float]:
    """Densities and vacancy, preferring a stored vacancy over 1 - sum."""
    if isinstance(U, ReducedPoint):
        return U.U, U.v
    Uv = np.asarray(U, dtype=float)
    return Uv, 1.0 - Uv.sum()


def lift(U) -> SimplexPoint:
    """Embed n tracked densities into the full simplex: u = (v, U_1, ..., U_n)."""
    Uv, v = _split_reduced(U)
    return SimplexPoint(np.concatenate([[v], Uv]))


def project(u) -> ReducedPoint:
    """Drop species 0: U = (u_1, ..., u_n)."""
    uv = _vec(u, "u")
    return ReducedPoint(uv[1:])


def reduced_diffusion(model: InteractionMatrix, U) -> np.ndarray:
    """Diffusion matrix of the n-species system after eliminating species 0."""
    K = model.K
    Uv = _vec(U, "U")
    v = 1.0 - Uv.sum()
    Koff = K[1:, 1:]
    K0 = K[1:, 0]
    sig = Koff @ Uv + K0 * v
    return np.diag(sig) - (Koff - K0[:, None]) * Uv[:, None]


def reduced_mobility(model: InteractionMatrix, U) -> np.ndarray:
    """Mobility of the n-species system: the species-(1..n) block of M."""
    return mobility(model, lift(U))[1:, 1:]


def dissipation_matrix(model: InteractionMatrix, u) -> np.ndarray:
    """The quadratic-form matrix D2h(u) M(u) D2h(u) on the full simplex."""
    H = hessian_entropy(u)
    return H @ mobility(model, u) @ H


def reduced_dissipation_matrix(model: InteractionMatrix, U) -> np.ndarray:
    """The quadratic-form matrix D2h(U) M(U) D2h(U) of the reduced system."""
    H = reduced_hessian(U)
    return H @ reduced_mobility(model, U) @ H


def dissipation_form(model: InteractionMatrix, u, xi, path: str = "sum") -> float:
    """Evaluate the dissipation quadratic form in direction xi at state u.

    Two algebraically identical evaluation paths are provided.  The "sum"
    path computes (1/2) sum_ij K_ij u_i u_j |xi_i/u_i - xi_j/u_j|^2 and
    tolerates boundary states: terms multiplied by a vanishing rate drop
    out, and xi_i = 0 neutralizes a vanishing u_i.  The "matrix" path forms
    D2h M D2h explicitly and requires a strictly interior state.
    """
    uv = _vec(u, "u")
    xv = _vec(xi, "xi")
    if path == "matrix":
        P = dissipation_matrix(model, uv)
        return float(xv @ P @ xv)
    if path != "sum":
        raise ValueError(f"unknown evaluation path {path!r}")
    K = model.K
    if np.all(uv > 0.0):
        d = xv / uv
        diff = d[:, None] - d[None, :]
        return float(0.5 * np.sum(K * np.outer(uv, uv) * diff**2))
    # Boundary-tolerant evaluation of the same sum, term by term.
    total = 0.0
    ns = uv.size
    for i in range(ns):
        for j in range(ns):
            k = K[i, j]
            if k == 0.0:
                continue
            if (uv[i] == 0.0 and xv[i] != 0.0) or (uv[j] == 0.0 and xv[j] != 0.0):
                return float("inf")
            ri = xv[i] / np.sqrt(uv[i]) if uv[i] > 0.0 else 0.0
            rj = xv[j] / np.sqrt(uv[j]) if uv[j] > 0.0 else 0.0
            total += 0.5 * k * (ri * np.sqrt(uv[j]) - rj * np.sqrt(uv[i])) ** 2
    return float(total)


@dataclass(frozen=True)
class CoercivityBounds:
    """Dissipation form value and its two lower bounds."""

    lhs: float
    per_species_bound: float
    uniform_bound: float


@dataclass(frozen=True)
class ReducedCoercivityBounds:
    """Reduced dissipation form value and its lower bound."""

    lhs: float
    bound: float


def coercivity_bounds(model: InteractionMatrix, u, xi) -> CoercivityBounds:
    """Dissipation form against its row-wise and uniform coercivity bounds.

    The per-species bound weights each row by half its smallest rate; the
    uniform bound scales sum_j xi_j^2/u_j by the smallest rate overall.
    Both require a tangent direction and an interior state.
    """
    uv = _vec(u, "u")
    xv = _vec(xi, "xi")
    if np.any(uv <= 0.0):
        raise SingularAtBoundary("coercivity bounds require an interior state")
    _require_tangent(xv)
    lhs = dissipation_form(model, uv, xv, path="sum")
    weighted = np.sum(xv**2 / uv)
    K = model.K
    ns = uv.size
    row_min = np.array([np.delete(K[a], a).min() for a in range(ns)])
    per_species = float(np.sum(0.5 * row_min * (xv**2 / uv + uv * weighted)))
    uniform = float(row_min.min() * weighted)
    return CoercivityBounds(lhs=lhs, per_species_bound=per_species, uniform_bound=uniform)


def reduced_coercivity(model: InteractionMatrix, U, zeta) -> ReducedCoercivityBounds:
    """Reduced dissipation form against kappa (|sum zeta|^2 + sum zeta_i^2/U_i)."""
    Uv = _vec(U, "U")
    zv = np.asarray(zeta, dtype=float)
    v = 1.0 - Uv.sum()
    if np.any(Uv <= 0.0) or v <= 0.0:
        raise SingularAtBoundary("reduced coercivity requires an interior state")
    P = reduced_dissipation_matrix(model, Uv)
    lhs = float(zv @ P @ zv)
    off = model.offdiagonal()
    bound = float(off.min() * (zv.sum() ** 2 + np.sum(zv**2 / Uv)))
    return ReducedCoercivityBounds(lhs=lhs, bound=bound)


def dual_to_primal(w) -> ReducedPoint:
    """Map dual variables to densities: U_i = exp(w_i) / (1 + sum_j exp(w_j)).

    The exponentials are shifted by max(0, max w) before normalization, so
    the map never overflows and lands strictly inside the constraint set
    for every finite input.
    """
    wv = np.asarray(w, dtype=float)
    shift = max(0.0, float(wv.max()))
    e = np.exp(wv - shift)
    denom = np.exp(-shift) + e.sum()
    return ReducedPoint(e / denom, v=float(np.exp(-shift) / denom))


def primal_to_dual(U) -> np.ndarray:
    """Inverse of dual_to_primal: w_i = log(U_i / v)."""
    Uv, v = _split_reduced(U)
    if np.any(Uv <= 0.0) or v <= 0.0:
        raise SingularAtBoundary("dual variables require an interior state")
    return np.log(Uv) - np.log(v)


def lift_tangent(zeta) -> np.ndarray:
    """Push a reduced direction onto the simplex tangent space: (-sum zeta, zeta)."""
    zv = np.asarray(zeta, dtype=float)
    return np.concatenate([[-zv.sum()], zv])


def _form_batch(K: np.ndarray, u: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Vectorized dissipation form for batches of interior states and directions."""
    d = xi / u
    diff = d[:, :, None] - d[:, None, :]
    w = u[:, :, None] * u[:, None, :]
    return 0.5 * np.einsum("ij,bij->b", K, w * diff**2)


def find_indefinite_witness(K, samples: int, rng, threshold: float = -1e-12):
    """Randomized search for a direction making the dissipation form negative.

    Takes a raw symmetric zero-diagonal table (possibly with negative
    entries, which a validated model cannot hold).  Half of the draws
    concentrate the state on a random species pair and probe the matching
    two-point direction, the other half are unstructured.  Returns
    (u, xi, value) for the first draw with value below the threshold, or
    None if no draw qualifies.
    """
    K = np.asarray(K, dtype=float)
    ns = K.shape[0]
    chunk = 2048
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        done += b
        n_pair = b // 2
        # Pair-concentrated states with two-point directions.
        ij = np.stack(
            [rng.integers(0, ns, size=n_pair), rng.integers(0, ns - 1, size=n_pair)],
            axis=1,
        )
        ij[:, 1] = np.where(ij[:, 1] >= ij[:, 0], ij[:, 1] + 1, ij[:, 1])
        leak = rng.uniform(1e-4, 0.02, size=n_pair)
        split = rng.uniform(0.2, 0.8, size=n_pair)
        u1 = np.full((n_pair, ns), 0.0)
        u1 += leak[:, None]
        bulk = 1.0 - (ns - 2) * leak
        rows = np.arange(n_pair)
        u1[rows, ij[:, 0]] = split * bulk
        u1[rows, ij[:, 1]] = (1.0 - split) * bulk
        xi1 = np.zeros((n_pair, ns))
        xi1[rows, ij[:, 0]] = 1.0
        xi1[rows, ij[:, 1]] = -1.0
        # Unstructured states with random tangent directions.
        n_free = b - n_pair
        u2 = rng.dirichlet(np.ones(ns), size=n_free)
        u2 = 0.98 * u2 + 0.02 / ns
        xi2 = rng.standard_normal((n_free, ns))
        xi2 -= xi2.mean(axis=1, keepdims=True)
        u_all = np.concatenate([u1, u2])
        xi_all = np.concatenate([xi1, xi2])
        values = _form_batch(K, u_all, xi_all)
        hits = np.nonzero(values < threshold)[0]
        if hits.size:
            k = int(hits[0])
            return u_all[k].copy(), xi_all[k].copy(), float(values[k])
    return None
