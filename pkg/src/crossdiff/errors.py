"""Exception hierarchy for the crossdiff package."""


class CrossDiffusionError(Exception):
    """Base class for all errors raised by this package."""


# --- interaction-matrix validation ---

class NonSquareInput(CrossDiffusionError):
    """Coefficient table is not a square matrix of size at least 2x2."""


class NonFiniteCoefficient(CrossDiffusionError):
    """Coefficient table contains NaN or infinite entries."""


class NonzeroDiagonal(CrossDiffusionError):
    """Diagonal exchange rates must be zero; they are rejected, not dropped."""


class AsymmetricCoefficients(CrossDiffusionError):
    """Exchange rates must be symmetric (K[i][j] == K[j][i])."""


class NegativeCoefficient(CrossDiffusionError):
    """Exchange rates must be nonnegative."""


class HypothesisH3Violated(CrossDiffusionError):
    """No species interacts with every other species."""


class EpsilonTooLarge(CrossDiffusionError):
    """Regularization level exceeds the smallest positive exchange rate."""


class FullInteractionRequired(CrossDiffusionError):
    """Operation needs all off-diagonal exchange rates to be positive."""


# --- state validation ---

class SimplexViolation(CrossDiffusionError):
    """Density vector is negative or does not sum to one within tolerance."""


class SingularAtBoundary(CrossDiffusionError):
    """Operation requires strictly positive densities."""


class NotTangent(CrossDiffusionError):
    """Vector components must sum to zero within tolerance."""


class OutOfRange(CrossDiffusionError):
    """Scalar argument outside its admissible interval."""


class ReferenceNotPositive(CrossDiffusionError):
    """Reference state for a relative functional must be strictly positive."""


class GridMismatch(CrossDiffusionError):
    """Fields or grids with incompatible shapes were combined."""


# --- discretization and initial data ---

class NegativeProfile(CrossDiffusionError):
    """Initial profile takes negative values."""


class DegenerateProfile(CrossDiffusionError):
    """Initial profile sums to zero (or less) in some cell."""


# --- solver ---

class NonFiniteResidual(CrossDiffusionError):
    """Residual evaluation produced NaN or infinite entries."""


class EntropyIncreased(CrossDiffusionError):
    """A time step increased the discrete entropy beyond solver tolerance."""


class NewtonDiverged(CrossDiffusionError):
    """Newton iteration failed to reach the residual tolerance.

    Carries the best iterate seen, the residual history, and (when raised
    from a time loop) the completed prefix of the trajectory.
    """

    def __init__(self, message, best_dual=None, residual_history=None, prefix=None):
        super().__init__(message)
        self.best_dual = best_dual
        self.residual_history = list(residual_history or [])
        self.prefix = prefix


# --- experiments ---

class DegenerateBaseline(CrossDiffusionError):
    """Perturbed and reference states coincide; growth ratio undefined."""


# --- configuration ---

class ParseError(CrossDiffusionError):
    """Configuration text is malformed or contains unknown keys."""
