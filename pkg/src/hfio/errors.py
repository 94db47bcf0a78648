"""Exception and warning types shared across the library.

The numeric pipeline distinguishes hard failures (bad arguments, solver
breakdown, singular Jacobians) from soft diagnostics (unresolved
oscillation, window truncation) which are attached to results as flags
and emitted as warnings, never silently dropped.
"""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """Input violates a documented precondition."""


class UnsupportedDimensionError(InvalidArgumentError):
    """Requested dimension outside the supported set {1, 2}."""


class EvaluationError(RuntimeError):
    """A user-supplied callable returned a non-finite value.

    Carries the offending point so validation reports can cite a witness.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class SolverError(RuntimeError):
    """Newton iteration did not converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class JacobianSingularError(SolverError):
    """Newton hit a (numerically) singular Jacobian."""


class LemmaViolatedError(RuntimeError):
    """An inequality assumed by the theory failed at a concrete point."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class MatrixTooLargeError(InvalidArgumentError):
    """Dense assembly would exceed the configured size cap."""


class DecompositionError(RuntimeError):
    """Dense SVD / eigendecomposition failed to converge."""


class ResolutionWarning(UserWarning):
    """Quadrature grid too coarse for the sampled oscillation."""


class WindowWarning(UserWarning):
    """Symbol-extraction window truncates a non-negligible kernel mass."""


class KernelUnconvergedWarning(UserWarning):
    """Cutoff ladder ended before the requested tolerance was met."""
