"""Exception types raised by the library.

Every numerical failure mode gets its own class so that scan drivers can
mask individual grid points (catching :class:`MslError`) while genuine
usage errors keep propagating as standard Python exceptions.
"""

from __future__ import annotations


class MslError(Exception):
    """Base class for all library-specific errors."""


class StructuralError(MslError):
    """Inconsistent shapes or incompatible system sizes."""


class SingularMatrixError(MslError):
    """A matrix that must be regular is singular (B, T11, T12, K22, ...)."""


class DegenerateModeError(SingularMatrixError):
    """A gamma block or mode matrix is singular because modes coincide."""


class IllConditionedError(MslError):
    """A solve was refused because the condition estimate is too large."""

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class MatrixOverflowError(MslError):
    """An intermediate exceeded the representable floating-point range.

    ``omega_d`` carries max_j |Im k_j| * d when known, distinguishing the
    hard overflow regime from ordinary roundoff degradation.
    """

    def __init__(self, message: str, omega_d: float | None = None,
                 layer_index: int | None = None):
        super().__init__(message)
        self.omega_d = omega_d
        self.layer_index = layer_index


class PartitionError(MslError):
    """Eigenvalues could not be split into N right-going and N left-going."""


class EigensolveError(MslError):
    """The quadratic eigensolve failed or left residuals above tolerance."""


class ResonanceError(MslError):
    """A composition inner factor is singular (physical resonance)."""

    def __init__(self, message: str, sigma_min: float | None = None):
        super().__init__(message)
        self.sigma_min = sigma_min


class ModelingError(MslError):
    """The requested boundary problem is inconsistent with the media."""


class VariantError(MslError):
    """An operation was asked for a block-matrix variant it does not support."""


class StructureFileError(MslError):
    """A structure file failed to parse or validate.

    ``location`` names the offending field (JSON path) or line/column.
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None
                         else f"{message} (at {location})")
        self.location = location
