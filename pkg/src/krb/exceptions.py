from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Sequence


class KrbError(Exception):
    """Base exception for all reduced Krylov basis errors.

    This exception should be inherited by all custom exceptions
    in the package.
    """

    pass


class DimensionMismatchError(KrbError, ValueError):
    """Raised when vector or matrix dimensions are incompatible.

    This exception indicates that an operation received operands whose
    shapes cannot be combined, e.g. a matrix-vector product with the
    wrong vector length or reduced blocks of inconsistent sizes.
    """

    pass


class ArityMismatchError(KrbError, ValueError):
    """Raised when a coefficient vector does not match the number of affine terms.

    The affine operator A(mu) = sum_j theta_j(mu) A_j has a fixed number J of
    terms; every theta vector, reduced block list or manifest entry must
    agree with it.
    """

    pass


class ParameterDomainError(KrbError, ValueError):
    """Raised when a parameter point lies outside the domain of a theta map.

    Examples are a zero conductivity in the eddy-current surrogate or a
    Poisson ratio outside (0, 1/2) for plane-strain elasticity.
    """

    pass


class SingularReducedSystemError(KrbError):
    """Raised when a small dense system is singular to working precision.

    The online stage reports the offending coefficient vector and a
    condition estimate. A singular reduced system usually means theta(mu)
    is collinear with theta(mu0) or the reduced basis is degenerate.
    """

    def __init__(
        self,
        message: str,
        theta: Sequence[float] | None = None,
        condition: float | None = None,
    ) -> None:
        super().__init__(message)
        self.theta = None if theta is None else tuple(float(t) for t in theta)
        self.condition = condition


class NotPositiveDefiniteError(KrbError):
    """Raised when a Cholesky factorization meets a nonpositive pivot.

    The matrix handed to the Cholesky path is not symmetric positive-definite,
    e.g. a Helmholtz operator whose wavenumber exceeds the first eigenvalue.
    """

    pass


class SingularMatrixError(KrbError):
    """Raised when a sparse LU factorization finds a zero pivot column."""

    pass


class NumericalBreakdownError(KrbError):
    """Raised when a Krylov recurrence produces a nonfinite scalar.

    The partially recorded trace is attached so callers can still inspect
    or use the vectors harvested before the failure.
    """

    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class EmptyModelError(KrbError):
    """Raised when an offline stage harvests no usable basis vector (e.g. f = 0)."""

    pass


class ConfigError(KrbError, ValueError):
    """Raised for invalid experiment configurations.

    The command-line interface maps this exception to exit code 2.
    """

    pass


class UnknownPresetError(ConfigError):
    """Raised when an experiment preset name is not known.

    The message lists every valid preset name.
    """

    pass


class PersistenceError(KrbError):
    """Base exception for reduced-model export and import failures."""

    pass


class CorruptManifestError(PersistenceError):
    """Raised when a model manifest cannot be parsed or misses required fields."""

    pass


class PayloadSizeMismatchError(PersistenceError):
    """Raised when the binary payload length disagrees with the manifest layout.

    A truncated or padded payload file is the usual cause.
    """

    pass


class HashMismatchError(PersistenceError):
    """Raised when the payload checksum differs from the one recorded at export."""

    pass
