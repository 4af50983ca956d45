"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`LureVerifyError` and carries a short machine-readable ``code``.
"""

from __future__ import annotations

from typing import Any


class LureVerifyError(Exception):
    """Base class for all errors raised by lure_verify."""

    code = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"error": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


class DimensionError(LureVerifyError, ValueError):
    code = "dimension_error"


class NonFiniteEntryError(LureVerifyError, ValueError):
    code = "non_finite_entry"


class DomainError(LureVerifyError, ValueError):
    code = "domain_error"


class PreconditionError(LureVerifyError, ValueError):
    code = "precondition_error"


class ConvergenceError(LureVerifyError, ArithmeticError):
    """An iterative routine ran out of iterations.

    ``partial`` holds whatever was computed before giving up.
    """

    code = "convergence_error"

    def __init__(self, message: str, partial: Any = None, **details: Any):
        super().__init__(message, **details)
        self.partial = partial


class NoCertificateError(LureVerifyError, ValueError):
    code = "no_certificate"


class UnsupportedActivationError(LureVerifyError, ValueError):
    code = "unsupported_activation"


class SectorViolationError(LureVerifyError, ValueError):
    """A scalar function failed its declared sector on the check grid."""

    code = "sector_violation"


class HypothesisViolationError(LureVerifyError, ValueError):
    """B or C has negative entries, so the positivity framework does not apply."""

    code = "hypothesis_violation"


class StaleBoundError(LureVerifyError, ValueError):
    code = "stale_bound"


class DivergenceError(LureVerifyError, ArithmeticError):
    code = "divergence"

    def __init__(self, message: str, trajectory: Any = None, **details: Any):
        super().__init__(message, **details)
        self.trajectory = trajectory


class EstimationError(LureVerifyError, ValueError):
    code = "estimation_error"


class ModelFileError(LureVerifyError):
    """Base for problems found while loading a model file."""

    code = "model_file_error"


class ParseError(ModelFileError):
    code = "parse_error"


class SchemaError(ModelFileError):
    code = "schema_error"


class VersionError(ModelFileError):
    code = "version_error"


class ShapeChainError(ModelFileError, DimensionError):
    code = "shape_chain_error"


class NonzeroBiasError(ModelFileError):
    code = "nonzero_bias"


class ModelNonFiniteError(ModelFileError, NonFiniteEntryError):
    code = "non_finite_entry"


class ModelActivationError(ModelFileError, UnsupportedActivationError):
    code = "unsupported_activation"
