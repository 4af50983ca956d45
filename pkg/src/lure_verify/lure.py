"""Closed-loop verification of LTI plants under bias-free MLP feedback.

The loop ``x' = A x + B pi(C x)`` is treated as a Lur'e system whose static
nonlinearity lies in the sector ``[Gamma_lo, Gamma_hi]`` computed by
:func:`lure_verify.nn.network_sector_bound`.  With ``B, C >= 0``:

* ``A + B Gamma_lo C`` Metzler  <=>  the loop is positive for every
  nonlinearity in the sector;
* additionally ``A + B Gamma_hi C`` Hurwitz  =>  global exponential stability
  on the nonnegative orthant, with envelope
  ``|x(t)|_1 <= (v_max / v_min) |x(0)|_1 exp(-epsilon t)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg as la
from .errors import (
    DimensionError,
    HypothesisViolationError,
    NoCertificateError,
    NonFiniteEntryError,
    PreconditionError,
    StaleBoundError,
)
from .nn import FeedforwardNet, SectorBound, network_sector_bound

__all__ = [
    "LtiSystem", "LureSystem", "Verdict", "StabilityCertificate",
    "check_lti_positivity", "check_interconnection_positivity",
    "verify_stability", "decay_envelope", "GUARANTEE_DOMAIN",
]

GUARANTEE_DOMAIN = "x(0) >= 0, 1-norm envelope"


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Plant ``x' = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = la.as_matrix(self.A, "A")
        B = la.as_matrix(self.B, "B")
        C = la.as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def B_nonneg(self) -> bool:
        return bool(np.all(self.B >= 0))

    @cached_property
    def C_nonneg(self) -> bool:
        return bool(np.all(self.C >= 0))

    @cached_property
    def A_metzler(self) -> bool:
        return la.is_metzler(self.A)


class LureSystem:
    """Plant in feedback with a controller, plus the controller's sector bound.

    The bound is always recomputed from the controller; passing a ``bound``
    that differs from the recomputed one raises :class:`StaleBoundError`.
    """

    def __init__(self, plant: LtiSystem, controller: FeedforwardNet,
                 bound: SectorBound | None = None):
        if controller.input_width != plant.p:
            raise DimensionError(
                f"controller takes {controller.input_width} inputs but C has "
                f"{plant.p} rows")
        if controller.output_width != plant.m:
            raise DimensionError(
                f"controller returns {controller.output_width} outputs but B has "
                f"{plant.m} columns")
        fresh = network_sector_bound(controller)
        if bound is not None and bound != fresh:
            raise StaleBoundError("supplied sector bound does not match the controller")
        self.plant = plant
        self.controller = controller
        self.bound = fresh

    @property
    def n(self) -> int:
        return self.plant.n

    def vector_field(self, x) -> np.ndarray:
        """``A x + B pi(C x)`` for a state vector or an ``(n, k)`` batch."""
        P = self.plant
        return P.A @ x + P.B @ self.controller(P.C @ x)

    def closed_loop_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A + B Gamma_lo C, A + B Gamma_hi C)``."""
        P = self.plant
        with np.errstate(over="ignore", invalid="ignore"):
            lower = P.A + P.B @ self.bound.lower @ P.C
            upper = P.A + P.B @ self.bound.upper @ P.C
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise NonFiniteEntryError("closed-loop matrices overflowed")
        return lower, upper


class Verdict(str, enum.Enum):
    CERTIFIED_GES = "certified_GES"
    NOT_POSITIVE_INTERCONNECTION = "not_positive_interconnection"
    NOT_HURWITZ = "not_hurwitz"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    verdict: Verdict
    M_lower: np.ndarray
    M_upper: np.ndarray
    metzler_ok: bool
    hurwitz_ok: bool
    upper_spectrum: la.EigenSpectrum
    decay: la.PositivityCertificate | None = None
    bound: SectorBound | None = None
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED_GES


def check_lti_positivity(sys: LtiSystem) -> bool:
    """Plant positivity: A Metzler, B >= 0, C >= 0."""
    return sys.A_metzler and sys.B_nonneg and sys.C_nonneg


def _require_nonneg_io(plant: LtiSystem) -> None:
    bad = [name for name, ok in (("B", plant.B_nonneg), ("C", plant.C_nonneg))
           if not ok]
    if bad:
        raise HypothesisViolationError(
            f"{' and '.join(bad)} must be entrywise nonnegative", matrices=bad)


def check_interconnection_positivity(sys: LureSystem,
                                     tol: float = la.TOL_METZLER) -> bool:
    """True iff ``A + B Gamma_lo C`` is Metzler (requires ``B, C >= 0``)."""
    _require_nonneg_io(sys.plant)
    lower, _ = sys.closed_loop_matrices()
    return la.is_metzler(lower, tol)


def verify_stability(sys: LureSystem, tol_hurwitz: float = la.TOL_HURWITZ,
                     tol_metzler: float = la.TOL_METZLER,
                     max_iter: int = la.MAX_ITER) -> StabilityCertificate:
    """Run the Metzler/Hurwitz test and build the decay certificate.

    Verdict precedence: a failed Metzler test is reported as
    ``not_positive_interconnection`` even if the Hurwitz test also fails.
    A spectral abscissa in ``[-tol_hurwitz, 0]`` gives ``inconclusive``.
    """
    _require_nonneg_io(sys.plant)
    lower, upper = sys.closed_loop_matrices()
    if not np.all(lower <= upper):
        raise AssertionError("A + B Gamma_lo C must not exceed A + B Gamma_hi C")

    metzler_ok = la.is_metzler(lower, tol_metzler)
    spectrum = la.eigenvalues(upper, max_iter=max_iter)
    alpha = spectrum.abscissa
    hurwitz_ok = alpha < -tol_hurwitz
    marginal = not hurwitz_ok and alpha <= 0.0

    def result(verdict, decay=None, note=""):
        return StabilityCertificate(verdict, lower, upper, metzler_ok, hurwitz_ok,
                                    spectrum, decay, sys.bound, note)

    if not metzler_ok:
        return result(Verdict.NOT_POSITIVE_INTERCONNECTION)
    if marginal:
        return result(Verdict.INCONCLUSIVE,
                      note=f"spectral abscissa {alpha:.3g} within tolerance of 0")
    if not hurwitz_ok:
        return result(Verdict.NOT_HURWITZ)

    if not la.is_metzler(upper, tol_metzler):
        raise AssertionError("A + B Gamma_hi C must inherit the Metzler property")
    try:
        decay = la.metzler_hurwitz_certificate(upper, tol=tol_hurwitz,
                                               max_iter=max_iter)
    except (NoCertificateError, PreconditionError) as exc:
        return result(Verdict.INCONCLUSIVE, note=f"no decay certificate: {exc}")
    if la.certificate_residual(decay, upper) > 0:
        return result(Verdict.INCONCLUSIVE, note="decay certificate failed recheck")
    return result(Verdict.CERTIFIED_GES, decay)


def decay_envelope(cert: StabilityCertificate, x0_norm: float, t):
    """Certified bound ``(v_max / v_min) |x(0)|_1 exp(-epsilon t)`` on ``|x(t)|_1``.

    Valid for nonnegative initial conditions.  ``t`` may be an array.
    """
    if cert.verdict is not Verdict.CERTIFIED_GES or cert.decay is None:
        raise PreconditionError("decay envelope needs a certified_GES certificate")
    if x0_norm < 0:
        raise ValueError("x0_norm must be nonnegative")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    d = cert.decay
    env = d.envelope_constant * x0_norm * np.exp(-d.epsilon * t_arr)
    return float(env) if env.ndim == 0 else env

