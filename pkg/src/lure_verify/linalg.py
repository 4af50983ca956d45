"""Small dense real linear algebra for stability tests.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Functions in
this module never mutate their arguments; :func:`as_matrix` returns read-only
copies so that values can be shared freely between threads.

The eigenvalue solver is a self-contained balanced Hessenberg / Francis
double-shift QR iteration (order 2 uses the trace/determinant formula).  It
is meant for the matrix orders that show up in closed-loop verification
(a handful to a few dozen states), not for large problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    NoCertificateError,
    NonFiniteEntryError,
    PreconditionError,
)

__all__ = [
    "TOL_METZLER", "TOL_HURWITZ", "TOL_EIG", "MAX_ITER", "MAX_ORDER",
    "as_matrix", "elementwise_abs", "elementwise_leq", "is_metzler",
    "EigenSpectrum", "eigenvalues", "spectral_abscissa", "is_hurwitz",
    "hurwitz_status", "metzler_hurwitz_fast", "PositivityCertificate",
    "metzler_hurwitz_certificate", "certificate_residual", "spectral_norm",
]

TOL_METZLER = 0.0
TOL_HURWITZ = 1e-9
TOL_EIG = 1e-10
MAX_ITER = 10_000
MAX_ORDER = 64
CERT_MARGIN = 1e-6
REDUCIBLE_PERTURBATION = 1e-12
# Perron vectors with v_max / v_min above this are treated as degenerate
MAX_ENVELOPE_CONSTANT = 1e6


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate ``m`` as a finite 2-D real matrix and return a read-only copy.

    One-dimensional input is not promoted; callers must be explicit about
    row versus column shape.
    """
    try:
        arr = np.array(m, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"{name} is not a real matrix: {exc}") from None
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got {arr.ndim}-D",
                             shape=list(arr.shape))
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column",
                             shape=list(arr.shape))
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntryError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _square(m, name="matrix") -> np.ndarray:
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got {arr.shape}",
                             shape=list(arr.shape))
    return arr


def elementwise_abs(m) -> np.ndarray:
    out = np.abs(as_matrix(m))
    out.setflags(write=False)
    return out


def elementwise_leq(a, b) -> bool:
    """True iff ``a[i, j] <= b[i, j]`` for every entry."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return bool(np.all(a <= b))


def is_metzler(m, tol: float = TOL_METZLER) -> bool:
    """True iff every off-diagonal entry of ``m`` is at least ``-tol``."""
    m = _square(m)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    off = m[~np.eye(m.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


# ---------------------------------------------------------------------------
# eigenvalues

@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues of a real square matrix, sorted by (real, imag) ascending."""

    values: tuple[complex, ...]

    @property
    def abscissa(self) -> float:
        return max(v.real for v in self.values)

    def as_pairs(self) -> list[list[float]]:
        return [[v.real, v.imag] for v in self.values]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def _spectrum(values) -> EigenSpectrum:
    vals = [complex(v) for v in values]
    vals.sort(key=lambda z: (z.real, z.imag))
    return EigenSpectrum(tuple(vals))


def _eig2(a: np.ndarray) -> list[complex]:
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    half = 0.5 * tr
    # half^2 - det written to avoid cancellation when the diagonal dominates
    disc = (0.5 * (a[0, 0] - a[1, 1])) ** 2 + a[0, 1] * a[1, 0]
    if disc >= 0:
        s = math.sqrt(disc)
        big = half + math.copysign(s, half) if half != 0 else s
        small = det / big if big != 0 else half - s
        return [complex(big), complex(small)]
    s = math.sqrt(-disc)
    return [complex(half, s), complex(half, -s)]


def _balance(a: np.ndarray) -> None:
    """Diagonal similarity scaling by powers of two, in place (exact)."""
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f


def _hessenberg(a: np.ndarray) -> None:
    """Householder reduction to upper Hessenberg form, in place."""
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        top = np.max(np.abs(x))
        if top == 0.0:
            continue
        # the reflector is scale-invariant; normalising avoids underflow in v.v
        x /= top
        alpha = np.linalg.norm(x)
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vnorm2 = float(v @ v)
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        a[k + 1:, k:] -= beta * np.outer(v, v @ a[k + 1:, k:])
        a[:, k + 1:] -= beta * np.outer(a[:, k + 1:] @ v, v)
        a[k + 2:, k] = 0.0


def _hqr(h: np.ndarray, max_iter: int) -> list[complex]:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Works on a 1-based padded copy to keep the index arithmetic of the
    classic formulation readable.
    """
    n = h.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = h
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    total = 0
    p = q = r = x = y = z = w = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1, ll - 1]) + abs(a[ll, ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll, ll - 1]) + s == s:
                    a[ll, ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                found = [complex(wr[k], wi[k]) for k in range(nn + 1, n + 1)]
                raise ConvergenceError(
                    f"QR iteration did not converge in {max_iter} sweeps",
                    partial=_spectrum(found))
            if its and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
            if l >= nn - 1:
                break
    return [complex(wr[k], wi[k]) for k in range(1, n + 1)]


def eigenvalues(m, max_iter: int = MAX_ITER,
                max_order: int = MAX_ORDER) -> EigenSpectrum:
    """All eigenvalues of a real square matrix.

    Parameters
    ----------
    m : array_like
        Square real matrix of order at most ``max_order``.
    max_iter : int
        Total budget of QR sweeps.

    Returns
    -------
    EigenSpectrum

    Raises
    ------
    ConvergenceError
        If the budget is exhausted; ``partial`` holds the eigenvalues
        deflated so far.
    """
    a = _square(m)
    n = a.shape[0]
    if n > max_order:
        raise DimensionError(f"order {n} exceeds max_order={max_order}")
    if n == 1:
        return _spectrum([a[0, 0]])
    # exact power-of-two scaling keeps tiny or huge matrices away from
    # underflow/overflow inside the iteration
    top = float(np.max(np.abs(a)))
    if top == 0.0:
        return _spectrum([0.0] * n)
    scale = math.ldexp(1.0, math.frexp(top)[1] - 1)
    work = np.array(a, dtype=np.float64) / scale
    if n == 2:
        return _spectrum([z * scale for z in _eig2(work)])
    _balance(work)
    _hessenberg(work)
    try:
        vals = _hqr(work, max_iter)
    except ConvergenceError as exc:
        exc.partial = _spectrum([z * scale for z in exc.partial])
        raise
    return _spectrum([z * scale for z in vals])


def spectral_abscissa(m, max_iter: int = MAX_ITER) -> float:
    return eigenvalues(m, max_iter=max_iter).abscissa


def hurwitz_status(m, tol: float = TOL_HURWITZ,
                   max_iter: int = MAX_ITER) -> str:
    """Classify ``m`` as ``"hurwitz"``, ``"marginal"`` or ``"unstable"``.

    Marginal means the spectral abscissa lies in ``[-tol, 0]``; such matrices
    are never reported as Hurwitz.
    """
    alpha = spectral_abscissa(m, max_iter=max_iter)
    if alpha < -tol:
        return "hurwitz"
    if alpha <= 0.0:
        return "marginal"
    return "unstable"


def is_hurwitz(m, tol: float = TOL_HURWITZ, max_iter: int = MAX_ITER) -> bool:
    """True iff every eigenvalue has real part below ``-tol``."""
    return hurwitz_status(m, tol, max_iter) == "hurwitz"


def metzler_hurwitz_fast(m) -> bool:
    """Hurwitz test for Metzler matrices without computing eigenvalues.

    A Metzler matrix is Hurwitz iff some ``v > 0`` has ``M v < 0``.  The
    candidate ``v = -M^{-1} 1`` is checked by direct substitution, so a
    ``True`` answer is self-certifying.
    """
    m = _square(m)
    if not is_metzler(m):
        raise PreconditionError("metzler_hurwitz_fast requires a Metzler matrix")
    n = m.shape[0]
    try:
        v = np.linalg.solve(m, -np.ones(n))
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(v > 0) and np.all(m @ v < 0))


# ---------------------------------------------------------------------------
# positivity certificates

@dataclass(frozen=True)
class PositivityCertificate:
    """A vector ``v > 0`` and rate ``epsilon > 0`` with ``v^T M <= -epsilon v^T``."""

    v: tuple[float, ...]
    epsilon: float
    v_min: float
    v_max: float

    @classmethod
    def from_vector(cls, v: np.ndarray, epsilon: float) -> "PositivityCertificate":
        v = np.asarray(v, dtype=np.float64)
        return cls(tuple(float(x) for x in v), float(epsilon),
                   float(v.min()), float(v.max()))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.v)

    @property
    def envelope_constant(self) -> float:
        return self.v_max / self.v_min


def certificate_residual(cert: PositivityCertificate, m) -> float:
    """Largest entry of ``v^T M + epsilon v^T``; nonpositive for a valid certificate."""
    m = _square(m)
    v = cert.vector
    if v.shape[0] != m.shape[0]:
        raise DimensionError("certificate length does not match matrix order")
    return float(np.max(v @ m + cert.epsilon * v))


def _left_perron(m: np.ndarray, alpha: float, iters: int = 200) -> np.ndarray | None:
    # Shifted inverse iteration on M^T.  For mu > alpha, -(M - mu I)^{-T} is
    # entrywise nonnegative, so iterates stay in the nonnegative orthant.
    n = m.shape[0]
    scale = 1.0 + float(np.max(np.abs(m)))
    mu = alpha + 1e-6 * scale
    shifted = (m - mu * np.eye(n)).T
    v = np.ones(n)
    for _ in range(iters):
        try:
            w = -np.linalg.solve(shifted, v)
        except np.linalg.LinAlgError:
            return None
        w = np.maximum(w, 0.0)
        top = w.max()
        if not np.isfinite(top) or top <= 0:
            return None
        w /= top
        if np.max(np.abs(w - v)) < 1e-15:
            return w
        v = w
    return v


def _max_rate(v: np.ndarray, m: np.ndarray) -> float:
    """Largest epsilon with v^T M <= -epsilon v^T for this v (may be <= 0)."""
    return float(np.min(-(v @ m) / v))


def _finalise(v: np.ndarray, m: np.ndarray, margin: float) -> PositivityCertificate | None:
    if not np.all(v > 0):
        return None
    v = v / v.max()
    eps = _max_rate(v, m) * (1.0 - margin)
    if not eps > 0:
        return None
    cert = PositivityCertificate.from_vector(v, eps)
    if certificate_residual(cert, m) > 0:
        return None
    return cert


def metzler_hurwitz_certificate(m, tol: float = TOL_HURWITZ,
                                margin: float = CERT_MARGIN,
                                max_iter: int = MAX_ITER) -> PositivityCertificate:
    """Construct ``(v, epsilon)`` with ``v > 0`` and ``v^T M <= -epsilon v^T``.

    ``v`` is the normalised left Perron vector of ``M`` (equivalently of the
    nonnegative matrix ``M + sI``) and ``epsilon`` is the largest rate that
    this ``v`` supports, shrunk by the relative ``margin``.  Reducible
    matrices whose Perron vector has (numerically) zero entries are handled
    by a ``1e-12`` all-ones perturbation; if the result still fails the
    direct check against the unperturbed ``M`` or has ``v_max / v_min``
    above ``MAX_ENVELOPE_CONSTANT``, the certificate falls back to
    ``v = -M^{-T} 1``, which is strictly positive for every Metzler Hurwitz
    matrix.

    Raises
    ------
    PreconditionError
        ``m`` is not Metzler.
    NoCertificateError
        ``m`` is not Hurwitz (within ``tol``), so no certificate exists.
    """
    m = _square(m)
    if not is_metzler(m):
        raise PreconditionError("certificate requires a Metzler matrix")
    n = m.shape[0]
    alpha = spectral_abscissa(m, max_iter=max_iter)
    if not alpha < -tol:
        raise NoCertificateError(
            f"matrix is not Hurwitz (spectral abscissa {alpha:.6g})",
            abscissa=alpha)

    candidates = []
    v = _left_perron(m, alpha)
    if v is not None:
        candidates.append(_finalise(v, m, margin))
    if not _well_conditioned(candidates):
        perturbed = m + REDUCIBLE_PERTURBATION * np.ones((n, n))
        alpha_p = spectral_abscissa(perturbed, max_iter=max_iter)
        if alpha_p < 0:
            v = _left_perron(perturbed, alpha_p)
            if v is not None:
                candidates.append(_finalise(v, m, margin))
    if not _well_conditioned(candidates):
        try:
            candidates.append(_finalise(np.linalg.solve(m.T, -np.ones(n)), m, margin))
        except np.linalg.LinAlgError:
            pass
    valid = [c for c in candidates if c is not None]
    if not valid:
        raise NoCertificateError(
            "could not construct a certificate that passes the direct check",
            abscissa=alpha)
    good = [c for c in valid if c.envelope_constant <= MAX_ENVELOPE_CONSTANT]
    return good[0] if good else min(valid, key=lambda c: c.envelope_constant)


def _well_conditioned(candidates) -> bool:
    return any(c is not None and c.envelope_constant <= MAX_ENVELOPE_CONSTANT
               for c in candidates)


# ---------------------------------------------------------------------------
# norms

def spectral_norm(m, max_iter: int = MAX_ITER) -> float:
    """Largest singular value of ``m``.

    Computed as the square root of the largest eigenvalue of the smaller of
    the two Gram matrices ``m^T m`` and ``m m^T``.
    """
    m = as_matrix(m)
    gram = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    gram = 0.5 * (gram + gram.T)
    if gram.shape[0] > MAX_ORDER:
        raise DimensionError("matrix too large for spectral_norm")
    top = max(v.real for v in eigenvalues(gram, max_iter=max_iter))
    return math.sqrt(max(top, 0.0))
