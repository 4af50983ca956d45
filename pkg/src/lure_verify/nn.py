"""Bias-free fully connected feedforward controllers and their sector bounds.

A controller maps ``z in R^p`` to ``u in R^m`` through ``q`` hidden layers::

    w0 = z,  nu_i = W_i w_{i-1},  w_i = phi_i(nu_i)  (i = 1..q),  u = W_{q+1} w_q

For inputs ``z >= 0`` the whole network satisfies the componentwise sector
condition ``Gamma_lo z <= u <= Gamma_hi z`` with

    Gamma_hi = c_1 ... c_q |W_{q+1}| |W_q| ... |W_1|,   Gamma_lo = -Gamma_hi

where ``c_i = max(|a1|, |a2|)`` for the sector ``[a1, a2]`` of the layer's
scalar activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    NonFiniteEntryError,
    SectorViolationError,
    UnsupportedActivationError,
)
from .linalg import as_matrix

__all__ = [
    "Activation", "get_activation", "register_activation", "BUILTIN_ACTIVATIONS",
    "FeedforwardNet", "SectorBound", "forward", "layer_sector_bound",
    "layer_sector_bounds", "network_sector_bound", "check_sector_membership",
    "sector_margins",
]


@dataclass(frozen=True)
class Activation:
    """Elementwise scalar activation with a declared global sector ``[lo, hi]``.

    ``fn`` must accept and return numpy arrays.
    """

    name: str
    lo: float
    hi: float
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    kind: str = "custom"

    @property
    def sector(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def c(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def strict(self) -> bool:
        return self.lo < self.hi

    def __call__(self, x):
        return self.fn(x)


def _relu(x):
    return np.maximum(x, 0.0)


def _leaky_relu(x):
    return np.where(x >= 0, x, 0.01 * x)


def _identity(x):
    return np.array(x, dtype=np.float64, copy=True)


BUILTIN_ACTIVATIONS: dict[str, Activation] = {
    "tanh": Activation("tanh", 0.0, 1.0, np.tanh, kind="tanh"),
    "relu": Activation("relu", 0.0, 1.0, _relu, kind="relu"),
    "leaky_relu": Activation("leaky_relu", 0.01, 1.0, _leaky_relu, kind="custom"),
    # degenerate sector: usable in forward passes only
    "identity": Activation("identity", 1.0, 1.0, _identity, kind="identity"),
}

_REGISTRY: dict[str, Activation] = dict(BUILTIN_ACTIVATIONS)


def get_activation(name: str) -> Activation:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnsupportedActivationError(
            f"unknown activation {name!r}", known=sorted(_REGISTRY)) from None


def check_scalar_sector(fn, lo: float, hi: float, points: int = 100_000,
                        span: float = 50.0, rtol: float = 1e-12) -> None:
    """Falsification check of ``lo <= fn(s)/s <= hi`` on a symmetric grid.

    Raises :class:`SectorViolationError` with the first offending point.
    """
    f0 = np.asarray(fn(np.zeros(1)), dtype=np.float64)
    if f0.shape != (1,) or f0[0] != 0.0:
        raise SectorViolationError("activation must map 0 to 0")
    grid = np.linspace(-span, span, points)
    grid = grid[grid != 0.0]
    vals = np.asarray(fn(grid), dtype=np.float64)
    if vals.shape != grid.shape or not np.all(np.isfinite(vals)):
        raise SectorViolationError("activation returned malformed values on the grid")
    ratio = vals / grid
    slack = rtol * np.maximum(1.0, np.abs(ratio))
    bad = np.flatnonzero((ratio < lo - slack) | (ratio > hi + slack))
    if bad.size:
        s = float(grid[bad[0]])
        raise SectorViolationError(
            f"f({s:.6g})/{s:.6g} = {ratio[bad[0]]:.6g} outside [{lo}, {hi}]",
            point=s, ratio=float(ratio[bad[0]]))


def register_activation(name: str, fn, sector: tuple[float, float],
                        points: int = 100_000, span: float = 50.0) -> Activation:
    """Register a custom activation under ``name`` after a grid check of its sector."""
    lo, hi = float(sector[0]), float(sector[1])
    if name in BUILTIN_ACTIVATIONS:
        raise ValueError(f"cannot redefine built-in activation {name!r}")
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise UnsupportedActivationError(f"sector [{lo}, {hi}] must satisfy lo < hi")
    check_scalar_sector(fn, lo, hi, points=points, span=span)
    act = Activation(name, lo, hi, fn, kind="custom")
    _REGISTRY[name] = act
    return act


def widen(act: Activation, sector: tuple[float, float]) -> Activation:
    """Same function with a wider declared sector (always sound)."""
    lo, hi = float(sector[0]), float(sector[1])
    if not (lo <= act.lo and act.hi <= hi):
        raise UnsupportedActivationError(
            f"sector [{lo}, {hi}] does not contain the sector "
            f"[{act.lo}, {act.hi}] of {act.name!r}")
    if (lo, hi) == act.sector:
        return act
    return Activation(act.name, lo, hi, act.fn, kind=act.kind)


class FeedforwardNet:
    """Immutable bias-free MLP controller.

    Parameters
    ----------
    weights : sequence of array_like
        ``W_1, ..., W_{q+1}``; ``W_i`` has shape ``(l_i, l_{i-1})``.  At least
        one hidden layer is required.
    activation : str, Activation, or sequence of them
        Either one activation shared by all hidden layers or one per hidden
        layer.
    """

    def __init__(self, weights: Sequence, activation="tanh"):
        mats = tuple(as_matrix(w, f"W{i + 1}") for i, w in enumerate(weights))
        if len(mats) < 2:
            raise DimensionError("a controller needs at least one hidden layer "
                                 "(two weight matrices)")
        for i in range(1, len(mats)):
            if mats[i].shape[1] != mats[i - 1].shape[0]:
                raise DimensionError(
                    f"W{i + 1} has {mats[i].shape[1]} columns but W{i} has "
                    f"{mats[i - 1].shape[0]} rows", layer=i + 1)
        q = len(mats) - 1
        if isinstance(activation, (str, Activation)):
            acts = (activation,) * q
        else:
            acts = tuple(activation)
            if len(acts) != q:
                raise DimensionError(f"expected {q} activations, got {len(acts)}")
        self._weights = mats
        self._activations = tuple(get_activation(a) if isinstance(a, str) else a
                                  for a in acts)

    @property
    def weights(self) -> tuple[np.ndarray, ...]:
        return self._weights

    @property
    def activations(self) -> tuple[Activation, ...]:
        return self._activations

    @property
    def hidden_layer_count(self) -> int:
        return len(self._weights) - 1

    q = hidden_layer_count

    @property
    def input_width(self) -> int:
        return self._weights[0].shape[1]

    @property
    def output_width(self) -> int:
        return self._weights[-1].shape[0]

    @property
    def architecture(self) -> list[int]:
        """Layer output widths, e.g. ``[10, 15, 15, 1]``."""
        return [w.shape[0] for w in self._weights]

    def __call__(self, z):
        return forward(self, z)

    def __repr__(self):
        arch = "/".join(str(k) for k in self.architecture)
        names = sorted({a.name for a in self._activations})
        return f"FeedforwardNet({self.input_width}->{arch}, {'/'.join(names)})"

    def scaled_output(self, k: float) -> "FeedforwardNet":
        """Copy with the output layer multiplied by ``k``."""
        ws = list(self._weights)
        ws[-1] = ws[-1] * k
        return FeedforwardNet(ws, self._activations)


@dataclass(frozen=True, eq=False)
class SectorBound:
    """Componentwise sector ``lower z <= Phi(z) <= upper z`` for ``z >= 0``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_matrix(self.lower, "lower")
        hi = as_matrix(self.upper, "upper")
        if lo.shape != hi.shape:
            raise DimensionError(f"sector shapes differ: {lo.shape} vs {hi.shape}")
        if not np.all(lo <= hi):
            raise DomainError("sector bound requires lower <= upper elementwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.upper.shape

    def __eq__(self, other):
        if not isinstance(other, SectorBound):
            return NotImplemented
        return (np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    __hash__ = None

    def scaled(self, k: float) -> "SectorBound":
        if k < 1:
            raise ValueError("only widening (k >= 1) keeps a sector bound valid")
        return SectorBound(self.lower * k, self.upper * k)


def _as_input(z, width: int, name: str = "z") -> np.ndarray:
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[0] != width:
        raise DimensionError(f"{name} must have leading dimension {width}, "
                             f"got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntryError(f"{name} has non-finite entries")
    return arr


def forward(net: FeedforwardNet, z) -> np.ndarray:
    """Evaluate the controller.

    ``z`` is a length-``p`` vector or a ``(p, k)`` array of ``k`` column inputs.
    """
    w = _as_input(z, net.input_width)
    for W, act in zip(net.weights[:-1], net.activations):
        w = act(W @ w)
    return net.weights[-1] @ w


def _strict_c(act: Activation, layer: int) -> float:
    if not act.strict:
        raise UnsupportedActivationError(
            f"activation {act.name!r} in hidden layer {layer} has degenerate "
            f"sector [{act.lo}, {act.hi}]; bounds need lo < hi", layer=layer)
    return act.c


def layer_sector_bounds(net: FeedforwardNet) -> list[SectorBound]:
    """Bounds on the hidden-layer outputs ``w_1, ..., w_q`` in terms of ``z``.

    Entry ``i - 1`` bounds ``w_i`` by ``+-c_1...c_i |W_i| ... |W_1|``,
    accumulated left to right in ascending layer order.
    """
    out = []
    acc = None
    for i, (W, act) in enumerate(zip(net.weights[:-1], net.activations), start=1):
        c = _strict_c(act, i)
        absW = np.abs(W)
        with np.errstate(over="ignore", invalid="ignore"):
            acc = c * absW if acc is None else c * (absW @ acc)
        _require_finite(acc, i)
        out.append(SectorBound(-acc, acc.copy()))
    return out


def _require_finite(bound: np.ndarray, layer: int) -> None:
    if not np.all(np.isfinite(bound)):
        raise NonFiniteEntryError(f"sector bound overflowed at layer {layer}",
                                  layer=layer)


def layer_sector_bound(net: FeedforwardNet, i: int) -> SectorBound:
    """Sector bound of hidden layer ``i`` (1-based, ``1 <= i <= q``)."""
    if not 1 <= i <= net.q:
        raise IndexError(f"layer index {i} outside 1..{net.q}")
    return layer_sector_bounds(net)[i - 1]


def network_sector_bound(net: FeedforwardNet) -> SectorBound:
    """Whole-network sector ``(Gamma_lo, Gamma_hi)`` with ``Gamma_lo = -Gamma_hi``."""
    last = layer_sector_bounds(net)[-1].upper
    with np.errstate(over="ignore", invalid="ignore"):
        upper = np.abs(net.weights[-1]) @ last
    _require_finite(upper, net.q + 1)
    return SectorBound(-upper, upper)


def sector_margins(bound: SectorBound, z, u) -> np.ndarray:
    """Signed distance of ``u`` from the sector boundary, per sample.

    ``z`` is ``(p,)`` or ``(p, k)``; ``u`` is ``(m,)`` or ``(m, k)``.  The
    result has one entry per sample (a scalar array for 1-D input); positive
    means strictly inside, negative means outside.
    """
    p = bound.shape[1]
    m = bound.shape[0]
    z = _as_input(z, p)
    u = _as_input(u, m, "u")
    if z.ndim != u.ndim or (z.ndim == 2 and z.shape[1] != u.shape[1]):
        raise DimensionError("z and u must hold the same number of samples")
    if np.any(z < 0):
        raise DomainError("sector conditions only constrain z >= 0")
    lo = bound.lower @ z
    hi = bound.upper @ z
    return np.minimum(u - lo, hi - u).min(axis=0)


def check_sector_membership(bound: SectorBound, z, u, tol: float = 1e-9) -> bool:
    """True iff ``lower z - tol <= u <= upper z + tol`` for every sample."""
    return bool(np.all(sector_margins(bound, z, u) >= -tol))
