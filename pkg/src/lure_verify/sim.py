"""Fixed-step simulation of the closed loop and empirical certificate checks.

Integration is classical RK4 on ``x' = A x + B pi(C x)``.  Many initial
conditions are integrated together as columns of one ``(n, k)`` array; each
column evolves independently, so a batch is equivalent to ``k`` separate
runs.  States are never clamped: small negative excursions are reported by
:func:`monitor_positivity` instead of being hidden.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, DivergenceError, DomainError, EstimationError
from .lure import LureSystem, StabilityCertificate, decay_envelope
from .nn import SectorBound, sector_margins

__all__ = [
    "SimConfig", "Trajectory", "integrate", "batch_simulate", "initial_conditions",
    "SectorReport", "monitor_sector", "PositivityReport", "monitor_positivity",
    "EnvelopeReport", "check_envelope", "estimate_decay_rate", "write_csv",
    "read_csv", "worker_count",
]


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-3
    horizon: float = 10.0
    positivity_tol: float = 1e-8
    seed: int = 0
    ic_max: float = 5.0
    overflow: float = 1e12

    def __post_init__(self):
        if not (self.step > 0 and self.horizon > 0):
            raise ValueError("step and horizon must be positive")
        if not self.step < self.horizon:
            raise ValueError("step must be smaller than horizon")
        if self.positivity_tol < 0 or self.ic_max < 0 or self.overflow <= 0:
            raise ValueError("tolerances and ranges must be nonnegative")

    @property
    def n_steps(self) -> int:
        k = self.horizon / self.step
        n = round(k)
        return n if abs(n - k) <= 1e-9 * k else math.ceil(k)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled closed-loop solution; row ``k`` of each array is time ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    diverged: bool = False

    def __len__(self):
        return self.times.shape[0]

    @property
    def norms(self) -> np.ndarray:
        """1-norm of the state at every sample."""
        return np.abs(self.states).sum(axis=1)

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]


def worker_count() -> int:
    """Thread cap from ``LURE_VERIFY_THREADS`` (default 1)."""
    raw = os.environ.get("LURE_VERIFY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _rk4_columns(sys: LureSystem, X0: np.ndarray, cfg: SimConfig):
    """Integrate every column of ``X0``; return states and last valid index."""
    n, k = X0.shape
    N = cfg.n_steps
    h = cfg.step
    f = sys.vector_field
    states = np.empty((N + 1, n, k))
    states[0] = X0
    last = np.full(k, N)
    active = np.ones(k, dtype=bool)
    X = X0.copy()
    all_active = True
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(1, N + 1):
            Xa = X if all_active else X[:, active]
            k1 = f(Xa)
            k2 = f(Xa + (0.5 * h) * k1)
            k3 = f(Xa + (0.5 * h) * k2)
            k4 = f(Xa + h * k3)
            Xa = Xa + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if all_active:
                X = Xa
            else:
                X[:, active] = Xa
            states[s] = X
            size = np.abs(Xa).sum(axis=0)
            bad = ~(size <= cfg.overflow)
            if bad.any():
                cols = np.flatnonzero(active)[bad]
                finite = np.isfinite(size[bad])
                last[cols] = np.where(finite, s, s - 1)
                active[cols] = False
                if all_active:
                    X = X.copy()
                    all_active = False
                if not active.any():
                    break
    return states, last, ~active


def _trajectories(sys: LureSystem, X0: np.ndarray, cfg: SimConfig) -> list[Trajectory]:
    states, last, diverged = _rk4_columns(sys, X0, cfg)
    times = np.arange(states.shape[0]) * cfg.step
    C = sys.plant.C
    out = []
    for j in range(X0.shape[1]):
        xs = np.ascontiguousarray(states[: last[j] + 1, :, j])
        ys = xs @ C.T
        with np.errstate(over="ignore", invalid="ignore"):
            us = sys.controller(ys.T).T
        out.append(Trajectory(times[: last[j] + 1].copy(), xs, us, ys,
                              bool(diverged[j])))
    return out


def _check_x0(sys: LureSystem, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (sys.n,):
        raise DimensionError(f"x0 must have shape ({sys.n},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise DomainError("x0 must be finite")
    if np.any(x0 < 0):
        raise DomainError("x0 must be nonnegative")
    return x0


def integrate(sys: LureSystem, x0, cfg: SimConfig | None = None) -> Trajectory:
    """RK4 solution from ``x0 >= 0`` over ``[0, cfg.horizon]``.

    Raises
    ------
    DivergenceError
        The state 1-norm exceeded ``cfg.overflow``; ``.trajectory`` holds the
        samples up to that point.
    """
    cfg = cfg or SimConfig()
    x0 = _check_x0(sys, x0)
    traj = _trajectories(sys, x0[:, None], cfg)[0]
    if traj.diverged:
        raise DivergenceError(
            f"state norm exceeded {cfg.overflow:g} at t = {traj.times[-1]:.6g}",
            trajectory=traj, time=float(traj.times[-1]))
    return traj


def initial_conditions(n: int, count: int, cfg: SimConfig) -> np.ndarray:
    """``(count, n)`` initial states, uniform on ``[0, ic_max]^n``, seeded."""
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(0.0, cfg.ic_max, size=(count, n))


def batch_simulate(sys: LureSystem, count: int, cfg: SimConfig | None = None,
                   x0s=None) -> list[Trajectory]:
    """Simulate ``count`` random (or given) initial conditions.

    Divergent runs do not abort the batch; they come back truncated with
    ``diverged=True``.  Work is split over ``LURE_VERIFY_THREADS`` threads
    and merged back in initial-condition order.
    """
    cfg = cfg or SimConfig()
    if x0s is None:
        if count < 1:
            raise ValueError("count must be at least 1")
        x0s = initial_conditions(sys.n, count, cfg)
    else:
        x0s = np.asarray([_check_x0(sys, x) for x in x0s])
    X0 = np.ascontiguousarray(x0s.T)
    threads = min(worker_count(), X0.shape[1])
    if threads <= 1:
        return _trajectories(sys, X0, cfg)
    chunks = np.array_split(np.arange(X0.shape[1]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda idx: _trajectories(sys, X0[:, idx], cfg), chunks)
        return [t for part in parts for t in part]


# ---------------------------------------------------------------------------
# monitors

@dataclass(frozen=True)
class SectorReport:
    checked: int
    skipped: int
    violations: int
    worst_margin: float


def monitor_sector(traj: Trajectory, bound: SectorBound, tol: float = 1e-9) -> SectorReport:
    """Check ``u(t_k)`` against the sector at every sample with ``y(t_k) >= 0``.

    Samples with a negative output component are skipped (the sector says
    nothing there) and counted in ``skipped``.  ``worst_margin`` is the
    smallest signed margin over checked samples, 0 if none were checked.
    """
    y = traj.outputs
    keep = np.all(y >= 0, axis=1)
    checked = int(keep.sum())
    if checked == 0:
        return SectorReport(0, len(traj), 0, 0.0)
    margins = sector_margins(bound, y[keep].T, traj.inputs[keep].T)
    return SectorReport(checked, len(traj) - checked,
                        int(np.sum(margins < -tol)), float(margins.min()))


@dataclass(frozen=True)
class PositivityReport:
    violations: int
    min_state: float


def monitor_positivity(traj: Trajectory, tol: float = 1e-8) -> PositivityReport:
    lows = traj.states.min(axis=1)
    return PositivityReport(int(np.sum(lows < -tol)), float(lows.min()))


@dataclass(frozen=True)
class EnvelopeReport:
    violations: int
    worst_ratio: float


def check_envelope(traj: Trajectory, cert: StabilityCertificate,
                   rel_tol: float = 1e-6) -> EnvelopeReport:
    """Compare ``|x(t_k)|_1`` with the certified envelope at every sample.

    ``worst_ratio`` is the largest ``|x(t_k)|_1 / envelope(t_k)``.
    """
    norms = traj.norms
    env = decay_envelope(cert, float(norms[0]), traj.times)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, norms / env, np.where(norms > 0, np.inf, 0.0))
    return EnvelopeReport(int(np.sum(norms > env * (1.0 + rel_tol))),
                          float(ratio.max()))


def estimate_decay_rate(traj: Trajectory, floor: float = 1e-6) -> float:
    """Negated least-squares slope of ``log |x(t)|_1``.

    Only samples with ``floor <= |x|_1 <= |x(0)|_1`` are used.
    """
    norms = traj.norms
    n0 = float(norms[0])
    if not n0 > 0:
        raise EstimationError("trajectory starts at the origin")
    if not norms[-1] < n0:
        raise EstimationError("trajectory is not converging")
    keep = (norms >= floor) & (norms <= n0)
    if keep.sum() < 2:
        raise EstimationError("too few samples in the estimation window")
    slope = np.polyfit(traj.times[keep], np.log(norms[keep]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# CSV

def csv_header(n: int, m: int, p: int) -> list[str]:
    return (["t"] + [f"x{i}" for i in range(1, n + 1)]
            + [f"u{i}" for i in range(1, m + 1)]
            + [f"y{i}" for i in range(1, p + 1)])


def write_csv(traj: Trajectory, path) -> None:
    """One row per sample: ``t,x1..xn,u1..um,y1..yp`` at 17 significant digits."""
    n, m, p = traj.states.shape[1], traj.inputs.shape[1], traj.outputs.shape[1]
    table = np.column_stack([traj.times, traj.states, traj.inputs, traj.outputs])
    np.savetxt(Path(path), table, fmt="%.17g", delimiter=",",
               header=",".join(csv_header(n, m, p)), comments="")


def read_csv(path) -> Trajectory:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    n = sum(h.startswith("x") for h in header)
    m = sum(h.startswith("u") for h in header)
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(table[:, 0], table[:, 1:1 + n], table[:, 1 + n:1 + n + m],
                      table[:, 1 + n + m:])
