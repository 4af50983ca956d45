"""Bound timing, product-of-norms baseline, and Monte-Carlo bound quality."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedActivationError
from .linalg import spectral_norm
from .nn import FeedforwardNet, SectorBound, forward, network_sector_bound, sector_margins

__all__ = [
    "lipschitz_product_bound", "time_bound_computation", "BoundQuality",
    "sample_bound_quality", "BenchReport", "run_benchmark", "format_table",
]


def lipschitz_product_bound(net: FeedforwardNet) -> float:
    """Product of spectral norms of all weight matrices.

    This is a global Lipschitz bound only when every activation is
    1-Lipschitz, which is assumed whenever the declared sector has ``c <= 1``.
    """
    for i, act in enumerate(net.activations, start=1):
        if act.c > 1:
            raise UnsupportedActivationError(
                f"layer {i} activation {act.name!r} has c = {act.c} > 1; the "
                f"norm product assumes 1-Lipschitz activations", layer=i)
    out = 1.0
    for W in net.weights:
        out *= spectral_norm(W)
    return out


def time_bound_computation(net: FeedforwardNet, repeats: int = 101) -> float:
    """Median wall-clock seconds of :func:`network_sector_bound` after 3 warm-ups."""
    if repeats < 11:
        raise ValueError("repeats must be at least 11")
    for _ in range(3):
        network_sector_bound(net)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        network_sector_bound(net)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


@dataclass(frozen=True)
class BoundQuality:
    samples_checked: int
    violations: int
    tightness: float


def sample_bound_quality(net: FeedforwardNet, bound: SectorBound, count: int,
                         seed: int = 0, high: float = 10.0,
                         tol: float = 1e-9) -> BoundQuality:
    """Sample ``count`` inputs uniformly from ``[0, high]^p`` and score ``bound``.

    ``tightness`` is the largest ``|u_j| / (Gamma_hi z)_j`` over samples and
    outputs with a positive denominator.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    Z = rng.uniform(0.0, high, size=(net.input_width, count))
    U = forward(net, Z)
    margins = sector_margins(bound, Z, U)
    denom = bound.upper @ Z
    pos = denom > 0
    tight = float(np.max(np.abs(U[pos]) / denom[pos])) if pos.any() else 0.0
    return BoundQuality(count, int(np.sum(margins < -tol)), tight)


@dataclass(frozen=True, eq=False)
class BenchReport:
    architecture: list[int]
    input_width: int
    bound_time_s: float
    our_bound: SectorBound
    gamma_upper_norm: float
    lipschitz_product: float | None
    samples_checked: int
    violations: int
    tightness: float

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "architecture": list(self.architecture),
            "input_width": self.input_width,
            "gamma_lower": self.our_bound.lower.tolist(),
            "gamma_upper": self.our_bound.upper.tolist(),
            "gamma_upper_spectral_norm": self.gamma_upper_norm,
            "lipschitz_product": (self.lipschitz_product
                                  if self.lipschitz_product is not None
                                  else "unsupported"),
            "samples_checked": self.samples_checked,
            "violations": self.violations,
            "tightness": self.tightness,
        }
        if include_timing:
            out["bound_time_s"] = self.bound_time_s
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)


def run_benchmark(net: FeedforwardNet, samples: int = 10_000, repeats: int = 101,
                  seed: int = 0) -> BenchReport:
    bound = network_sector_bound(net)
    elapsed = time_bound_computation(net, repeats)
    try:
        lip = lipschitz_product_bound(net)
    except UnsupportedActivationError:
        lip = None
    quality = sample_bound_quality(net, bound, samples, seed)
    return BenchReport(net.architecture, net.input_width, elapsed, bound,
                       spectral_norm(bound.upper), lip, quality.samples_checked,
                       quality.violations, quality.tightness)


def _fmt_row(row: np.ndarray) -> str:
    return "[" + ", ".join(f"{x:.4g}" for x in row) + "]"


def format_table(reports: list[BenchReport]) -> str:
    """Plain-text comparison table, one row per method and network."""
    rows = [("Method", "Architecture", "Time (s)", "Bound", "Scalar")]
    for r in reports:
        arch = "/".join(str(k) for k in r.architecture)
        bound = " ; ".join("+-" + _fmt_row(row) for row in r.our_bound.upper)
        rows.append(("sector bound", arch, f"{r.bound_time_s:.3g}", bound,
                     f"{r.gamma_upper_norm:.4g}"))
    for r in reports:
        arch = "/".join(str(k) for k in r.architecture)
        lip = "unsupported" if r.lipschitz_product is None else f"{r.lipschitz_product:.4g}"
        rows.append(("product of norms", arch, "-", lip, lip))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    samples = ", ".join(f"{'/'.join(map(str, r.architecture))}: "
                        f"{r.violations}/{r.samples_checked} violations, "
                        f"tightness {r.tightness:.3g}" for r in reports)
    lines.append("")
    lines.append("sampling: " + samples)
    return "\n".join(lines)
