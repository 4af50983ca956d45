"""Command-line interface.

Exit codes: 0 success (``verify``: certified_GES), 2 ``verify`` ran but did
not certify, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import linalg as la
from .bench import format_table, run_benchmark
from .errors import LureVerifyError
from .lure import LureSystem, Verdict, verify_stability
from .model_io import build_report, load_model, sha256_file
from .nn import layer_sector_bounds, network_sector_bound
from .sim import (
    SimConfig,
    batch_simulate,
    check_envelope,
    estimate_decay_rate,
    monitor_positivity,
    monitor_sector,
    write_csv,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CERTIFIED = 2

CONVERGED_NORM = 1e-3


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for "not certified"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _emit_error(exc: Exception, as_json: bool) -> int:
    if isinstance(exc, LureVerifyError):
        payload = exc.to_dict()
    elif isinstance(exc, OSError):
        payload = {"error": "io_error", "message": str(exc)}
    else:
        payload = {"error": "invalid_input", "message": str(exc)}
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    print(f"error: {payload['message']}", file=sys.stderr)
    return EXIT_INPUT


def _add_model(p, multiple=False):
    if multiple:
        p.add_argument("--model", required=True, action="append", type=Path,
                       help="model file (repeat to compare several)")
    else:
        p.add_argument("--model", required=True, type=Path, help="model file (JSON)")


def _add_format(p, default="json"):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--json", dest="fmt", action="store_const", const="json")
    g.add_argument("--text", dest="fmt", action="store_const", const="text")
    p.set_defaults(fmt=default)


def _add_tolerances(p):
    p.add_argument("--tol-hurwitz", type=float, default=la.TOL_HURWITZ)
    p.add_argument("--tol-metzler", type=float, default=la.TOL_METZLER)
    p.add_argument("--max-iter", type=int, default=la.MAX_ITER)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lure-verify", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="certify global exponential stability")
    _add_model(p)
    _add_tolerances(p)
    _add_format(p)

    p = sub.add_parser("bound", help="print the controller's sector bound")
    _add_model(p)
    p.add_argument("--per-layer", action="store_true",
                   help="also print the bound of every hidden layer")
    _add_format(p)

    p = sub.add_parser("simulate", help="simulate the closed loop from random x(0)")
    _add_model(p)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ic-max", type=float, default=5.0)
    p.add_argument("--positivity-tol", type=float, default=1e-8)
    p.add_argument("--x0", type=str, default=None,
                   help="comma-separated initial state used for every run")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_tolerances(p)

    p = sub.add_parser("compare", help="timing and bound comparison table")
    _add_model(p, multiple=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--repeats", type=int, default=101)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true",
                   help="omit timing from JSON output (byte-stable reports)")
    _add_format(p, default="text")
    return parser


def _tolerances(args) -> dict:
    return {"tol_hurwitz": args.tol_hurwitz, "tol_metzler": args.tol_metzler,
            "max_iter": args.max_iter}


def cmd_verify(args) -> int:
    plant, net = load_model(args.model)
    cert = verify_stability(LureSystem(plant, net), tol_hurwitz=args.tol_hurwitz,
                            tol_metzler=args.tol_metzler, max_iter=args.max_iter)
    report = build_report(cert, sha256_file(args.model), _tolerances(args))
    print(report.to_json() if args.fmt == "json" else report.to_text())
    return EXIT_OK if cert.verdict is Verdict.CERTIFIED_GES else EXIT_NOT_CERTIFIED


def cmd_bound(args) -> int:
    _, net = load_model(args.model)
    bound = network_sector_bound(net)
    out = {"architecture": net.architecture, "input_width": net.input_width,
           "activations": [{"name": a.name, "sector": [a.lo, a.hi]}
                           for a in net.activations],
           "gamma_lower": bound.lower.tolist(), "gamma_upper": bound.upper.tolist()}
    if args.per_layer:
        out["layers"] = [{"layer": i, "lower": b.lower.tolist(), "upper": b.upper.tolist()}
                         for i, b in enumerate(layer_sector_bounds(net), start=1)]
    if args.fmt == "json":
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    fmt = lambda M: "\n".join("  [" + ", ".join(f"{x:.17g}" for x in r) + "]" for r in M)  # noqa: E731
    print(f"architecture: {net.input_width}->" + "/".join(map(str, net.architecture)))
    print("Gamma_hi (Gamma_lo = -Gamma_hi):")
    print(fmt(out["gamma_upper"]))
    for item in out.get("layers", []):
        print(f"hidden layer {item['layer']} bound (+-):")
        print(fmt(item["upper"]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    plant, net = load_model(args.model)
    sys_ = LureSystem(plant, net)
    cfg = SimConfig(step=args.step, horizon=args.horizon,
                    positivity_tol=args.positivity_tol, seed=args.seed,
                    ic_max=args.ic_max)
    if args.count < 1:
        raise ValueError("--count must be at least 1")
    x0s = None
    if args.x0 is not None:
        x0 = np.array([float(v) for v in args.x0.split(",")])
        x0s = np.tile(x0, (args.count, 1))
    try:
        cert = verify_stability(sys_, tol_hurwitz=args.tol_hurwitz,
                                tol_metzler=args.tol_metzler, max_iter=args.max_iter)
        verdict = str(cert.verdict)
    except LureVerifyError as exc:
        cert, verdict = None, f"not_applicable: {exc.message}"

    trajs = batch_simulate(sys_, args.count, cfg, x0s=x0s)
    args.out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(trajs) - 1)))
    rows = []
    for i, tr in enumerate(trajs):
        name = f"traj_{i:0{width}d}.csv"
        write_csv(tr, args.out / name)
        final = float(tr.norms[-1])
        try:
            rate = estimate_decay_rate(tr)
        except LureVerifyError:
            rate = None
        sec = monitor_sector(tr, sys_.bound)
        pos = monitor_positivity(tr, cfg.positivity_tol)
        row = {
            "index": i, "file": name, "x0": tr.x0.tolist(), "diverged": tr.diverged,
            "final_time": float(tr.times[-1]), "final_norm": final,
            "converged": (not tr.diverged) and final < CONVERGED_NORM,
            "decay_rate_estimate": rate,
            "sector": {"checked": sec.checked, "skipped": sec.skipped,
                       "violations": sec.violations, "worst_margin": sec.worst_margin},
            "positivity": {"violations": pos.violations, "min_state": pos.min_state},
            "envelope": None,
        }
        if cert is not None and cert.certified:
            env = check_envelope(tr, cert)
            row["envelope"] = {"violations": env.violations, "worst_ratio": env.worst_ratio}
        rows.append(row)

    totals = {
        "count": len(rows),
        "converged": sum(r["converged"] for r in rows),
        "diverged": sum(r["diverged"] for r in rows),
        "sector_violations": sum(r["sector"]["violations"] for r in rows),
        "positivity_violations": sum(r["positivity"]["violations"] for r in rows),
        "envelope_violations": (sum(r["envelope"]["violations"] for r in rows)
                                if cert is not None and cert.certified else None),
    }
    summary = {
        "tool_version": __version__, "input_sha256": sha256_file(args.model),
        "verdict": verdict,
        "config": {"step": cfg.step, "horizon": cfg.horizon, "seed": cfg.seed,
                   "ic_max": cfg.ic_max, "positivity_tol": cfg.positivity_tol,
                   "norm": "1"},
        "totals": totals, "trajectories": rows,
    }
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(totals, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = []
    for path in args.model:
        _, net = load_model(path)
        reports.append(run_benchmark(net, args.samples, args.repeats, args.seed))
    if args.fmt == "json":
        payload = {"reports": [r.to_dict(include_timing=not args.no_timing)
                               for r in reports]}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(format_table(reports))
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bound": cmd_bound, "simulate": cmd_simulate,
            "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (LureVerifyError, OSError, ValueError) as exc:
        return _emit_error(exc, getattr(args, "fmt", "json") == "json")


if __name__ == "__main__":
    sys.exit(main())
