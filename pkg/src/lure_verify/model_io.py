"""Model file loading and verdict report serialization.

Model file (JSON, ``version`` "1.0")::

    {
      "version": "1.0",
      "description": "optional free text",
      "plant": {"A": [[...]], "B": [[...]], "C": [[...]],
                "n": 2, "m": 1, "p": 2},              # n, m, p optional
      "controller": {
        "activation": {"name": "tanh", "sector": [0.0, 1.0]},  # sector optional
        "layers": [W1, W2, ..., W_{q+1}],            # row-major nested lists
        "biases": [b1, ..., b_{q+1}]                 # optional, must be all zero
      }
    }

Parsing is strict: unknown keys, duplicate keys, booleans in numeric
positions and non-finite numbers are all rejected, each with its own error
class and a JSON path pointing at the offending field.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import (
    LureVerifyError,
    ModelActivationError,
    ModelNonFiniteError,
    NonzeroBiasError,
    ParseError,
    SchemaError,
    ShapeChainError,
    VersionError,
)
from .lure import GUARANTEE_DOMAIN, LtiSystem, LureSystem, StabilityCertificate
from .nn import FeedforwardNet, get_activation, widen

__all__ = [
    "MODEL_VERSION", "load_model", "load_model_text", "parse_model", "model_to_dict",
    "dump_model", "load_lure_system", "VerdictReport", "build_report", "sha256_file",
]

MODEL_VERSION = "1.0"

_TOP_KEYS = {"version", "description", "plant", "controller"}
_PLANT_KEYS = {"A", "B", "C", "n", "m", "p"}
_CONTROLLER_KEYS = {"activation", "layers", "biases"}
_ACTIVATION_KEYS = {"name", "sector"}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise SchemaError(f"duplicate key {k!r}", key=k)
        out[k] = v
    return out


def _object(value, path: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{path} must be an object", path=path)
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise SchemaError(f"{path} has unknown field(s) {unknown}", path=path,
                          fields=unknown)
    missing = sorted(required - set(value))
    if missing:
        raise SchemaError(f"{path} is missing field(s) {missing}", path=path,
                          fields=missing)
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path} must be a number", path=path)
    try:
        out = float(value)
    except OverflowError:
        raise ModelNonFiniteError(f"{path} is not finite", path=path) from None
    if not math.isfinite(out):
        raise ModelNonFiniteError(f"{path} is not finite", path=path)
    return out


def _count(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SchemaError(f"{path} must be a positive integer", path=path)
    return value


def _vector(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{path} must be a non-empty list of numbers", path=path)
    return np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(value)])


def _matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{path} must be a non-empty list of rows", path=path)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    width = rows[0].shape[0]
    for i, r in enumerate(rows):
        if r.shape[0] != width:
            raise SchemaError(f"{path} is ragged: row {i} has {r.shape[0]} "
                              f"entries, row 0 has {width}", path=f"{path}[{i}]")
    return np.vstack(rows)


def _activation(value, path: str):
    spec = _object(value, path, _ACTIVATION_KEYS, {"name"})
    name = spec["name"]
    if not isinstance(name, str):
        raise SchemaError(f"{path}.name must be a string", path=f"{path}.name")
    try:
        act = get_activation(name)
    except LureVerifyError as exc:
        raise ModelActivationError(exc.message, path=f"{path}.name") from None
    if "sector" in spec:
        sec = spec["sector"]
        if not isinstance(sec, list) or len(sec) != 2:
            raise SchemaError(f"{path}.sector must be [lo, hi]", path=f"{path}.sector")
        lo = _number(sec[0], f"{path}.sector[0]")
        hi = _number(sec[1], f"{path}.sector[1]")
        try:
            act = widen(act, (lo, hi))
        except LureVerifyError as exc:
            raise ModelActivationError(exc.message, path=f"{path}.sector") from None
    return act


def parse_model(data: Any) -> tuple[LtiSystem, FeedforwardNet]:
    """Validate decoded JSON and build the plant and controller."""
    top = _object(data, "$", _TOP_KEYS, {"version", "plant", "controller"})
    version = top["version"]
    if not isinstance(version, str):
        raise SchemaError("$.version must be a string", path="$.version")
    if version != MODEL_VERSION:
        raise VersionError(f"unsupported model version {version!r}; expected "
                           f"{MODEL_VERSION!r}", found=version, expected=MODEL_VERSION)
    if "description" in top and not isinstance(top["description"], str):
        raise SchemaError("$.description must be a string", path="$.description")

    plant = _object(top["plant"], "$.plant", _PLANT_KEYS, {"A", "B", "C"})
    A = _matrix(plant["A"], "$.plant.A")
    B = _matrix(plant["B"], "$.plant.B")
    C = _matrix(plant["C"], "$.plant.C")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ShapeChainError(f"A must be square, got {A.shape}", path="$.plant.A")
    if B.shape[0] != n:
        raise ShapeChainError(f"B has {B.shape[0]} rows, A has {n}", path="$.plant.B")
    if C.shape[1] != n:
        raise ShapeChainError(f"C has {C.shape[1]} columns, A has {n}",
                              path="$.plant.C")
    for key, actual in (("n", n), ("m", B.shape[1]), ("p", C.shape[0])):
        if key in plant and _count(plant[key], f"$.plant.{key}") != actual:
            raise ShapeChainError(f"declared {key} = {plant[key]} but matrices "
                                  f"give {actual}", path=f"$.plant.{key}")

    ctrl = _object(top["controller"], "$.controller", _CONTROLLER_KEYS,
                   {"activation", "layers"})
    act = _activation(ctrl["activation"], "$.controller.activation")
    layers = ctrl["layers"]
    if not isinstance(layers, list) or len(layers) < 2:
        raise SchemaError("$.controller.layers must list at least two weight "
                          "matrices", path="$.controller.layers")
    weights = [_matrix(W, f"$.controller.layers[{i}]") for i, W in enumerate(layers)]
    for i in range(1, len(weights)):
        if weights[i].shape[1] != weights[i - 1].shape[0]:
            raise ShapeChainError(
                f"layer {i + 1} has {weights[i].shape[1]} columns but layer {i} "
                f"has {weights[i - 1].shape[0]} rows",
                path=f"$.controller.layers[{i}]", layer=i + 1)
    if weights[0].shape[1] != C.shape[0]:
        raise ShapeChainError(
            f"layer 1 takes {weights[0].shape[1]} inputs but C has {C.shape[0]} rows",
            path="$.controller.layers[0]", layer=1)
    if weights[-1].shape[0] != B.shape[1]:
        raise ShapeChainError(
            f"output layer gives {weights[-1].shape[0]} outputs but B has "
            f"{B.shape[1]} columns", path=f"$.controller.layers[{len(weights) - 1}]",
            layer=len(weights))

    if "biases" in ctrl:
        biases = ctrl["biases"]
        if not isinstance(biases, list) or len(biases) != len(weights):
            raise ShapeChainError(f"$.controller.biases must list {len(weights)} "
                                  f"vectors", path="$.controller.biases")
        for i, b in enumerate(biases):
            vec = _vector(b, f"$.controller.biases[{i}]")
            if vec.shape[0] != weights[i].shape[0]:
                raise ShapeChainError(
                    f"bias {i + 1} has length {vec.shape[0]}, layer has "
                    f"{weights[i].shape[0]} rows", path=f"$.controller.biases[{i}]",
                    layer=i + 1)
            if np.any(vec != 0):
                raise NonzeroBiasError(
                    f"layer {i + 1} has a nonzero bias; only bias-free networks "
                    f"are supported", path=f"$.controller.biases[{i}]", layer=i + 1)

    return LtiSystem(A, B, C), FeedforwardNet(weights, act)


def load_model_text(text: str) -> tuple[LtiSystem, FeedforwardNet]:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}", line=exc.lineno, column=exc.colno,
                         position=exc.pos) from None
    except RecursionError:
        raise ParseError("JSON nesting too deep") from None
    return parse_model(data)


def load_model(path) -> tuple[LtiSystem, FeedforwardNet]:
    """Read and validate a model file."""
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"model file is not UTF-8: {exc}", position=exc.start) from None
    return load_model_text(text)


def load_lure_system(path) -> LureSystem:
    plant, net = load_model(path)
    return LureSystem(plant, net)


def model_to_dict(plant: LtiSystem, net: FeedforwardNet,
                  description: str | None = None) -> dict:
    acts = set(net.activations)
    if len(acts) != 1:
        raise ValueError("model files hold a single shared activation")
    act = net.activations[0]
    out: dict[str, Any] = {"version": MODEL_VERSION}
    if description:
        out["description"] = description
    out["plant"] = {"A": plant.A.tolist(), "B": plant.B.tolist(), "C": plant.C.tolist(),
                    "n": plant.n, "m": plant.m, "p": plant.p}
    out["controller"] = {
        "activation": {"name": act.name, "sector": [act.lo, act.hi]},
        "layers": [W.tolist() for W in net.weights],
    }
    return out


_NUMBER_LIST = re.compile(r"\[\s*([-+0-9.eE,\s]+?)\s*\]")


def _compact(text: str) -> str:
    # one line per innermost numeric list (matrix row)
    return _NUMBER_LIST.sub(
        lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]", text)


def dump_model(plant: LtiSystem, net: FeedforwardNet, path=None,
               description: str | None = None) -> str:
    text = _compact(json.dumps(model_to_dict(plant, net, description), indent=1)) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# reports

@dataclass
class VerdictReport:
    verdict: str
    metzler_ok: bool
    hurwitz_ok: bool
    gamma_lower: list
    gamma_upper: list
    M_lower: list
    M_upper: list
    spectrum: list
    certificate: dict | None
    guarantee_domain: str = GUARANTEE_DOMAIN
    tool_version: str = __version__
    input_sha256: str | None = None
    note: str = ""
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "VerdictReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "VerdictReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        def mat(rows):
            return "\n".join("  [" + ", ".join(f"{x: .17g}" for x in r) + "]" for r in rows)

        yes = {True: "yes", False: "no"}
        lines = [
            f"verdict: {self.verdict}",
            f"guarantee domain: {self.guarantee_domain}",
            "Gamma_hi (Gamma_lo = -Gamma_hi):",
            mat(self.gamma_upper),
            f"A + B Gamma_lo C  (Metzler: {yes[self.metzler_ok]}):",
            mat(self.M_lower),
            f"A + B Gamma_hi C  (Hurwitz: {yes[self.hurwitz_ok]}):",
            mat(self.M_upper),
            "eigenvalues of A + B Gamma_hi C:",
            "  " + ", ".join(f"{re:.10g}{im:+.10g}j" for re, im in self.spectrum),
        ]
        if self.certificate:
            c = self.certificate
            lines += [
                "decay certificate:",
                "  v = [" + ", ".join(f"{x:.17g}" for x in c["v"]) + "]",
                f"  epsilon = {c['epsilon']:.17g}",
                f"  |x(t)|_1 <= {c['envelope_constant']:.10g} |x(0)|_1 "
                f"exp(-{c['epsilon']:.10g} t)   for x(0) >= 0",
            ]
        if self.note:
            lines.append(f"note: {self.note}")
        if self.input_sha256:
            lines.append(f"input sha256: {self.input_sha256}")
        lines.append(f"lure-verify {self.tool_version}")
        return "\n".join(lines)


def build_report(cert: StabilityCertificate, input_sha256: str | None = None,
                 tolerances: dict | None = None) -> VerdictReport:
    decay = cert.decay
    certificate = None
    if decay is not None:
        certificate = {"v": list(decay.v), "epsilon": decay.epsilon,
                       "v_min": decay.v_min, "v_max": decay.v_max,
                       "envelope_constant": decay.envelope_constant}
    return VerdictReport(
        verdict=str(cert.verdict),
        metzler_ok=bool(cert.metzler_ok),
        hurwitz_ok=bool(cert.hurwitz_ok),
        gamma_lower=cert.bound.lower.tolist(),
        gamma_upper=cert.bound.upper.tolist(),
        M_lower=cert.M_lower.tolist(),
        M_upper=cert.M_upper.tolist(),
        spectrum=cert.upper_spectrum.as_pairs(),
        certificate=certificate,
        input_sha256=input_sha256,
        note=cert.note,
        tolerances=dict(tolerances or {}),
    )
