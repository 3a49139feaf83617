"""Scenario files: JSON descriptions of a warped product and its checks."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import SchemaError
from .fiber import FiberSpace, RCDAttestation
from .geometry import WarpedProduct
from .warp import CATALOG, BaseSpace, WarpFunction

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_RCD = {
    "type": "object",
    "additionalProperties": False,
    "required": ["K", "N"],
    "properties": {
        "K": _NUM,
        "N": {"type": "number", "minimum": 1},
        "verified": {"type": "boolean"},
        "compact": {"type": "boolean"},
        "geodesic": {"type": "boolean"},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "base", "warp", "K", "N", "fiber"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "base": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "a", "b"],
                 "properties": {"kind": {"const": "interval"}, "a": _NUM, "b": _NUM}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "halfline"}, "origin": _NUM}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "line"}}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "circle"}, "period": _POS}},
            ]
        },
        "warp": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["name"],
                 "properties": {"name": {"enum": list(CATALOG)}, "amp": _NUM, "rate": _NUM, "shift": _NUM}},
                {"type": "object", "additionalProperties": False, "required": ["samples"],
                 "properties": {"samples": {"type": "string"}}},
            ]
        },
        "K": _NUM,
        "N": {"type": "number", "minimum": 1},
        "fiber": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "length"],
                 "properties": {
                     "kind": {"const": "interval"}, "length": _POS,
                     "weight": {"enum": list(CATALOG)},
                     "weight_exponent": {"type": "number", "minimum": 0},
                     "weight_params": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                     "rcd": _RCD}},
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "circle"}, "circumference": _POS, "rcd": _RCD}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "distances", "weights"],
                 "properties": {"kind": {"const": "finite"}, "distances": {"type": "string"},
                                "weights": {"type": "string"}, "rcd": _RCD}},
            ]
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "base_n": {"type": "integer", "minimum": 16},
                "fiber_n": {"type": "integer", "minimum": 16},
                "oracle_n": {"type": "integer", "minimum": 16},
                "truncation_R": _POS,
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"concavity": _POS, "spectral": _POS, "geodesic": _POS, "be": _POS},
        },
        "assume_product_rcd": {"type": "boolean"},
        "expected": {
            "type": "object",
            "additionalProperties": False,
            "required": ["route", "conclusion"],
            "properties": {
                "route": {"enum": ["Thm1_sufficient", "Thm2_item3", "Thm2_item4", "Thm6_iff"]},
                "conclusion": {"type": "string"},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "geodesic": {
                    "type": "object", "additionalProperties": False, "required": ["r0", "r1", "L"],
                    "properties": {"r0": _NUM, "r1": _NUM, "L": {"type": "number", "minimum": 0}},
                },
                "apex": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "bochner_window": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "sets": {"type": "integer", "minimum": 1},
                "schrodinger_lambda": {"type": "number", "minimum": 0},
            },
        },
    },
}

DEFAULT_GRID = {"base_n": 400, "fiber_n": 200, "oracle_n": 2049, "truncation_R": 5.0}
DEFAULT_TOL = {"concavity": 1e-8, "spectral": 1e-2, "geodesic": 1e-3, "be": 50.0}


def _pointer(path):
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass
class Scenario:
    name: str
    base: dict
    warp: dict
    K: float
    N: float
    fiber: dict
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    assume_product_rcd: bool = False
    expected: Optional[dict] = None
    checks: dict = field(default_factory=dict)
    description: str = ""
    root: Path = Path(".")
    samples: Optional[tuple] = None

    def base_space(self):
        b = self.base
        kind = b["kind"]
        if kind == "interval":
            return BaseSpace.interval(b["a"], b["b"])
        if kind == "halfline":
            return BaseSpace.halfline(b.get("origin", 0.0))
        if kind == "circle":
            return BaseSpace.circle(b.get("period", 2 * math.pi))
        return BaseSpace.line()

    def warp_function(self):
        if self.samples is not None:
            return WarpFunction.sampled(self.samples[0], self.samples[1], self.K)
        w = self.warp
        return WarpFunction.catalog(w["name"], self.K, w.get("amp", 1.0), w.get("rate", 1.0), w.get("shift", 0.0))

    def fiber_space(self):
        fb = self.fiber
        rcd = RCDAttestation(**fb["rcd"]) if "rcd" in fb else None
        if fb["kind"] == "interval":
            return FiberSpace.interval(
                fb["length"], fb.get("weight_exponent", 0.0), fb.get("weight", "const"),
                tuple(fb.get("weight_params", (1.0, 1.0, 0.0))), rcd=rcd,
            )
        if fb["kind"] == "circle":
            return FiberSpace.circle(fb.get("circumference", 2 * math.pi), rcd=rcd)
        return FiberSpace.from_csv(self.root / fb["distances"], self.root / fb["weights"], rcd=rcd)

    def product(self):
        return WarpedProduct(self.base_space(), self.warp_function(), self.N, self.fiber_space())

    def scaled_grid(self, k=1.0):
        g = dict(self.grid)
        for key in ("base_n", "fiber_n", "oracle_n"):
            g[key] = max(16, int(round(g[key] * k)))
        return g

    def to_dict(self):
        d = {"name": self.name, "base": self.base, "warp": self.warp, "K": self.K, "N": self.N,
             "fiber": self.fiber, "grid": self.grid, "tolerances": self.tolerances,
             "assume_product_rcd": self.assume_product_rcd}
        if self.expected:
            d["expected"] = self.expected
        return d


def _read_samples(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header
    arr = np.array(rows, float)
    return arr[:, 0], arr[:, 1]


def _describe(e, path):
    if e.validator in ("required", "additionalProperties"):
        return path + [e.message.split("'")[1]], e.message
    if e.validator == "oneOf" and e.context:
        # the branch whose failure sits deepest is the one the author meant
        best = max(e.context, key=lambda c: (len(c.relative_path), c.validator != "const"))
        return _describe(best, path + list(best.relative_path))
    return path, e.message


def validate(data, root=Path(".")):
    """Validate a scenario mapping; raises SchemaError with a $-path."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        path, msg = _describe(errors[0], list(errors[0].absolute_path))
        raise SchemaError(_pointer(path), msg)
    b = data["base"]
    if b["kind"] == "interval" and not b["b"] > b["a"]:
        raise SchemaError("$.base.b", "interval needs b > a")
    samples = None
    if "samples" in data["warp"]:
        p = root / data["warp"]["samples"]
        if not p.is_file():
            raise SchemaError("$.warp.samples", f"file not found: {p}")
        try:
            g, vals = _read_samples(p)
        except (IndexError, ValueError) as exc:
            raise SchemaError("$.warp.samples", f"unreadable samples: {exc}") from exc
        if g.size < 2 or np.any(np.diff(g) <= 0):
            raise SchemaError("$.warp.samples", "sample grid must be strictly increasing with at least two points")
        if np.any(vals < 0):
            raise SchemaError("$.warp.samples", "warp samples must be nonnegative")
        samples = (g, vals)
    fb = data["fiber"]
    if fb["kind"] == "finite":
        for key in ("distances", "weights"):
            if not (root / fb[key]).is_file():
                raise SchemaError(f"$.fiber.{key}", f"file not found: {root / fb[key]}")
    return samples


def load_scenario(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("$", "scenario must be a JSON object")
    return from_dict(data, path.parent)


def from_dict(data, root=Path(".")):
    samples = validate(data, Path(root))
    return Scenario(
        name=data["name"], base=data["base"], warp=data["warp"], K=float(data["K"]), N=float(data["N"]),
        fiber=data["fiber"], grid={**DEFAULT_GRID, **data.get("grid", {})},
        tolerances={**DEFAULT_TOL, **data.get("tolerances", {})},
        assume_product_rcd=bool(data.get("assume_product_rcd", False)),
        expected=data.get("expected"), checks=dict(data.get("checks", {})),
        description=data.get("description", ""), root=Path(root), samples=samples,
    )


def bundled_dir():
    return Path(__file__).parent / "scenarios"


def bundled(name):
    return load_scenario(bundled_dir() / f"{name}.json")


def bundled_names():
    return sorted(p.stem for p in bundled_dir().glob("*.json"))
