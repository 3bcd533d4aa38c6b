"""File formats: polynomial JSON input, CSV exports, and JSON output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import InputError
from .wpoly import Polynomial, SWHPolynomial, decompose

__all__ = [
    "POLYNOMIAL_SCHEMA",
    "load_polynomial_doc",
    "validate_polynomial_doc",
    "polynomial_from_doc",
    "polynomial_to_doc",
    "write_growth_csv",
    "write_loop_csv",
    "write_trajectory_csv",
    "dumps",
]

POLYNOMIAL_SCHEMA = {
    "type": "object",
    "required": ["vars", "weights", "terms"],
    "additionalProperties": False,
    "properties": {
        "vars": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 3},
        "weights": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3},
        "degree": {"type": "integer", "minimum": 1},
        "terms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["c", "e"],
                "additionalProperties": False,
                "properties": {
                    "c": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "e": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 3, "maxItems": 3},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft7Validator(POLYNOMIAL_SCHEMA)


def validate_polynomial_doc(doc) -> None:
    """Raise InputError naming the first violating field."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InputError(f"input field {where!r}: {err.message}")


def load_polynomial_doc(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read polynomial JSON {path}: {exc}") from exc
    validate_polynomial_doc(doc)
    return doc


def polynomial_from_doc(doc) -> SWHPolynomial:
    validate_polynomial_doc(doc)
    f = Polynomial((tuple(t["e"]), complex(t["c"][0], t["c"][1])) for t in doc["terms"])
    return decompose(f, doc["weights"], doc.get("degree"), vars=tuple(doc["vars"]))


def polynomial_to_doc(f: Polynomial, weights, degree=None, vars=("x", "y", "z")) -> dict:
    doc = {
        "vars": list(vars),
        "weights": [int(w) for w in weights],
        "terms": [{"c": [c.real, c.imag], "e": list(e)} for e, c in f.terms],
    }
    if degree is not None:
        doc["degree"] = int(degree)
    return doc


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_growth_csv(path, growth) -> None:
    rows = [(r, a, math.log(r), math.log(a) if a > 0 else -math.inf) for r, a in growth.areas]
    _write(path, ["rho", "area", "log_rho", "log_area"], rows)


def write_loop_csv(path, loop) -> None:
    rows = zip(loop.theta, loop.x.real, loop.x.imag, loop.y.real, loop.y.imag, loop.residuals)
    _write(path, ["theta", "re_x", "im_x", "re_y", "im_y", "residual"], rows)


def write_trajectory_csv(path, traj) -> None:
    header = ["u", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z", "family_residual"]
    rows = [(u, *(v for z in X for v in (z.real, z.imag)), res) for u, X, res in traj.samples]
    _write(path, header, rows)


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    # JSON has no inf/nan
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_default))), indent=indent)
