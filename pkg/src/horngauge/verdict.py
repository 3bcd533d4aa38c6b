"""Lower bound for the fast-loop invariant and the conicality verdict.

The status is decided from the weights alone.  Numeric witnesses are
attached as evidence and never change it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .wpoly import SWHPolynomial, WeightSystem

__all__ = [
    "SCHEMA",
    "UpsilonBound",
    "VerdictStatus",
    "Verdict",
    "upsilon_lower_bound",
    "conicality_verdict",
    "build_report",
    "rational",
]

SCHEMA = "horngauge/1"

#: exponent symbols used in the gradient bounds, and the weight each stands for
ALIAS_TABLE = {"a": "w1", "b": "w2", "c": "w3"}

GROWTH_TOL = 0.15
CONTACT_TOL = 0.1


def rational(q: Fraction) -> dict:
    return {"exact": str(q), "decimal": float(q)}


@dataclass(frozen=True)
class UpsilonBound:
    bound: Fraction
    numeric: float

    def __post_init__(self):
        if self.bound < 2:
            raise ValueError("the bound is never below 2")


class VerdictStatus(str, enum.Enum):
    NOT_METRICALLY_CONICAL = "not_metrically_conical"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    bound: UpsilonBound
    evidence: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "bound": str(self.bound.bound),
            "bound_decimal": self.bound.numeric,
            "evidence": self.evidence,
        }


def upsilon_lower_bound(w: WeightSystem) -> UpsilonBound:
    """``1 + w2/w3`` as an exact rational."""
    b = 1 + Fraction(w.w2, w.w3)
    return UpsilonBound(b, float(b))


def conicality_verdict(w: WeightSystem, evidence: dict | None = None) -> Verdict:
    """Not metrically conical when the two low weights differ, otherwise inconclusive."""
    bound = upsilon_lower_bound(w)
    status = VerdictStatus.NOT_METRICALLY_CONICAL if w.w2 > w.w3 else VerdictStatus.INCONCLUSIVE
    return Verdict(status, bound, dict(evidence or {}))


def _section(value: Any) -> Any:
    if value is None:
        return {"skipped": "not run"}
    if isinstance(value, BaseException):
        return {"skipped": f"{type(value).__name__}: {value}"}
    return value


def _skipped(section) -> bool:
    return isinstance(section, dict) and "skipped" in section


def decomposition_dict(swh: SWHPolynomial) -> dict:
    def terms(p):
        return [{"c": [c.real, c.imag], "e": list(e)} for e, c in p.terms]

    return {
        "vars": list(swh.vars),
        "canonical_vars": list(swh.canonical_vars),
        "weights": swh.weights.as_dict(),
        "h": terms(swh.h),
        "theta": terms(swh.theta),
    }


def build_report(swh: SWHPolynomial, probe, flow_checks, eta_fits, loop, growth, contacts, verdict: Verdict, *, echo=None, settings=None) -> dict:
    """Assemble the report document.

    Every component argument after ``swh`` is a JSON-ready dict, ``None``
    (not run) or the exception that stopped that stage; the latter two
    become ``skipped`` entries.
    """
    w = swh.weights
    decomposition = decomposition_dict(swh)
    sections = {
        "probe": _section(probe),
        "flow": _section(flow_checks),
        "eta": _section(eta_fits),
        "loop": _section(loop),
        "growth": _section(growth),
        "contacts": _section(contacts),
    }
    target_g = 1 + Fraction(w.w2, w.w3)
    target_c = Fraction(w.w2, w.w3)
    g, c = sections["growth"], sections["contacts"]
    witness = {}
    if _skipped(g):
        witness["growth"] = {"skipped": g["skipped"]}
    else:
        witness["growth"] = {
            "exponent": g["exponent"],
            "r_squared": g["fit"]["r_squared"],
            "target": rational(target_g),
            "tolerance": GROWTH_TOL,
            "window": g["fit"]["window"],
            "passes": g["exponent"] is not None
            and g["exponent"] >= float(target_g) - GROWTH_TOL
            and g["fit"]["r_squared"] >= 0.99,
        }
    if _skipped(c):
        witness["contact"] = {"skipped": c["skipped"]}
    else:
        witness["contact"] = {
            "min_contact_order": c["min_contact_order"],
            "target": rational(target_c),
            "tolerance": CONTACT_TOL,
            "window": c["window"],
            "passes": c["min_contact_order"] is not None
            and c["min_contact_order"] >= float(target_c) - CONTACT_TOL,
        }
    return {
        "schema": SCHEMA,
        "input": echo,
        "settings": settings,
        "decomposition": decomposition,
        "exponent_aliases": ALIAS_TABLE,
        **sections,
        "verdict": verdict.as_dict(),
        "theorem_witness": witness,
        "notes": [
            "the fast-loop invariant itself is not computed; only its lower bound and numeric witnesses",
            "the r sampling window replaces a Milnor radius and is not claimed to be one",
        ],
    }

