"""Finite Puiseux arcs through the origin, valuations and orders of contact.

Exponents are exact :class:`fractions.Fraction` values, coefficients complex
doubles.  Exact valuations come from series arithmetic; numeric valuations
come from log-log least squares on sampled values, so both can be compared
on the same arcs.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import linregress

from .errors import InputError, InsufficientSamples, NoValidFit

__all__ = [
    "INFINITY",
    "PuiseuxSeries",
    "PuiseuxArc",
    "FitResult",
    "arc_eval",
    "series_valuation",
    "contact_order",
    "distance_valuation",
    "fit_valuation",
    "geometric_grid",
    "numeric_contact_order",
    "contact_table",
    "horn_exponent_from_family",
    "arc_from_json",
    "arc_to_json",
]

#: Valuation of the zero series.
INFINITY = math.inf

DEFAULT_WINDOW = (1e-3, 1e-1)
DEFAULT_N = 40
DEFAULT_GATE = 0.99
DEFAULT_FLOOR = 1e-14
MIN_FIT_POINTS = 8

ArcEvaluator = Callable[[np.ndarray], np.ndarray]


class NormalizationWarning(UserWarning):
    """An arc is not parameterized by distance to the origin to first order."""


class PuiseuxSeries:
    """Finite sum ``sum_j c_j t**e_j`` with strictly increasing rational exponents."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple] = ()):
        acc: dict[Fraction, complex] = {}
        for e, c in terms:
            e = Fraction(e)
            if e < 0:
                raise InputError(f"negative exponent {e}")
            acc[e] = acc.get(e, 0j) + complex(c)
        self.terms: tuple[tuple[Fraction, complex], ...] = tuple(
            (e, acc[e]) for e in sorted(acc) if acc[e] != 0
        )

    @classmethod
    def monomial(cls, e, c=1.0) -> "PuiseuxSeries":
        return cls([(e, c)])

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        return PuiseuxSeries(self.terms + other.terms)

    def __neg__(self) -> "PuiseuxSeries":
        return PuiseuxSeries((e, -c) for e, c in self.terms)

    def __sub__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, PuiseuxSeries):
            return PuiseuxSeries((e, c * other) for e, c in self.terms)
        return PuiseuxSeries((e1 + e2, c1 * c2) for e1, c1 in self.terms for e2, c2 in other.terms)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PuiseuxSeries) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "PuiseuxSeries(0)"
        return "PuiseuxSeries(" + " + ".join(f"({c:g})*t^{e}" for e, c in self.terms) + ")"

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for e, c in self.terms:
            out = out + c * np.power(t, float(e))
        return out


@dataclass(frozen=True)
class PuiseuxArc:
    """Arc ``t -> (x(t), y(t), z(t))`` with all exponents positive (so it starts at 0)."""

    x: PuiseuxSeries
    y: PuiseuxSeries
    z: PuiseuxSeries

    def __post_init__(self):
        if all(s.is_zero() for s in self.coords):
            raise InputError("arc is identically zero")
        for s in self.coords:
            if s.terms and s.terms[0][0] <= 0:
                raise InputError("arc exponents must be strictly positive")

    @property
    def coords(self) -> tuple[PuiseuxSeries, PuiseuxSeries, PuiseuxSeries]:
        return (self.x, self.y, self.z)

    @classmethod
    def weighted(cls, weights: Sequence[int], profile: Sequence[complex]) -> "PuiseuxArc":
        """The constant-profile weighted arc ``(p1 t**w1, p2 t**w2, p3 t**w3)``."""
        return cls(*(PuiseuxSeries([(w, p)]) for w, p in zip(weights, profile)))

    def __sub__(self, other: "PuiseuxArc") -> tuple[PuiseuxSeries, ...]:
        return tuple(a - b for a, b in zip(self.coords, other.coords))

    def __call__(self, t) -> np.ndarray:
        return arc_eval(self, t)


def arc_eval(g: PuiseuxArc, t) -> np.ndarray:
    """Evaluate ``g`` at ``t > 0`` (scalar or array); trailing axis has length 3."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise InputError("arcs are evaluated at t > 0 only")
    return np.stack([s(t) for s in g.coords], axis=-1)


def series_valuation(s: PuiseuxSeries):
    """Leading exponent of ``s`` as a Fraction, or :data:`INFINITY` for zero."""
    return s.terms[0][0] if s.terms else INFINITY


def distance_valuation(g: PuiseuxArc):
    """Valuation of ``||g(t)||``; equal to 1 for arcs parameterized by distance."""
    return min(series_valuation(s) for s in g.coords)


def contact_order(g1: PuiseuxArc, g2: PuiseuxArc, check_normalization: bool = False):
    """Exact valuation of ``||g1(t) - g2(t)||``.

    The squared norm is a sum of squared moduli, so the valuation is the
    minimum of the coordinate valuations of the difference.
    """
    if check_normalization:
        for g in (g1, g2):
            v = distance_valuation(g)
            if v != 1:
                warnings.warn(f"arc distance valuation is {v}, not 1", NormalizationWarning, stacklevel=2)
    return min(series_valuation(s) for s in g1 - g2)


# ---------------------------------------------------------------------------
# numeric valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    valid: bool
    n_dropped: int = 0

    def as_dict(self) -> dict:
        def num(v):
            return None if not math.isfinite(v) else float(v)

        return {
            "exponent": num(self.exponent),
            "intercept": num(self.intercept),
            "r_squared": num(self.r_squared),
            "window": [float(self.window[0]), float(self.window[1])],
            "n_points": self.n_points,
            "n_dropped": self.n_dropped,
            "valid": self.valid,
        }


def geometric_grid(window: tuple[float, float], n: int) -> np.ndarray:
    return np.geomspace(window[0], window[1], n)


def fit_valuation(samples, gate: float = DEFAULT_GATE, floor: float = DEFAULT_FLOOR) -> FitResult:
    """Least-squares slope of ``log v`` against ``log t``.

    ``samples`` is a sequence of ``(t, v)`` pairs or a ``(t, v)`` pair of
    arrays.  Values ``v <= floor`` (or non-finite) are dropped and counted;
    pass ``floor=0`` when the values are intrinsically tiny but exact.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2:
        raise InputError("samples must be 2-d")
    t, v = (arr[:, 0], arr[:, 1]) if arr.shape[1] == 2 and arr.shape[0] != 2 else (arr[0], arr[1])
    if t.size < MIN_FIT_POINTS:
        raise InsufficientSamples(f"need at least {MIN_FIT_POINTS} samples, got {t.size}")
    if np.any(t <= 0) or np.unique(t).size != t.size:
        raise InputError("t values must be positive and distinct")
    keep = np.isfinite(v) & (v > floor)
    dropped = int(t.size - keep.sum())
    window = (float(t.min()), float(t.max()))
    n = int(keep.sum())
    if n < 2:
        return FitResult(math.nan, math.nan, 0.0, window, n, False, dropped)
    lt, lv = np.log(t[keep]), np.log(v[keep])
    if np.ptp(lv) == 0:
        slope, icept, r2 = 0.0, float(lv[0]), 1.0
    else:
        res = linregress(lt, lv)
        slope, icept, r2 = float(res.slope), float(res.intercept), float(res.rvalue**2)
    return FitResult(slope, icept, r2, window, n, bool(r2 >= gate and n >= MIN_FIT_POINTS), dropped)


def numeric_contact_order(
    e1: ArcEvaluator,
    e2: ArcEvaluator,
    window: tuple[float, float] = DEFAULT_WINDOW,
    n: int = DEFAULT_N,
    gate: float = DEFAULT_GATE,
    floor: float = DEFAULT_FLOOR,
) -> FitResult:
    """Fitted valuation of ``t -> ||e1(t) - e2(t)||`` on a geometric grid.

    When the evaluators are parameterized only approximately by distance
    this is a lower-bound estimate of the order of contact.
    """
    t = geometric_grid(window, n)
    return _fit_distance(t, np.asarray(e1(t)), np.asarray(e2(t)), gate, floor)


def _fit_distance(t, p1, p2, gate, floor) -> FitResult:
    dist = np.linalg.norm(p1 - p2, axis=-1)
    return fit_valuation(np.stack([t, dist]), gate=gate, floor=floor)


def contact_table(
    arcs: Sequence[ArcEvaluator],
    window: tuple[float, float] = DEFAULT_WINDOW,
    n: int = DEFAULT_N,
    gate: float = DEFAULT_GATE,
    floor: float = DEFAULT_FLOOR,
) -> dict[tuple[int, int], FitResult]:
    """Pairwise :func:`numeric_contact_order` fits; each arc is sampled once."""
    t = geometric_grid(window, n)
    pts = [np.asarray(a(t)) for a in arcs]
    return {
        (i, j): _fit_distance(t, pts[i], pts[j], gate, floor)
        for i, j in itertools.combinations(range(len(arcs)), 2)
    }


def horn_exponent_from_family(
    arcs: Sequence[ArcEvaluator],
    window: tuple[float, float] = DEFAULT_WINDOW,
    n: int = DEFAULT_N,
    gate: float = DEFAULT_GATE,
) -> float:
    """Minimum valid pairwise fitted contact order over an arc family.

    A sampled stand-in for the infimum over all arc pairs, hence an upper
    approximation of the horn exponent.
    """
    if len(arcs) < 2:
        raise InputError("need at least two arcs")
    fits = [f.exponent for f in contact_table(arcs, window, n, gate).values() if f.valid]
    if not fits:
        raise NoValidFit("every pairwise contact fit was invalid")
    return float(min(fits))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _series_from_json(items) -> PuiseuxSeries:
    try:
        return PuiseuxSeries((Fraction(str(e)), complex(float(re), float(im))) for e, re, im in items)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad series term list: {exc}") from exc


def arc_from_json(doc) -> PuiseuxArc:
    """Parse ``{"x": [["p/q", re, im], ...], "y": [...], "z": [...]}`` (dict or JSON text)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    missing = [k for k in "xyz" if k not in doc]
    if missing:
        raise InputError(f"arc JSON missing field {missing[0]!r}")
    return PuiseuxArc(*(_series_from_json(doc[k]) for k in "xyz"))


def arc_to_json(g: PuiseuxArc) -> dict:
    def enc(e: Fraction) -> str:
        return f"{e.numerator}/{e.denominator}"

    return {k: [[enc(e), c.real, c.imag] for e, c in s.terms] for k, s in zip("xyz", g.coords)}
