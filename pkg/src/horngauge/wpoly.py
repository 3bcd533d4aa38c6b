"""Sparse polynomials in three complex variables with weighted-degree bookkeeping.

A polynomial is stored as a sorted tuple of ``(exponents, coefficient)``
pairs, exponents being a triple of non-negative ints and coefficients complex
doubles.  Zero coefficients are never stored, so the zero polynomial is the
empty tuple.

Weights are always handled in canonical order ``w1 >= w2 >= w3``; the
:class:`WeightSystem` keeps the permutation back to the caller's variable
order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import DegreeConflict, EmptyHomogeneousPart, InputError, WeightError

__all__ = [
    "MAX_DEGREE",
    "WeightSystem",
    "Polynomial",
    "SWHPolynomial",
    "ProbeReport",
    "weighted_degree",
    "decompose",
    "grad",
    "euler_residual",
    "singularity_probe",
    "monomials_of_degree",
    "sample_on_variety",
    "weighted_scale",
]

#: Guard on the total degree of any single monomial.
MAX_DEGREE = 400

Exponent = tuple[int, int, int]


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSystem:
    """Canonically ordered weights ``w1 >= w2 >= w3`` and weighted degree ``d``.

    ``perm[i]`` is the index, in the caller's variable order, of canonical
    variable ``i``.
    """

    w1: int
    w2: int
    w3: int
    d: int
    perm: tuple[int, int, int] = (0, 1, 2)

    def __post_init__(self):
        ws = (self.w1, self.w2, self.w3)
        if any(int(w) != w or w < 1 for w in ws) or int(self.d) != self.d:
            raise WeightError(f"weights and degree must be positive integers, got {ws}, d={self.d}")
        if not self.w1 >= self.w2 >= self.w3:
            raise WeightError(f"weights must be ordered w1 >= w2 >= w3, got {ws}; use WeightSystem.from_weights")
        if self.d <= self.w1:
            raise WeightError(f"degree d={self.d} must exceed the largest weight w1={self.w1}")
        if sorted(self.perm) != [0, 1, 2]:
            raise WeightError(f"perm must be a permutation of (0, 1, 2), got {self.perm}")

    @classmethod
    def from_weights(cls, weights: Sequence[int], d: int) -> "WeightSystem":
        """Sort user-ordered ``weights`` descending (stable) and record the permutation."""
        if len(weights) != 3:
            raise WeightError(f"expected three weights, got {len(weights)}")
        if any(int(w) != w or w < 1 for w in weights):
            raise WeightError(f"weights must be positive integers, got {tuple(weights)}")
        perm = tuple(sorted(range(3), key=lambda i: -int(weights[i])))
        w = [int(weights[i]) for i in perm]
        return cls(w[0], w[1], w[2], int(d), perm)

    @property
    def weights(self) -> tuple[int, int, int]:
        return (self.w1, self.w2, self.w3)

    @property
    def user_weights(self) -> tuple[int, int, int]:
        """Weights in the caller's variable order."""
        out = [0, 0, 0]
        for i, j in enumerate(self.perm):
            out[j] = self.weights[i]
        return tuple(out)

    @property
    def alpha_a(self) -> int:
        return (self.d - self.w2) * (self.d - self.w3)

    @property
    def alpha_b(self) -> int:
        return (self.d - self.w1) * (self.d - self.w3)

    @property
    def alpha_c(self) -> int:
        return (self.d - self.w1) * (self.d - self.w2)

    @property
    def alphas(self) -> tuple[int, int, int]:
        return (self.alpha_a, self.alpha_b, self.alpha_c)

    @property
    def k(self) -> int:
        return (self.d - self.w1) * (self.d - self.w2) * (self.d - self.w3)

    def as_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "user_weights": list(self.user_weights),
            "perm": list(self.perm),
            "d": self.d,
            "alpha": [self.alpha_a, self.alpha_b, self.alpha_c],
            "k": self.k,
        }


def weighted_degree(m: Sequence[int], w) -> int:
    """``w1*e1 + w2*e2 + w3*e3``; ``w`` is a WeightSystem or a weight triple."""
    ws = w.weights if isinstance(w, WeightSystem) else w
    return int(sum(int(e) * int(wi) for e, wi in zip(m, ws)))


def monomials_of_degree(weights: Sequence[int], d: int) -> list[Exponent]:
    """All exponent triples of weighted degree exactly ``d``."""
    w1, w2, w3 = (int(w) for w in weights)
    out = []
    for e1 in range(d // w1 + 1):
        for e2 in range((d - w1 * e1) // w2 + 1):
            rest = d - w1 * e1 - w2 * e2
            if rest % w3 == 0:
                out.append((e1, e2, rest // w3))
    return out


def weighted_scale(X, weights: Sequence[int]) -> np.ndarray:
    """Log of the weighted scale ``s = max_i |X_i|**(1/w_i)`` of points ``X[..., 3]``.

    Dividing ``X_i`` by ``s**w_i`` brings a point to unit weighted size; a
    weighted homogeneous ``h`` then picks up exactly the factor ``s**d``.
    Returns ``log s`` (``-inf`` at the origin).
    """
    X = np.asarray(X, dtype=complex)
    w = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(X)) / w
    return la.max(axis=-1)


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------


class Polynomial:
    """Immutable sparse polynomial in ``x, y, z`` with complex coefficients."""

    __slots__ = ("_terms", "_E", "_c")

    def __init__(self, terms: Mapping[Exponent, complex] | Iterable[tuple[Exponent, complex]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Exponent, complex] = {}
        for e, c in items:
            e = tuple(int(v) for v in e)
            if len(e) != 3 or min(e) < 0:
                raise InputError(f"exponent must be three non-negative ints, got {e}")
            if sum(e) > MAX_DEGREE:
                raise InputError(f"monomial {e} exceeds the total degree guard {MAX_DEGREE}")
            acc[e] = acc.get(e, 0j) + complex(c)
        self._terms = tuple(sorted((e, c) for e, c in acc.items() if c != 0))
        if self._terms:
            self._E = np.array([e for e, _ in self._terms], dtype=np.int64)
            self._c = np.array([c for _, c in self._terms], dtype=complex)
        else:
            self._E = np.zeros((0, 3), dtype=np.int64)
            self._c = np.zeros(0, dtype=complex)

    # construction helpers -------------------------------------------------

    @classmethod
    def variable(cls, i: int) -> "Polynomial":
        e = [0, 0, 0]
        e[i] = 1
        return cls({tuple(e): 1.0})

    @classmethod
    def constant(cls, c: complex) -> "Polynomial":
        return cls({(0, 0, 0): c})

    # container protocol ---------------------------------------------------

    @property
    def terms(self) -> tuple[tuple[Exponent, complex], ...]:
        return self._terms

    @property
    def exponents(self) -> np.ndarray:
        return self._E

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __repr__(self):
        if not self._terms:
            return "Polynomial(0)"
        parts = []
        for (a, b, c), coef in self._terms:
            mono = "*".join(f"{v}^{p}" if p > 1 else v for v, p in zip("xyz", (a, b, c)) if p)
            parts.append(f"({coef:g})" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"

    def degree(self) -> int:
        return int(self._E.sum(axis=1).max()) if self._terms else -1

    def degree_in(self, var: int) -> int:
        return int(self._E[:, var].max()) if self._terms else -1

    # arithmetic -----------------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(list(self._terms) + list(other._terms))

    def __neg__(self) -> "Polynomial":
        return Polynomial((e, -c) for e, c in self._terms)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial((e, c * other) for e, c in self._terms)
        out: dict[Exponent, complex] = {}
        for e1, c1 in self._terms:
            for e2, c2 in other._terms:
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
                out[e] = out.get(e, 0j) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def diff(self, var: int) -> "Polynomial":
        out = []
        for e, c in self._terms:
            if e[var]:
                ne = list(e)
                ne[var] -= 1
                out.append((tuple(ne), c * e[var]))
        return Polynomial(out)

    def permuted(self, perm: Sequence[int]) -> "Polynomial":
        """Rename variables so that new variable ``i`` is old variable ``perm[i]``."""
        return Polynomial((tuple(e[p] for p in perm), c) for e, c in self._terms)

    def filter(self, pred) -> "Polynomial":
        return Polynomial((e, c) for e, c in self._terms if pred(e))

    # evaluation -----------------------------------------------------------

    def _term_values(self, X):
        X = np.asarray(X, dtype=complex)
        if X.shape[-1] != 3:
            raise InputError(f"points must have a trailing axis of length 3, got shape {X.shape}")
        vals = np.ones((len(self._terms),) + X.shape[:-1], dtype=complex)
        for v in range(3):
            dmax = int(self._E[:, v].max()) if self._terms else 0
            if dmax == 0:
                continue
            xv = X[..., v]
            powers = [np.ones_like(xv), xv]
            for _ in range(dmax - 1):
                powers.append(powers[-1] * xv)
            table = np.stack(powers)
            vals *= table[self._E[:, v]]
        return vals

    def __call__(self, X) -> np.ndarray:
        """Evaluate at points ``X[..., 3]``; returns an array of shape ``X.shape[:-1]``."""
        X = np.asarray(X, dtype=complex)
        if not self._terms:
            return np.zeros(X.shape[:-1], dtype=complex)
        return np.tensordot(self._c, self._term_values(X), axes=(0, 0))

    def abs_sum(self, X) -> np.ndarray:
        """``sum |c_m| |X^m|`` -- the natural scale for rounding of ``self(X)``."""
        X = np.asarray(X, dtype=complex)
        if not self._terms:
            return np.zeros(X.shape[:-1])
        return np.tensordot(np.abs(self._c), np.abs(self._term_values(X)), axes=(0, 0))

    def weighted_degrees(self, w) -> np.ndarray:
        ws = np.asarray(w.weights if isinstance(w, WeightSystem) else w, dtype=np.int64)
        return self._E @ ws

    def univariate(self, var: int, point) -> np.ndarray:
        """Coefficients (highest degree first) of ``self`` as a polynomial in
        variable ``var`` with the other two fixed at ``point``'s values."""
        deg = self.degree_in(var)
        coeffs = np.zeros(deg + 1, dtype=complex)
        for e, c in self._terms:
            val = c
            for v in range(3):
                if v != var and e[v]:
                    val *= complex(point[v]) ** e[v]
            coeffs[deg - e[var]] += val
        return coeffs


def grad(f: Polynomial) -> tuple[Polynomial, Polynomial, Polynomial]:
    """Formal partial derivatives ``(df/dx, df/dy, df/dz)``."""
    return (f.diff(0), f.diff(1), f.diff(2))


# ---------------------------------------------------------------------------
# semi-weighted homogeneous split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SWHPolynomial:
    """``f = h + theta`` with ``h`` weighted homogeneous of degree ``d`` and
    every monomial of ``theta`` of weighted degree above ``d``.  Variables are
    in canonical order."""

    h: Polynomial
    theta: Polynomial
    weights: WeightSystem
    vars: tuple[str, str, str] = ("x", "y", "z")

    def __post_init__(self):
        if self.h.is_zero():
            raise EmptyHomogeneousPart("weighted homogeneous part is zero")
        wd = self.h.weighted_degrees(self.weights)
        if np.any(wd != self.weights.d):
            raise DegreeConflict(f"h has terms of weighted degree {sorted(set(wd.tolist()))}, expected {self.weights.d}")
        if len(self.theta) and np.any(self.theta.weighted_degrees(self.weights) <= self.weights.d):
            raise DegreeConflict("theta contains a term of weighted degree <= d")

    @property
    def f(self) -> Polynomial:
        return self.h + self.theta

    @property
    def canonical_vars(self) -> tuple[str, str, str]:
        """Caller's variable names in canonical order."""
        return tuple(self.vars[p] for p in self.weights.perm)


def decompose(f: Polynomial, weights, d: int | None = None, vars=("x", "y", "z")) -> SWHPolynomial:
    """Split ``f`` (in the caller's variable order) into ``h + theta``.

    ``weights`` is a triple in the caller's order (or a WeightSystem, whose
    ``perm`` is then honoured).  ``d`` defaults to the minimum weighted degree
    over the terms of ``f``.  The result lives in canonical variables.
    """
    if f.is_zero():
        raise InputError("cannot decompose the zero polynomial")
    if isinstance(weights, WeightSystem):
        user_w = weights.user_weights
        d = weights.d if d is None else d
    else:
        user_w = tuple(int(w) for w in weights)
        if len(user_w) != 3 or min(user_w) < 1:
            raise WeightError(f"expected three positive weights, got {tuple(weights)}")
    wd = f.weighted_degrees(user_w)
    if d is None:
        d = int(wd.min())
    low = [e for (e, _), dd in zip(f.terms, wd) if dd < d]
    if low:
        raise DegreeConflict(f"term {low[0]} has weighted degree below d={d}")
    if not np.any(wd == d):
        raise EmptyHomogeneousPart(f"no term of f has weighted degree d={d}")
    ws = WeightSystem.from_weights(user_w, d)
    g = f.permuted(ws.perm)
    wdc = g.weighted_degrees(ws)
    h = Polynomial((t for t, dd in zip(g.terms, wdc) if dd == d))
    theta = Polynomial((t for t, dd in zip(g.terms, wdc) if dd > d))
    return SWHPolynomial(h, theta, ws, tuple(vars))


def euler_residual(h: Polynomial, w: WeightSystem, X) -> np.ndarray:
    """``|w1 x h_x + w2 y h_y + w3 z h_z - d h|`` at points ``X[..., 3]``."""
    X = np.asarray(X, dtype=complex)
    gx, gy, gz = grad(h)
    lhs = w.w1 * X[..., 0] * gx(X) + w.w2 * X[..., 1] * gy(X) + w.w3 * X[..., 2] * gz(X)
    return np.abs(lhs - w.d * h(X))


# ---------------------------------------------------------------------------
# isolated singularity heuristic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    min_value: float
    argmin: tuple[complex, complex, complex]
    flagged: bool
    threshold: float
    n_samples: int
    values: tuple[float, ...] = field(default=(), repr=False)

    @property
    def status(self) -> str:
        return "POSSIBLY_NON_ISOLATED" if self.flagged else "NO_FLAG"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "min_grad_sq": self.min_value,
            "argmin": [[z.real, z.imag] for z in self.argmin],
            "threshold": self.threshold,
            "n_samples": self.n_samples,
            "note": "heuristic descent on the unit sphere, not a proof",
        }


def singularity_probe(
    h: Polynomial,
    w: WeightSystem | None = None,
    n_samples: int = 200,
    seed: int = 0,
    threshold: float = 1e-8,
    threads: int = 1,
    max_iter: int = 3000,
) -> ProbeReport:
    """Minimise ``|grad h|^2`` over the unit sphere of C^3 from random starts.

    Flags ``POSSIBLY_NON_ISOLATED`` when the smallest value found is below
    ``threshold``.  ``w`` is accepted for interface symmetry; the search is on
    the round sphere.
    """
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    starts = np.random.default_rng(seed).standard_normal((n_samples, 3, 2)) @ np.array([1.0, 1j])
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)
    g = grad(h)
    H = [[gi.diff(j) for j in range(3)] for gi in g]

    def run(X):
        return _sphere_descent(g, H, X, max_iter)

    if threads > 1 and n_samples > threads:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, np.array_split(starts, threads)))
        vals = np.concatenate([v for v, _ in parts])
        pts = np.concatenate([x for _, x in parts])
    else:
        vals, pts = run(starts)
    i = int(np.argmin(vals))
    return ProbeReport(
        float(vals[i]), tuple(complex(z) for z in pts[i]), bool(vals[i] < threshold), threshold, n_samples,
        tuple(float(v) for v in vals),
    )


def _sphere_descent(g, H, X, max_iter):
    """Batched gradient descent of ``sum |g_i|^2`` on the unit sphere with per-row step control."""

    def value(X):
        return sum(np.abs(gi(X)) ** 2 for gi in g)

    def wirtinger(X):
        # d/d(conj X_j) of sum_i |g_i|^2 = sum_i g_i conj(dg_i/dX_j)
        gv = [gi(X) for gi in g]
        return np.stack([sum(gv[i] * np.conj(H[i][j](X)) for i in range(3)) for j in range(3)], axis=-1)

    f = value(X)
    step = np.full(X.shape[0], 0.1)
    for _ in range(max_iter):
        D = wirtinger(X)
        # drop the radial part so the step stays tangent to the sphere
        D = D - X * np.sum(np.conj(X) * D, axis=1, keepdims=True).real
        trial = X - step[:, None] * D
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        ft = value(trial)
        better = ft < f
        X = np.where(better[:, None], trial, X)
        f = np.where(better, ft, f)
        step = np.where(better, step * 1.5, step * 0.5)
        if np.all(step < 1e-14):
            break
    return f, X


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_on_variety(
    h: Polynomial,
    w: WeightSystem,
    n: int,
    norm_range: tuple[float, float] = (0.01, 0.5),
    seed: int = 0,
) -> np.ndarray:
    """``n`` seeded points on ``h = 0`` with Euclidean norms log-uniform in ``norm_range``.

    Two coordinates are drawn at random, the third solved for by polynomial
    root finding, and the point is then moved along the weighted C*-orbit
    (which preserves ``h = 0``) to the target norm.
    """
    rng = np.random.default_rng(seed)
    var = next((v for v in range(3) if h.degree_in(v) > 0), None)
    if var is None:
        raise InputError("h is constant")
    ws = np.asarray(w.weights, dtype=float)
    out = np.empty((n, 3), dtype=complex)
    i = 0
    while i < n:
        P = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        roots = np.roots(h.univariate(var, P))
        if roots.size == 0:
            continue
        P[var] = roots[rng.integers(roots.size)]
        if np.linalg.norm(P) == 0:
            continue
        target = np.exp(rng.uniform(np.log(norm_range[0]), np.log(norm_range[1])))

        with np.errstate(divide="ignore"):
            lp = np.log(np.abs(P))

        def gap(ls):
            return 0.5 * logsumexp(2.0 * (lp + ls * ws)) - np.log(target)

        ls = brentq(gap, -700.0 / ws.min(), 700.0 / ws.min(), xtol=1e-14)
        out[i] = P * np.exp(ls * ws)
        i += 1
    return out
