"""Link loops, the contracting homotopy and volume growth of its image.

The loop lives on the slice ``z = 1`` of the weighted approximation
``h = 0``.  It is traced by driving ``y = rho*exp(i*theta)`` around circles
and following one root ``x(theta)`` by tangent prediction and Newton
correction until the branch closes again.  The homotopy

    H(r, theta) = Phi(r**(w1/w3) x(theta), r**(w2/w3) y(theta), r)

is evaluated through the batched flow map, and areas of its image inside
balls are computed by quadrature of the first fundamental form over the
parameter rectangle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .arcs import FitResult, fit_valuation
from .errors import BranchJump, InputError, NoClosure, StartPointNotFound
from .fpflow import FamilyPolynomial, FlowConfig, phi_batch
from .wpoly import Polynomial, WeightSystem

__all__ = [
    "LoopSample",
    "SurfaceGrid",
    "GrowthEstimate",
    "trace_link_loop",
    "loop_points",
    "h_map",
    "h_arc_family",
    "sample_surface",
    "surface_grid_from_h",
    "area_in_ball",
    "default_rho_grid",
    "growth_exponent",
    "horn_surface_sample",
    "horn_arcs",
    "cone_arcs",
    "collision_fraction",
]

DEFAULT_R_WINDOW = (1e-3, 1e-1)
DEFAULT_NR = 24
DEFAULT_NTHETA = 512
RESIDUAL_TOL = 1e-10
CLOSURE_TOL = 1e-8


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------


@dataclass
class LoopSample:
    """Traced loop ``theta -> (x(theta), y(theta), 1)`` on ``h = 0``.

    ``theta`` covers ``[0, 2*pi*turns]`` inclusive, so the last point repeats
    the first one up to ``closure_residual``.
    """

    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    residuals: np.ndarray
    closure_residual: float
    turns: int
    y_radius: float
    n_steps: int
    h: Polynomial = field(repr=False)

    @property
    def period(self) -> float:
        return 2.0 * math.pi * self.turns

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.x, self.y, np.ones_like(self.x)], axis=-1)

    def as_dict(self) -> dict:
        return {
            "turns": self.turns,
            "y_radius": self.y_radius,
            "n_steps": self.n_steps,
            "n_samples": int(self.theta.size),
            "closure_residual": self.closure_residual,
            "max_residual": float(self.residuals.max()),
            "note": "essentialness of the loop is not verified",
        }


def _slice_parts(h: Polynomial):
    hx, hy = h.diff(0), h.diff(1)
    return h, hx, hy


def _rel_residual(h, X):
    scale = np.maximum(h.abs_sum(X), 1e-300)
    return np.abs(h(X)) / scale


def _find_start(h, hx, y0, rng, n_starts=64):
    for _ in range(n_starts):
        x = complex(*(2.0 * rng.standard_normal(2)))
        for _ in range(100):
            X = np.array([x, y0, 1.0])
            fv, dv = complex(h(X)), complex(hx(X))
            if dv == 0:
                break
            step, lam = -fv / dv, 1.0
            while lam > 1e-6:
                Xn = np.array([x + lam * step, y0, 1.0])
                if abs(complex(h(Xn))) < abs(fv) or abs(fv) == 0:
                    break
                lam *= 0.5
            x = x + lam * step
            if abs(lam * step) <= 1e-15 * (1 + abs(x)):
                break
        X = np.array([x, y0, 1.0])
        scale = float(h.abs_sum(X))
        if scale > 0 and abs(complex(h(X))) <= 1e-13 * scale and abs(complex(hx(X))) > 1e-8 * scale:
            return x
    raise StartPointNotFound(f"no regular root of h(x, {y0:g}, 1) = 0 found")


def _correct(h, hx, x, y, maxit=8):
    """Newton on ``h(., y, 1)`` from ``x``; returns the root or None if not contracting."""
    prev = math.inf
    for _ in range(maxit):
        X = np.array([x, y, 1.0])
        dv = complex(hx(X))
        if dv == 0:
            return None
        dx = -complex(h(X)) / dv
        x += dx
        if abs(dx) <= 1e-14 * (1 + abs(x)):
            return x
        if abs(dx) > 0.5 * prev:
            return None
        prev = abs(dx)
    return None


def _advance(h, hx, hy, x, th0, th1, rho, depth=0, max_depth=12):
    """Carry the root from angle ``th0`` to ``th1``, subdividing on failure."""
    y0 = rho * np.exp(1j * th0)
    X = np.array([x, y0, 1.0])
    dxdth = -complex(hy(X)) * 1j * y0 / complex(hx(X))
    xp = x + (th1 - th0) * dxdth
    xc = _correct(h, hx, xp, rho * np.exp(1j * th1))
    if xc is not None and abs(xc - xp) <= 0.5 * abs((th1 - th0) * dxdth) + 1e-12 * (1 + abs(x)):
        return xc
    if depth >= max_depth:
        raise BranchJump(f"corrector failed to contract near theta={th0:.6g}")
    mid = 0.5 * (th0 + th1)
    xm = _advance(h, hx, hy, x, th0, mid, rho, depth + 1, max_depth)
    return _advance(h, hx, hy, xm, mid, th1, rho, depth + 1, max_depth)


def trace_link_loop(
    h: Polynomial,
    w: WeightSystem | None = None,
    y_radius: float = 0.3,
    n_steps: int = 512,
    seed: int = 0,
    max_doublings: int = 3,
) -> LoopSample:
    """Trace a closed branch of ``h(x, y_radius*exp(i*theta), 1) = 0``.

    ``n_steps`` is the number of samples per turn; it is doubled (at most
    ``max_doublings`` times) when the recorded residuals exceed 1e-10.
    """
    h, hx, hy = _slice_parts(h)
    max_turns = max(h.degree_in(0), 1)
    rng = np.random.default_rng(seed)
    x0 = _find_start(h, hx, complex(y_radius), rng)
    for _ in range(max_doublings + 1):
        loop = _trace(h, hx, hy, x0, y_radius, n_steps, max_turns)
        if loop.residuals.max() <= RESIDUAL_TOL:
            return loop
        n_steps *= 2
    return loop


def _trace(h, hx, hy, x0, rho, n_steps, max_turns):
    dth = 2.0 * math.pi / n_steps
    xs, ths = [x0], [0.0]
    x = x0
    for turn in range(1, max_turns + 1):
        for j in range(n_steps):
            th0 = ((turn - 1) * n_steps + j) * dth
            x = _advance(h, hx, hy, x, th0, th0 + dth, rho)
            xs.append(x)
            ths.append(th0 + dth)
        closure = abs(x - x0)
        if closure <= CLOSURE_TOL * (1 + abs(x0)):
            theta = np.array(ths)
            xa = np.array(xs)
            ya = rho * np.exp(1j * theta)
            pts = np.stack([xa, ya, np.ones_like(xa)], axis=-1)
            return LoopSample(theta, xa, ya, _rel_residual(h, pts), float(closure), turn, float(rho), n_steps, h)
    raise NoClosure(f"branch did not close within {max_turns} turns")


def loop_points(loop: LoopSample, theta) -> np.ndarray:
    """``Gamma(theta)`` for arbitrary ``theta`` (periodic).

    ``x`` is interpolated linearly between traced samples and then Newton
    corrected against the exact ``y(theta)``, so returned points lie on
    ``h = 0`` to rounding.
    """
    theta = np.asarray(theta, dtype=float)
    t = np.mod(theta, loop.period)
    xr = np.interp(t, loop.theta, loop.x.real)
    xi = np.interp(t, loop.theta, loop.x.imag)
    x = xr + 1j * xi
    y = loop.y_radius * np.exp(1j * theta)
    hx = loop.h.diff(0)
    for _ in range(4):
        X = np.stack([x, y, np.ones_like(x)], axis=-1)
        dv = hx(X)
        x = x - np.where(dv != 0, loop.h(X) / np.where(dv != 0, dv, 1.0), 0.0)
    return np.stack([x, y, np.ones_like(x)], axis=-1)


# ---------------------------------------------------------------------------
# homotopy
# ---------------------------------------------------------------------------


def _scaled_start(r, theta, loop, w: WeightSystem):
    r = np.asarray(r, dtype=float)
    G = loop_points(loop, theta)
    lr = np.log(r)[..., None]
    expo = np.array([w.w1 / w.w3, w.w2 / w.w3, 1.0])
    return G * np.exp(lr * expo)


def h_map(
    r, theta, loop: LoopSample, w: WeightSystem, fam: FamilyPolynomial, cfg: FlowConfig = FlowConfig(), threads: int = 1
) -> np.ndarray:
    """``H(r, theta)`` for broadcastable arrays ``r`` in (0, 1] and ``theta``.

    With ``threads > 1`` the flow batch is split into contiguous chunks; each
    trajectory is integrated independently, so the result does not depend on
    the split.
    """
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    if np.any(r <= 0):
        raise InputError("H is evaluated at r > 0 only")
    X0 = _scaled_start(r, theta, loop, w).reshape(-1, 3)
    if threads > 1 and X0.shape[0] > threads:
        chunks = np.array_split(X0, threads)
        with ThreadPoolExecutor(threads) as ex:
            pts = np.concatenate([b.points for b in ex.map(lambda c: phi_batch(c, fam, cfg), chunks)])
    else:
        pts = phi_batch(X0, fam, cfg).points
    return pts.reshape(r.shape + (3,))


def h_arc_family(
    loop: LoopSample, fam: FamilyPolynomial, cfg: FlowConfig = FlowConfig(), n_arcs: int = 8
) -> tuple[list[Callable], np.ndarray]:
    """Constant-theta arcs ``r -> H(r, theta_j)`` with ``theta_j`` evenly spaced over the loop period."""
    thetas = loop.period * np.arange(n_arcs) / n_arcs

    def make(th):
        return lambda r: h_map(r, np.full(np.shape(r), th), loop, fam.weights, fam, cfg)

    return [make(th) for th in thetas], thetas


# ---------------------------------------------------------------------------
# surfaces and areas
# ---------------------------------------------------------------------------


@dataclass
class SurfaceGrid:
    """Values of a parameterized surface on an ``(r, theta)`` grid.

    ``theta_grid`` excludes the right end of its period, which is
    ``theta_period``; cells wrap around in theta.
    """

    r_grid: np.ndarray
    theta_grid: np.ndarray
    points: np.ndarray
    jacobian_areas: np.ndarray
    theta_period: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise InputError("surface grid contains non-finite points")
        if np.any(self.jacobian_areas < 0):
            raise InputError("negative area element")

    def dilated(self, s: float) -> "SurfaceGrid":
        """The same parameter grid pushed through the dilation ``X -> s*X``."""
        return SurfaceGrid(self.r_grid, self.theta_grid, s * self.points, s * s * self.jacobian_areas, self.theta_period)

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=-1)


def _area_element(Pr, Pt):
    E = np.sum(np.abs(Pr) ** 2, axis=-1)
    G = np.sum(np.abs(Pt) ** 2, axis=-1)
    F = np.sum((Pr * np.conj(Pt)).real, axis=-1)
    return np.sqrt(np.maximum(E * G - F * F, 0.0))


def sample_surface(param, r_grid, theta_grid, theta_period: float = 2 * math.pi, rel_step: float = 1e-5) -> SurfaceGrid:
    """Sample ``param(r, theta) -> C^3`` on a grid with central-difference area elements.

    ``param`` is called once on stacked arrays holding the nodes and their
    four finite-difference neighbours.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    R, T = np.meshgrid(r_grid, theta_grid, indexing="ij")
    hr, ht = rel_step * R, np.full_like(T, rel_step)
    Rs = np.stack([R, R + hr, R - hr, R, R])
    Ts = np.stack([T, T, T, T + ht, T - ht])
    P = np.asarray(param(Rs, Ts))
    Pr = (P[1] - P[2]) / (2 * hr[..., None])
    Pt = (P[3] - P[4]) / (2 * ht[..., None])
    return SurfaceGrid(r_grid, theta_grid, P[0], _area_element(Pr, Pt), float(theta_period))


def surface_grid_from_h(
    loop: LoopSample,
    fam: FamilyPolynomial,
    cfg: FlowConfig = FlowConfig(),
    r_window: tuple[float, float] = DEFAULT_R_WINDOW,
    nr: int = DEFAULT_NR,
    ntheta: int = DEFAULT_NTHETA,
    threads: int = 1,
) -> SurfaceGrid:
    """Sample ``Im(H)`` on a geometric r grid and a uniform theta grid over the loop period."""
    if nr < 8 or ntheta < 8:
        raise InputError("grids need at least 8 points")
    r_grid = np.geomspace(*r_window, nr)
    theta_grid = loop.period * np.arange(ntheta) / ntheta
    return sample_surface(
        lambda r, t: h_map(r, t, loop, fam.weights, fam, cfg, threads), r_grid, theta_grid, loop.period
    )


def _bilinear(A, sub):
    """Values of ``A`` on a ``(sub+1) x (sub+1)`` lattice inside each grid cell."""
    s = np.arange(sub + 1) / sub
    u, v = s[:, None], s[None, :]
    a00, a10, a01, a11 = (c[..., None, None] for c in (A[:-1, :-1], A[1:, :-1], A[:-1, 1:], A[1:, 1:]))
    return a00 * (1 - u) * (1 - v) + a10 * u * (1 - v) + a01 * (1 - u) * v + a11 * u * v


def _cells(grid: SurfaceGrid, sub: int = 2):
    """Areas and corner-distance ranges of the quadrilateral cells of ``grid``.

    Every cell is split into ``sub x sub`` pieces with bilinearly
    interpolated distances and area elements, which halves the error of
    partial inclusion per doubling of ``sub``.
    """
    dr = np.diff(grid.r_grid)
    th = np.append(grid.theta_grid, grid.theta_grid[0] + grid.theta_period)
    dt = np.diff(th)
    # wrap around once in theta
    Jn = np.concatenate([grid.jacobian_areas, grid.jacobian_areas[:, :1]], axis=1)
    dn = np.concatenate([grid.distances, grid.distances[:, :1]], axis=1)
    Jb, db = _bilinear(Jn, sub), _bilinear(dn, sub)

    def corners(B):
        return np.stack([B[..., :-1, :-1], B[..., 1:, :-1], B[..., :-1, 1:], B[..., 1:, 1:]])

    cJ, cd = corners(Jb), corners(db)
    area = cJ.mean(axis=0) * (dr[:, None] * dt[None, :] / sub**2)[..., None, None]
    return area.ravel(), cd.min(axis=0).ravel(), cd.max(axis=0).ravel()


def area_in_ball(grid: SurfaceGrid, rho) -> np.ndarray:
    """Approximate area of the sampled surface inside the ball of radius ``rho`` about 0.

    Each cell contributes its quadrature area times the fraction of its
    corner-distance range below ``rho`` (linear inclusion), which keeps the
    result continuous and monotone in ``rho``.
    """
    area, dmin, dmax = _cells(grid)
    rho = np.asarray(rho, dtype=float)
    span = dmax - dmin
    frac = np.where(
        span[None, :] > 0,
        np.clip((rho.reshape(-1, 1) - dmin[None, :]) / np.where(span > 0, span, 1.0)[None, :], 0.0, 1.0),
        (rho.reshape(-1, 1) >= dmin[None, :]).astype(float),
    )
    # sequential summation: a fixed order keeps the result monotone in rho and bit-reproducible
    return np.cumsum(frac * area[None, :], axis=1)[:, -1].reshape(rho.shape)


@dataclass
class GrowthEstimate:
    exponent: float
    fit: FitResult
    areas: list[tuple[float, float]]

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "fit": self.fit.as_dict(), "n_rho": len(self.areas)}


def default_rho_grid(grid: SurfaceGrid, n: int | None = None, inner_factor: float = 10.0) -> np.ndarray:
    """Radii that stay clear of both truncation edges of the sampled patch.

    ``n`` defaults to the number of r nodes.

    The lower end sits ``inner_factor`` above the innermost ring, so the
    missing area near the vertex is negligible; the upper end is the closest
    approach of the outermost ring, so every ball is fully resolved.
    """
    d = grid.distances
    n = grid.r_grid.size if n is None else n
    lo, hi = inner_factor * d[0].max(), d[-1].min()
    if not lo < hi:
        raise InputError("sampled r window too narrow for a growth fit")
    return np.geomspace(lo, hi, n)


def growth_exponent(grid: SurfaceGrid, rho_grid=None, gate: float = 0.99) -> GrowthEstimate:
    """Fitted log-log slope of area inside ``B(0, rho)`` against ``rho``."""
    rho = default_rho_grid(grid) if rho_grid is None else np.asarray(rho_grid, dtype=float)
    areas = area_in_ball(grid, rho)
    fit = fit_valuation(np.stack([rho, areas]), gate=gate, floor=0.0)
    return GrowthEstimate(fit.exponent, fit, list(zip(rho.tolist(), areas.tolist())))


# ---------------------------------------------------------------------------
# reference surfaces
# ---------------------------------------------------------------------------


def _horn_param(beta):
    b = float(Fraction(beta))

    def param(z, theta):
        z = np.asarray(z, dtype=float)
        zb = np.power(z, b)
        return np.stack([zb * np.cos(theta), zb * np.sin(theta), z], axis=-1).astype(complex)

    return param


def horn_surface_sample(
    beta,
    r_grid=None,
    theta_grid=None,
) -> SurfaceGrid:
    """The horn ``x**2 + y**2 = z**(2*beta)``, parameterized as ``(z**beta cos t, z**beta sin t, z)``.

    ``beta = 1`` is the straight cone.
    """
    if Fraction(beta) < 1:
        raise InputError("horn exponent must be >= 1")
    r_grid = np.geomspace(*DEFAULT_R_WINDOW, DEFAULT_NR) if r_grid is None else r_grid
    theta_grid = 2 * math.pi * np.arange(DEFAULT_NTHETA) / DEFAULT_NTHETA if theta_grid is None else theta_grid
    return sample_surface(_horn_param(beta), r_grid, theta_grid, 2 * math.pi)


def horn_arcs(beta, n_arcs: int = 8) -> list[Callable]:
    """Meridian arcs ``t -> (t**beta cos t_j, t**beta sin t_j, t)`` of the horn fixture."""
    param = _horn_param(beta)
    thetas = 2 * math.pi * np.arange(n_arcs) / n_arcs
    return [(lambda th: (lambda t: param(t, np.full(np.shape(t), th))))(th) for th in thetas]


def cone_arcs(n_arcs: int = 8) -> list[Callable]:
    """Rays of the straight cone over the unit circle at height 1."""
    return horn_arcs(1, n_arcs)


def collision_fraction(grid: SurfaceGrid, n_pairs: int = 2000, coarsen: int = 4, seed: int = 0) -> float:
    """Fraction of random non-adjacent coarse cell pairs whose inscribed balls overlap.

    A cheap diagnostic for self-overlap of the parameterization, under which
    the quadrature area would overcount.
    """
    P = grid.points[::coarsen, ::coarsen]
    nr, nt = P.shape[0] - 1, P.shape[1]
    if nr < 3 or nt < 3:
        return 0.0
    Pn = np.concatenate([P, P[:, :1]], axis=1)
    corners = np.stack([Pn[:-1, :-1], Pn[1:, :-1], Pn[:-1, 1:], Pn[1:, 1:]])
    center = corners.mean(axis=0)
    # half the shortest edge: an inscribed scale, so elongated cells do not register as overlaps
    edges = np.stack([
        corners[1] - corners[0], corners[3] - corners[2], corners[2] - corners[0], corners[3] - corners[1]
    ])
    radius = 0.5 * np.linalg.norm(edges, axis=-1).min(axis=0)
    rng = np.random.default_rng(seed)
    i1, i2 = rng.integers(nr, size=(2, n_pairs))
    j1, j2 = rng.integers(nt, size=(2, n_pairs))
    dj = np.minimum(np.abs(j1 - j2), nt - np.abs(j1 - j2))
    far = (np.abs(i1 - i2) > 1) | (dj > 1)
    if not np.any(far):
        return 0.0
    gap = np.linalg.norm(center[i1, j1] - center[i2, j2], axis=-1)
    hit = gap[far] < (radius[i1, j1] + radius[i2, j2])[far]
    return float(hit.mean())
