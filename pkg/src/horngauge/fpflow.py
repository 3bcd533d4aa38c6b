"""The trivializing vector field of the family ``F(X, u) = h(X) + u*theta(X)``.

With ``g = grad_X F(X, u)`` and ``a_i = 2*alpha_i*log|g_i|``, the field is

    V_i(X, u) = sign * theta(X) * exp(a_i - logsumexp(a)) / g_i

which is ``theta * W_i / N*`` written in log space.  The exponents alpha_i are
in the hundreds for realistic weights, so nothing here ever forms
``|g_i|**(2*alpha_i)``.  The complex pairing ``sum_i g_i V_i`` equals
``sign * theta`` identically; with ``sign = -1`` (:attr:`Sign.CORRECTED`) the
level set ``F = 0`` is carried along the flow.

Flows are integrated in weighted coordinates ``Y_i = X_i / s**w_i``.  Because
``alpha_i*(d - w_i) = k`` for every i, the softmax weights are invariant under
this rescaling and ``V_i(X) = s**w_i * V~_i(Y)`` where ``V~`` is the field of
the rescaled family ``h(Y) + u*theta_s(Y)``.  The state integrated is the
displacement ``Y - Y0``, so tiny corrections are resolved without
cancellation against the (much larger) starting point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import logsumexp

from .arcs import FitResult, PuiseuxArc, arc_eval, fit_valuation, geometric_grid
from .errors import ArcNotOnVariety, InputError, SingularField, SingularGradient, StepLimit
from .wpoly import Polynomial, SWHPolynomial, WeightSystem, grad, sample_on_variety, weighted_scale

__all__ = [
    "Sign",
    "FlowConfig",
    "FamilyPolynomial",
    "FlowTrajectory",
    "FlowBatch",
    "nstar_log",
    "v_field",
    "phi",
    "phi_batch",
    "phi_literal",
    "eta_valuations",
    "balanced_profile",
    "ruas_saia_log_ratios",
    "gradient_fits",
    "flow_check",
]


class Sign(str, enum.Enum):
    CORRECTED = "corrected"
    PAPER_LITERAL = "paper"

    @property
    def factor(self) -> float:
        return -1.0 if self is Sign.CORRECTED else 1.0


class Status(str, enum.Enum):
    OK = "OK"
    SINGULAR_FIELD = "SINGULAR_FIELD"
    STEP_LIMIT = "STEP_LIMIT"


@dataclass(frozen=True)
class FlowConfig:
    sign_convention: Sign = Sign.CORRECTED
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    nstar_log_floor: float = -600.0
    max_steps: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "sign_convention", Sign(self.sign_convention))
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.max_steps < 1:
            raise InputError("max_steps must be positive")

    def as_dict(self) -> dict:
        return {
            "sign": self.sign_convention.value,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "nstar_log_floor": self.nstar_log_floor,
            "max_steps": self.max_steps,
        }


# ---------------------------------------------------------------------------
# polynomial kernels
# ---------------------------------------------------------------------------


def _power_tables(Y, E):
    tables = []
    for v in range(3):
        dmax = int(E[:, v].max()) if len(E) else 0
        p = [np.ones(Y.shape[:-1], dtype=complex)]
        for _ in range(dmax):
            p.append(p[-1] * Y[..., v])
        tables.append(np.stack(p))
    return tables


def _eval_with_grad(E, C, Y):
    """Value and gradient of ``sum_m C_m Y^m``.

    ``C`` has shape ``(M,)`` or ``(M, N)`` (per-point coefficients); ``Y`` is
    ``(N, 3)``.  Returns ``(val (N,), grad (N, 3))``.
    """
    N = Y.shape[0]
    if len(E) == 0:
        return np.zeros(N, dtype=complex), np.zeros((N, 3), dtype=complex)
    T = _power_tables(Y, E)
    P = [T[v][E[:, v]] for v in range(3)]
    Cb = C if C.ndim == 2 else C[:, None]
    val = (Cb * P[0] * P[1] * P[2]).sum(axis=0)
    g = np.empty((N, 3), dtype=complex)
    for v in range(3):
        prod = (E[:, v][:, None] * Cb) * T[v][np.maximum(E[:, v] - 1, 0)]
        for o in range(3):
            if o != v:
                prod = prod * P[o]
        g[:, v] = prod.sum(axis=0)
    return val, g


class FamilyPolynomial:
    """``F(X, u) = h(X) + u*theta(X)`` built from a semi-weighted homogeneous split."""

    def __init__(self, swh: SWHPolynomial):
        self.swh = swh
        self.h = swh.h
        self.theta = swh.theta
        self.weights = swh.weights
        self._gh = grad(swh.h)
        self._gt = grad(swh.theta)

    def at(self, u: float) -> Polynomial:
        return self.h + self.theta * float(u)

    def __call__(self, X, u) -> np.ndarray:
        return self.h(X) + np.asarray(u) * self.theta(X)

    def gradient(self, X, u) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        u = np.asarray(u)
        return np.stack([gh(X) + u * gt(X) for gh, gt in zip(self._gh, self._gt)], axis=-1)

    @property
    def trivial(self) -> bool:
        return self.theta.is_zero()


# ---------------------------------------------------------------------------
# log-space field
# ---------------------------------------------------------------------------


def _log_terms(G, alphas):
    with np.errstate(divide="ignore"):
        a = 2.0 * np.asarray(alphas, dtype=float) * np.log(np.abs(G))
    return a, logsumexp(a, axis=-1)


def nstar_log(gx, gy, gz, w: WeightSystem) -> float:
    """``log(|gx|**(2 alpha_a) + |gy|**(2 alpha_b) + |gz|**(2 alpha_c))`` via log-sum-exp."""
    _, L = _log_terms(np.array([gx, gy, gz], dtype=complex), w.alphas)
    if not np.isfinite(L):
        raise SingularGradient("all gradient components vanish")
    return float(L)


def _field_from(theta_val, G, alphas, sign):
    a, L = _log_terms(G, alphas)
    wts = np.exp(a - L[..., None])
    nz = G != 0
    V = np.zeros_like(G)
    V[nz] = (sign * (theta_val[..., None] * wts))[nz] / G[nz]
    return V, L


def v_field(X, u, fam: FamilyPolynomial, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """The field at points ``X[..., 3]`` and parameter ``u`` (broadcast)."""
    X = np.asarray(X, dtype=complex)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(X.shape[:-1], u.shape)
    X = np.broadcast_to(X, shape + (3,))
    th = np.broadcast_to(fam.theta(X), shape)
    G = fam.gradient(X, np.broadcast_to(u, shape))
    if not np.all(np.any(G != 0, axis=-1)):
        raise SingularField("gradient of F_u vanishes")
    V, L = _field_from(th, G, fam.weights.alphas, cfg.sign_convention.factor)
    # the guard is on the scale-free part of N*; the raw value carries 2k*log s
    Ls = L - 2 * fam.weights.k * weighted_scale(X, fam.weights.weights)
    if np.any(Ls < cfg.nstar_log_floor):
        raise SingularField(f"normalized log N* below floor {cfg.nstar_log_floor}")
    return V


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class _ScaledProblem:
    """Per-point rescaled data for a batch of starting points."""

    def __init__(self, X0, fam: FamilyPolynomial, cfg: FlowConfig):
        w = fam.weights
        self.fam, self.cfg = fam, cfg
        self.ws = np.asarray(w.weights, dtype=float)
        self.ls = weighted_scale(X0, w.weights)
        if not np.all(np.isfinite(self.ls)):
            raise InputError("flow start point at the origin")
        self.Y0 = X0 * np.exp(-self.ls[:, None] * self.ws)
        self.Eh, self.ch = fam.h.exponents, fam.h.coefficients
        self.Et = fam.theta.exponents
        excess = fam.theta.weighted_degrees(w) - w.d
        # theta_s(Y) = s**-d * theta(s.Y): coefficient of Y^m gains s**(wdeg(m) - d)
        self.Ct = fam.theta.coefficients[:, None] * np.exp(excess[:, None] * self.ls[None, :])
        self.alphas = w.alphas
        self.sign = cfg.sign_convention.factor

    def family(self, idx, u, delta):
        """Rescaled ``F_s``, its Y-gradient and ``theta_s`` at ``Y0 + delta``."""
        Y = self.Y0[idx] + delta
        hv, hg = _eval_with_grad(self.Eh, self.ch, Y)
        tv, tg = _eval_with_grad(self.Et, self.Ct[:, idx], Y)
        return hv + u * tv, hg + u[:, None] * tg, tv

    def rhs(self, idx, u, delta):
        _, G, tv = self.family(idx, u, delta)
        V, L = _field_from(tv, G, self.alphas, self.sign)
        bad = ~np.isfinite(L) | (L < self.cfg.nstar_log_floor) | ~np.all(np.isfinite(V), axis=-1)
        return np.where(bad[:, None], 0.0, V), bad

    def to_x(self, idx, Yd):
        return Yd * np.exp(self.ls[idx, None] * self.ws)


@dataclass
class FlowBatch:
    """End states of a batch of flows.  ``displacement`` is ``Phi(X0) - X0``."""

    X0: np.ndarray
    points: np.ndarray
    displacement: np.ndarray
    status: np.ndarray
    n_steps: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == Status.OK.value

    def raise_for_status(self):
        if np.any(self.status == Status.SINGULAR_FIELD.value):
            raise SingularField(f"{int(np.sum(self.status == Status.SINGULAR_FIELD.value))} trajectories hit the critical set")
        if np.any(self.status == Status.STEP_LIMIT.value):
            raise StepLimit(f"{int(np.sum(self.status == Status.STEP_LIMIT.value))} trajectories exceeded max_steps")


@dataclass
class FlowTrajectory:
    samples: list[tuple[float, np.ndarray, float]] = field(default_factory=list)
    status: Status = Status.OK

    @property
    def u(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def X(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])


def _integrate(prob: _ScaledProblem, record: bool = False):
    cfg = prob.cfg
    N = prob.Y0.shape[0]
    u = np.zeros(N)
    delta = np.zeros((N, 3), dtype=complex)
    status = np.full(N, Status.OK.value, dtype=object)
    nsteps = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    traj = [[] for _ in range(N)] if record else None

    all_idx = np.arange(N)
    k1, bad = prob.rhs(all_idx, u, delta)
    status[bad] = Status.SINGULAR_FIELD.value
    active &= ~bad
    # initial step from the field magnitude relative to the unit-size state
    vmax = np.abs(k1).max(axis=1)
    hstep = np.where(vmax > 0, np.clip(0.01 / np.maximum(vmax, 1e-300), 1e-6, 1.0), 1.0)
    if record:
        for i in range(N):
            traj[i].append((0.0, prob.Y0[i].copy()))

    while np.any(active):
        idx = np.nonzero(active)[0]
        ui, di, hi = u[idx], delta[idx], np.minimum(hstep[idx], 1.0 - u[idx])
        K = [k1[idx]]
        stage_bad = np.zeros(idx.size, dtype=bool)
        for s in range(1, 7):
            ds = di + hi[:, None] * sum(a * k for a, k in zip(_A[s], K) if a != 0.0)
            ks, b = prob.rhs(idx, ui + _C[s] * hi, ds)
            K.append(ks)
            stage_bad |= b
        new = di + hi[:, None] * sum(b * k for b, k in zip(_B, K) if b != 0.0)
        err = hi[:, None] * sum(e * k for e, k in zip(_E, K) if e != 0.0)
        Yo, Yn = prob.Y0[idx] + di, prob.Y0[idx] + new
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(Yo), np.abs(Yn))
        en = np.sqrt(np.mean(np.abs(err / sc) ** 2, axis=1))
        accept = (en <= 1.0) & ~stage_bad
        fac = np.where(en > 0, 0.9 * np.power(np.maximum(en, 1e-300), -0.2), 5.0)
        fac = np.clip(fac, 0.2, 5.0)
        # a failing stage is retried with a smaller step before declaring the field singular
        fac = np.where(stage_bad, 0.25, np.where(accept, fac, np.minimum(fac, 1.0)))

        acc = idx[accept]
        finishing = hstep[acc] >= 1.0 - u[acc]
        u[acc] = np.where(finishing, 1.0, u[acc] + hi[accept])
        delta[acc] = new[accept]
        k1[acc] = K[6][accept]
        nsteps[idx] += 1
        hstep[idx] = hi * fac
        if record:
            for j in np.nonzero(accept)[0]:
                i = idx[j]
                traj[i].append((u[i], prob.Y0[i] + delta[i]))

        done = u[idx] >= 1.0
        tiny = hstep[idx] < 1e-14
        active[idx[done]] = False
        status[idx[tiny & stage_bad & ~done]] = Status.SINGULAR_FIELD.value
        active[idx[tiny & stage_bad & ~done]] = False
        over = (nsteps[idx] >= cfg.max_steps) & active[idx]
        status[idx[over]] = Status.STEP_LIMIT.value
        active[idx[over]] = False
        stall = tiny & ~stage_bad & active[idx]
        status[idx[stall]] = Status.STEP_LIMIT.value
        active[idx[stall]] = False
    return u, delta, status, nsteps, traj


def phi_batch(X0, fam: FamilyPolynomial, cfg: FlowConfig = FlowConfig(), strict: bool = True) -> FlowBatch:
    """Time-1 map of ``dX/du = V(X, u)`` for every row of ``X0[N, 3]``.

    Each trajectory has its own adaptive step sequence, so a point's result
    does not depend on which batch it was integrated in.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=complex))
    N = X0.shape[0]
    if fam.trivial:
        z = np.zeros_like(X0)
        return FlowBatch(X0, X0.copy(), z, np.full(N, Status.OK.value, dtype=object), np.zeros(N, dtype=np.int64))
    prob = _ScaledProblem(X0, fam, cfg)
    _, delta, status, nsteps, _ = _integrate(prob)
    disp = prob.to_x(np.arange(N), delta)
    out = FlowBatch(X0, X0 + disp, disp, status, nsteps)
    if strict:
        out.raise_for_status()
    return out


def phi(X0, fam: FamilyPolynomial, cfg: FlowConfig = FlowConfig()):
    """Time-1 flow map from ``u = 0`` to ``u = 1``; returns ``(point, trajectory)``."""
    X0 = np.asarray(X0, dtype=complex).reshape(1, 3)
    F0 = complex(fam(X0, 0.0)[0])
    if fam.trivial:
        x = X0[0].copy()
        return x, FlowTrajectory([(0.0, x, 0.0), (1.0, x, 0.0)], Status.OK)
    prob = _ScaledProblem(X0, fam, cfg)
    _, delta, status, _, traj = _integrate(prob, record=True)
    scale = np.exp(prob.ls[0] * prob.ws)
    samples = []
    for uu, Y in traj[0]:
        X = Y * scale
        samples.append((float(uu), X, float(abs(fam(X, uu) - F0))))
    st = Status(status[0])
    if st is Status.SINGULAR_FIELD:
        raise SingularField("trajectory approached the critical set")
    if st is Status.STEP_LIMIT:
        raise StepLimit("trajectory exceeded max_steps")
    return X0[0] + prob.to_x(np.array([0]), delta)[0], FlowTrajectory(samples, st)


def phi_literal(X0, fam: FamilyPolynomial, n_quad: int = 64, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """``X0 + int_0^1 V(X0, u) du`` with the integrand frozen at ``X0`` (composite Simpson)."""
    if n_quad < 2 or n_quad % 2:
        raise InputError("n_quad must be a positive even integer")
    X0 = np.asarray(X0, dtype=complex)
    if fam.trivial:
        return X0.copy()
    u = np.linspace(0.0, 1.0, n_quad + 1)
    V = v_field(X0[..., None, :], u, fam, cfg)
    wts = np.ones(n_quad + 1)
    wts[1:-1:2], wts[2:-1:2] = 4.0, 2.0
    return X0 + np.tensordot(wts / (3.0 * n_quad), V, axes=(0, -2))


# ---------------------------------------------------------------------------
# verification helpers
# ---------------------------------------------------------------------------


def balanced_profile(fam: FamilyPolynomial, seed: int = 0, tries: int = 20) -> np.ndarray:
    """A point ``P`` on ``h = 0`` with ``|P| = 1`` where the three terms of
    ``N*h`` are equal.

    Along the weighted arc ``(P1 t**w1, P2 t**w2, P3 t**w3)`` the softmax
    weights of ``N*`` are then constant and equal, so no component of the
    correction underflows.
    """
    w = fam.weights
    dw = np.array([w.d - w.w1, w.d - w.w2, w.d - w.w3], dtype=float)
    gh = grad(fam.h)

    def resid(p):
        X = p[:3] + 1j * p[3:]
        hv = fam.h(X) / max(float(fam.h.abs_sum(X)), 1e-300)
        lg = np.log(np.maximum([abs(g(X)) for g in gh], 1e-300)) / dw
        return [hv.real, hv.imag, lg[0] - lg[2], lg[1] - lg[2], np.log(np.linalg.norm(X))]

    starts = sample_on_variety(fam.h, w, tries, (1.0, 1.0), seed)
    best = None
    for P0 in starts:
        res = least_squares(resid, np.concatenate([P0.real, P0.imag]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or res.cost < best.cost:
            best = res
        if res.cost < 1e-26:
            break
    P = best.x[:3] + 1j * best.x[3:]
    # polish onto h = 0 exactly along the best-conditioned coordinate
    g = np.array([gi(P) for gi in gh])
    v = int(np.argmax(np.abs(g)))
    for _ in range(5):
        P[v] -= fam.h(P) / gh[v](P)
    return P


def _check_on_variety(arc: PuiseuxArc, h: Polynomial, window, tol=1e-8):
    for t in window:
        X = arc_eval(arc, t)
        scale = float(h.abs_sum(X))
        if scale == 0 or abs(complex(h(X))) > tol * scale:
            raise ArcNotOnVariety(f"h(gamma({t:g})) is not zero to relative {tol:g}")


def eta_valuations(
    arc: PuiseuxArc,
    fam: FamilyPolynomial,
    cfg: FlowConfig = FlowConfig(),
    window: tuple[float, float] = (1e-3, 1e-1),
    n: int = 40,
    gate: float = 0.99,
) -> tuple[FitResult, FitResult, FitResult]:
    """Fitted valuations of the three components of ``eta(t) = Phi(gamma(t)) - gamma(t)``.

    The correction is taken straight from the integrated displacement; values
    are tiny but exact, so no absolute floor is applied.
    """
    _check_on_variety(arc, fam.h, window)
    t = geometric_grid(window, n)
    batch = phi_batch(arc_eval(arc, t), fam, cfg)
    eta = np.abs(batch.displacement)
    return tuple(fit_valuation(np.stack([t, eta[:, i]]), gate=gate, floor=0.0) for i in range(3))


def ruas_saia_log_ratios(arc: PuiseuxArc, fam: FamilyPolynomial, t, us=(0.0, 0.5, 1.0)) -> np.ndarray:
    """``log(N*F_u(gamma(t)) / N*h(gamma(t)))`` on the grid ``t`` for each ``u``; shape ``(len(us), len(t))``."""
    X = arc_eval(arc, np.asarray(t, dtype=float))
    al = fam.weights.alphas
    _, Lh = _log_terms(fam.gradient(X, 0.0), al)
    return np.array([_log_terms(fam.gradient(X, u), al)[1] - Lh for u in us])


def gradient_fits(arc: PuiseuxArc, fam: FamilyPolynomial, u: float = 1.0, window=(1e-3, 1e-1), n: int = 40):
    """Fitted valuations of ``|dF_u/dx_i (gamma(t))|``; each should be at least ``d - w_i``."""
    t = geometric_grid(window, n)
    G = np.abs(fam.gradient(arc_eval(arc, t), u))
    return tuple(fit_valuation(np.stack([t, G[:, i]]), floor=0.0) for i in range(3))


def flow_check(fam: FamilyPolynomial, n: int = 50, norm_range=(0.01, 0.5), seed: int = 0, cfg: FlowConfig = FlowConfig()) -> dict:
    """End-point residuals ``|f(Phi(X0))|`` for seeded ``X0`` on ``h = 0`` under both signs."""
    X0 = sample_on_variety(fam.h, fam.weights, n, norm_range, seed)
    f = fam.at(1.0)
    out = {}
    for sign in Sign:
        c = FlowConfig(sign, cfg.rel_tol, cfg.abs_tol, cfg.nstar_log_floor, cfg.max_steps)
        b = phi_batch(X0, fam, c)
        out[sign.value] = np.abs(f(b.points))
    return {"X0": X0, "residuals": out}
