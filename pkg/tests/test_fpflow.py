import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import BRIESKORN, poly
from horngauge.arcs import PuiseuxArc, geometric_grid
from horngauge.errors import ArcNotOnVariety, InputError, SingularField, SingularGradient, StepLimit
from horngauge.fpflow import (
    FamilyPolynomial,
    FlowConfig,
    Sign,
    balanced_profile,
    eta_valuations,
    flow_check,
    gradient_fits,
    nstar_log,
    phi,
    phi_batch,
    phi_literal,
    ruas_saia_log_ratios,
    v_field,
)
from horngauge.wpoly import WeightSystem, decompose, grad, sample_on_variety

REF_W = (15, 10, 6)
LITERAL = FlowConfig(Sign.PAPER_LITERAL)


def family(*terms, weights=REF_W):
    return FamilyPolynomial(decompose(poly(*terms), weights))


@pytest.fixture(scope="module")
def pure():
    return family(*BRIESKORN)


@pytest.fixture(scope="module")
def quadric():
    """x^2 + y^2 + z^2 + x^3 with unit weights: alpha = (1, 1, 1), raw powers are safe."""
    return family((1, (2, 0, 0)), (1, (0, 2, 0)), (1, (0, 0, 2)), (1, (3, 0, 0)), weights=(1, 1, 1))


@pytest.fixture(scope="module")
def ref_points(ref):
    return sample_on_variety(ref.h, ref.weights, 50, (0.01, 0.5), seed=0)


def raw_field(fam, X, u, alphas, sign=-1.0):
    """Direct evaluation with raw powers; only usable for small alphas."""
    G = fam.gradient(X, u)
    W = np.abs(G) ** (2 * np.array(alphas) - 2) * np.conj(G)
    N = np.sum(np.abs(G) ** (2 * np.array(alphas)), axis=-1)
    return sign * (fam.theta(X) / N)[..., None] * W, G, W, N


# -- FamilyPolynomial ---------------------------------------------------------


def test_family_endpoints(fam, ref, rng):
    X = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
    np.testing.assert_array_equal(fam(X, 0.0), ref.h(X))
    assert fam.at(0.0) == ref.h
    assert fam.at(1.0) == ref.f


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(rel_tol=0)
    with pytest.raises(ValueError):
        FlowConfig(abs_tol=-1)
    assert FlowConfig().as_dict()["sign"] == "corrected"


# -- nstar_log ----------------------------------------------------------------


def test_nstar_log_table():
    w = WeightSystem.from_weights(REF_W, 30)
    assert nstar_log(1, 0, 0, w) == 0.0
    assert nstar_log(2, 0, 0, w) == pytest.approx(960 * math.log(2), rel=1e-14)
    assert nstar_log(2, 0, 0, w) == pytest.approx(665.42, abs=5e-3)
    with pytest.raises(SingularGradient):
        nstar_log(0, 0, 0, w)


def test_nstar_log_matches_raw_for_small_alphas():
    w = WeightSystem.from_weights((2, 1, 1), 4)  # alphas (9, 6, 6)
    g = (0.7 + 0.2j, 1.1, -0.4j)
    raw = sum(abs(gi) ** (2 * a) for gi, a in zip(g, w.alphas))
    assert nstar_log(*g, w) == pytest.approx(math.log(raw), rel=1e-13)


@pytest.mark.parametrize("t", [0.25, 0.5, 0.9])
def test_nstar_h_weighted_scaling(ref, rng, t):
    w = ref.weights
    gh = grad(ref.h)
    X = rng.uniform(-1, 1, (20, 3)) + 1j * rng.uniform(-1, 1, (20, 3))
    Xt = X * t ** np.array(w.weights, dtype=float)
    for a, b in zip(X, Xt):
        lhs = nstar_log(*(g(b) for g in gh), w) - nstar_log(*(g(a) for g in gh), w)
        expected = 2 * w.k * math.log(t)
        assert abs(lhs - expected) <= 1e-8 * abs(expected)


# -- v_field ------------------------------------------------------------------


def test_v_field_zero_when_theta_vanishes(pure, fam, rng):
    X = rng.standard_normal((5, 3)) + 1j
    assert np.all(v_field(X, 0.3, pure) == 0)
    # theta = z^6 vanishes on z = 0
    X[:, 2] = 0
    assert np.all(v_field(X, 0.3, fam) == 0)


def test_v_field_single_component_closed_form(rng):
    fam = family(*BRIESKORN, (1, (3, 0, 0)))  # theta = x^3, wdeg 45
    x = 0.3 * (rng.standard_normal(20) + 1j * rng.standard_normal(20))
    X = np.stack([x, 0 * x, 0 * x], axis=-1)
    u = rng.uniform(0, 1, 20)
    g = 2 * x + 3 * u * x**2
    for sign, cfg in [(-1, FlowConfig()), (1, LITERAL)]:
        V = v_field(X, u, fam, cfg)
        np.testing.assert_allclose(V[:, 0], sign * x**3 / g, rtol=1e-12)
        assert np.all(V[:, 1:] == 0)


def test_v_field_matches_raw_formula(quadric, rng):
    X = rng.standard_normal((30, 3)) + 1j * rng.standard_normal((30, 3))
    V = v_field(X, 0.4, quadric)
    expected, *_ = raw_field(quadric, X, 0.4, (1, 1, 1))
    np.testing.assert_allclose(V, expected, rtol=1e-12)


def test_pairing_identity_raw(rng):
    fam = family((1, (4, 0, 0)), (1, (0, 2, 1)), (1, (0, 0, 4)), (1, (0, 0, 5)), weights=(1, 1, 1))
    w = fam.weights  # d = 4, alphas (9, 9, 9)
    X = 0.5 * (rng.standard_normal((20, 3)) + 1j * rng.standard_normal((20, 3)))
    _, G, W, N = raw_field(fam, X, 0.7, w.alphas)
    np.testing.assert_allclose(np.sum(G * W, axis=-1), N, rtol=1e-9)


@pytest.mark.parametrize("cfg, sign", [(FlowConfig(), -1), (LITERAL, 1)])
def test_pairing_identity_log_space(fam, ref_points, cfg, sign):
    V = v_field(ref_points, 0.5, fam, cfg)
    G = fam.gradient(ref_points, 0.5)
    th = fam.theta(ref_points)
    np.testing.assert_allclose(np.sum(G * V, axis=-1), sign * th, rtol=1e-9)


def test_v_field_singular(fam):
    with pytest.raises(SingularField):
        v_field(np.zeros(3), 0.5, fam)


# -- phi ----------------------------------------------------------------------


def test_phi_identity_when_theta_zero(pure, ref_points):
    x, traj = phi(ref_points[0], pure)
    np.testing.assert_array_equal(x, ref_points[0])
    assert np.all(traj.X == ref_points[0])
    np.testing.assert_array_equal(phi_batch(ref_points, pure).points, ref_points)


def test_phi_reference_invariance(fam, ref_points):
    b = phi_batch(ref_points, fam)
    res = np.abs(fam.at(1.0)(b.points))
    assert res.max() <= 1e-6
    lit = np.abs(fam.at(1.0)(phi_batch(ref_points, fam, LITERAL).points))
    assert np.median(lit) >= 1e3 * np.median(res)


def test_trajectory_residuals_corrected(fam, ref_points):
    for X0 in ref_points[:10]:
        _, traj = phi(X0, fam)
        u = traj.u
        assert u[0] == 0.0 and u[-1] == 1.0 and np.all(np.diff(u) > 0)
        grad_norm = np.linalg.norm(fam.gradient(traj.X, u), axis=-1)
        assert np.all(traj.residuals <= 1e-6 * grad_norm * np.linalg.norm(X0) + 1e-300)


def test_literal_sign_doubles_du_derivative(fam, ref_points):
    _, traj = phi(ref_points[3], fam, LITERAL)
    X, u = traj.X, traj.u
    V = v_field(X, u, fam, LITERAL)
    dFdu = fam.theta(X) + np.sum(fam.gradient(X, u) * V, axis=-1)
    np.testing.assert_allclose(dFdu, 2 * fam.theta(X), rtol=1e-6)


def test_phi_tolerance_halving(fam, ref_points):
    cfg = FlowConfig()
    a = phi_batch(ref_points[:20], fam, cfg).points
    b = phi_batch(ref_points[:20], fam, FlowConfig(rel_tol=cfg.rel_tol / 2)).points
    rel = np.linalg.norm(a - b, axis=1) / np.linalg.norm(a, axis=1)
    assert rel.max() < 10 * cfg.rel_tol


def test_phi_against_scipy_reference(fam, ref_points):
    """Independent integrator on the unscaled real system."""
    pts = ref_points[np.argsort(np.linalg.norm(ref_points, axis=1))[-5:]]

    def rhs(u, y):
        V = v_field(y[:3] + 1j * y[3:], u, fam)
        return np.concatenate([V.real, V.imag])

    for X0 in pts:
        sol = solve_ivp(rhs, (0, 1), np.concatenate([X0.real, X0.imag]), method="DOP853", rtol=1e-12, atol=1e-16)
        ref_end = sol.y[:3, -1] + 1j * sol.y[3:, -1]
        ours = phi(X0, fam)[0]
        assert np.linalg.norm(ours - ref_end) <= 1e-8 * np.linalg.norm(X0)


def test_phi_batch_is_batch_independent(fam, ref_points):
    full = phi_batch(ref_points, fam).points
    for i in (0, 17, 49):
        np.testing.assert_array_equal(phi_batch(ref_points[i : i + 1], fam).points[0], full[i])
    np.testing.assert_array_equal(phi(ref_points[17], fam)[0], full[17])


def test_phi_step_limit(fam, ref_points):
    with pytest.raises(StepLimit):
        phi(ref_points[0], fam, FlowConfig(max_steps=2))
    b = phi_batch(ref_points[:3], fam, FlowConfig(max_steps=2), strict=False)
    assert b.status[0] == "STEP_LIMIT"
    assert np.all(b.n_steps <= 2)
    with pytest.raises(StepLimit):
        b.raise_for_status()


# -- phi_literal --------------------------------------------------------------


def test_phi_literal_identity(pure, ref_points):
    np.testing.assert_array_equal(phi_literal(ref_points[0], pure), ref_points[0])


def test_phi_literal_quadrature_convergence_and_table(fam, ref_points):
    X = ref_points[:20]
    a, b = phi_literal(X, fam, 64), phi_literal(X, fam, 128)
    assert np.abs(a - b).max() < 1e-10
    diff = np.linalg.norm(a - phi_batch(X, fam).points, axis=1)
    assert np.all(np.isfinite(diff))


def test_phi_literal_rejects_odd_nodes(fam, ref_points):
    with pytest.raises(InputError):
        phi_literal(ref_points[0], fam, 63)


# -- eta ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def ref_arc(fam):
    return PuiseuxArc.weighted(fam.weights.weights, balanced_profile(fam, seed=0))


def test_balanced_profile(fam, ref_arc):
    P = balanced_profile(fam, seed=0)
    assert abs(fam.h(P)) <= 1e-12
    assert np.linalg.norm(P) == pytest.approx(1, abs=1e-8)


def test_eta_slopes_reference(fam, ref_arc):
    fits = eta_valuations(ref_arc, fam)
    for wi, f in zip(fam.weights.weights, fits):
        assert f.valid and f.r_squared >= 0.99
        assert f.exponent >= wi + 1
        assert abs(f.exponent - (wi + 6)) <= 0.05


def test_eta_trivial_family(pure, ref_arc):
    fits = eta_valuations(ref_arc, pure)
    assert all(not f.valid for f in fits)


def test_eta_rejects_arc_off_variety(fam):
    with pytest.raises(ArcNotOnVariety):
        eta_valuations(PuiseuxArc.weighted(REF_W, (1, 1, 1)), fam)


def test_ruas_saia_ratio_bounded_below(fam, ref_arc):
    lr = ruas_saia_log_ratios(ref_arc, fam, geometric_grid((1e-3, 1e-1), 40))
    assert lr.shape == (3, 40)
    assert np.all(lr[0] == 0)
    assert lr.min() > -1.0


def test_gradient_bounds(fam, ref_arc):
    w = fam.weights
    for wi, f in zip(w.weights, gradient_fits(ref_arc, fam)):
        assert f.exponent >= w.d - wi - 0.01


def test_flow_check_structure(fam):
    out = flow_check(fam, n=10, seed=4)
    assert out["X0"].shape == (10, 3)
    assert set(out["residuals"]) == {"corrected", "paper"}
    assert out["residuals"]["corrected"].max() <= 1e-6
