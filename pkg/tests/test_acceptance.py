"""The nine acceptance criteria, each at its stated tolerance and time budget.

Every test appends one PASS/FAIL line that is echoed in the terminal summary.
"""

import itertools
import math
import time
from fractions import Fraction as Q
from importlib.resources import files

import numpy as np

from conftest import ACCEPTANCE_LINES, BRIESKORN, poly
from horngauge.arcs import (
    INFINITY,
    PuiseuxArc,
    PuiseuxSeries,
    contact_order,
    contact_table,
    horn_exponent_from_family,
    numeric_contact_order,
    series_valuation,
)
from horngauge.cli import main
from horngauge.fpflow import balanced_profile, eta_valuations, flow_check, nstar_log
from horngauge.homotopy import growth_exponent, h_arc_family, horn_arcs, horn_surface_sample, surface_grid_from_h, trace_link_loop
from horngauge.verdict import VerdictStatus, conicality_verdict
from horngauge.wpoly import Polynomial, WeightSystem, decompose, euler_residual, grad, monomials_of_degree


class Criterion:
    def __init__(self, number, title, budget=None):
        self.number, self.title, self.budget = number, title, budget

    def __enter__(self):
        self.failures = []
        self.details = []
        self.t0 = time.perf_counter()
        return self

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)

    def note(self, text):
        self.details.append(text)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc_type is None and self.budget is not None and elapsed >= self.budget:
            self.failures.append(f"runtime {elapsed:.2f}s >= {self.budget}s")
        ok = exc_type is None and not self.failures
        detail = "; ".join(self.details + self.failures + ([f"{exc_type.__name__}: {exc}"] if exc_type else []))
        line = f"[{'PASS' if ok else 'FAIL'}] {self.number}. {self.title} ({elapsed:.2f}s) {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None:
            assert ok, line
        return False


def random_weighted_homogeneous(rng):
    while True:
        w = tuple(int(v) for v in rng.integers(1, 10, 3))
        d = int(rng.integers(max(w) + 1, 61))
        mons = monomials_of_degree(w, d)
        if mons:
            break
    pick = rng.choice(len(mons), size=min(len(mons), int(rng.integers(1, 6))), replace=False)
    c = rng.standard_normal(pick.size) + 1j * rng.standard_normal(pick.size)
    return w, d, Polynomial((mons[i], ci) for i, ci in zip(pick, c))


def test_1_weighted_homogeneity_certificate():
    with Criterion(1, "weighted-homogeneity certificate", budget=1.0) as c:
        rng = np.random.default_rng(1)
        worst_e = worst_s = 0.0
        for _ in range(10):
            wts, d, h = random_weighted_homogeneous(rng)
            swh = decompose(h, wts, d)
            w, hc = swh.weights, swh.h
            X = rng.uniform(-1, 1, (100, 3)) + 1j * rng.uniform(-1, 1, (100, 3))
            scale = w.d * hc.abs_sum(X)
            worst_e = max(worst_e, float(np.max(euler_residual(hc, w, X) / scale)))
            for t in (0.1, 0.5, 2.0):
                Xt = X * t ** np.array(w.weights, dtype=float)
                err = np.abs(hc(Xt) - t**d * hc(X)) / (t**d * hc.abs_sum(X))
                worst_s = max(worst_s, float(err.max()))
        c.note(f"max Euler rel {worst_e:.1e}, max scaling rel {worst_s:.1e}")
        c.check(worst_e <= 1e-9, "Euler residual above 1e-9")
        c.check(worst_s <= 1e-9, "scaling law above 1e-9")


def test_2_exponent_identities():
    with Criterion(2, "exponent identities", budget=1.0) as c:
        w = WeightSystem.from_weights((15, 10, 6), 30)
        c.check(w.alphas == (480, 360, 300), f"alphas {w.alphas}")
        products = [2 * a * (w.d - wi) for a, wi in zip(w.alphas, w.weights)]
        c.check(len(set(products)) == 1 and products[0] == 2 * w.k, f"2 alpha_i (d - w_i) = {products}")
        # k = (d-w1)(d-w2)(d-w3) = 7200; the literal 4800 in the criterion text is inconsistent
        # with the alphas it lists (480 * 15 = 7200) and is not used
        c.check(w.k == 15 * 20 * 24, f"k = {w.k}")
        rng = np.random.default_rng(2)
        gh = grad(poly(*BRIESKORN))
        worst = 0.0
        for t in (0.25, 0.5, 0.9):
            for X in rng.uniform(-1, 1, (20, 3)) + 1j * rng.uniform(-1, 1, (20, 3)):
                Xt = X * t ** np.array(w.weights, dtype=float)
                diff = nstar_log(*(g(Xt) for g in gh), w) - nstar_log(*(g(X) for g in gh), w)
                expected = 2 * w.k * math.log(t)
                worst = max(worst, abs(diff - expected) / abs(expected))
        c.note(f"k = {w.k}, max rel scaling error {worst:.1e}")
        c.check(worst <= 1e-8, "log N*h scaling above 1e-8")


def test_3_flow_invariance(fam):
    with Criterion(3, "flow invariance under the corrected sign", budget=30.0) as c:
        res = flow_check(fam, n=50, norm_range=(0.01, 0.5), seed=0)["residuals"]
        cor, lit = res["corrected"], res["paper"]
        ratio = float(np.median(lit) / np.median(cor))
        c.note(f"max corrected {cor.max():.1e}, median ratio {ratio:.1e}")
        c.check(cor.max() <= 1e-6, "corrected residual above 1e-6")
        c.check(ratio >= 1e3, "median ratio below 1e3")


def test_4_eta_valuations(fam):
    with Criterion(4, "eta-valuation witness", budget=60.0) as c:
        w = fam.weights
        arc = PuiseuxArc.weighted(w.weights, balanced_profile(fam, seed=0))
        fits = eta_valuations(arc, fam, window=(1e-3, 1e-1), n=40)
        c.note("slopes " + ", ".join(f"{f.exponent:.3f} (r2 {f.r_squared:.5f})" for f in fits))
        for wi, f in zip(w.weights, fits):
            c.check(f.valid and f.r_squared >= 0.99, f"fit for w={wi} invalid")
            c.check(f.exponent >= wi + 1, f"slope {f.exponent:.3f} < {wi + 1}")


def test_5_horn_calibration():
    with Criterion(5, "horn calibration", budget=60.0) as c:
        for beta in (1, Q(3, 2), 2, Q(5, 2)):
            g = growth_exponent(horn_surface_sample(beta)).exponent
            b = horn_exponent_from_family(horn_arcs(beta))
            c.note(f"beta {beta}: growth {g:.4f}, family {b:.4f}")
            c.check(abs(g - (float(beta) + 1)) <= 0.1, f"growth for beta {beta}")
            c.check(abs(b - (g - 1)) <= 0.1, f"estimator mismatch for beta {beta}")


def test_6_main_witness(ref, fam):
    with Criterion(6, "growth and contact witness on the reference surface", budget=600.0) as c:
        loop = trace_link_loop(ref.h, ref.weights)
        grid = surface_grid_from_h(loop, fam, r_window=(1e-3, 1e-1), nr=24, ntheta=512, threads=1)
        est = growth_exponent(grid)
        arcs, _ = h_arc_family(loop, fam, n_arcs=8)
        table = contact_table(arcs, (1e-3, 1e-1), 40)
        valid = [f.exponent for f in table.values() if f.valid]
        lam = min(valid)
        c.note(f"growth {est.exponent:.4f} (r2 {est.fit.r_squared:.5f}), min contact {lam:.4f} over {len(arcs)} arcs")
        c.check(est.exponent >= 8 / 3 - 0.15 and est.fit.r_squared >= 0.99, "growth below 8/3 - 0.15")
        c.check(len(arcs) >= 8 and lam >= 5 / 3 - 0.1, "contact below 5/3 - 0.1")


def test_7_exact_arc_calculus():
    with Criterion(7, "exact arc calculus", budget=5.0) as c:
        S, Z, T = PuiseuxSeries, PuiseuxSeries(), PuiseuxSeries.monomial(1)
        c.check(series_valuation(S([(Q(5, 2), 3), (3, 1)])) == Q(5, 2), "3t^(5/2) + t^3")
        c.check(series_valuation(T) == 1, "t")
        c.check(series_valuation(Z) is INFINITY, "zero series")
        pairs = [
            (PuiseuxArc(T, Z, Z), PuiseuxArc(T, S.monomial(2), Z), Q(2)),
            (PuiseuxArc(T, Z, Z), PuiseuxArc(T, Z, Z), INFINITY),
            (PuiseuxArc(T, Z, Z), PuiseuxArc(Z, T, Z), Q(1)),
        ]
        for g1, g2, exact in pairs:
            c.check(contact_order(g1, g2) == exact, f"contact order {exact}")
            fit = numeric_contact_order(g1, g2)
            if exact is INFINITY:
                c.check(not fit.valid, "identical arcs gave a valid fit")
            else:
                c.check(abs(fit.exponent - float(exact)) <= 0.02, f"numeric {fit.exponent} vs {exact}")
        rng = np.random.default_rng(7)
        n_valid = 0
        worst = -math.inf
        for _ in range(50):
            lead = [S([(Q(int(rng.integers(1, 4))), 1.0), (Q(int(rng.integers(4, 9)), 2), 0.2 * rng.uniform(-1, 1))]) for _ in range(3)]
            lam = Q(int(rng.integers(2, 13)), int(rng.integers(1, 4)))
            other = list(lead)
            i = int(rng.integers(3))
            other[i] = lead[i] + S([(lam, complex(*rng.uniform(0.5, 2, 2))), (lam + 1, 0.2)])
            g1, g2 = PuiseuxArc(*lead), PuiseuxArc(*other)
            exact = contact_order(g1, g2)
            fit = numeric_contact_order(g1, g2)
            if fit.valid and exact is not INFINITY:
                n_valid += 1
                worst = max(worst, fit.exponent - float(exact))
                c.check(fit.exponent <= float(exact) + 0.05, f"comparison bound violated at {exact}")
        c.note(f"{n_valid}/50 valid random pairs, max numeric - exact {worst:+.4f}")


def test_8_verdict_logic():
    with Criterion(8, "verdict logic", budget=1.0) as c:
        cases = [((15, 10, 6), 30, VerdictStatus.NOT_METRICALLY_CONICAL, "8/3"), ((2, 1, 1), 4, VerdictStatus.INCONCLUSIVE, "2"), ((1, 1, 1), 2, VerdictStatus.INCONCLUSIVE, "2")]
        for w, d, status, bound in cases:
            v = conicality_verdict(WeightSystem.from_weights(w, d)).as_dict()
            c.check(v["status"] == status.value and v["bound"] == bound, f"weights {w}")
        terms = BRIESKORN + [(1, (0, 0, 6))]
        seen = set()
        for perm in itertools.permutations(range(3)):
            pt = [(cf, tuple(e[perm.index(i)] for i in range(3))) for cf, e in terms]
            pw = tuple((15, 10, 6)[perm.index(i)] for i in range(3))
            v = conicality_verdict(decompose(poly(*pt), pw).weights).as_dict()
            seen.add((v["status"], v["bound"]))
        c.note(f"{len(seen)} distinct verdict(s) over 6 permutations")
        c.check(seen == {("not_metrically_conical", "8/3")}, "verdict changed under permutation")


def test_9_determinism(tmp_path, capsys):
    with Criterion(9, "report determinism") as c:
        ref = str(files("horngauge") / "data" / "ref.json")
        outs = []
        for i in range(2):
            out = tmp_path / f"report{i}.json"
            code = main(["report", "--input", ref, "--seed", "0", "--threads", "1", "--out", str(out)])
            c.check(code == 0, f"run {i} exit code {code}")
            outs.append(out.read_bytes())
        capsys.readouterr()
        c.note(f"{len(outs[0])} bytes")
        c.check(outs[0] == outs[1], "reports differ")
