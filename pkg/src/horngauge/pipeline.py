"""Stage runners that turn module results into report sections.

Each ``*_stage`` function returns a JSON-ready dict (and, where later stages
need it, the underlying object).  Tolerances and windows travel with every
numeric claim.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import arcs, fpflow, homotopy, verdict as vd
from .errors import HorngaugeError
from .fpflow import FamilyPolynomial, FlowConfig
from .wpoly import SWHPolynomial, singularity_probe

FLOW_RESIDUAL_TOL = 1e-6
FLOW_RATIO_MIN = 1e3


def default_threads() -> int:
    env = os.environ.get("HORNGAUGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    flow: FlowConfig = field(default_factory=FlowConfig)
    t_window: tuple[float, float] = (1e-3, 1e-1)
    n_t: int = 40
    r_window: tuple[float, float] = (1e-3, 1e-1)
    nr: int = 24
    ntheta: int = 512
    n_arcs: int = 8
    y_radius: float = 0.3
    n_steps: int = 512
    n_probe: int = 200
    n_flow: int = 50
    norm_range: tuple[float, float] = (0.01, 0.5)

    def __post_init__(self):
        if min(self.nr, self.ntheta, self.n_t) < 8:
            raise ValueError("grids need at least 8 points")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["flow"] = self.flow.as_dict()
        d.pop("threads")
        return d


def probe_stage(swh: SWHPolynomial, cfg: RunConfig) -> dict:
    return singularity_probe(swh.h, swh.weights, cfg.n_probe, cfg.seed, threads=cfg.threads).as_dict()


def flow_stage(fam: FamilyPolynomial, cfg: RunConfig) -> dict:
    if fam.trivial:
        return {"identity": True, "note": "theta is zero, the flow map is the identity"}
    chk = fpflow.flow_check(fam, cfg.n_flow, cfg.norm_range, cfg.seed, cfg.flow)
    c, p = chk["residuals"]["corrected"], chk["residuals"]["paper"]
    ratio = float(np.median(p) / max(float(np.median(c)), 1e-300))
    return {
        "identity": False,
        "n_points": int(c.size),
        "norm_range": list(cfg.norm_range),
        "corrected": {"max": float(c.max()), "median": float(np.median(c))},
        "paper": {"max": float(p.max()), "median": float(np.median(p))},
        "median_ratio_paper_over_corrected": ratio,
        "tolerance": FLOW_RESIDUAL_TOL,
        "ratio_threshold": FLOW_RATIO_MIN,
        "passes": bool(c.max() <= FLOW_RESIDUAL_TOL and ratio >= FLOW_RATIO_MIN),
    }


def _gain(fam: FamilyPolynomial, profile) -> int | None:
    """Expected valuation gain ``nu(theta o gamma) - d`` along a constant-profile arc."""
    w = fam.weights
    for dd in sorted(set(fam.theta.weighted_degrees(w).tolist())):
        part = fam.theta.filter(lambda e: sum(a * b for a, b in zip(e, w.weights)) == dd)
        if abs(complex(part(profile))) > 1e-12 * max(float(part.abs_sum(profile)), 1e-300):
            return int(dd - w.d)
    return None


def eta_stage(fam: FamilyPolynomial, cfg: RunConfig) -> dict:
    w = fam.weights
    if fam.trivial:
        return {"identity": True, "valuations": ["infinite", "infinite", "infinite"]}
    P = fpflow.balanced_profile(fam, cfg.seed)
    arc = arcs.PuiseuxArc.weighted(w.weights, P)
    fits = fpflow.eta_valuations(arc, fam, cfg.flow, cfg.t_window, cfg.n_t)
    t = arcs.geometric_grid(cfg.t_window, cfg.n_t)
    rs = fpflow.ruas_saia_log_ratios(arc, fam, t)
    gain = _gain(fam, P)
    comps = []
    for wi, ft in zip(w.weights, fits):
        comps.append(
            {
                "weight": wi,
                "fit": ft.as_dict(),
                "threshold": wi + 1,
                "expected": None if gain is None else wi + gain,
                "passes": bool(ft.valid and ft.exponent >= wi + 1),
            }
        )
    return {
        "identity": False,
        "profile": [[z.real, z.imag] for z in P],
        "window": list(cfg.t_window),
        "components": comps,
        "expected_gain": gain,
        "ruas_saia_min_log_ratio": float(rs.min()),
        "passes": all(c["passes"] for c in comps),
    }


def loop_stage(swh: SWHPolynomial, cfg: RunConfig):
    loop = homotopy.trace_link_loop(swh.h, swh.weights, cfg.y_radius, cfg.n_steps, cfg.seed)
    return loop, loop.as_dict()


def growth_stage(loop, fam: FamilyPolynomial, cfg: RunConfig):
    grid = homotopy.surface_grid_from_h(loop, fam, cfg.flow, cfg.r_window, cfg.nr, cfg.ntheta, cfg.threads)
    est = homotopy.growth_exponent(grid)
    d = est.as_dict()
    d["r_window"] = list(cfg.r_window)
    d["grid"] = [cfg.nr, cfg.ntheta]
    d["collision_fraction"] = homotopy.collision_fraction(grid, seed=cfg.seed)
    return grid, est, d


def contacts_stage(loop, fam: FamilyPolynomial, cfg: RunConfig) -> dict:
    family, thetas = homotopy.h_arc_family(loop, fam, cfg.flow, cfg.n_arcs)
    table = arcs.contact_table(family, cfg.r_window, cfg.n_t)
    valid = [f.exponent for f in table.values() if f.valid]
    if not valid:
        raise arcs.NoValidFit("every pairwise contact fit was invalid")
    return {
        "n_arcs": cfg.n_arcs,
        "thetas": thetas.tolist(),
        "window": list(cfg.r_window),
        "min_contact_order": float(min(valid)),
        "n_valid_pairs": len(valid),
        "pairs": [{"i": i, "j": j, **f.as_dict()} for (i, j), f in table.items()],
    }


def verdict_section(swh: SWHPolynomial, growth=None, contacts=None) -> vd.Verdict:
    evidence = {}
    if isinstance(growth, dict) and "exponent" in growth:
        evidence["growth_exponent"] = growth["exponent"]
    if isinstance(contacts, dict) and "min_contact_order" in contacts:
        evidence["min_contact_order"] = contacts["min_contact_order"]
    return vd.conicality_verdict(swh.weights, evidence)


def _attempt(fn, *args):
    try:
        return fn(*args)
    except HorngaugeError as exc:
        return exc


def run_report(swh: SWHPolynomial, cfg: RunConfig, echo=None) -> dict:
    """Run every stage; a failing stage is recorded as skipped and dependents follow."""
    fam = FamilyPolynomial(swh)
    probe = _attempt(probe_stage, swh, cfg)
    flow = _attempt(flow_stage, fam, cfg)
    eta = _attempt(eta_stage, fam, cfg)
    lp = _attempt(loop_stage, swh, cfg)
    if isinstance(lp, Exception):
        loop_obj, loop_d, growth, contacts = None, lp, lp, lp
    else:
        loop_obj, loop_d = lp
        g = _attempt(growth_stage, loop_obj, fam, cfg)
        growth = g if isinstance(g, Exception) else g[2]
        contacts = _attempt(contacts_stage, loop_obj, fam, cfg)
    verdict = verdict_section(swh, growth, contacts)
    return vd.build_report(
        swh, probe, flow, eta, loop_d, growth, contacts, verdict, echo=echo, settings=cfg.as_dict()
    )


def alpha_table(swh: SWHPolynomial) -> dict:
    w = swh.weights
    b = 1 + Fraction(w.w2, w.w3)
    return {
        **w.as_dict(),
        "identity_2k": [2 * w.alpha_a * (w.d - w.w1), 2 * w.alpha_b * (w.d - w.w2), 2 * w.alpha_c * (w.d - w.w3)],
        "upsilon_bound": vd.rational(b),
    }
