"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numeric failure (stage named on
stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, io, pipeline
from .errors import InputError, NumericError
from .fpflow import FlowConfig, Sign, phi
from .wpoly import sample_on_variety

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="polynomial JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $HORNGAUGE_THREADS or CPU count)")
    p.add_argument("--sign", choices=[s.value for s in Sign], default=Sign.CORRECTED.value)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.add_argument("--out", default=None, help="output file (CSV or JSON depending on the command)")


def _windows(p):
    p.add_argument("--t-min", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=1e-1)
    p.add_argument("--n-t", type=int, default=40)


def _surface(p):
    p.add_argument("--r-min", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=1e-1)
    p.add_argument("--nr", type=int, default=24)
    p.add_argument("--ntheta", type=int, default=512)
    p.add_argument("--n-arcs", type=int, default=8)
    p.add_argument("--n-t", type=int, default=40, help="samples per arc for contact fits")


def _loop(p):
    p.add_argument("--y-radius", type=float, default=0.3)
    p.add_argument("--n-steps", type=int, default=512)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horngauge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"horngauge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split f = h + theta and print the exponent table")
    _common(p)
    p = sub.add_parser("probe", help="isolated-singularity heuristic")
    _common(p)
    p.add_argument("--n-samples", type=int, default=200)
    p = sub.add_parser("flow-check", help="end-point residuals under both sign conventions")
    _common(p)
    p.add_argument("--n-samples", type=int, default=50)
    p.add_argument("--traj-out", default=None, help="CSV export of the first trajectory")
    p = sub.add_parser("eta", help="valuations of the flow correction along a weighted arc")
    _common(p)
    _windows(p)
    p = sub.add_parser("loop", help="trace the link loop; --out writes the loop CSV")
    _common(p)
    _loop(p)
    p = sub.add_parser("growth", help="volume growth of Im(H); --out writes the growth CSV")
    _common(p)
    _loop(p)
    _surface(p)
    p = sub.add_parser("contacts", help="minimum pairwise contact order of constant-theta arcs")
    _common(p)
    _loop(p)
    _surface(p)
    p = sub.add_parser("verdict", help="lower bound and conicality verdict")
    _common(p)
    p = sub.add_parser("report", help="run everything and emit one JSON document")
    _common(p)
    _windows(p)
    _loop(p)
    p.add_argument("--r-min", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=1e-1)
    p.add_argument("--nr", type=int, default=24)
    p.add_argument("--ntheta", type=int, default=512)
    p.add_argument("--n-arcs", type=int, default=8)
    return parser


def _config(a) -> pipeline.RunConfig:
    try:
        flow = FlowConfig(Sign(a.sign), a.rel_tol, a.abs_tol)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    kw = dict(seed=a.seed, threads=a.threads or pipeline.default_threads(), flow=flow)
    if hasattr(a, "t_min"):
        kw["t_window"] = (a.t_min, a.t_max)
    if hasattr(a, "n_t"):
        kw["n_t"] = a.n_t
    if hasattr(a, "r_min"):
        kw.update(r_window=(a.r_min, a.r_max), nr=a.nr, ntheta=a.ntheta, n_arcs=a.n_arcs)
    if hasattr(a, "y_radius"):
        kw.update(y_radius=a.y_radius, n_steps=a.n_steps)
    if hasattr(a, "n_samples"):
        kw["n_probe" if a.command == "probe" else "n_flow"] = a.n_samples
    try:
        return pipeline.RunConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _emit(doc, out=None):
    text = io.dumps(doc)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _run(a) -> int:
    if a.out and a.out == a.input:
        raise InputError("output path must differ from the input path")
    doc = io.load_polynomial_doc(a.input)
    swh = io.polynomial_from_doc(doc)
    cfg = _config(a)
    fam = pipeline.FamilyPolynomial(swh)
    cmd = a.command

    if cmd == "decompose":
        from .verdict import decomposition_dict

        _emit({**decomposition_dict(swh), "alpha_table": pipeline.alpha_table(swh)}, a.out)
    elif cmd == "probe":
        _emit(pipeline.probe_stage(swh, cfg), a.out)
    elif cmd == "flow-check":
        _emit(pipeline.flow_stage(fam, cfg), a.out)
        if a.traj_out:
            X0 = sample_on_variety(swh.h, swh.weights, 1, cfg.norm_range, cfg.seed)[0]
            _, traj = phi(X0, fam, cfg.flow)
            io.write_trajectory_csv(a.traj_out, traj)
    elif cmd == "eta":
        _emit(pipeline.eta_stage(fam, cfg), a.out)
    elif cmd == "verdict":
        v = pipeline.verdict_section(swh)
        _emit({"status": v.status.value, "bound": str(v.bound.bound)}, a.out)
    elif cmd == "report":
        _emit(pipeline.run_report(swh, cfg, echo=doc), a.out)
    else:
        loop, loop_d = _stage("loop", pipeline.loop_stage, swh, cfg)
        if cmd == "loop":
            if a.out:
                io.write_loop_csv(a.out, loop)
            _emit(loop_d)
        elif cmd == "growth":
            _, est, d = _stage("growth", pipeline.growth_stage, loop, fam, cfg)
            if a.out:
                io.write_growth_csv(a.out, est)
            _emit(d)
        elif cmd == "contacts":
            _emit(_stage("contacts", pipeline.contacts_stage, loop, fam, cfg))
    return EXIT_OK


class _StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {type(exc).__name__}: {exc}")
        self.exc = exc


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except NumericError as exc:
        raise _StageError(name, exc) from exc


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return _run(a)
    except InputError as exc:
        print(f"horngauge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _StageError as exc:
        print(f"horngauge: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericError as exc:
        print(f"horngauge: stage {a.command!r} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
