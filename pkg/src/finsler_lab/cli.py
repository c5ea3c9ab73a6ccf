"""Command-line front end: ``finsler-lab {analyze,classify,verify,geodesic}``.

Exit codes: 0 all checks passed, 1 some check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import expr as ex
from .flows import DomainExitError, StepTooLargeError, drift_report, integrate
from .geometry import (
    HomogeneityError, PhasePoint, SlitConditionError, curvature, evaluate_at,
    homogeneity_residual, metric_tensor, nonlinear_connection, spray_residual,
)
from .invariants import chi_exprs, s_function_expr, tau_expr
from .presets import PRESETS, get_preset
from .report import Check, Report
from .specfile import SpecError, SpecFile, load_spec
from .suites import SUITES, SuiteContext, run_suite
from .symmetry import CandidatePair, classify, per_point

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _round(a):
    """Nested lists of floats with 12 significant digits (stable across runs)."""
    a = np.asarray(a, float)
    if a.ndim == 0:
        return float(f"{float(a):.12e}")
    return [_round(v) for v in a]


def _threads() -> int:
    raw = os.environ.get("FINSLER_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"FINSLER_LAB_THREADS must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# model loading

class Model:
    """Metric, spray, volume and optional candidates from a spec file or preset."""

    def __init__(self, args):
        if bool(args.spec) == bool(args.preset):
            raise InputError("give a spec file or --preset (exactly one)")
        if args.spec:
            spec: SpecFile = load_spec(args.spec)
            self.metric, self.spray, self.volume = spec.metric, spec.spray, spec.volume
            self.f, self.fprime, self.P = spec.f, spec.fprime, spec.P
            self.seed = spec.seed if args.seed is None else args.seed
            self.samples = spec.samples
            self.digest = spec.digest
            self.dim = spec.dim
            if args.dim is not None and args.dim != spec.dim:
                raise InputError(f"--dim {args.dim} conflicts with dim = {spec.dim} in the spec file")
        else:
            n = args.dim or 2
            pre = get_preset(args.preset, n)
            self.metric, self.spray, self.volume = pre.metric, pre.spray, pre.volume
            self.f = self.fprime = self.P = None
            self.seed = args.seed or 0
            self.samples = 50
            self.digest = _digest(f"preset:{args.preset}:dim={n}")
            self.dim = n
        if getattr(args, "f", None):
            self.f = _parse_arg(args.f, self.dim, "--f")
        if getattr(args, "fprime", None):
            self.fprime = _parse_arg(args.fprime, self.dim, "--fprime")
        if args.samples is not None:
            self.samples = args.samples

    def points(self, count=None):
        return self.metric.samples(count or self.samples, self.seed)


def _parse_arg(text: str, dim: int, flag: str):
    try:
        return ex.parse(text, dim)
    except ex.ParseError as err:
        raise InputError(f"{flag}: {err}") from None


def _vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise InputError(f"{what} must be numbers, got {text!r}") from None
    if len(v) != n:
        raise InputError(f"{what} needs {n} components, got {len(v)}")
    return v


def _point(text: str, n: int) -> PhasePoint:
    if ";" not in text:
        raise InputError(f"point must be 'x1,..,xn;y1,..,yn', got {text!r}")
    xs, ys = text.split(";", 1)
    return PhasePoint(_vector(xs, n, "point x"), _vector(ys, n, "point y"))


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(args) -> Report:
    model = Model(args)
    n = model.dim
    if args.point:
        pts = [_point(t, n) for t in args.point]
        batch = PhasePoint(np.array([p.x for p in pts]), np.array([p.y for p in pts]))
    else:
        batch = model.points(args.samples or 5)
    rep = Report(__version__, model.digest, "analyze")
    res = homogeneity_residual(model.metric.finsler, 1, batch)
    rep.checks.append(Check("F is 1-homogeneous", res, args.tol_scale * 1e-6, "fibre homogeneity", len(batch)))
    rep.checks.append(Check("spray equation i_G dd_J L + dL = 0", spray_residual(model.metric, model.spray, batch),
                            args.tol_scale * 1e-9, "geodesic spray defining equation", len(batch)))
    mt = metric_tensor(model.metric, batch)
    chi_a, chi_b = chi_exprs(model.metric, model.volume, model.spray)
    ca, cb = evaluate_at(chi_a, batch), evaluate_at(chi_b, batch)
    rep.checks.append(Check("chi routes agree", float(per_point(ca - cb, ca, cb).max()), args.tol_scale * 1e-8,
                            "chi-curvature", len(batch)))
    tau = evaluate_at([tau_expr(model.metric, model.volume)], batch)[:, 0]
    S = evaluate_at([s_function_expr(model.metric, model.volume, model.spray)], batch)[:, 0]
    G = evaluate_at(list(model.spray.coeffs), batch)
    N = nonlinear_connection(model.spray, batch)
    R = curvature(model.spray, batch).R
    rep.data["points"] = [
        {"x": _round(batch.x[k]), "y": _round(batch.y[k]), "g": _round(mt.g[k]), "G": _round(G[k]),
         "N": _round(N[k]), "R": _round(R[k]), "tau": _round(tau[k]), "S": _round(S[k]), "chi": _round(ca[k]),
         "cond_g": _round(mt.cond[k])}
        for k in range(len(batch))
    ]
    return rep


def cmd_classify(args) -> Report:
    model = Model(args)
    if model.f is None:
        raise InputError("classify needs a candidate f (spec [candidates] f or --f)")
    pts = model.points()
    pair = CandidatePair(model.f, model.fprime)
    try:
        cr = classify(pair, model.spray, pts, model.seed, args.tol_scale * 1e-8)
    except HomogeneityError as err:
        raise InputError(str(err)) from None
    rep = Report(__version__, model.digest, "classify")
    rep.checks = list(cr.checks.values())
    rep.data = {"verdicts": {k: str(v) for k, v in cr.verdicts.items()}, "witness": cr.witness,
                "samples": cr.samples, "seed": cr.seed}
    return rep


def cmd_verify(args) -> Report:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    dims = (args.dim,) if args.dim else (2, 3)
    ctx = SuiteContext(dims, args.samples, args.seed or 0, args.tol_scale)
    rep = Report(__version__, _digest(f"verify:{args.suite}:{dims}:{ctx.seed}:{ctx.samples}:{ctx.tol_scale}"),
                 f"verify {args.suite}", timings={} if args.timings else None)

    def job(name):
        t0 = time.perf_counter()
        checks = run_suite(name, ctx)
        return name, checks, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=min(_threads(), len(names))) as pool:
        results = list(pool.map(job, names))
    for name, checks, dt in results:
        for c in checks:
            c.name = f"[{name}] {c.name}"
        rep.checks += checks
        if rep.timings is not None:
            rep.timings[name] = dt
    rep.data["suites"] = {name: all(c.passed for c in checks) for name, checks, _ in results}
    return rep


def cmd_geodesic(args) -> Report:
    model = Model(args)
    n = model.dim
    try:
        init = PhasePoint(_vector(args.x0, n, "--x0"), _vector(args.y0, n, "--y0"))
    except SlitConditionError as err:
        raise InputError(str(err)) from None
    monitors = {"L": model.metric.energy, "F": model.metric.finsler}
    for item in args.monitor or []:
        name, sep, text = item.partition("=")
        if not sep or not name.strip():
            raise InputError(f"monitor must be NAME=EXPR, got {item!r}")
        monitors[name.strip()] = _parse_arg(text, n, f"--monitor {name.strip()}")
    dom = model.metric.domain if args.clip else None
    try:
        traj = integrate(model.spray, init, args.h, args.T, monitors, domain=dom)
    except (DomainExitError, StepTooLargeError) as err:
        raise InputError(str(err)) from None
    rep = Report(__version__, model.digest, "geodesic")
    tol = args.tol_scale * 1e-6
    for name in sorted(monitors):
        d = drift_report(traj, name, tol)
        if name in ("L", "F"):
            rep.checks.append(Check(f"relative drift of {name}", d.relative_drift, tol,
                                    "energy is conserved by the geodesic spray", len(traj)))
        rep.data.setdefault("drift", {})[name] = {
            "max": _round(d.max_drift), "relative": _round(d.relative_drift),
            "first_exceed_time": None if d.first_exceed_time is None else _round(d.first_exceed_time)}
    rep.data["steps"] = len(traj) - 1
    rep.data["final"] = {"t": _round(traj.t[-1]), "x": _round(traj.x[-1]), "y": _round(traj.y[-1])}
    if traj.stop_reason:
        rep.data["stopped"] = traj.stop_reason
    if args.csv:
        traj.write_csv(args.csv)
        rep.data["csv"] = str(args.csv)
    return rep


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, help="dimension n (presets and verify)")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--samples", type=int, help="number of sample points")
    common.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance (default 1)")
    common.add_argument("--out", help="write the report to this path instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("spec", nargs="?", help="metric spec file")
    source.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in metric instead of a spec file")

    p = argparse.ArgumentParser(prog="finsler-lab", description="Spray and Finsler geometry verification tool.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common, source], help="evaluate g, G, N, R, tau, S, chi")
    a.add_argument("--point", action="append", help="'x1,..,xn;y1,..,yn' (repeatable); default: sample points")

    c = sub.add_parser("classify", parents=[common, source], help="hamel / strong hamel / funk verdicts")
    c.add_argument("--f", help="candidate f (overrides the spec file)")
    c.add_argument("--fprime", help="witness f' (overrides the spec file)")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=list(SUITES) + ["all"])

    g = sub.add_parser("geodesic", parents=[common, source], help="integrate a geodesic and monitor drift")
    g.add_argument("--x0", required=True, help="initial position, comma separated")
    g.add_argument("--y0", required=True, help="initial velocity, comma separated")
    g.add_argument("--h", type=float, default=1e-3, help="step (default 1e-3)")
    g.add_argument("--T", type=float, default=1.0, help="horizon (default 1)")
    g.add_argument("--monitor", action="append", help="NAME=EXPR scalar to log (repeatable); L and F always")
    g.add_argument("--csv", help="write the trajectory as CSV")
    g.add_argument("--clip", action="store_true", help="stop when leaving the metric's x-domain")
    return p


COMMANDS = {"analyze": cmd_analyze, "classify": cmd_classify, "verify": cmd_verify, "geodesic": cmd_geodesic}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.samples is not None and args.samples < 1:
        print("finsler-lab: --samples must be positive", file=sys.stderr)
        return EXIT_INPUT
    if args.dim is not None and args.dim < 2:
        print("finsler-lab: --dim must be at least 2", file=sys.stderr)
        return EXIT_INPUT
    if args.tol_scale <= 0:
        print("finsler-lab: --tol-scale must be positive", file=sys.stderr)
        return EXIT_INPUT
    t0 = time.perf_counter()
    try:
        rep = COMMANDS[args.command](args)
    except (InputError, SpecError, SlitConditionError, HomogeneityError, ex.ParseError) as err:
        print(f"finsler-lab: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.timings:
        rep.timings = dict(rep.timings or {})
        rep.timings["total"] = time.perf_counter() - t0
    text = rep.to_json() if args.format == "json" else rep.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "classify":
        # verdicts are results, not failures
        return EXIT_OK
    return EXIT_OK if rep.all_passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
