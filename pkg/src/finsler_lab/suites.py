"""Verification suites: each returns a list of :class:`Check` records built
from presets only, so they run with no user input."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expr as ex
from .expr import Expr, total
from .flows import drift_report, integrate_many, order_estimate, path_distance
from .geometry import (
    PhasePoint, curvature, evaluate_at, flat_spray, nonlinear_connection,
    sample_points, spray_residual,
)
from .invariants import chi_exprs, s_function_expr, tau_expr, verify_projective_laws
from .oracles import christoffel_spray_exprs, riemann_contraction
from .presets import PRESETS, berwald, conformal, euclidean, euclidean_norm, funk, funk_metric, perturbed_randers
from .report import Check, Verdict
from .symmetry import (
    CandidatePair, closure_check, dynamical_symmetry_field, funk_decomposition_check, is_funk,
    is_hamel, is_strong_hamel, is_weak_funk, noether_quantity, per_point, strong_hamel_verdict,
    projective_invariance_check, strong_hamel_from_weak_funk, symmetry_suite,
)


@dataclass(frozen=True)
class SuiteContext:
    """Run parameters.  ``dims`` lists the dimensions to exercise; ``samples``
    overrides the per-suite point counts; ``tol_scale`` multiplies every
    tolerance."""

    dims: tuple = (2, 3)
    samples: int | None = None
    seed: int = 0
    tol_scale: float = 1.0

    def count(self, default: int) -> int:
        return self.samples if self.samples is not None else default

    def tol(self, t: float) -> float:
        return t * self.tol_scale


def _residual_check(name, r, terms, points, tol, anchor, note="") -> Check:
    pp = per_point(r, *terms)
    return Check(name, float(pp.max(initial=0.0)), tol, anchor, len(pp), float(pp.mean()), note=note)


def _aggregate(name: str, ok: bool, residual: float, tol: float, anchor: str, points: int, note: str) -> Check:
    return Check(name, residual, tol, anchor, points, verdict=Verdict.PASS if ok else Verdict.FAIL, note=note)


# ---------------------------------------------------------------------------
# candidate families

def _xs(n):
    return [ex.x(i + 1) for i in range(n)]


def _ys(n):
    return [ex.y(i + 1) for i in range(n)]


def _random_poly(rng: np.random.Generator, n: int, degree: int = 3, terms: int = 4) -> Expr:
    xs = _xs(n)
    out = ex.const(round(float(rng.uniform(-1, 1)), 3))
    for _ in range(terms):
        mono = ex.const(round(float(rng.uniform(-1, 1)), 3))
        for _ in range(int(rng.integers(1, degree + 1))):
            mono = mono * xs[int(rng.integers(n))]
        out = out + mono
    return out


def candidate_family(n: int, seed: int = 0, count: int = 20) -> list[tuple[str, Expr, bool]]:
    """(label, f, hamel on the flat spray) for f = a_i(x) y^i + c |y|.

    Half the members take a = grad p (closed, hence Hamel for the flat spray);
    the other half have independent polynomial components (not closed).
    """
    rng = np.random.default_rng(seed)
    ys = _ys(n)
    norm = euclidean_norm(n)
    out = []
    for k in range(count):
        c = round(float(rng.uniform(-1, 1)), 3)
        if k % 2 == 0:
            p = _random_poly(rng, n)
            a = [ex.diff(p, "x", i + 1) for i in range(n)]
            closed = True
        else:
            a = [_random_poly(rng, n) for _ in range(n)]
            # a generic polynomial covector is not closed; force a nonzero curl
            a[0] = a[0] + ex.x(2)
            closed = False
        f = total(a[i] * ys[i] for i in range(n)) + ex.const(c) * norm
        out.append((f"{'closed' if closed else 'open'}-{k}", f, closed))
    return out


def flat_candidates(n: int, seed: int = 0) -> list[tuple[str, Expr, bool | None]]:
    """Family plus preset metrics and negative controls, with flat-spray Hamel truth."""
    norm = euclidean_norm(n)
    extra = [
        ("euclidean", norm, True),
        ("funk", funk_metric(n), True),
        ("berwald", berwald(n).metric.F, True),
        ("negative:x1*|y|", ex.x(1) * norm, False),
        ("negative:x2*y1", ex.x(2) * ex.y(1), False),
    ]
    return candidate_family(n, seed) + extra


def _ball_points(n, count, seed) -> PhasePoint:
    return funk(n).metric.samples(count, seed)


# ---------------------------------------------------------------------------
# suites

def suite_flat(ctx: SuiteContext) -> list[Check]:
    """Euclidean preset: N, R, tau, S and chi all vanish."""
    out = []
    tol = ctx.tol(1e-12)
    for n in ctx.dims:
        pre = euclidean(n)
        pts = pre.metric.samples(ctx.count(100), ctx.seed)
        s = pre.solved_spray
        N = nonlinear_connection(s, pts)
        R = curvature(s, pts).R
        tau = evaluate_at([tau_expr(pre.metric)], pts)
        S = evaluate_at([s_function_expr(pre.metric, pre.volume, s)], pts)
        chi, _ = chi_exprs(pre.metric, pre.volume, s)
        chiv = evaluate_at(chi, pts)
        for label, v in (("N", N), ("R", R), ("tau", tau), ("S", S), ("chi", chiv)):
            out.append(_residual_check(f"flat sanity n={n}: {label} = 0", v, (), pts, tol, "flat spray invariants"))
    return out


def suite_riemannian(ctx: SuiteContext) -> list[Check]:
    """Conformal preset against the Christoffel/Riemann oracle."""
    out = []
    tol = ctx.tol(1e-8)
    for n in ctx.dims:
        pre = conformal(n)
        pts = pre.metric.samples(ctx.count(50), ctx.seed)
        a = pre.riemannian_matrix()
        G1 = evaluate_at(list(pre.spray.coeffs), pts)
        G2 = evaluate_at(christoffel_spray_exprs(a), pts)
        out.append(_residual_check(f"riemannian n={n}: spray vs Christoffel oracle", G1 - G2, (G1, G2), pts, tol,
                                   "geodesic spray of a Riemannian metric"))
        R1 = curvature(pre.spray, pts).R
        R2 = riemann_contraction(a, pts)
        out.append(_residual_check(f"riemannian n={n}: curvature vs Riemann contraction", R1 - R2, (R1, R2), pts,
                                   tol, "curvature of a Riemannian spray"))
        out.append(_residual_check(f"riemannian n={n}: curvature is nonzero (control)", R1, (), pts, 1e-3,
                                   "curvature of a Riemannian spray").expect_fail())
    return out


def suite_spray(ctx: SuiteContext) -> list[Check]:
    """i_G dd_J L + dL = 0 for every preset, on the preset spray and the solved one."""
    out = []
    tol = ctx.tol(1e-9)
    for n in ctx.dims:
        for name, make in PRESETS.items():
            pre = make(n)
            pts = pre.metric.samples(ctx.count(50), ctx.seed)
            for label, s in (("preset spray", pre.spray), ("solved spray", pre.solved_spray)):
                r = spray_residual(pre.metric, s, pts)
                out.append(Check(f"spray equation n={n} {name} ({label})", r, tol,
                                 "geodesic spray defining equation", len(pts)))
        pre = funk(n)
        pts = pre.metric.samples(ctx.count(50), ctx.seed)
        r = spray_residual(pre.metric, flat_spray(n), pts)
        out.append(Check(f"spray equation n={n} funk with the flat spray (control)", r, tol,
                         "geodesic spray defining equation", len(pts)).expect_fail())
    return out


def suite_projective(ctx: SuiteContext) -> list[Check]:
    """delta_G f is unchanged by G -> G - 2PC with P = Funk/2."""
    out = []
    tol = ctx.tol(1e-9)
    for n in ctx.dims:
        pts = _ball_points(n, ctx.count(50), ctx.seed)
        P = ex.const(0.5) * funk_metric(n)
        bases = (("flat", flat_spray(n)), ("conformal", conformal(n).spray))
        for base_name, s in bases:
            worst = 0.0
            ok = True
            fam = candidate_family(n, ctx.seed, 20)
            for label, f, _ in fam:
                c = projective_invariance_check(f, s, P, pts, tol)
                worst = max(worst, c.residual)
                ok &= c.passed
            out.append(_aggregate(f"projective invariance n={n} on {base_name} spray ({len(fam)} candidates)",
                                  ok, worst, tol, "projective invariance of the hamel operator", len(pts),
                                  "worst residual over the candidate family"))
    return out


def suite_djdhf(ctx: SuiteContext) -> list[Check]:
    """verdict(delta_G f = 0) == verdict(d_h d_J f = 0) on the candidate family."""
    out = []
    tol = ctx.tol(1e-8)
    for n in ctx.dims:
        sprays = (("flat", flat_spray(n), _ball_points(n, ctx.count(50), ctx.seed)),
                  ("conformal", conformal(n).spray, conformal(n).metric.samples(ctx.count(50), ctx.seed)))
        for sname, s, pts in sprays:
            cands = flat_candidates(n, ctx.seed)
            if sname == "conformal":
                cands = cands + [("conformal F", conformal(n).metric.finsler, True)]
            mismatches, hamel_count, truth_errors = [], 0, []
            for label, f, truth in cands:
                h = is_hamel(f, s, pts, tol)
                c = closure_check(f, s, pts, tol)
                hamel_count += h.passed
                if h.passed != c.passed:
                    mismatches.append(label)
                if sname == "flat" and truth is not None and truth != h.passed:
                    truth_errors.append(label)
            note = (f"{hamel_count}/{len(cands)} hamel; mismatches: {', '.join(mismatches) or 'none'}")
            ok = not mismatches and 0 < hamel_count < len(cands)
            out.append(_aggregate(f"hamel iff d_h d_J f = 0, n={n} on {sname} spray", ok, float(len(mismatches)),
                                  0.0, "hamel iff d_h d_J f = 0", len(pts), note))
            if sname == "flat":
                out.append(_aggregate(f"hamel verdicts match ground truth, n={n} flat", not truth_errors,
                                      float(len(truth_errors)), 0.0, "hamel condition", len(pts),
                                      f"wrong: {', '.join(truth_errors) or 'none'}"))
    return out


def _flat_fixture(n: int) -> CandidatePair:
    xs, ys = _xs(n), _ys(n)
    norm = euclidean_norm(n)
    return CandidatePair(norm, total(a * b for a, b in zip(xs, ys)) / norm)


def suite_shf(ctx: SuiteContext) -> list[Check]:
    """Strong hamel -> dual symmetry -> dynamical symmetry on the flat fixture."""
    out = []
    tol = ctx.tol(1e-8)
    for n in ctx.dims:
        pre = euclidean(n)
        s = flat_spray(n)
        pts = pre.metric.samples(ctx.count(50), ctx.seed)
        pair = _flat_fixture(n)
        rep = symmetry_suite(pair, pre.metric, s, pts, tol)
        for c in rep.checks:
            c.name = f"n={n} {c.name}"
            out.append(c)
        v = dynamical_symmetry_field(pair.fprime, pre.metric, s, pts)
        out.append(Check(f"n={n} both forms of X agree on the flat spray", v.form_discrepancy, tol,
                         "dynamical symmetry from dual symmetry", len(pts)))
        neg = is_hamel(ex.x(1) * pair.f, s, pts, tol).expect_fail()
        neg.name = f"n={n} negative control x1*|y| is not hamel"
        out.append(neg)
        # converse direction: alpha built from a non-trivial f' on the Berwald pair
        bw = berwald(n)
        bpts = bw.metric.samples(ctx.count(50), ctx.seed)
        cons = strong_hamel_from_weak_funk(bw.metric, s, funk_metric(n), bpts, tol)
        for c in cons.checks:
            c.name = f"n={n} berwald: {c.name}"
            out.append(c)
        out.append(_aggregate(f"n={n} berwald witness is non-degenerate", not cons.degenerate, 0.0, 0.0,
                              "strong hamel from weak funk factor", len(bpts), "witness B/P is not constant"))
    return out


def suite_noether(ctx: SuiteContext) -> list[Check]:
    """JX(L) vanishes identically and G(JX(L)) = 0 along integrated geodesics."""
    out = []
    tol = ctx.tol(1e-10)
    for n in ctx.dims:
        pre = euclidean(n)
        s = flat_spray(n)
        pair = _flat_fixture(n)
        J = noether_quantity(pair.fprime, pre.metric, s)
        GJ = s.apply(J)
        init = pre.metric.samples(10, ctx.seed + 1)
        trs = integrate_many(s, init, 1e-3, 1.0, {"JXL": J, "G(JXL)": GJ})
        full = all(not t.stop_reason for t in trs)
        drift = max(drift_report(t, "JXL").max_drift for t in trs)
        level = max(float(np.abs(t.monitors["JXL"]).max()) for t in trs)
        gval = max(float(np.abs(t.monitors["G(JXL)"]).max()) for t in trs)
        out.append(_aggregate(f"n={n} JX(L) drift along 10 geodesics", full and drift <= tol, drift, tol,
                              "first integral of a dynamical symmetry", len(trs), "T=1, h=1e-3"))
        out.append(_aggregate(f"n={n} JX(L) = 0 along 10 geodesics", full and level <= tol, level, tol,
                              "first integral of a dynamical symmetry", len(trs), "T=1, h=1e-3"))
        out.append(_aggregate(f"n={n} G(JX(L)) = 0 along 10 geodesics", full and gval <= tol, gval, tol,
                              "first integral of a dynamical symmetry", len(trs), "T=1, h=1e-3"))
    return out


def suite_schi(ctx: SuiteContext) -> list[Check]:
    """S~ = S + (n+1)P and chi~ = chi + (n+1)/2 delta_G P on (flat, Funk)."""
    out = []
    for n in ctx.dims:
        eu, fk = euclidean(n), funk(n)
        pts = fk.metric.samples(ctx.count(50), ctx.seed)
        P = ex.const(0.5) * fk.metric.F
        rep = verify_projective_laws(eu.metric, flat_spray(n), fk.metric, P, pts)
        out.append(Check(f"n={n} flat/funk: S~ = S + (n+1)P", rep.residuals["S_law"], ctx.tol(1e-6),
                         "projective law for S", len(pts)))
        out.append(Check(f"n={n} flat/funk: chi~ = chi + (n+1)/2 delta_G P", rep.residuals["chi_law"],
                         ctx.tol(1e-6), "projective law for chi", len(pts)))
        out.append(Check(f"n={n} flat/funk: P recovered from connection traces", rep.residuals["trace_recovery"],
                         ctx.tol(1e-8), "projective factor from connection traces", len(pts)))
        out.append(Check(f"n={n} flat/funk: sprays are projectively related", rep.residuals["projective_relation"],
                         ctx.tol(1e-8), "geodesic spray defining equation", len(pts)))
    return out


def suite_funk(ctx: SuiteContext) -> list[Check]:
    """Funk metric on the flat spray and the funk <=> hamel + weak funk biconditional."""
    out = []
    tol = ctx.tol(1e-8)
    for n in ctx.dims:
        s = flat_spray(n)
        F = funk_metric(n)
        pts = _ball_points(n, ctx.count(50), ctx.seed)
        for fn in (is_funk, is_weak_funk, is_hamel):
            c = fn(F, s, pts, tol)
            c.name = f"n={n} funk metric: {c.name}"
            out.append(c)
        c, status = strong_hamel_verdict(CandidatePair(F), s, pts, tol)
        c.name = f"n={n} funk metric: {c.name} ({status} witness)"
        out.append(c)
        cands = flat_candidates(n, ctx.seed)
        bad, funks = [], 0
        for label, f, _ in cands:
            d = funk_decomposition_check(f, s, pts, tol)
            funks += d.funk.passed
            if not d.consistent:
                bad.append(label)
        out.append(_aggregate(f"n={n} funk iff hamel and weak funk ({len(cands)} candidates)", not bad and funks > 0,
                              float(len(bad)), 0.0, "funk iff hamel and weak funk", len(pts),
                              f"{funks} funk; inconsistent: {', '.join(bad) or 'none'}"))
        neg = is_funk(ex.x(1) * euclidean_norm(n), s, pts, tol).expect_fail()
        neg.name = f"n={n} negative control x1*|y| is not funk"
        out.append(neg)
        half = strong_hamel_from_weak_funk(funk(n).metric, s, ex.const(0.5) * F, pts, tol)
        pre = half.checks[1].expect_fail("P = F/2 is not weak funk for the flat spray: G(P) = 2P^2")
        pre.name = f"n={n} funk with P = F/2: weak funk precondition rejected"
        out.append(pre)
    return out


def _chi_fixtures(n: int):
    eu, cf, fk, pr = euclidean(n), conformal(n), funk(n), perturbed_randers(n)
    return ((eu, True), (cf, True), (fk, True), (pr, False))


def suite_chi(ctx: SuiteContext) -> list[Check]:
    """chi = 0 exactly when S is strong hamel with witness tau."""
    out = []
    tol = ctx.tol(1e-8)
    for n in ctx.dims:
        for pre, zero in _chi_fixtures(n):
            pts = pre.metric.samples(ctx.count(50), ctx.seed)
            s = pre.spray
            chi, _ = chi_exprs(pre.metric, pre.volume, s)
            cv = evaluate_at(chi, pts)
            chi_check = _residual_check(f"n={n} {pre.name}: chi = 0", cv, (), pts, tol, "chi-curvature")
            S = s_function_expr(pre.metric, pre.volume, s)
            tau = tau_expr(pre.metric, pre.volume)
            sh = is_strong_hamel(CandidatePair(S, tau), s, pts, tol)
            sh.name = f"n={n} {pre.name}: S strong hamel with witness tau"
            coherent = chi_check.passed == sh.passed == zero
            if not zero:
                chi_check = chi_check.expect_fail("negative fixture: chi must not vanish")
                chi_check.name = f"n={n} {pre.name}: chi != 0"
                sh = sh.expect_fail("negative fixture: S must not be strong hamel")
                sh.name = f"n={n} {pre.name}: S not strong hamel"
            out += [chi_check, sh]
            out.append(_aggregate(f"n={n} {pre.name}: chi = 0 iff S strong hamel", coherent, 0.0, 0.0,
                                  "chi vanishes iff S is strong hamel", len(pts),
                                  "expected chi = 0" if zero else "expected chi != 0"))
    return out


def _flow_inits(pre, count: int, seed: int) -> PhasePoint:
    p = pre.metric.samples(count, seed)
    return PhasePoint(p.x, p.y / np.linalg.norm(p.y, axis=1, keepdims=True))


def suite_flows(ctx: SuiteContext) -> list[Check]:
    """Energy conservation, RK4 order and projective path agreement."""
    out = []
    tol = ctx.tol(1e-6)
    for n in ctx.dims:
        for name, make in PRESETS.items():
            pre = make(n)
            init = _flow_inits(pre, 5, ctx.seed)
            trs = integrate_many(pre.spray, init, 1e-3, 1.0, {"L": pre.metric.energy})
            stopped = [t.stop_reason for t in trs if t.stop_reason]
            drift = max(drift_report(t, "L").relative_drift for t in trs)
            out.append(_aggregate(f"n={n} energy drift on {name}", not stopped and drift <= tol, drift, tol,
                                  "energy is conserved by the geodesic spray", len(trs),
                                  "; ".join(stopped) or "T=1, h=1e-3"))
        cf = conformal(n)
        init = PhasePoint(np.full(n, 0.1), np.linspace(1.0, 0.5, n))
        e1, e2, ratio = order_estimate(cf.spray, init, 1.0, 0.1, 1e-4)
        out.append(_aggregate(f"n={n} RK4 order on conformal", 8.0 <= ratio <= 32.0, abs(np.log2(ratio) - 4.0),
                              1.0, "plumbing", 1, f"error ratio {ratio:.2f} for h=0.1 vs 0.05 (ideal 16)"))
        fk = funk(n)
        init = _flow_inits(fk, 5, ctx.seed + 2)
        init = PhasePoint(init.x, 0.5 * init.y)
        a = integrate_many(flat_spray(n), init, 1e-3, 1.0)
        b = integrate_many(fk.spray, init, 1e-3, 1.0)
        dist = max(path_distance(p, q) for p, q in zip(a, b))
        stopped = [t.stop_reason for t in a + b if t.stop_reason]
        out.append(_aggregate(f"n={n} flat/funk unparameterized paths agree", not stopped and dist <= ctx.tol(1e-4),
                              dist, ctx.tol(1e-4), "projectively related sprays share paths", len(a),
                              "; ".join(stopped) or "arc-length comparison"))
    return out


# ---------------------------------------------------------------------------
# expression core

_UNARY = ("sin", "cos", "exp_bounded", "sqrt_pos", "log_pos", "square")


def random_expr(rng: np.random.Generator, n: int, depth: int = 4) -> Expr:
    """Random smooth expression in x1..xn, y1..yn, defined everywhere."""
    if depth <= 0 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.25:
            return ex.const(round(float(rng.uniform(-2, 2)), 3))
        kind = "x" if rng.random() < 0.5 else "y"
        return ex.var(kind, int(rng.integers(1, n + 1)))
    if rng.random() < 0.6:
        a = random_expr(rng, n, depth - 1)
        b = random_expr(rng, n, depth - 1)
        op = rng.choice(["+", "-", "*", "/"])
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / (ex.const(1.5) + b * b)
    a = random_expr(rng, n, depth - 1)
    u = rng.choice(_UNARY)
    if u == "sin":
        return ex.sin(a)
    if u == "cos":
        return ex.cos(a)
    if u == "exp_bounded":
        return ex.exp(ex.sin(a))
    if u == "sqrt_pos":
        return ex.sqrt(ex.ONE + a * a)
    if u == "log_pos":
        return ex.log(ex.const(2.0) + ex.cos(a))
    return a ** 2


def _fd(e: Expr, z: np.ndarray, n: int, k: int, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central difference (Richardson on two step sizes)."""
    def f(zz):
        return ex.evaluate_many([e], zz[:, :n], zz[:, n:])[0]

    def cd(step):
        zp, zm = z.copy(), z.copy()
        zp[:, k] += step
        zm[:, k] -= step
        return (f(zp) - f(zm)) / (2 * step)

    return (4.0 * cd(h / 2) - cd(h)) / 3.0


def suite_expr(ctx: SuiteContext, count: int = 1000) -> list[Check]:
    """Symbolic derivatives against finite differences; mixed partials commute."""
    n = 2
    rng = np.random.default_rng(ctx.seed)
    pts = sample_points(n, 4, ctx.seed)
    z = np.hstack([pts.x, pts.y])
    tol_fd, tol_mix = ctx.tol(1e-5), ctx.tol(1e-10)
    worst_fd = worst_mix = 0.0
    names = [("x", i) for i in range(1, n + 1)] + [("y", i) for i in range(1, n + 1)]
    for _ in range(count):
        e = random_expr(rng, n)
        k = int(rng.integers(2 * n))
        kind, idx = names[k]
        d = ex.evaluate_many([ex.diff(e, kind, idx)], pts.x, pts.y)[0]
        fd = _fd(e, z, n, k)
        worst_fd = max(worst_fd, float(np.max(np.abs(d - fd) / np.maximum(1.0, np.abs(d)))))
        a, b = names[int(rng.integers(2 * n))], names[int(rng.integers(2 * n))]
        m1 = ex.diff(ex.diff(e, *a), *b)
        m2 = ex.diff(ex.diff(e, *b), *a)
        v1, v2 = ex.evaluate_many([m1, m2], pts.x, pts.y)
        worst_mix = max(worst_mix, float(np.max(np.abs(v1 - v2) / np.maximum(1.0, np.abs(v1)))))
    return [
        Check(f"derivatives vs finite differences ({count} random expressions)", worst_fd, tol_fd, "plumbing",
              len(pts) * count),
        Check(f"mixed partials commute ({count} random expressions)", worst_mix, tol_mix, "plumbing",
              len(pts) * count),
    ]


SUITES: dict[str, tuple[int, Callable[[SuiteContext], list[Check]]]] = {
    "flat": (1, suite_flat),
    "riemannian": (2, suite_riemannian),
    "spray": (3, suite_spray),
    "projective": (4, suite_projective),
    "djdhf": (5, suite_djdhf),
    "shf": (6, suite_shf),
    "noether": (7, suite_noether),
    "schi": (8, suite_schi),
    "funk": (9, suite_funk),
    "chi": (10, suite_chi),
    "flows": (11, suite_flows),
    "expr": (12, suite_expr),
}


def run_suite(name: str, ctx: SuiteContext) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return SUITES[name][1](ctx)
