"""Hamel / strong Hamel / Funk classification and the symmetries induced by
strong Hamel functions (dual symmetries, dynamical symmetries)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import Expr, total
from .geometry import (
    LIOUVILLE_REJECT_TOL, HomogeneityError, MetricSpec, PhasePoint, SpraySpec,
    apply_field, commutator_exprs, dx, dy, dz, euler_lagrange_exprs, evaluate_at,
    homogeneity_residual, interior_symplectic, lie_derivative_exprs, liouville,
    liouville_field, nabla_covector_exprs, one_form_value, OneFormValue,
    projective_deform, spray_residual,
)
from .report import Check, Verdict

HAMEL_TOL = 1e-8
PROJECTIVE_TOL = 1e-9
PATH_TOL = 1e-6
GAUSS_NODES = 64


class PathDependenceError(ValueError):
    pass


class InconsistentReport(AssertionError):
    pass


def per_point(r, *terms) -> np.ndarray:
    """|r| / (1 + scale) per point; arrays carry points on the leading axis."""
    def flat(a):
        a = np.abs(np.asarray(a, float))
        return a.reshape(a.shape[0], -1).max(axis=1, initial=0.0)

    rr = flat(r)
    scale = np.zeros_like(rr)
    for t in terms:
        scale = np.maximum(scale, flat(t))
    return rr / (1.0 + scale)


def _check(name, r, terms, points, tol, anchor) -> Check:
    pp = per_point(r, *terms)
    return Check(name, float(pp.max(initial=0.0)), tol, anchor, len(pp), float(pp.mean()) if len(pp) else 0.0)


def _batch(points: PhasePoint) -> PhasePoint:
    return points if points.is_batch else PhasePoint(points.x[None], points.y[None])


def require_homogeneous(f: Expr, degree: float, points: PhasePoint, what: str) -> None:
    res = homogeneity_residual(f, degree, points)
    if res > LIOUVILLE_REJECT_TOL:
        raise HomogeneityError(what, degree, res)


# ---------------------------------------------------------------------------
# Hamel functions

def is_hamel(f: Expr, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> Check:
    """delta_G f = 0 at every point, f 1-homogeneous."""
    points = _batch(points)
    require_homogeneous(f, 1, points, "candidate f")
    n = s.dim
    a = evaluate_at([s.apply(dy(f, i)) for i in range(n)], points)
    b = evaluate_at([dx(f, i) for i in range(n)], points)
    return _check("hamel: delta_G f = 0", a - b, (a, b), points, tol, "hamel condition")


def closure_exprs(f: Expr, s: SpraySpec) -> list[list[Expr]]:
    """M_ij = delta/delta x^i (df/dy^j) - delta/delta x^j (df/dy^i), i.e. d_h d_J f."""
    n = s.dim
    H = [s.delta(dy(f, j)) for j in range(n)]  # H[j][i] = delta_i (f_j)
    return [[H[j][i] - H[i][j] for j in range(n)] for i in range(n)]


def dh_dJ_closure(f: Expr, s: SpraySpec, p: PhasePoint) -> np.ndarray:
    return evaluate_at(closure_exprs(f, s), p)


def closure_check(f: Expr, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> Check:
    points = _batch(points)
    n = s.dim
    H = [s.delta(dy(f, j)) for j in range(n)]
    Hv = evaluate_at(H, points)  # (m, j, i)
    M = Hv - np.swapaxes(Hv, -1, -2)
    return _check("closure: d_h d_J f = 0", M, (Hv,), points, tol, "hamel iff d_h d_J f = 0")


@dataclass
class CandidatePair:
    f: Expr
    fprime: Expr | None = None

    def validate(self, points: PhasePoint) -> None:
        require_homogeneous(self.f, 1, points, "candidate f")
        if self.fprime is not None:
            require_homogeneous(self.fprime, 0, points, "witness f'")


def flat_witness(f: Expr, points: PhasePoint, x0=None, nodes: int = GAUSS_NODES):
    """Witness for the flat spray by integrating d_J f over the segment x0 -> x.

    Returns (f'(x, y), G(f')(x, y)) per point; G(f') = y^j df'/dx^j is obtained
    by differentiating under the integral sign with exact derivatives.
    """
    points = _batch(points)
    n = points.dim
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)
    fy = [dy(f, i) for i in range(n)]
    dfy = [[dx(fy[i], j) for j in range(n)] for i in range(n)]
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    dxv = points.x - x0  # (m, n)
    val = np.zeros(len(points))
    gval = np.zeros(len(points))
    for tk, wk in zip(t, w):
        q = PhasePoint(x0 + tk * dxv, points.y)
        om = evaluate_at(fy, q)  # (m, n)
        dom = evaluate_at(dfy, q)  # (m, i, j)
        val += wk * np.einsum("mi,mi->m", om, dxv)
        gval += wk * (tk * np.einsum("mij,mj,mi->m", dom, points.y, dxv) + np.einsum("mj,mj->m", om, points.y))
    return val, gval


def is_strong_hamel(pair: CandidatePair, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> Check:
    """Hamel and f = G(f') for the supplied witness; unknown when no witness."""
    points = _batch(points)
    hamel = is_hamel(pair.f, s, points, tol)
    if pair.fprime is None:
        return Check("strong hamel: f = G(f')", float("nan"), tol, "hamel condition", len(points),
                     verdict=Verdict.UNKNOWN, note="no witness supplied")
    require_homogeneous(pair.fprime, 0, points, "witness f'")
    fv, gv = evaluate_at([pair.f, s.apply(pair.fprime)], points).T
    c = _check("strong hamel: f = G(f')", fv - gv, (fv, gv), points, tol, "hamel condition")
    if not hamel.passed:
        c.verdict = Verdict.FAIL
        c.note = "f is not Hamel"
    return c


def strong_hamel_verdict(pair: CandidatePair, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL):
    """Existential strong-Hamel verdict for f: (Check, witness status)."""
    points = _batch(points)
    hamel = is_hamel(pair.f, s, points, tol)
    if pair.fprime is not None:
        c = is_strong_hamel(pair, s, points, tol)
        if c.passed or not hamel.passed:
            return c, "supplied"
    if not hamel.passed:
        return Check("strong hamel: f = G(f')", hamel.residual, tol, "hamel condition", len(points),
                     verdict=Verdict.FAIL, note="f is not Hamel"), "absent" if pair.fprime is None else "supplied"
    if s.is_flat:
        fv = evaluate_at([pair.f], points)[:, 0]
        _, gv = flat_witness(pair.f, points)
        c = _check("strong hamel: f = G(f')", fv - gv, (fv, gv), points, tol, "hamel condition")
        c.note = "witness reconstructed by base integration of d_J f"
        if not c.passed:
            c.verdict = Verdict.UNKNOWN
        return c, "reconstructed"
    return Check("strong hamel: f = G(f')", float("nan"), tol, "hamel condition", len(points),
                 verdict=Verdict.UNKNOWN, note="witness absent or rejected; no reconstruction for non-flat sprays"), \
        "absent" if pair.fprime is None else "supplied"


def projective_invariance_check(f: Expr, s: SpraySpec, P: Expr, points: PhasePoint,
                                tol: float = PROJECTIVE_TOL) -> Check:
    """delta_{G~} f = delta_G f for G~ = G - 2PC (independent evaluations)."""
    points = _batch(points)
    require_homogeneous(f, 1, points, "candidate f")
    st = projective_deform(s, P, points)
    a = evaluate_at(euler_lagrange_exprs(f, s), points)
    b = evaluate_at(euler_lagrange_exprs(f, st), points)
    return _check("projective invariance of delta_G f", a - b, (a, b), points, tol, "projective invariance of the hamel operator")


# ---------------------------------------------------------------------------
# Funk functions

def is_weak_funk(f: Expr, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> Check:
    points = _batch(points)
    require_homogeneous(f, 1, points, "candidate f")
    g, f2 = evaluate_at([s.apply(f), f * f], points).T
    c = _check("weak funk: G(f) = f^2", g - f2, (g, f2), points, tol, "weak funk condition")
    if np.all(np.abs(evaluate_at([f], points)) < 1e-300):
        c.note = "degenerate zero candidate"
    return c


def is_funk(f: Expr, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> Check:
    points = _batch(points)
    require_homogeneous(f, 1, points, "candidate f")
    n = s.dim
    h = evaluate_at(s.delta(f), points)
    v = evaluate_at([f * dy(f, i) for i in range(n)], points)
    c = _check("funk: d_h f = f d_J f", h - v, (h, v), points, tol, "funk condition")
    if np.all(np.abs(evaluate_at([f], points)) < 1e-300):
        c.note = "degenerate zero candidate"
    return c


@dataclass
class FunkDecomposition:
    hamel: Check       # d_h f = nabla d_J f
    weak_funk: Check   # d_h f = 2 f d_J f - nabla d_J f
    funk: Check        # d_h f = f d_J f
    consistent: bool

    @property
    def pattern(self) -> tuple[bool, bool, bool]:
        return (self.hamel.passed, self.weak_funk.passed, self.funk.passed)


def funk_decomposition_check(f: Expr, s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> FunkDecomposition:
    """Evaluate d_h f, nabla d_J f and 2 f d_J f - nabla d_J f independently and
    test funk <=> (hamel and weak funk) at the verdict level."""
    points = _batch(points)
    require_homogeneous(f, 1, points, "candidate f")
    n = s.dim
    fy = [dy(f, i) for i in range(n)]
    h = evaluate_at(s.delta(f), points)
    nab = evaluate_at(nabla_covector_exprs(fy, s), points)
    fv = evaluate_at([f], points)
    fdj = fv * evaluate_at(fy, points)
    wf = 2 * fdj - nab
    hamel = _check("hamel: d_h f = nabla d_J f", h - nab, (h, nab), points, tol, "hamel condition, covariant form")
    weak = _check("weak funk: d_h f = 2f d_J f - nabla d_J f", h - wf, (h, wf, fdj), points, tol, "weak funk condition, covariant form")
    funk = _check("funk: d_h f = f d_J f", h - fdj, (h, fdj), points, tol, "funk iff hamel and weak funk")
    consistent = funk.passed == (hamel.passed and weak.passed)
    return FunkDecomposition(hamel, weak, funk, consistent)


@dataclass
class ClassificationReport:
    checks: dict
    witness: str
    samples: int
    seed: int | None = None

    def __post_init__(self):
        v = self.verdicts
        if v["funk"] is Verdict.PASS:
            if v["weak_funk"] is not Verdict.PASS:
                raise InconsistentReport("funk passed but weak funk failed")
            if self.witness != "absent" and v["strong_hamel"] is Verdict.FAIL:
                raise InconsistentReport("funk passed but strong hamel failed with a witness")

    @property
    def verdicts(self) -> dict:
        return {k: c.verdict for k, c in self.checks.items()}

    def to_dict(self) -> dict:
        return {
            "verdicts": {k: str(v) for k, v in self.verdicts.items()},
            "checks": {k: c.to_dict() for k, c in self.checks.items()},
            "witness": self.witness,
            "samples": self.samples,
            "seed": self.seed,
        }


def classify(pair: CandidatePair, s: SpraySpec, points: PhasePoint, seed: int | None = None,
             tol: float = HAMEL_TOL) -> ClassificationReport:
    points = _batch(points)
    pair.validate(points)
    strong, status = strong_hamel_verdict(pair, s, points, tol)
    checks = {
        "hamel": is_hamel(pair.f, s, points, tol),
        "strong_hamel": strong,
        "weak_funk": is_weak_funk(pair.f, s, points, tol),
        "funk": is_funk(pair.f, s, points, tol),
    }
    return ClassificationReport(checks, status, len(points), seed)


# ---------------------------------------------------------------------------
# dual and dynamical symmetries

def alpha_exprs(fprime: Expr, s: SpraySpec) -> list[Expr]:
    """alpha = (G(f'_i) - 2 N^j_i f'_j) dx^i - f'_i dy^i with f'_i = df'/dy^i."""
    n = s.dim
    phi = [dy(fprime, i) for i in range(n)]
    a = [s.apply(phi[i]) - ex.const(2.0) * total(s.N[j][i] * phi[j] for j in range(n)) for i in range(n)]
    return a + [-q for q in phi]


def alpha_exact_exprs(fprime: Expr, s: SpraySpec) -> list[Expr]:
    """d_J f - df' with f = G(f')."""
    n = s.dim
    f = s.apply(fprime)
    return [dy(f, i) - dx(fprime, i) for i in range(n)] + [-dy(fprime, i) for i in range(n)]


def alpha_form(fprime: Expr, s: SpraySpec, p: PhasePoint, tol: float = 1e-8) -> OneFormValue:
    """alpha at ``p``; also checks alpha = d_J G(f') - df' componentwise."""
    require_homogeneous(fprime, 0, _batch(p), "witness f'")
    val = one_form_value(alpha_exprs(fprime, s), p)
    other = evaluate_at(alpha_exact_exprs(fprime, s), p)
    res = per_point(_batch_arr(val.components - other, p), _batch_arr(other, p)).max()
    if res > tol:
        raise AssertionError(f"alpha expressions disagree: {res:.3e}")
    return val


def _batch_arr(a, p: PhasePoint):
    return a if p.is_batch else np.asarray(a)[None]


def alpha_torsion_exprs(m: MetricSpec, s: SpraySpec) -> list[Expr]:
    """nabla I_k dx^k - I_k delta y^k with I_k = (1/2) g^ij dg_ij/dy^k."""
    n = m.dim
    gi = m.g_inv
    I = [ex.const(0.5) * total(gi[i][j] * dy(m.g[i][j], k) for i in range(n) for j in range(n))
         for k in range(n)]
    nab = nabla_covector_exprs(I, s)
    a = [nab[k] - total(I[j] * s.N[j][k] for j in range(n)) for k in range(n)]
    return a + [-q for q in I]


@dataclass
class DualSymmetryReport:
    homogeneity: Check
    dual: Check
    strong: Check
    exact: bool

    @property
    def is_dual(self) -> bool:
        return self.homogeneity.passed and self.dual.passed

    @property
    def is_strong(self) -> bool:
        return self.is_dual and self.strong.passed


def dual_symmetry_check(alpha: list[Expr], s: SpraySpec, points: PhasePoint, tol: float = HAMEL_TOL) -> DualSymmetryReport:
    """L_C alpha = 0, L_G alpha = 0 and d_J-closedness of i_J alpha = beta_i dx^i."""
    points = _batch(points)
    n = s.dim
    C = liouville_field(n)
    lc = evaluate_at(lie_derivative_exprs(C, alpha), points)
    av = evaluate_at(alpha, points)
    hom = _check("dual symmetry: L_C alpha = 0", lc, (av,), points, tol, "dual symmetry homogeneity")

    V = s.field
    transport = [apply_field(V, alpha[a]) for a in range(2 * n)]
    twist = [total(alpha[b] * dz(V[b], n, a) for b in range(2 * n) if not alpha[b].is_zero()) for a in range(2 * n)]
    tv = evaluate_at(transport, points)
    wv = evaluate_at(twist, points)
    dual = _check("dual symmetry: L_G alpha = 0", tv + wv, (tv, wv), points, tol,
                  "dual symmetry condition")

    beta = alpha[n:]
    db = evaluate_at([[dy(beta[i], j) for j in range(n)] for i in range(n)], points)
    strong = _check("strong dual symmetry: d_J(i_J alpha) = 0", db - np.swapaxes(db, -1, -2), (db,), points, tol,
                    "strong dual symmetry condition")

    da = evaluate_at([[dz(alpha[b], n, a) for b in range(2 * n)] for a in range(2 * n)], points)
    exact = bool(per_point(da - np.swapaxes(da, -1, -2), da).max() <= tol)
    return DualSymmetryReport(hom, dual, strong, exact)


def dynamical_symmetry_exprs(fprime: Expr, m: MetricSpec, s: SpraySpec) -> tuple[list[Expr], list[Expr]]:
    """X from i_X omega_L = alpha, in the (d/dx, d/dy) frame.

    First: g^ij f'_j delta/delta x^i + g^ij nabla(f'_j) d/dy^i, expanded.
    Second: g^ij f'_j d/dx^i + g^ij G(f'_j) d/dy^i; it coincides with the
    first only where N vanishes.
    """
    n = m.dim
    gi = m.g_inv
    phi = [dy(fprime, j) for j in range(n)]
    Xh = [total(gi[i][j] * phi[j] for j in range(n)) for i in range(n)]
    nab = nabla_covector_exprs(phi, s)
    Xv = [total(gi[i][j] * nab[j] for j in range(n)) - total(s.N[i][k] * Xh[k] for k in range(n))
          for i in range(n)]
    Xv2 = [total(gi[i][j] * s.apply(phi[j]) for j in range(n)) for i in range(n)]
    return Xh + Xv, Xh + Xv2


@dataclass
class DynamicalSymmetryValue:
    X: np.ndarray
    X_second_form: np.ndarray
    form_discrepancy: float
    symplectic_residual: float


def dynamical_symmetry_field(fprime: Expr, m: MetricSpec, s: SpraySpec, p: PhasePoint) -> DynamicalSymmetryValue:
    """X at ``p`` together with the i_X omega_L = alpha residual."""
    require_homogeneous(fprime, 0, _batch(p), "witness f'")
    X1, X2 = dynamical_symmetry_exprs(fprime, m, s)
    a = evaluate_at(X1, p)
    b = evaluate_at(X2, p)
    alpha = evaluate_at(alpha_exprs(fprime, s), p)
    iX = interior_symplectic(m, s, a, p)
    disc = per_point(_batch_arr(a - b, p), _batch_arr(a, p)).max()
    sym = per_point(_batch_arr(iX - alpha, p), _batch_arr(alpha, p)).max()
    return DynamicalSymmetryValue(a, b, float(disc), float(sym))


@dataclass
class SymmetrySuiteReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_name(self, key: str) -> Check:
        for c in self.checks:
            if key in c.name:
                return c
        raise KeyError(key)


def symmetry_suite(pair: CandidatePair, m: MetricSpec, s: SpraySpec, points: PhasePoint,
                   tol: float = HAMEL_TOL) -> SymmetrySuiteReport:
    """The strong Hamel -> dual symmetry -> dynamical symmetry chain for (f, f')."""
    points = _batch(points)
    pair.validate(points)
    if pair.fprime is None:
        raise ValueError("symmetry suite needs a witness f'")
    n = m.dim
    fp = pair.fprime
    rep = SymmetrySuiteReport()
    rep.checks.append(is_hamel(pair.f, s, points, tol))
    rep.checks.append(is_strong_hamel(pair, s, points, tol))

    alpha = alpha_exprs(fp, s)
    ds = dual_symmetry_check(alpha, s, points, tol)
    rep.checks += [ds.homogeneity, ds.dual, ds.strong]

    X, _ = dynamical_symmetry_exprs(fp, m, s)
    Xv = evaluate_at(X, points)
    av = evaluate_at(alpha, points)
    br = evaluate_at(commutator_exprs(s.field, X), points)
    gx = evaluate_at([apply_field(s.field, X[a]) for a in range(2 * n)], points)
    xg = evaluate_at([apply_field(X, s.field[a]) for a in range(2 * n)], points)
    rep.checks.append(_check("dynamical symmetry: [G, X] = 0", br, (gx, xg), points, tol,
                             "strong hamel -> dynamical symmetry"))
    L = m.energy
    dL = [dz(L, n, a) for a in range(2 * n)]
    dLv = evaluate_at(dL, points)
    XL = np.einsum("ma,ma->m", Xv, dLv)
    rep.checks.append(_check("invariant vector field: X(L) = 0", XL, (Xv * dLv,), points, tol,
                             "dynamical symmetry preserves energy"))
    iX = interior_symplectic(m, s, Xv, points)
    rep.checks.append(_check("i_X omega_L = alpha", iX - av, (iX, av), points, tol, "dynamical symmetry from dual symmetry"))

    JXL = total(X[i] * dy(L, i) for i in range(n))
    cf, jx = evaluate_at([liouville(fp, n), JXL], points).T
    rep.checks.append(_check("first integral: JX(L) = C(f') = 0", jx, (cf,), points, tol,
                             "first integral of a dynamical symmetry"))
    gj = evaluate_at([s.apply(JXL)], points)
    rep.checks.append(_check("first integral: G(JX(L)) = 0", gj, (), points, tol,
                             "first integral of a dynamical symmetry"))
    return rep


def noether_quantity(fprime: Expr, m: MetricSpec, s: SpraySpec) -> Expr:
    """JX(L) = X^i dL/dy^i for the canonical X of f'."""
    X, _ = dynamical_symmetry_exprs(fprime, m, s)
    return total(X[i] * dy(m.energy, i) for i in range(m.dim))


# ---------------------------------------------------------------------------
# reconstruction of the vertical potential

def _segment_integral(beta: list[Expr], x, a, b, nodes: int) -> np.ndarray:
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    ys = a[None, :] + t[:, None] * (b - a)[None, :]
    norms = np.linalg.norm(ys, axis=1)
    if norms.min() < 1e-6:
        raise PathDependenceError("fibre path passes through the zero section")
    q = PhasePoint(np.broadcast_to(x, ys.shape).copy(), ys)
    bv = evaluate_at(beta, q)  # (nodes, n)
    return float(np.sum(w * (bv @ (b - a))))


def reconstruct_vertical_potential(alpha_or_beta: list[Expr], y0, p: PhasePoint,
                                   nodes: int = GAUSS_NODES, tol: float = PATH_TOL) -> float:
    """f'(x, y) - f'(x, y0) = -int beta_i dy^i along the fibre over x.

    Straight path and a two-segment detour are compared; disagreement beyond
    ``tol`` means beta dy is not closed on the fibre.
    """
    n = p.dim
    beta = list(alpha_or_beta[n:]) if len(alpha_or_beta) == 2 * n else list(alpha_or_beta)
    y0 = np.asarray(y0, float)
    yv = np.asarray(p.y, float)
    x = np.asarray(p.x, float)
    straight = -_segment_integral(beta, x, y0, yv, nodes)
    mid = 0.5 * (y0 + yv)
    # detour orthogonal-ish to the chord, away from the origin
    chord = yv - y0
    perp = np.zeros(n)
    k = int(np.argmin(np.abs(chord)))
    perp[k] = 1.0
    perp -= chord * (perp @ chord) / max(chord @ chord, 1e-300)
    perp /= max(np.linalg.norm(perp), 1e-300)
    scale = 0.5 * max(np.linalg.norm(chord), np.linalg.norm(y0), np.linalg.norm(yv))
    w = mid + scale * perp
    if np.linalg.norm(w) < 0.25 * scale:
        w = mid - scale * perp
    detour = -(_segment_integral(beta, x, y0, w, nodes) + _segment_integral(beta, x, w, yv, nodes))
    if abs(straight - detour) > tol * (1.0 + abs(straight)):
        raise PathDependenceError(f"fibre integral depends on the path: {straight:.6e} vs {detour:.6e}")
    return straight


# ---------------------------------------------------------------------------
# strong Hamel functions from weak Funk projective factors

@dataclass
class WeakFunkConstruction:
    checks: list
    degenerate: bool
    preconditions_ok: bool

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def strong_hamel_from_weak_funk(m_t: MetricSpec, s: SpraySpec, P: Expr, points: PhasePoint,
                                tol: float = HAMEL_TOL) -> WeakFunkConstruction:
    """F~ is strong Hamel for ``s`` with witness F~/P when the geodesic spray of
    F~ is G - 2PC and P is weak Funk: checks G(P) = P^2, G(F~) = 2 P F~ and
    G(F~/P) = F~."""
    points = _batch(points)
    Pv = evaluate_at([P], points)[:, 0]
    if np.any(np.abs(Pv) < 1e-12):
        raise ZeroDivisionError("projective factor vanishes on the sample set; F~/P undefined")
    Ft = m_t.finsler
    st = projective_deform(s, P, points)
    rel = spray_residual(m_t, st, points)
    related = Check("precondition: geodesic spray of F~ is G - 2PC", rel, tol, "strong hamel from weak funk factor",
                    len(points))
    weak = is_weak_funk(P, s, points, tol)
    weak.name = "precondition: G(P) = P^2"
    gf, two = evaluate_at([s.apply(Ft), ex.const(2.0) * P * Ft], points).T
    c2 = _check("G(F~) = 2 P F~", gf - two, (gf, two), points, tol, "strong hamel from weak funk factor")
    checks = [related, weak, c2]
    witness = Ft / P
    wv = evaluate_at([witness], points)[:, 0]
    degenerate = bool(np.ptp(wv) <= 1e-9 * (1.0 + np.abs(wv).max()))
    if not degenerate:
        require_homogeneous(witness, 0, points, "witness F~/P")
        gw, fv = evaluate_at([s.apply(witness), Ft], points).T
        checks.append(_check("G(F~/P) = F~", gw - fv, (gw, fv), points, tol, "strong hamel from weak funk factor"))
    return WeakFunkConstruction(checks, degenerate, related.passed and weak.passed)
