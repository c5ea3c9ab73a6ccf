"""Spray geometry on the slit tangent bundle.

Every quantity is first built as a list of :class:`~finsler_lab.expr.Expr`
(exact derivatives, no finite differences) and then evaluated on a single
:class:`PhasePoint` or on a batch of points.  Batch results carry the points
on the leading axis.

Conventions: the spray vector field is ``G = y^i d/dx^i - 2 G^i d/dy^i``,
``N^i_j = dG^i/dy^j``, ``delta/delta x^i = d/dx^i - N^j_i d/dy^j`` and the
curvature entry ``R[i][j][k] = delta N^i_k / delta x^j - delta N^i_j / delta x^k``.
Vector fields and 1-forms on TM are lists of 2n components ordered
``(x1..xn, y1..yn)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from . import expr as ex
from .expr import Expr, ZERO, diff, total

MIN_FIBRE_NORM = 1e-8
LIOUVILLE_REJECT_TOL = 1e-6


class SlitConditionError(ValueError):
    pass


class HomogeneityError(ValueError):
    def __init__(self, what: str, degree: float, residual: float):
        self.residual = residual
        super().__init__(
            f"{what} fails the degree-{degree:g} Liouville test: residual {residual:.3e}"
            f" > {LIOUVILLE_REJECT_TOL:g}")


class SingularMetricError(ArithmeticError):
    pass


class GeodesicSprayError(ValueError):
    pass


# ---------------------------------------------------------------------------
# points and sampling

@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point (x, y) of T_0M, or a batch of them when ``x`` is 2-D (m, n)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        ys = np.asarray(self.y, dtype=float)
        if xs.shape != ys.shape or xs.ndim not in (1, 2):
            raise ValueError(f"x and y shapes differ or are not 1-D/2-D: {xs.shape}, {ys.shape}")
        if xs.shape[-1] < 2:
            raise ValueError("dimension must be at least 2")
        norms = np.linalg.norm(np.atleast_2d(ys), axis=1)
        if np.any(norms < MIN_FIBRE_NORM):
            raise SlitConditionError(f"fibre coordinate y too close to the zero section (|y| = {norms.min():.2e})")
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", ys)

    @property
    def dim(self) -> int:
        return self.x.shape[-1]

    @property
    def is_batch(self) -> bool:
        return self.x.ndim == 2

    def __len__(self):
        return self.x.shape[0] if self.is_batch else 1

    def __getitem__(self, k) -> "PhasePoint":
        if not self.is_batch:
            raise TypeError("single point is not indexable")
        return PhasePoint(self.x[k], self.y[k])

    def scaled(self, lam: float) -> "PhasePoint":
        """Same base point, fibre coordinate multiplied by ``lam``."""
        return PhasePoint(self.x, lam * self.y)


@dataclass(frozen=True)
class SampleDomain:
    x_min: tuple
    x_max: tuple
    lam_range: tuple = (0.5, 2.0)

    @classmethod
    def box(cls, dim: int, half_width: float = 0.5) -> "SampleDomain":
        return cls((-half_width,) * dim, (half_width,) * dim)


def sample_points(dim: int, count: int, seed: int = 0, domain: SampleDomain | None = None) -> PhasePoint:
    """Deterministic scrambled-Halton points: x in a box, y on a scaled sphere."""
    domain = domain or SampleDomain.box(dim)
    u = qmc.Halton(d=2 * dim + 1, scramble=True, seed=seed).random(count)
    lo, hi = np.asarray(domain.x_min, float), np.asarray(domain.x_max, float)
    xs = lo + u[:, :dim] * (hi - lo)
    g = ndtri(np.clip(u[:, dim:2 * dim], 1e-9, 1 - 1e-9))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    lam_lo, lam_hi = domain.lam_range
    lam = lam_lo + u[:, -1:] * (lam_hi - lam_lo)
    return PhasePoint(xs, g * lam)


def evaluate_at(exprs, p: PhasePoint) -> np.ndarray:
    """Evaluate a (nested) array of Exprs; points go on the leading axis."""
    arr = np.asarray(exprs, dtype=object)
    flat = [e if isinstance(e, Expr) else ex.const(e) for e in arr.ravel()]
    vals = ex.evaluate_many(flat, p.x, p.y)  # (k, m)
    out = vals.T.reshape((vals.shape[1],) + arr.shape)
    return out if p.is_batch else out[0]


def max_normalized(r, *terms, batch: bool = True) -> float:
    """Largest |r| / (1 + scale) over points, scale = largest |term| at the point.

    With ``batch`` the leading axis of every array indexes points; trailing
    axes are components.
    """
    def per_point(a):
        a = np.abs(np.asarray(a, float))
        if not batch:
            a = a[None]
        return a.reshape(a.shape[0], -1).max(axis=1, initial=0.0)

    rr = per_point(r)
    scale = np.zeros_like(rr)
    for t in terms:
        scale = np.maximum(scale, per_point(t))
    return float(np.max(rr / (1.0 + scale), initial=0.0))


# ---------------------------------------------------------------------------
# symbolic helpers

def zvar(n: int, a: int) -> tuple[str, int]:
    """Coordinate ``a`` of z = (x1..xn, y1..yn) as a (kind, index) pair."""
    return ("x", a + 1) if a < n else ("y", a - n + 1)


def dz(e: Expr, n: int, a: int) -> Expr:
    kind, idx = zvar(n, a)
    return diff(e, kind, idx)


def dy(e: Expr, i: int) -> Expr:
    """d/dy^(i+1), 0-based index."""
    return diff(e, "y", i + 1)


def dx(e: Expr, i: int) -> Expr:
    return diff(e, "x", i + 1)


def apply_field(V: Sequence[Expr], f: Expr) -> Expr:
    """V(f) for a vector field with 2n components."""
    n = len(V) // 2
    return total(ex.mul(V[a], dz(f, n, a)) for a in range(2 * n) if not V[a].is_zero())


def liouville_field(n: int) -> list[Expr]:
    return [ZERO] * n + [ex.y(i + 1) for i in range(n)]


def liouville(f: Expr, n: int) -> Expr:
    """C(f) = y^i df/dy^i."""
    return total(ex.y(i + 1) * dy(f, i) for i in range(n))


def determinant(M: Sequence[Sequence[Expr]]) -> Expr:
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    terms = []
    for j in range(n):
        if M[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        t = M[0][j] * determinant(minor)
        terms.append(t if j % 2 == 0 else -t)
    return total(terms)


def adjugate(M: Sequence[Sequence[Expr]]) -> list[list[Expr]]:
    n = len(M)
    if n == 1:
        return [[ex.ONE]]
    adj = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
            c = determinant(minor)
            adj[j][i] = c if (i + j) % 2 == 0 else -c
    return adj


# ---------------------------------------------------------------------------
# metrics and sprays

class MetricValue(NamedTuple):
    g: np.ndarray
    inverse: np.ndarray
    cond: np.ndarray


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A Finsler metric given by F (1-homogeneous) or its energy L = F^2/2."""

    dim: int
    F: Expr | None = None
    L: Expr | None = None
    domain: SampleDomain | None = None
    name: str = "metric"

    def __post_init__(self):
        if (self.F is None) == (self.L is None):
            raise ValueError("give exactly one of F or L")
        if self.domain is None:
            object.__setattr__(self, "domain", SampleDomain.box(self.dim))
        for e in (self.F, self.L):
            if e is not None and e.max_index() > self.dim:
                raise ValueError(f"expression references an index above dim={self.dim}")

    @cached_property
    def energy(self) -> Expr:
        return self.L if self.L is not None else ex.const(0.5) * self.F ** 2

    @cached_property
    def finsler(self) -> Expr:
        return self.F if self.F is not None else ex.sqrt(ex.const(2.0) * self.L)

    @cached_property
    def g(self) -> list[list[Expr]]:
        n = self.dim
        dL = [dy(self.energy, i) for i in range(n)]
        return [[dy(dL[i], j) for j in range(n)] for i in range(n)]

    @cached_property
    def det_g(self) -> Expr:
        return determinant(self.g)

    @cached_property
    def adj_g(self) -> list[list[Expr]]:
        return adjugate(self.g)

    @cached_property
    def g_inv(self) -> list[list[Expr]]:
        d = self.det_g
        return [[a / d for a in row] for row in self.adj_g]

    def samples(self, count: int = 100, seed: int = 0) -> PhasePoint:
        return sample_points(self.dim, count, seed, self.domain)

    def validate(self, points: PhasePoint | None = None) -> None:
        """Liouville test on F, positivity of F and regularity of g."""
        points = points if points is not None else self.samples(64)
        f = self.finsler
        res = homogeneity_residual(f, 1, points)
        if res > LIOUVILLE_REJECT_TOL:
            raise HomogeneityError(f"metric {self.name!r}", 1, res)
        Fv = evaluate_at([f], points)[..., 0]
        if np.any(Fv <= 0):
            raise ValueError(f"metric {self.name!r} is not positive on the sample set")
        metric_tensor(self, points)


@dataclass(frozen=True, eq=False)
class SpraySpec:
    """Spray coefficients G^i.  ``provenance`` is one of
    ``"metric"``, ``"user"``, ``"flat"`` or ``"deformed"``."""

    dim: int
    coeffs: tuple
    provenance: str = "user"
    metric: MetricSpec | None = None
    factor: Expr | None = None
    base: "SpraySpec | None" = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.coeffs) != self.dim:
            raise ValueError("need one coefficient per dimension")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @cached_property
    def field(self) -> list[Expr]:
        n = self.dim
        return [ex.y(i + 1) for i in range(n)] + [ex.const(-2.0) * G for G in self.coeffs]

    @cached_property
    def N(self) -> list[list[Expr]]:
        """Nonlinear connection N[i][j] = dG^i/dy^j."""
        return [[dy(G, j) for j in range(self.dim)] for G in self.coeffs]

    def apply(self, f: Expr) -> Expr:
        """G(f) = y^i df/dx^i - 2 G^i df/dy^i."""
        return apply_field(self.field, f)

    def delta(self, f: Expr) -> list[Expr]:
        """Horizontal derivatives delta f / delta x^i."""
        n = self.dim
        fy = [dy(f, j) for j in range(n)]
        return [dx(f, i) - total(self.N[j][i] * fy[j] for j in range(n)) for i in range(n)]

    @property
    def is_flat(self) -> bool:
        return all(G.is_zero() for G in self.coeffs)


def flat_spray(n: int) -> SpraySpec:
    return SpraySpec(n, (ZERO,) * n, provenance="flat")


def geodesic_spray(m: MetricSpec) -> SpraySpec:
    """Geodesic spray in solved form G^i = (1/2) g^il (y^k d2L/dy^l dx^k - dL/dx^l).

    The factor 1/2 goes with L = F^2/2 (it is 1/4 when written for F^2).
    """
    n = m.dim
    L = m.energy
    Ly = [dy(L, l) for l in range(n)]
    w = [total(ex.y(k + 1) * dx(Ly[l], k) for k in range(n)) - dx(L, l) for l in range(n)]
    if all(t.is_zero() for t in w):
        return SpraySpec(n, (ZERO,) * n, provenance="metric", metric=m)
    half_over_det = ex.const(0.5) / m.det_g
    coeffs = tuple(half_over_det * total(m.adj_g[i][l] * w[l] for l in range(n)) for i in range(n))
    return SpraySpec(n, coeffs, provenance="metric", metric=m)


def projective_deform(s: SpraySpec, P: Expr, points: PhasePoint | None = None) -> SpraySpec:
    """Spray G - 2PC, coefficients G^i + P y^i.  P must be 1-homogeneous."""
    points = points if points is not None else sample_points(s.dim, 64, seed=11)
    res = homogeneity_residual(P, 1, points)
    if res > LIOUVILLE_REJECT_TOL:
        raise HomogeneityError("projective factor", 1, res)
    coeffs = tuple(G + P * ex.y(i + 1) for i, G in enumerate(s.coeffs))
    return SpraySpec(s.dim, coeffs, provenance="deformed", factor=P, base=s)


# ---------------------------------------------------------------------------
# pointwise operations

def metric_tensor(m: MetricSpec, p: PhasePoint) -> MetricValue:
    """g_ij = (1/2) d2F^2/dy^i dy^j with its inverse and condition number."""
    g = evaluate_at(m.g, p)
    batch = g[None] if g.ndim == 2 else g
    scale = np.abs(batch).reshape(batch.shape[0], -1).max(axis=1)
    det = np.linalg.det(batch)
    bad = np.abs(det) < 1e-12 * np.maximum(scale, 1e-300) ** m.dim
    if np.any(bad):
        raise SingularMetricError(f"metric {m.name!r} has a degenerate metric tensor (|det g| = {np.abs(det).min():.3e})")
    inv = np.linalg.inv(batch)
    cond = np.linalg.cond(batch)
    if g.ndim == 2:
        return MetricValue(g, inv[0], cond[0])
    return MetricValue(g, inv, cond)


def homogeneity_residual(f: Expr, degree: float, points: PhasePoint) -> float:
    """max |C(f) - p f| / (1 + |f|) over the points."""
    n = points.dim
    vals = evaluate_at([liouville(f, n), f], points)
    vals = np.atleast_2d(vals)
    cf, fv = vals[:, 0], vals[:, 1]
    return float(np.max(np.abs(cf - degree * fv) / (1.0 + np.abs(fv))))


def spray_residual_terms(m: MetricSpec, s: SpraySpec, p: PhasePoint):
    """Components of i_G dd_JL + dL over z, with the largest term per point."""
    n = m.dim
    L = m.energy
    theta = [dy(L, i) for i in range(n)]  # d_J L, dx-components
    dtheta = [[dz(theta[b], n, a) if b < n else ZERO for b in range(2 * n)] for a in range(2 * n)]
    dL = [dz(L, n, a) for a in range(2 * n)]
    D = evaluate_at(dtheta, p)
    V = evaluate_at(s.field, p)
    dLv = evaluate_at(dL, p)
    Om = D - np.swapaxes(D, -1, -2)  # (d theta)_{ab}
    terms = V[..., :, None] * Om  # V^a Omega_ab
    contraction = terms.sum(axis=-2)
    return contraction + dLv, np.maximum(np.abs(terms).max(axis=-2), np.abs(dLv))


def spray_residual(m: MetricSpec, s: SpraySpec, p: PhasePoint) -> float:
    """Max normalized residual of the defining equation i_G dd_JL = -dL."""
    r, scale = spray_residual_terms(m, s, p)
    return float(np.max(np.abs(r) / (1.0 + np.max(scale, axis=-1, keepdims=True))))


def nonlinear_connection(s: SpraySpec, p: PhasePoint) -> np.ndarray:
    return evaluate_at(s.N, p)


def delta_derivative(f: Expr, s: SpraySpec, p: PhasePoint) -> np.ndarray:
    return evaluate_at(s.delta(f), p)


class CurvatureValue(NamedTuple):
    R: np.ndarray
    point: PhasePoint


def curvature_exprs(s: SpraySpec) -> list[list[list[Expr]]]:
    n = s.dim
    dN = [[s.delta(s.N[i][j]) for j in range(n)] for i in range(n)]  # dN[i][j][k] = delta N^i_j / delta x^k
    R = [[[ZERO] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(j + 1, n):
                R[i][j][k] = dN[i][k][j] - dN[i][j][k]
    return R


def curvature(s: SpraySpec, p: PhasePoint) -> CurvatureValue:
    """R^i_jk, antisymmetric in (j, k) by construction."""
    upper = evaluate_at(curvature_exprs(s), p)
    return CurvatureValue(upper - np.swapaxes(upper, -1, -2), p)


def nabla_covector_exprs(omega: Sequence[Expr], s: SpraySpec) -> list[Expr]:
    n = s.dim
    return [s.apply(omega[i]) - total(s.N[j][i] * omega[j] for j in range(n)) for i in range(n)]


def nabla_scalar(f: Expr, s: SpraySpec, p: PhasePoint):
    return evaluate_at(s.apply(f), p)


def nabla_covector(omega: Sequence[Expr], s: SpraySpec, p: PhasePoint) -> np.ndarray:
    """(nabla omega)_i = G(omega_i) - N^j_i omega_j for semi-basic omega."""
    return evaluate_at(nabla_covector_exprs(omega, s), p)


def nabla_metric_exprs(m: MetricSpec, s: SpraySpec) -> list[list[Expr]]:
    n = m.dim
    g, N = m.g, s.N
    return [[s.apply(g[i][j])
             - total(N[k][i] * g[k][j] for k in range(n))
             - total(N[k][j] * g[i][k] for k in range(n))
             for j in range(n)] for i in range(n)]


def euler_lagrange_exprs(f: Expr, s: SpraySpec) -> list[Expr]:
    n = s.dim
    return [s.apply(dy(f, i)) - dx(f, i) for i in range(n)]


def euler_lagrange(f: Expr, s: SpraySpec, p: PhasePoint) -> np.ndarray:
    """Components G(df/dy^i) - df/dx^i of the Euler-Lagrange form."""
    return evaluate_at(euler_lagrange_exprs(f, s), p)


class OneFormValue(NamedTuple):
    a: np.ndarray  # dx components
    b: np.ndarray  # dy components
    point: PhasePoint

    @property
    def components(self) -> np.ndarray:
        return np.concatenate([self.a, self.b], axis=-1)


def one_form_value(alpha: Sequence[Expr], p: PhasePoint) -> OneFormValue:
    n = len(alpha) // 2
    v = evaluate_at(list(alpha), p)
    return OneFormValue(v[..., :n], v[..., n:], p)


def lie_derivative_exprs(V: Sequence[Expr], alpha: Sequence[Expr]) -> list[Expr]:
    """(L_V alpha)_a = V(alpha_a) + alpha_b dV^b/dz^a."""
    n = len(V) // 2
    out = []
    for a in range(2 * n):
        t = apply_field(V, alpha[a])
        t = t + total(alpha[b] * dz(V[b], n, a) for b in range(2 * n) if not alpha[b].is_zero())
        out.append(t)
    return out


def lie_derivative_one_form(s: SpraySpec | Sequence[Expr], alpha: Sequence[Expr], p: PhasePoint) -> OneFormValue:
    V = s.field if isinstance(s, SpraySpec) else list(s)
    return one_form_value(lie_derivative_exprs(V, alpha), p)


def commutator_exprs(X: Sequence[Expr], Y: Sequence[Expr]) -> list[Expr]:
    return [apply_field(X, Y[a]) - apply_field(Y, X[a]) for a in range(len(X))]


def commutator(X: Sequence[Expr], Y: Sequence[Expr], p: PhasePoint) -> np.ndarray:
    """[X, Y]^a = X(Y^a) - Y(X^a)."""
    return evaluate_at(commutator_exprs(X, Y), p)


def symplectic_value(m: MetricSpec, s: SpraySpec, X, Y, p: PhasePoint) -> np.ndarray:
    """omega_L(X, Y) = g_ij (dy^i(X) dx^j(Y) - dy^i(Y) dx^j(X)) with the delta coframe.

    ``X`` and ``Y`` are numeric 2n-vectors (or (m, 2n) batches) at ``p``.
    """
    n = m.dim
    g = metric_tensor(m, p).g
    N = nonlinear_connection(s, p)
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)

    def split(V):
        h, v = V[..., :n], V[..., n:]
        return h, v + np.einsum("...ij,...j->...i", N, h)  # (dx(V), delta y(V))

    hx, vx = split(X)
    hy, vy = split(Y)
    return np.einsum("...ij,...i,...j->...", g, vx, hy) - np.einsum("...ij,...i,...j->...", g, vy, hx)


def interior_symplectic(m: MetricSpec, s: SpraySpec, X, p: PhasePoint) -> np.ndarray:
    """Components of i_X omega_L on the coordinate basis dz^a."""
    n = m.dim
    X = np.asarray(X, float)
    basis = np.eye(2 * n)
    if X.ndim == 2:
        return np.stack([symplectic_value(m, s, X, np.broadcast_to(e, X.shape), p) for e in basis], axis=-1)
    return np.array([symplectic_value(m, s, X, e, p) for e in basis])


def require_geodesic(m: MetricSpec, s: SpraySpec, p: PhasePoint, tol: float = 1e-8) -> None:
    """Accept ``s`` as the geodesic spray of ``m`` by provenance or by residual."""
    if s.provenance == "metric" and s.metric is m:
        return
    res = spray_residual(m, s, p)
    if res > tol:
        raise GeodesicSprayError(f"spray is not the geodesic spray of {m.name!r}: residual {res:.3e}")
