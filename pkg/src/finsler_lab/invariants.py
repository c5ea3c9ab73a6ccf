"""Distortion, S-function and chi-curvature, and their projective laws."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import expr as ex
from .expr import Expr, total
from .geometry import (
    MetricSpec, PhasePoint, SpraySpec, dx, dy, evaluate_at, max_normalized,
    metric_tensor, nabla_covector_exprs, projective_deform, require_geodesic,
    spray_residual, geodesic_spray,
)


class NonPositiveDeterminantError(ArithmeticError):
    pass


class InvariantMismatch(AssertionError):
    """Two independent routes to the same quantity disagree."""


class ProjectiveMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VolumeSpec:
    """Volume density sigma(x) of the form sigma dx^dy; defaults to 1."""

    sigma: Expr = ex.ONE

    def __post_init__(self):
        if any(self.sigma.depends_on("y", i) for i in range(1, self.sigma.max_index() + 1)):
            raise ValueError("volume density must not depend on y")

    def check_positive(self, p: PhasePoint) -> None:
        v = evaluate_at([self.sigma], p)
        if np.any(v <= 0):
            raise ValueError("volume density must be positive on the sample set")


DEFAULT_VOLUME = VolumeSpec()


def tau_expr(m: MetricSpec, vol: VolumeSpec = DEFAULT_VOLUME) -> Expr:
    """tau = (1/2) ln(det g / sigma)."""
    t = ex.const(0.5) * ex.log(m.det_g)
    if vol.sigma is not ex.ONE:
        t = t - ex.const(0.5) * ex.log(vol.sigma)
    return t


def mean_torsion_exprs(m: MetricSpec, vol: VolumeSpec = DEFAULT_VOLUME) -> list[Expr]:
    """I_k = d tau / dy^k."""
    t = tau_expr(m, vol)
    return [dy(t, k) for k in range(m.dim)]


class Distortion(NamedTuple):
    tau: np.ndarray
    I: np.ndarray
    I_from_metric: np.ndarray
    torsion_residual: float


def _check_det(m: MetricSpec, p: PhasePoint) -> None:
    d = evaluate_at([m.det_g], p)
    if np.any(d <= 0):
        raise NonPositiveDeterminantError(f"det g <= 0 for metric {m.name!r}")


def distortion(m: MetricSpec, vol: VolumeSpec, p: PhasePoint, tol: float = 1e-8) -> Distortion:
    """tau at ``p`` together with I_k computed as d tau/dy^k and as (1/2) g^ij dg_ij/dy^k."""
    _check_det(m, p)
    n = m.dim
    tau = evaluate_at([tau_expr(m, vol)], p)[..., 0]
    I = evaluate_at(mean_torsion_exprs(m, vol), p)
    ginv = metric_tensor(m, p).inverse
    dg = evaluate_at([[[dy(m.g[i][j], k) for k in range(n)] for j in range(n)] for i in range(n)], p)
    I2 = 0.5 * np.einsum("...ij,...ijk->...k", ginv, dg)
    res = max_normalized(I - I2, I, I2, batch=p.is_batch)
    if res > tol:
        raise InvariantMismatch(f"mean Cartan torsion routes disagree: {res:.3e}")
    return Distortion(tau, I, I2, res)


def s_function_expr(m: MetricSpec, vol: VolumeSpec, s: SpraySpec) -> Expr:
    return s.apply(tau_expr(m, vol))


def s_function(m: MetricSpec, vol: VolumeSpec, s: SpraySpec, p: PhasePoint):
    """S = G(tau); ``s`` must be the geodesic spray of ``m``."""
    require_geodesic(m, s, p)
    _check_det(m, p)
    return evaluate_at([s_function_expr(m, vol, s)], p)[..., 0]


def chi_exprs(m: MetricSpec, vol: VolumeSpec, s: SpraySpec) -> tuple[list[Expr], list[Expr]]:
    """chi_i as (1/2)(G(dS/dy^i) - dS/dx^i) and as (1/2)(nabla(dS/dy^i) - delta S/delta x^i)."""
    n = m.dim
    S = s_function_expr(m, vol, s)
    Sy = [dy(S, i) for i in range(n)]
    half = ex.const(0.5)
    direct = [half * (s.apply(Sy[i]) - dx(S, i)) for i in range(n)]
    nab = nabla_covector_exprs(Sy, s)
    dS = s.delta(S)
    covariant = [half * (nab[i] - dS[i]) for i in range(n)]
    return direct, covariant


def chi_curvature(m: MetricSpec, vol: VolumeSpec, s: SpraySpec, p: PhasePoint, tol: float = 1e-8) -> np.ndarray:
    require_geodesic(m, s, p)
    _check_det(m, p)
    direct, covariant = chi_exprs(m, vol, s)
    a = evaluate_at(direct, p)
    b = evaluate_at(covariant, p)
    res = max_normalized(a - b, a, b, batch=p.is_batch)
    if res > tol:
        raise InvariantMismatch(f"chi-curvature routes disagree: {res:.3e}")
    return a


@dataclass
class InvariantReport:
    fixtures: tuple
    tau: np.ndarray | None = None
    S: np.ndarray | None = None
    chi: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)


def verify_projective_laws(m: MetricSpec, s: SpraySpec, m_t: MetricSpec, P: Expr,
                           points: PhasePoint, vol: VolumeSpec = DEFAULT_VOLUME,
                           s_t: SpraySpec | None = None, related_tol: float = 1e-8) -> InvariantReport:
    """Check S~ = S + (n+1)P and chi~ = chi + (n+1)/2 delta_G P on ``points``.

    ``s`` is the geodesic spray of ``m``; the spray of ``m_t`` defaults to the
    projective deformation of ``s`` by ``P``, which is first checked against
    the defining equation of the geodesic spray of ``m_t``.  The factor is also
    recovered from the connection traces of ``s`` and of the solved geodesic
    spray of ``m_t``.
    """
    n = m.dim
    require_geodesic(m, s, points)
    if s_t is None:
        s_t = projective_deform(s, P, points)
    related = spray_residual(m_t, s_t, points)
    if related > related_tol:
        raise ProjectiveMismatchError(f"sprays are not projectively related by P: residual {related:.3e}")
    report = InvariantReport((m.name, m_t.name))
    report.residuals["projective_relation"] = related

    S = evaluate_at([s_function_expr(m, vol, s)], points)[..., 0]
    S_t = evaluate_at([s_function_expr(m_t, vol, s_t)], points)[..., 0]
    Pv = evaluate_at([P], points)[..., 0]
    c = n + 1
    report.residuals["S_law"] = max_normalized(S_t - S - c * Pv, S_t, S, c * Pv, batch=points.is_batch)

    chi, _ = chi_exprs(m, vol, s)
    chi_t, _ = chi_exprs(m_t, vol, s_t)
    dGP = [ex.const(0.5 * c) * (s.apply(dy(P, i)) - dx(P, i)) for i in range(n)]
    a = evaluate_at(chi, points)
    b = evaluate_at(chi_t, points)
    d = evaluate_at(dGP, points)
    report.residuals["chi_law"] = max_normalized(b - a - d, a, b, d, batch=points.is_batch)

    solved = geodesic_spray(m_t)
    tr = total(solved.N[i][i] for i in range(n)) - total(s.N[i][i] for i in range(n))
    P_rec = evaluate_at([tr / ex.const(c)], points)[..., 0]
    report.residuals["trace_recovery"] = max_normalized(P_rec - Pv, P_rec, Pv, batch=points.is_batch)

    report.S = S_t
    report.chi = b
    return report
