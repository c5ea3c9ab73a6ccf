"""Built-in metrics used by the verification suites and the CLI."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from . import expr as ex
from .expr import Expr, total
from .geometry import MetricSpec, SampleDomain, SpraySpec, flat_spray, geodesic_spray, projective_deform
from .invariants import DEFAULT_VOLUME, VolumeSpec


def _dot(a, b) -> Expr:
    return total(p * q for p, q in zip(a, b))


def _xs(n):
    return [ex.x(i + 1) for i in range(n)]


def _ys(n):
    return [ex.y(i + 1) for i in range(n)]


def euclidean_norm(n: int) -> Expr:
    ys = _ys(n)
    return ex.sqrt(_dot(ys, ys))


def funk_metric(n: int) -> Expr:
    """Funk metric of the unit ball: (sqrt(|y|^2 - (|x|^2|y|^2 - <x,y>^2)) + <x,y>) / (1 - |x|^2)."""
    xs, ys = _xs(n), _ys(n)
    xx, yy, xy = _dot(xs, xs), _dot(ys, ys), _dot(xs, ys)
    root = ex.sqrt(yy - (xx * yy - xy * xy))
    return (root + xy) / (ex.ONE - xx)


def berwald_metric(n: int) -> Expr:
    """Berwald's metric of the unit ball: (root + <x,y>)^2 / ((1 - |x|^2)^2 root)."""
    xs, ys = _xs(n), _ys(n)
    xx, yy, xy = _dot(xs, xs), _dot(ys, ys), _dot(xs, ys)
    root = ex.sqrt(yy - (xx * yy - xy * xy))
    one_m = ex.ONE - xx
    return (root + xy) ** 2 / (one_m * one_m * root)


@dataclass(eq=False)
class Preset:
    """A metric with its spray, volume density and, when projectively flat,
    the factor P with spray = flat - 2PC.  ``conformal_factor`` is phi for
    Riemannian metrics a_ij = exp(2 phi) delta_ij."""

    name: str
    metric: MetricSpec
    volume: VolumeSpec = DEFAULT_VOLUME
    flat_factor: Expr | None = None
    conformal_factor: Expr | None = None

    @property
    def dim(self) -> int:
        return self.metric.dim

    @cached_property
    def spray(self) -> SpraySpec:
        if self.flat_factor is not None:
            s = projective_deform(flat_spray(self.dim), self.flat_factor, self.metric.samples(32, seed=5))
            return SpraySpec(s.dim, s.coeffs, "deformed", self.metric, s.factor, s.base)
        return geodesic_spray(self.metric)

    @cached_property
    def solved_spray(self) -> SpraySpec:
        return geodesic_spray(self.metric)

    def riemannian_matrix(self) -> list[list[Expr]] | None:
        """a_ij(x) for the conformal preset, None otherwise."""
        if self.conformal_factor is None:
            return None
        e = ex.exp(ex.const(2.0) * self.conformal_factor)
        return [[e if i == j else ex.ZERO for j in range(self.dim)] for i in range(self.dim)]


def euclidean(n: int) -> Preset:
    return Preset("euclidean", MetricSpec(n, F=euclidean_norm(n), name="euclidean"), flat_factor=ex.ZERO)


def randers_constant(n: int, b=None) -> Preset:
    """|y| + <b, y> with a constant covector b, |b| < 1."""
    b = [0.3] + [0.0] * (n - 1) if b is None else list(b)
    if len(b) != n:
        raise ValueError(f"b needs {n} components")
    if sum(c * c for c in b) >= 1.0:
        raise ValueError("|b| must be < 1 for a positive definite Randers metric")
    F = euclidean_norm(n) + _dot([ex.const(c) for c in b], _ys(n))
    return Preset("randers-constant", MetricSpec(n, F=F, name="randers-constant"))


# quadratic terms keep the curvature away from zero
DEFAULT_CONFORMAL_FACTOR = "0.3*x1 + 0.2*x2^2 - 0.1*x1*x2"


def conformal(n: int, phi: Expr | str | None = None, half_width: float = 0.5) -> Preset:
    """L = (1/2) exp(2 phi(x)) |y|^2 with volume density det a = exp(2 n phi)."""
    if phi is None:
        phi = DEFAULT_CONFORMAL_FACTOR
    if isinstance(phi, str):
        phi = ex.parse(phi, n)
    if any(phi.depends_on("y", i) for i in range(1, n + 1)):
        raise ValueError("conformal factor must depend on x only")
    ys = _ys(n)
    L = ex.const(0.5) * ex.exp(ex.const(2.0) * phi) * _dot(ys, ys)
    vol = VolumeSpec(ex.exp(ex.const(2.0 * n) * phi))
    m = MetricSpec(n, L=L, domain=SampleDomain.box(n, half_width), name="conformal")
    return Preset("conformal", m, volume=vol, conformal_factor=phi)


def _ball_domain(n: int) -> SampleDomain:
    # keep |x| well inside the unit ball
    return SampleDomain.box(n, 0.5 / max(1.0, (n / 3) ** 0.5))


def funk(n: int) -> Preset:
    """Funk metric of the unit ball; projectively flat with P = F/2."""
    F = funk_metric(n)
    m = MetricSpec(n, F=F, domain=_ball_domain(n), name="funk")
    return Preset("funk", m, flat_factor=ex.const(0.5) * F)


def berwald(n: int) -> Preset:
    """Berwald's metric of the unit ball; projectively flat with P = Funk metric."""
    m = MetricSpec(n, F=berwald_metric(n), domain=_ball_domain(n), name="berwald")
    return Preset("berwald", m, flat_factor=funk_metric(n))


def perturbed_randers(n: int) -> Preset:
    """|y| + 0.2 x2 y1 + 0.1 x1^2 y2: a Randers metric with non-vanishing chi."""
    x1, x2 = ex.x(1), ex.x(2)
    F = euclidean_norm(n) + ex.const(0.2) * x2 * ex.y(1) + ex.const(0.1) * x1 * x1 * ex.y(2)
    return Preset("perturbed-randers", MetricSpec(n, F=F, name="perturbed-randers"))


PRESETS = {
    "euclidean": euclidean,
    "randers-constant": randers_constant,
    "conformal": conformal,
    "funk": funk,
    "berwald": berwald,
    "perturbed-randers": perturbed_randers,
}

ACCEPTANCE_PRESETS = ("euclidean", "randers-constant", "conformal", "funk")


def get_preset(name: str, n: int) -> Preset:
    try:
        return PRESETS[name](n)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
