import numpy as np
import pytest

from finsler_lab import expr as ex
from finsler_lab.geometry import (
    GeodesicSprayError, MetricSpec, PhasePoint, evaluate_at, flat_spray, homogeneity_residual,
)
from finsler_lab.invariants import (
    DEFAULT_VOLUME, NonPositiveDeterminantError, ProjectiveMismatchError, VolumeSpec, chi_curvature,
    chi_exprs, distortion, s_function, s_function_expr, verify_projective_laws,
)
from finsler_lab.presets import conformal, euclidean, funk, perturbed_randers

from conftest import rel_err


def test_euclidean_distortion_vanishes(points3):
    d = distortion(euclidean(3).metric, DEFAULT_VOLUME, points3)
    assert np.max(np.abs(d.tau)) <= 1e-14 and np.max(np.abs(d.I)) <= 1e-14


def test_conformal_with_its_own_volume_has_zero_distortion():
    pre = conformal(2)
    pts = pre.metric.samples(40)
    d = distortion(pre.metric, pre.volume, pts)
    assert np.max(np.abs(d.tau)) <= 1e-14
    assert np.max(np.abs(d.I)) <= 1e-14
    assert np.max(np.abs(s_function(pre.metric, pre.volume, pre.spray, pts))) <= 1e-14
    assert np.max(np.abs(chi_curvature(pre.metric, pre.volume, pre.spray, pts))) <= 1e-12


def test_funk_distortion_matches_finite_difference_log_det():
    m = funk(2).metric
    p = PhasePoint(np.zeros(2), np.array([1.0, 0.0]))
    tau = distortion(m, DEFAULT_VOLUME, p).tau
    h = 1e-4
    H = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            def L(di, dj):
                y = np.array([1.0, 0.0])
                y[i] += di
                y[j] += dj
                return ex.evaluate_many([m.energy], np.zeros((1, 2)), y[None])[0, 0]
            H[i, j] = (L(h, h) - L(h, -h) - L(-h, h) + L(-h, -h)) / (4 * h * h)
    assert tau == pytest.approx(0.5 * np.log(np.linalg.det(H)), abs=1e-6)


def test_mean_torsion_routes_agree():
    pre = funk(3)
    d = distortion(pre.metric, DEFAULT_VOLUME, pre.metric.samples(30))
    assert d.torsion_residual <= 1e-8
    assert np.abs(d.I).max() > 1e-3


@pytest.mark.parametrize("n", [2, 3])
def test_funk_s_function_and_chi(n):
    pre = funk(n)
    pts = pre.metric.samples(50)
    S = s_function(pre.metric, DEFAULT_VOLUME, pre.spray, pts)
    F = evaluate_at([pre.metric.F], pts)[:, 0]
    assert rel_err(S, (n + 1) * F / 2) <= 1e-7
    chi = chi_curvature(pre.metric, DEFAULT_VOLUME, pre.spray, pts)
    assert np.max(np.abs(chi)) <= 1e-6


def test_perturbed_randers_has_nonzero_chi():
    pre = perturbed_randers(2)
    chi = chi_curvature(pre.metric, DEFAULT_VOLUME, pre.spray, pre.metric.samples(30))
    assert np.abs(chi).max() > 0.1


def test_s_and_chi_are_one_homogeneous():
    pre = perturbed_randers(2)
    pts = pre.metric.samples(30)
    S = s_function_expr(pre.metric, DEFAULT_VOLUME, pre.spray)
    assert homogeneity_residual(S, 1, pts) <= 1e-8
    chi, _ = chi_exprs(pre.metric, DEFAULT_VOLUME, pre.spray)
    for lam in (0.5, 2.0):
        assert rel_err(evaluate_at(chi, pts.scaled(lam)), lam * evaluate_at(chi, pts)) <= 1e-8


@pytest.mark.parametrize("n", [2, 3])
def test_projective_laws_on_flat_funk_pair(n):
    eu, fk = euclidean(n), funk(n)
    pts = fk.metric.samples(50)
    rep = verify_projective_laws(eu.metric, flat_spray(n), fk.metric, ex.const(0.5) * fk.metric.F, pts)
    assert rep.residuals["S_law"] <= 1e-6
    assert rep.residuals["chi_law"] <= 1e-6
    assert rep.residuals["trace_recovery"] <= 1e-8
    assert all(np.isfinite(v) and v >= 0 for v in rep.residuals.values())


def test_projective_laws_trivial_case():
    pre = conformal(2)
    pts = pre.metric.samples(20)
    rep = verify_projective_laws(pre.metric, pre.spray, pre.metric, ex.ZERO, pts, pre.volume)
    assert rep.worst() <= 1e-10


def test_projective_laws_reject_unrelated_sprays():
    eu, fk = euclidean(2), funk(2)
    with pytest.raises(ProjectiveMismatchError):
        verify_projective_laws(eu.metric, flat_spray(2), fk.metric, ex.const(0.3) * fk.metric.F,
                               fk.metric.samples(20))


def test_volume_rejects_fibre_dependence_and_nonpositive_values():
    with pytest.raises(ValueError):
        VolumeSpec(ex.y(1))
    v = VolumeSpec(ex.x(1))
    with pytest.raises(ValueError):
        v.check_positive(PhasePoint(np.array([-1.0, 0.0]), np.array([1.0, 0.0])))


def test_indefinite_metric_is_rejected():
    m = MetricSpec(2, L=ex.parse("0.5*(y1^2 - y2^2)", 2))
    with pytest.raises(NonPositiveDeterminantError):
        distortion(m, DEFAULT_VOLUME, PhasePoint(np.zeros(2), np.array([1.0, 0.2])))


def test_s_function_requires_the_geodesic_spray():
    pre = funk(2)
    with pytest.raises(GeodesicSprayError):
        s_function(pre.metric, DEFAULT_VOLUME, flat_spray(2), pre.metric.samples(10))
