import numpy as np
import pytest

from finsler_lab import expr as ex
from finsler_lab.expr import total
from finsler_lab.geometry import HomogeneityError, PhasePoint, dy, evaluate_at, flat_spray
from finsler_lab.invariants import tau_expr
from finsler_lab.presets import (
    berwald, conformal, euclidean, euclidean_norm, funk, funk_metric, perturbed_randers,
)
from finsler_lab.report import Check, Verdict
from finsler_lab.symmetry import (
    CandidatePair, ClassificationReport, InconsistentReport, PathDependenceError, alpha_exprs, alpha_form,
    alpha_torsion_exprs, classify, closure_check, dual_symmetry_check, dynamical_symmetry_exprs,
    dynamical_symmetry_field, flat_witness, funk_decomposition_check, is_funk, is_hamel, is_strong_hamel,
    is_weak_funk, projective_invariance_check, reconstruct_vertical_potential, strong_hamel_from_weak_funk,
    strong_hamel_verdict, symmetry_suite,
)

from conftest import rel_err


def norm_pair(n):
    xs = [ex.x(i) for i in range(1, n + 1)]
    ys = [ex.y(i) for i in range(1, n + 1)]
    f = euclidean_norm(n)
    return CandidatePair(f, total(a * b for a, b in zip(xs, ys)) / f)


def ball(n, count=40, seed=3):
    return funk(n).metric.samples(count, seed)


@pytest.mark.parametrize("n", [2, 3])
def test_norm_classification_with_witness(n):
    rep = classify(norm_pair(n), flat_spray(n), ball(n))
    v = rep.verdicts
    assert v["hamel"] is Verdict.PASS and v["strong_hamel"] is Verdict.PASS
    assert v["weak_funk"] is Verdict.FAIL and v["funk"] is Verdict.FAIL
    assert rep.witness == "supplied"


@pytest.mark.parametrize("n", [2, 3])
def test_funk_metric_is_everything_with_reconstructed_witness(n):
    rep = classify(CandidatePair(funk_metric(n)), flat_spray(n), ball(n))
    assert all(v is Verdict.PASS for v in rep.verdicts.values())
    assert rep.witness == "reconstructed"


def test_position_weighted_norm_fails_everything():
    f = ex.x(1) * euclidean_norm(2)
    rep = classify(CandidatePair(f), flat_spray(2), ball(2))
    assert all(v is Verdict.FAIL for v in rep.verdicts.values())


def test_wrong_witness_fails_strong_hamel():
    pair = CandidatePair(euclidean_norm(2), ex.x(1))
    c = is_strong_hamel(pair, flat_spray(2), ball(2))
    assert c.verdict is Verdict.FAIL
    assert c.residual > 0.01


def test_missing_witness_is_unknown():
    c = is_strong_hamel(CandidatePair(euclidean_norm(2)), flat_spray(2), ball(2))
    assert c.verdict is Verdict.UNKNOWN


def test_non_flat_without_witness_is_unknown():
    pre = conformal(2)
    F = pre.metric.finsler
    c, status = strong_hamel_verdict(CandidatePair(F), pre.spray, pre.metric.samples(20))
    assert status == "absent"
    assert c.verdict is Verdict.UNKNOWN


def test_flat_witness_matches_closed_form():
    pts = ball(2)
    val, gval = flat_witness(euclidean_norm(2), pts)
    exact = evaluate_at([norm_pair(2).fprime, euclidean_norm(2)], pts)
    assert rel_err(val, exact[:, 0]) <= 1e-12
    assert rel_err(gval, exact[:, 1]) <= 1e-12


def test_witness_must_be_zero_homogeneous():
    pair = CandidatePair(euclidean_norm(2), ex.y(1))
    with pytest.raises(HomogeneityError):
        pair.validate(ball(2))


def test_hamel_closure_agree_on_flat_candidates():
    pts = ball(2)
    s = flat_spray(2)
    for f, expected in ((euclidean_norm(2), True), (funk_metric(2), True), (ex.x(2) * ex.y(1), False)):
        assert is_hamel(f, s, pts).passed is expected
        assert closure_check(f, s, pts).passed is expected


def test_hamel_operator_is_projectively_invariant():
    pre = perturbed_randers(2)
    pts = pre.metric.samples(30)
    c = projective_invariance_check(pre.metric.finsler, pre.spray, ex.const(0.2) * euclidean_norm(2) + ex.x(1) * ex.y(2),
                                    pts)
    assert c.passed


@pytest.mark.parametrize("f,pattern", [
    (lambda n: funk_metric(n), (True, True, True)),
    (lambda n: euclidean_norm(n), (True, False, False)),
    (lambda n: ex.x(1) * euclidean_norm(n), (False, False, False)),
])
def test_funk_decomposition_patterns(f, pattern):
    d = funk_decomposition_check(f(2), flat_spray(2), ball(2))
    assert d.pattern == pattern
    assert d.consistent


def test_zero_candidate_is_flagged_degenerate():
    s = flat_spray(2)
    for fn in (is_weak_funk, is_funk):
        c = fn(ex.ZERO, s, ball(2))
        assert c.passed
        assert "degenerate" in c.note


def test_inconsistent_classification_is_rejected():
    ok = Check("x", 0.0, 1.0, points=1)
    bad = Check("x", 1.0, 0.5, points=1)
    with pytest.raises(InconsistentReport):
        ClassificationReport({"hamel": ok, "strong_hamel": ok, "weak_funk": bad, "funk": ok}, "supplied", 1)


def test_alpha_of_constant_witness_vanishes():
    p = PhasePoint(np.array([0.1, -0.2]), np.array([1.0, 0.5]))
    v = alpha_form(ex.const(3.0), flat_spray(2), p)
    assert np.all(v.components == 0)


def test_alpha_forms_agree_on_funk():
    pre = funk(2)
    pts = pre.metric.samples(20)
    v = alpha_form(tau_expr(pre.metric), pre.spray, pts)
    assert np.abs(v.components).max() > 0.1


def test_torsion_alpha_matches_alpha_of_tau():
    pre = funk(3)
    pts = pre.metric.samples(20)
    a = evaluate_at(alpha_exprs(tau_expr(pre.metric), pre.spray), pts)
    b = evaluate_at(alpha_torsion_exprs(pre.metric, pre.spray), pts)
    assert rel_err(a, b) <= 1e-12


def test_dual_symmetry_exactness_flag():
    pts = ball(2)
    s = flat_spray(2)
    # d L is exact and G-invariant but 2-homogeneous, so not a dual symmetry
    L = euclidean(2).metric.energy
    dL = [ex.ZERO, ex.ZERO, dy(L, 0), dy(L, 1)]
    rep = dual_symmetry_check(dL, s, pts)
    assert rep.exact and rep.dual.passed and rep.strong.passed
    assert not rep.homogeneity.passed and not rep.is_dual
    # the witness alpha = d_J|y| - df' is a strong dual symmetry but d_J|y| is not closed
    rep2 = dual_symmetry_check(alpha_exprs(norm_pair(2).fprime, s), s, pts)
    assert rep2.is_strong and not rep2.exact


def test_asymmetric_vertical_part_is_not_strong():
    pts = ball(2)
    s = flat_spray(2)
    alpha = [ex.ZERO, ex.ZERO, ex.ZERO, ex.y(1) / euclidean_norm(2)]
    rep = dual_symmetry_check(alpha, s, pts)
    assert not rep.strong.passed
    assert not rep.exact


def test_dynamical_symmetry_is_minus_one_homogeneous():
    pre = funk(2)
    X, _ = dynamical_symmetry_exprs(tau_expr(pre.metric), pre.metric, pre.spray)
    pts = pre.metric.samples(20)
    n = 2
    base, scaled = evaluate_at(X, pts), evaluate_at(X, pts.scaled(2.0))
    # horizontal part degree -1, vertical part degree 0 in the (d/dx, d/dy) frame
    assert rel_err(scaled[:, :n], base[:, :n] / 2.0) <= 1e-12
    assert rel_err(scaled[:, n:], base[:, n:]) <= 1e-12


def test_constant_witness_gives_zero_field():
    pre = conformal(2)
    v = dynamical_symmetry_field(ex.const(1.0), pre.metric, pre.spray, pre.metric.samples(10))
    assert np.all(v.X == 0) and v.symplectic_residual == 0


def test_second_form_differs_off_flat():
    pre = conformal(2)
    pts = pre.metric.samples(20)
    v = dynamical_symmetry_field(tau_expr(perturbed_randers(2).metric), pre.metric, pre.spray, pts)
    assert v.symplectic_residual <= 1e-12
    assert v.form_discrepancy > 1e-3


@pytest.mark.parametrize("n", [2, 3])
def test_symmetry_chain_on_flat_fixture(n):
    rep = symmetry_suite(norm_pair(n), euclidean(n).metric, flat_spray(n), ball(n))
    assert rep.passed, [(c.name, c.residual) for c in rep.checks if not c.passed]


def test_symmetry_chain_with_torsion_witness_on_funk():
    pre = funk(2)
    tau = tau_expr(pre.metric)
    rep = symmetry_suite(CandidatePair(pre.spray.apply(tau), tau), pre.metric, pre.spray, pre.metric.samples(30))
    assert rep.passed
    assert rep.by_name("L_G alpha").residual <= 1e-12


def test_symmetry_chain_breaks_on_perturbed_randers():
    pre = perturbed_randers(2)
    tau = tau_expr(pre.metric)
    rep = symmetry_suite(CandidatePair(pre.spray.apply(tau), tau), pre.metric, pre.spray, pre.metric.samples(30))
    assert not rep.passed
    assert not rep.by_name("L_G alpha").passed
    assert rep.by_name("i_X omega_L").passed


def test_reconstruct_vertical_potential_recovers_witness():
    pair = norm_pair(2)
    alpha = alpha_exprs(pair.fprime, flat_spray(2))
    x = np.array([0.3, -0.2])
    y0, y = np.array([1.0, 0.0]), np.array([0.4, 1.3])
    got = reconstruct_vertical_potential(alpha, y0, PhasePoint(x, y))
    want = (ex.evaluate(pair.fprime, PhasePoint(x, y)) - ex.evaluate(pair.fprime, PhasePoint(x, y0)))
    assert got == pytest.approx(want, abs=1e-12)


def test_reconstruct_rejects_non_closed_beta():
    beta = [ex.ZERO, ex.y(1) / euclidean_norm(2)]
    with pytest.raises(PathDependenceError):
        reconstruct_vertical_potential(beta, [1.0, 0.0], PhasePoint(np.zeros(2), np.array([0.2, 1.0])))


@pytest.mark.parametrize("n", [2, 3])
def test_berwald_is_strong_hamel_from_weak_funk_factor(n):
    bw = berwald(n)
    c = strong_hamel_from_weak_funk(bw.metric, flat_spray(n), funk_metric(n), bw.metric.samples(30))
    assert c.preconditions_ok and not c.degenerate
    assert c.passed, [(k.name, k.residual) for k in c.checks]


def test_funk_with_half_factor_fails_weak_funk_precondition():
    fk = funk(2)
    c = strong_hamel_from_weak_funk(fk.metric, flat_spray(2), ex.const(0.5) * funk_metric(2), fk.metric.samples(20))
    assert not c.preconditions_ok


def test_funk_with_its_own_factor_is_degenerate():
    fk = funk(2)
    c = strong_hamel_from_weak_funk(fk.metric, flat_spray(2), funk_metric(2), fk.metric.samples(20))
    assert c.degenerate


def test_vanishing_factor_raises():
    bw = berwald(2)
    with pytest.raises(ZeroDivisionError):
        strong_hamel_from_weak_funk(bw.metric, flat_spray(2), ex.ZERO, bw.metric.samples(10))
