import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab import expr as ex
from finsler_lab.geometry import PhasePoint
from finsler_lab.oracles import fd_gradient

from conftest import smooth_exprs


def at(x, y):
    return PhasePoint(np.array(x, float), np.array(y, float))


def test_parse_sum_of_squares():
    e = ex.parse("y1^2 + y2^2", 2)
    assert e is ex.y(1) ** 2 + ex.y(2) ** 2
    assert ex.evaluate(e, at([0, 0], [3, 4])) == 25.0


def test_parse_randers_type():
    e = ex.parse("sqrt(y1^2+y2^2) + 0.3*y1", 2)
    assert ex.evaluate(e, at([0, 0], [3, 4])) == pytest.approx(5.9)


def test_precedence_and_unary_minus():
    p = at([2, 0], [1, 0])
    assert ex.evaluate(ex.parse("-x1^2", 2), p) == -4.0
    assert ex.evaluate(ex.parse("2*3^2", 2), p) == 18.0
    assert ex.evaluate(ex.parse("1 - 2 - 3", 2), p) == -4.0
    assert ex.evaluate(ex.parse("8 / 2 / 2", 2), p) == 2.0
    assert ex.evaluate(ex.parse("2^-1", 2), p) == 0.5
    assert ex.evaluate(ex.parse("1.5e1 + x1", 2), p) == 17.0


@pytest.mark.parametrize("text,offset", [
    ("x3*y1", 0),
    ("y1 + x0", 5),
    ("y1 +", 4),
    ("(y1", 3),
    ("y1 $ y2", 3),
    ("foo(y1)", 0),
    ("y1^y2", 3),
    ("", 0),
])
def test_parse_errors_report_offset(text, offset):
    with pytest.raises(ex.ParseError) as info:
        ex.parse(text, 2)
    assert info.value.offset == offset
    assert 0 <= info.value.offset <= len(text)
    assert info.value.expected


def test_eval_examples():
    assert ex.evaluate(ex.parse("sqrt(y1^2+y2^2)", 2), at([1, 2], [3, 4])) == 5.0


@pytest.mark.parametrize("text", ["log(x1)", "sqrt(x1)", "1/(x1+1)", "x1^0.5"])
def test_domain_errors_name_subexpression(text):
    with pytest.raises(ex.DomainError) as info:
        ex.evaluate(ex.parse(text, 2), at([-1, 0], [1, 0]))
    assert "x1" in str(info.value)


def test_diff_examples():
    e = ex.parse("y1^2+y2^2", 2)
    d = ex.diff(e, "y1")
    pts = np.random.default_rng(0).normal(size=(5, 2))
    assert np.allclose(ex.evaluate_many([d], pts, pts)[0], 2 * pts[:, 0])
    n = ex.parse("sqrt(y1^2+y2^2)", 2)
    assert ex.evaluate(ex.diff(ex.diff(n, "y1"), "y1"), at([0, 0], [3, 4])) == pytest.approx(0.128, abs=1e-15)
    assert ex.diff(ex.parse("x1*y2", 2), "x2") is ex.ZERO


def test_second_derivative_against_finite_differences():
    n = ex.parse("sqrt(y1^2+y2^2)", 2)
    d1 = ex.diff(n, "y1")
    h = 1e-5
    fd = (ex.evaluate(d1, at([0, 0], [3 + h, 4])) - ex.evaluate(d1, at([0, 0], [3 - h, 4]))) / (2 * h)
    assert fd == pytest.approx(0.128, abs=1e-6)


def test_fifth_order_derivative_stays_small():
    F = ex.parse("sqrt(y1^2+y2^2 - ((x1^2+x2^2)*(y1^2+y2^2) - (x1*y1+x2*y2)^2)) + x1*y1 + x2*y2", 2)
    e = F * F
    for v in ("y1", "y2", "y1", "x1", "x2"):
        e = ex.diff(e, v)
    nodes = ex._postorder([e])
    assert len(nodes) < 20000
    assert math.isfinite(ex.evaluate(e, at([0.1, 0.2], [1.0, 0.5])))


def test_hash_consing_and_identities():
    a = ex.x(1) * ex.y(2)
    assert a is ex.x(1) * ex.y(2)
    assert a + 0 is a and a * 1 is a and (a * 0).is_zero()
    assert ex.const(2) + ex.const(3) is ex.const(5)
    assert ex.diff(a, ex.y(2)) is ex.x(1)


def test_depends_on_and_max_index():
    e = ex.parse("x1*y3 + 2", 3)
    assert e.depends_on("x", 1) and e.depends_on("y", 3)
    assert not e.depends_on("x", 3)
    assert e.max_index() == 3


def test_evaluate_many_shapes():
    e = [ex.x(1), ex.y(2), ex.const(2.0)]
    X = np.arange(6.0).reshape(3, 2)
    out = ex.evaluate_many(e, X, X + 1)
    assert out.shape == (3, 3)
    assert np.array_equal(out[2], [2, 2, 2])
    assert ex.evaluate_many(e, [1.0, 2.0], [3.0, 4.0]).shape == (3, 1)


def test_pickle_round_trip():
    e = ex.parse("exp(-x1) * sin(y2) / (1 + y1^2)", 2)
    back = pickle.loads(pickle.dumps(e))
    p = at([0.3, 0.1], [0.7, -1.2])
    assert ex.evaluate(back, p) == ex.evaluate(e, p)


@given(smooth_exprs)
def test_print_parse_fixed_point(e):
    text = ex.to_string(e)
    again = ex.parse(text, 2)
    assert ex.to_string(again) == text
    X = np.array([[0.3, -0.7], [1.1, 0.2]])
    Y = np.array([[-0.4, 0.9], [0.5, 1.3]])
    assert np.array_equal(ex.evaluate_many([e], X, Y), ex.evaluate_many([again], X, Y))


@given(smooth_exprs, st.integers(0, 3))
def test_diff_matches_finite_differences(e, k):
    kind, idx = (("x", 1), ("x", 2), ("y", 1), ("y", 2))[k]
    z = np.array([[0.3, -0.2, 0.8, -0.5], [-0.6, 0.4, -0.3, 1.1]])
    d = ex.evaluate_many([ex.diff(e, kind, idx)], z[:, :2], z[:, 2:])[0]
    fd = fd_gradient(e, z, 2, h=1e-5)[:, k]
    assert np.all(np.abs(d - fd) <= 1e-5 * np.maximum(1.0, np.abs(d)))


@given(smooth_exprs, st.integers(0, 3), st.integers(0, 3))
def test_mixed_partials_commute(e, a, b):
    names = (("x", 1), ("x", 2), ("y", 1), ("y", 2))
    m1 = ex.diff(ex.diff(e, *names[a]), *names[b])
    m2 = ex.diff(ex.diff(e, *names[b]), *names[a])
    X, Y = np.array([[0.2, -0.9]]), np.array([[0.7, 0.4]])
    v1, v2 = ex.evaluate_many([m1, m2], X, Y)
    assert np.all(np.abs(v1 - v2) <= 1e-10 * np.maximum(1.0, np.abs(v1)))


def test_evaluation_is_deterministic():
    e = ex.parse("sin(x1*y1) + exp(y2)/(1+x2^2)", 2)
    X = np.random.default_rng(1).normal(size=(50, 2))
    a = ex.evaluate_many([e], X, X[::-1])
    b = ex.evaluate_many([e], X, X[::-1])
    assert np.array_equal(a, b)
