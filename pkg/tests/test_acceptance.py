"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion lines are
printed in the "acceptance criteria" section of the terminal summary.
"""
import pytest

from finsler_lab.suites import SUITES, SuiteContext, run_suite

TITLES = {
    "flat": "euclidean metric: N, R, tau, S and chi vanish",
    "riemannian": "quadratic metrics: spray, connection and curvature against the Christoffel oracle",
    "spray": "geodesic spray defining equation on every preset",
    "projective": "delta_G f invariant under projective change",
    "djdhf": "delta_G f = 0 iff d_h d_J f = 0 on the candidate family",
    "shf": "strong hamel -> dual symmetry -> dynamical symmetry chain",
    "noether": "JX(L) is a first integral along geodesics",
    "schi": "projective laws for S and chi",
    "funk": "funk metric classification and funk iff hamel and weak funk",
    "chi": "chi = 0 iff S is strong hamel with witness tau",
    "flows": "energy conservation, RK4 order and projective path agreement",
    "expr": "symbolic derivatives against finite differences",
}

CASES = sorted(SUITES, key=lambda name: SUITES[name][0])


@pytest.mark.parametrize("name", CASES)
def test_criterion(name, acceptance_log):
    number = SUITES[name][0]
    checks = run_suite(name, SuiteContext())
    failed = [c for c in checks if not c.passed]
    status = "PASS" if checks and not failed else "FAIL"
    line = (f"[{status}] criterion {number}: {TITLES[name]} "
            f"({len(checks) - len(failed)}/{len(checks)} checks)")
    acceptance_log.append(line)
    print(line)
    assert checks, f"suite {name} produced no checks"
    assert not failed, "\n".join(c.line() for c in failed)
