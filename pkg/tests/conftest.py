import numpy as np
import pytest
from hypothesis import settings, strategies as st

from finsler_lab import expr as ex
from finsler_lab.geometry import sample_points

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DIM = 2

leaves = st.one_of(
    st.floats(-3, 3, allow_nan=False).map(lambda v: ex.const(round(v, 3))),
    st.integers(1, DIM).map(ex.x),
    st.integers(1, DIM).map(ex.y),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
        st.tuples(children, children).map(lambda ab: ab[0] - ab[1]),
        st.tuples(children, children).map(lambda ab: ab[0] * ab[1]),
        st.tuples(children, children).map(lambda ab: ab[0] / (ex.const(1.5) + ab[1] * ab[1])),
        children.map(ex.sin),
        children.map(ex.cos),
        children.map(lambda a: ex.exp(ex.sin(a))),
        children.map(lambda a: ex.sqrt(ex.ONE + a * a)),
        children.map(lambda a: ex.log(ex.const(2.0) + ex.cos(a))),
        children.map(lambda a: -a),
        children.map(lambda a: a ** 3),
    )


# smooth everywhere, so finite differences and evaluation never hit a domain error
smooth_exprs = st.recursive(leaves, _extend, max_leaves=12)


@pytest.fixture(scope="session")
def points2():
    return sample_points(2, 40, seed=7)


@pytest.fixture(scope="session")
def points3():
    return sample_points(3, 30, seed=7)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / (1.0 + np.maximum(np.abs(a), np.abs(b)))))


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion for the terminal report."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
