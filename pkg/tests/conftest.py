import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from privex.prob_core import bec, bsc, joint_from_channel, validate_joint

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def h2(a):
    """Binary entropy written out, independent of the library."""
    if a in (0.0, 1.0):
        return 0.0
    return float(-a * np.log2(a) - (1 - a) * np.log2(1 - a))


@st.composite
def joints(draw, max_x=4, max_y=4, min_x=2, min_y=2):
    nx = draw(st.integers(min_x, max_x))
    ny = draw(st.integers(min_y, max_y))
    raw = draw(arrays(float, (nx, ny), elements=st.floats(0.01, 1.0)))
    return validate_joint(raw / raw.sum())


@pytest.fixture
def bsc_uniform():
    return lambda a: joint_from_channel([0.5, 0.5], bsc(a))


@pytest.fixture
def bec_joint():
    return lambda d, px=(0.5, 0.5): joint_from_channel(list(px), bec(d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
