import numpy as np
import pytest
from hypothesis import settings, strategies as st

from wco.space import MeasureSpace, SystemInstance

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("stress", max_examples=1000, deadline=None)
settings.load_profile("default")


def collapse_instance() -> SystemInstance:
    """mu = (1, 2), phi = a on both atoms, w = (1, 2)."""
    return SystemInstance.from_mappings({"a": 1.0, "b": 2.0}, {"a": "a", "b": "a"}, {"a": 1, "b": 2})


def diagonal_instance(w, mu=None) -> SystemInstance:
    n = len(w)
    space = MeasureSpace(tuple(f"x{i}" for i in range(n)), np.ones(n) if mu is None else mu)
    return SystemInstance(space, np.arange(n), np.asarray(w, complex))


@pytest.fixture
def collapse():
    return collapse_instance()


@st.composite
def instances(draw, max_atoms: int = 8, zero_rate: bool = True):
    n = draw(st.integers(1, max_atoms))
    mu = draw(st.lists(st.floats(0.1, 10.0), min_size=n, max_size=n))
    phi = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    mods = draw(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 3.0)), min_size=n, max_size=n))
    args = draw(st.lists(st.floats(0.0, 2 * np.pi), min_size=n, max_size=n))
    w = np.array(mods) * np.exp(1j * np.array(args))
    if zero_rate:
        zeros = draw(st.lists(st.booleans(), min_size=n, max_size=n))
        w[np.array(zeros)] = 0
    space = MeasureSpace(tuple(f"x{i}" for i in range(n)), np.array(mu))
    return SystemInstance(space, np.array(phi), w)


def real_vectors(n: int):
    return st.lists(st.floats(-10, 10), min_size=n, max_size=n).map(np.array)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
