import numpy as np
import pytest

from dyadic.grid import DyadicTree, Window
from dyadic.measure import MeasureTree, build_lebesgue, build_lsmp, build_twist


def random_leaves(rng, D, p_split=0.7):
    """(depth, offset) pairs of a random partition of a depth-D window."""
    out = []

    def grow(d, o):
        if d < D and (d == 0 or rng.random() < p_split):
            grow(d + 1, 2 * o)
            grow(d + 1, 2 * o + 1)
        else:
            out.append((d, o))

    grow(0, 0)
    return out


def random_tree(rng, J=0, D=6, p_split=0.7):
    return DyadicTree.from_leaves(Window(J, D), random_leaves(rng, D, p_split))


def random_measure(rng, J=0, D=6, p_split=0.7, spread=2.0):
    t = random_tree(rng, J, D, p_split)
    return MeasureTree(t, rng.lognormal(0.0, spread, t.n_leaves))


def named_measure(name, D, J=0):
    w = Window(J, D)
    return {"lebesgue": build_lebesgue, "lsmp": build_lsmp, "twist": build_twist}[name](w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
