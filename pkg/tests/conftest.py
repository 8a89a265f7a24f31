import numpy as np
import pytest

from flipchain.triangulation import flip, make_christmas_tree


def random_walk(T, steps, seed):
    """Apply ``steps`` uniformly chosen flip attempts to a copy of ``T``."""
    rng = np.random.default_rng(seed)
    U = T.copy()
    for _ in range(steps):
        pairs = sorted(U.link_set())
        a, b = pairs[rng.integers(len(pairs))]
        flip(U, U.link(a, b))
    return U


@pytest.fixture
def tree7():
    return make_christmas_tree(7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
