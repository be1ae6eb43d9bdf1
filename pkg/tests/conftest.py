import math

import numpy as np
import pytest

from erba import RadialKernel


def loop_matrix(kernel, X, Y):
    """Elementwise kernel matrix, one math.dist call per pair."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    out = np.empty((len(X), len(Y)))
    for i, x in enumerate(X):
        for j, y in enumerate(Y):
            out[i, j] = kernel(math.dist(x, y))
    return out


def random_nodes(rng, n, d, sep=1e-3):
    """n points in [0, 1]^d with pairwise separation >= sep."""
    pts = []
    while len(pts) < n:
        x = rng.uniform(0, 1, d)
        if all(np.linalg.norm(x - p) >= sep for p in pts):
            pts.append(x)
    return np.array(pts)


@pytest.fixture
def matern():
    return RadialKernel("matern-c0", 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: one PASS/FAIL line per criterion at session end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        desc, parts = ACCEPTANCE[number]
        ok = all(passed for passed, _ in parts)
        detail = "; ".join(msg for _, msg in parts if msg)
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {desc}" + (f" -- {detail}" if detail else "")
        )
