"""Independent oracles: plain-Python enumeration that shares no code with the package."""
import itertools
import math

import numpy as np
import pytest


def level_energy(single, pair, n, e0=0.0, higher=None):
    """E(n) summed term by term from an occupation tuple."""
    e = e0 + sum(eps * k for eps, k in zip(single, n))
    e += sum(v * n[i] * n[j] for (i, j), v in pair.items())
    for key, v in (higher or {}).items():
        e += v * all(n[i] for i in key)
    return e


def enumerate_moments(single, pair, e0=0.0, higher=None):
    """(Z, <n_k>, <n_k n_l>) by direct summation over all 2**N patterns."""
    size = len(single)
    states = list(itertools.product((0, 1), repeat=size))
    weights = [math.exp(-level_energy(single, pair, n, e0, higher)) for n in states]
    z = math.fsum(weights)
    occ = [math.fsum(w * n[k] for w, n in zip(weights, states)) / z for k in range(size)]
    both = [[math.fsum(w * n[k] * n[l] for w, n in zip(weights, states)) / z
             for l in range(size)] for k in range(size)]
    return z, occ, both


def enumerate_w(single, pair, i, j, higher=None):
    _, occ, both = enumerate_moments(single, pair, higher=higher)
    return abs(both[i][j] - occ[i] * occ[j])


def random_pairs(rng, n, scale):
    return {(i, j): float(rng.uniform(-scale, scale)) for i in range(n) for j in range(i + 1, n)}


@pytest.fixture
def rng():
    return np.random.default_rng(20260)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
