import sys

import numpy as np
import pytest

from qncsim.graph import NetworkGraph, generate_random_network
from qncsim.qnc import generate_coefficients
from qncsim.signal import generate_sparse_messages


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def chain(n, capacity=1):
    """0 <- 1 <- 2 <- ... <- n-1, gateway 0."""
    return NetworkGraph.from_pairs(n, [(v, v - 1) for v in range(1, n)], 0, capacity)


def small_instance(seed, n=12, edges=36, t_max=6, k=2):
    g = generate_random_network(n, edges, seed=[seed, 0])
    sched = generate_coefficients(g, t_max, seed=[seed, 1])
    msg = generate_sparse_messages(n, k, seed=[seed, 2])
    return g, sched, msg


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda ln: int(ln.split(":")[0].split()[1])):
        terminalreporter.write_line(line)
