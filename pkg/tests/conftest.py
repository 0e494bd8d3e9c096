import sys

import numpy as np
import pytest

from smcp.graph import ProbGraph, complete_graph, generate_instance


@pytest.fixture
def k4():
    return complete_graph(4, 0.64)


@pytest.fixture
def path3():
    return generate_instance("path", {"probs": [0.9, 1.0, 0.9]})


@pytest.fixture
def k33():
    return generate_instance("bipartite", {"n_left": 3, "n_right": 3, "p": 0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, n_max=8, p_range=(0.05, 1.0)):
    n = int(rng.integers(1, n_max + 1))
    density = float(rng.uniform(0.1, 0.9))
    table = {}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                table[(u, v)] = float(rng.uniform(*p_range))
    return ProbGraph(n, table)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
