import numpy as np
import pytest

from smcp.dp import DP_PAIR_LIMIT, hardness_ratio, k4_closed_forms, optimal_online_value
from smcp.graph import ProbGraph, complete_graph
from smcp.matching import TooLargeError, expected_opt

from .conftest import random_graph


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.64, 0.9])
def test_dp_equals_case_polynomial(p):
    assert optimal_online_value(complete_graph(4, p)) == pytest.approx(k4_closed_forms(p)[0], abs=1e-9)


def test_k4_numbers():
    online, offline = k4_closed_forms(0.64)
    assert offline == pytest.approx(1.792, abs=1e-3)
    assert online == pytest.approx(1.607, abs=2e-3)
    assert hardness_ratio(complete_graph(4, 0.64)) <= 0.898


def test_closed_form_endpoints():
    assert k4_closed_forms(0.0) == pytest.approx((0.0, 0.0))
    assert k4_closed_forms(1.0) == pytest.approx((2.0, 2.0))
    with pytest.raises(ValueError):
        k4_closed_forms(1.2)


def test_single_pair():
    g = ProbGraph(2, {(0, 1): 0.3})
    assert optimal_online_value(g) == pytest.approx(0.3)
    assert hardness_ratio(g) == pytest.approx(1.0)


def test_zero_opt_ratio_undefined():
    with pytest.raises(ValueError):
        hardness_ratio(ProbGraph(3, {}))


def test_guard():
    assert DP_PAIR_LIMIT == 12
    with pytest.raises(TooLargeError):
        optimal_online_value(complete_graph(6, 0.5))


def test_path_value(path3):
    assert optimal_online_value(path3) == pytest.approx(1.81)


def test_stop_action_never_helps(rng):
    for _ in range(40):
        g = random_graph(rng, n_max=6)
        if g.m > 10:
            continue
        assert optimal_online_value(g, allow_stop=True) == pytest.approx(optimal_online_value(g), abs=1e-12)


def test_online_never_beats_offline(rng):
    for _ in range(40):
        g = random_graph(rng, n_max=6)
        if g.m > 10 or g.m == 0:
            continue
        assert optimal_online_value(g) <= expected_opt(g).mean + 1e-12


def test_monotone_in_each_pair_probability():
    base = {(u, v): 0.5 for u in range(4) for v in range(u + 1, 4)}
    v0 = optimal_online_value(ProbGraph(4, base))
    for e in base:
        for h in (1e-3, 0.1, 0.4):
            bumped = dict(base)
            bumped[e] += h
            assert optimal_online_value(ProbGraph(4, bumped)) >= v0 - 1e-12


def test_ratio_at_most_one(rng):
    for _ in range(20):
        g = random_graph(rng, n_max=5)
        if g.m == 0:
            continue
        assert hardness_ratio(g) <= 1 + 1e-12
