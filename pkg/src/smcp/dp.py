"""Optimal online probing by exhaustive dynamic programming, and the K4 closed forms."""

from __future__ import annotations

import math
from functools import lru_cache

from ._validation import check_probability
from .matching import TooLargeError, expected_opt
from .graph import ProbGraph

DP_PAIR_LIMIT = 12


def optimal_online_value(g: ProbGraph, allow_stop: bool = False) -> float:
    """Expected matching size of the best probe-and-commit policy.

    The state is the set of candidate pairs still available; matched
    vertices drop their pairs and absent probes drop one pair. With
    ``allow_stop`` the policy may also stop with value 0.
    """
    if g.m > DP_PAIR_LIMIT:
        raise TooLargeError(f"DP limited to {DP_PAIR_LIMIT} positive pairs, got {g.m}")
    probs = g.probs.tolist()
    touch = []
    for a, b in g.pairs:
        bits = 0
        for j, (c, d) in enumerate(g.pairs):
            if a in (c, d) or b in (c, d):
                bits |= 1 << j
        touch.append(bits)

    @lru_cache(maxsize=None)
    def value(mask: int) -> float:
        best = 0.0 if allow_stop else -math.inf
        rest = mask
        while rest:
            low = rest & -rest
            i = low.bit_length() - 1
            rest ^= low
            p = probs[i]
            v = p * (1.0 + value(mask & ~touch[i])) + (1.0 - p) * value(mask ^ low)
            if v > best:
                best = v
        return 0.0 if best == -math.inf else best

    return value((1 << g.m) - 1)


def k4_closed_forms(p: float) -> tuple[float, float]:
    """(optimal online value, expected maximum matching) on K4 with uniform p."""
    p = check_probability(p)
    s = 1.0 - p
    online = p + p**2 + s * p * (1 + p) + s**2 * p * (1 + p) + s**3 * (1 - s**3)
    single = 8 * p**3 * s**3 + 6 * p * s**5 + 12 * p**2 * s**4
    offline = single + 2 * (1 - s**6 - single)
    return online, offline


def hardness_ratio(g: ProbGraph) -> float:
    """Optimal online value over expected offline optimum."""
    opt = expected_opt(g, "exact").mean
    if opt <= 0.0:
        raise ValueError("expected maximum matching is zero; ratio undefined")
    return optimal_online_value(g) / opt
