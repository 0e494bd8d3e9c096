"""Monte Carlo estimates of maximum-matching membership probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction, check_positive_int, check_random_state
from .graph import ProbGraph, RealizedGraph
from .matching import (
    EXACT_PAIR_LIMIT,
    ExactQTable,
    approx_max_matching,
    exact_q_table,
    lex_table,
    max_matching,
)

SAMPLE_PROFILES = ("paper", "fast")
_CHUNK = 1 << 16


@dataclass(frozen=True)
class QEstimate:
    q: dict
    samples_used: int
    mode: str = "monte-carlo"
    matcher: str = "maximum"

    def total(self) -> float:
        return float(sum(self.q.values()))

    def Q(self, u: int) -> float:
        return sum(x for e, x in self.q.items() if u in e)


def default_sample_count(n: int, profile: str = "fast") -> int:
    """Samples per estimate: ``n ln(n)^6`` ("paper" profile) or ``max(1000, n ln(n)^2)`` ("fast")."""
    if n < 2:
        raise ValueError("sample count needs n >= 2")
    if profile == "paper":
        return math.ceil(n * math.log(n) ** 6)
    if profile == "fast":
        return max(1000, math.ceil(n * math.log(n) ** 2))
    raise ValueError(f"unknown sample profile {profile!r}")


def recompute_schedule(matching_size: int, zeta: float) -> int:
    """Probes allowed before the next re-estimation: ``max(1, floor(size * zeta))``."""
    if matching_size < 0:
        raise ValueError("matching size must be non-negative")
    zeta = check_fraction(zeta, "zeta")
    return max(1, math.floor(matching_size * zeta))


def _matcher_name(matcher, zeta) -> str:
    return "maximum" if matcher == "maximum" else f"approx({zeta:g})"


def estimate_q(
    g: ProbGraph,
    c: int,
    matcher: str = "maximum",
    rng=None,
    *,
    zeta: float = 0.05,
    relabel: bool = False,
) -> QEstimate:
    """Fraction of ``c`` sampled realizations whose matching contains each pair.

    ``matcher`` is ``"maximum"`` or ``"approx"`` (bounded augmentation with
    ``zeta``). On graphs with at most 20 positive pairs the maximum matcher
    uses the canonical lexicographic matching through a precomputed table,
    so estimates converge to :func:`exact_q_table`. ``relabel`` shuffles
    vertex labels independently for each sample before matching.
    """
    c = check_positive_int(c, "c")
    rng = check_random_state(rng)
    if matcher not in ("maximum", "approx"):
        raise ValueError(f"unknown matcher {matcher!r}")
    name = _matcher_name(matcher, zeta)
    if g.m == 0:
        return QEstimate({}, c, "monte-carlo", name)
    counts = np.zeros(g.m, dtype=np.int64)
    if matcher == "maximum" and not relabel and g.m <= EXACT_PAIR_LIMIT:
        table = lex_table(g)
        weights = np.left_shift(1, np.arange(g.m, dtype=np.int64))
        shifts = np.arange(g.m, dtype=np.int64)
        done = 0
        while done < c:
            block = min(_CHUNK, c - done)
            present = rng.random((block, g.m)) < g.probs
            chosen = table.member[present @ weights]
            counts += ((chosen[:, None] >> shifts) & 1).sum(axis=0)
            done += block
    else:
        index = {e: i for i, e in enumerate(g.pairs)}
        for _ in range(c):
            present = rng.random(g.m) < g.probs
            edges = [e for e, keep in zip(g.pairs, present) if keep]
            if relabel:
                perm = rng.permutation(g.n)
                inv = np.argsort(perm)
                mapped = RealizedGraph(g.n, frozenset(tuple(sorted((int(perm[a]), int(perm[b])))) for a, b in edges))
                found = _match(mapped, matcher, zeta)
                pairs = [tuple(sorted((int(inv[a]), int(inv[b])))) for a, b in found]
            else:
                pairs = _match(RealizedGraph(g.n, frozenset(edges)), matcher, zeta)
            for e in pairs:
                counts[index[e]] += 1
    q = {e: float(x) / c for e, x in zip(g.pairs, counts)}
    return QEstimate(q, c, "monte-carlo", name)


def _match(realized, matcher, zeta):
    if matcher == "maximum":
        return max_matching(realized)
    return approx_max_matching(realized, zeta)


def exact_estimate(g: ProbGraph) -> QEstimate:
    table = exact_q_table(g)
    return QEstimate(dict(table.q_star), 0, "exact", "maximum")


@dataclass(frozen=True)
class EstimationError:
    per_pair: dict
    total: float
    worst: float


def estimation_error(est: QEstimate, exact: ExactQTable) -> EstimationError:
    """Absolute deviation of each estimated pair from its exact value."""
    if set(est.q) != set(exact.q_star):
        raise ValueError("estimate and exact table cover different pairs")
    dev = {e: abs(est.q[e] - exact.q_star[e]) for e in exact.q_star}
    return EstimationError(dev, float(sum(dev.values())), float(max(dev.values(), default=0.0)))


class QEstimator(BaseEstimator):
    """Estimator-style wrapper around :func:`estimate_q`.

    ``n_samples=None`` picks :func:`default_sample_count` for the graph's
    vertex count under ``sample_profile``. ``sample_profile="exact"`` uses the
    exact enumeration instead of sampling.
    """

    def __init__(self, n_samples=None, sample_profile="fast", matcher="maximum", zeta=0.05,
                 relabel=False, random_state=None):
        self.n_samples = n_samples
        self.sample_profile = sample_profile
        self.matcher = matcher
        self.zeta = zeta
        self.relabel = relabel
        self.random_state = random_state

    def fit(self, graph: ProbGraph, y=None):
        if self.sample_profile == "exact":
            self.estimate_ = exact_estimate(graph)
        else:
            c = self.n_samples or default_sample_count(max(graph.n, 2), self.sample_profile)
            self.estimate_ = estimate_q(graph, c, self.matcher, self.random_state,
                                        zeta=self.zeta, relabel=self.relabel)
        self.q_ = self.estimate_.q
        return self

    def transform(self, graph: ProbGraph):
        """Estimated q as an array aligned with ``graph.pairs``."""
        q = self.fit(graph).q_
        return np.array([q.get(e, 0.0) for e in graph.pairs])
