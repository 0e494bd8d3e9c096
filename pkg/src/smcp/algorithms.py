"""Online probe-and-commit algorithms.

Every algorithm sees the realization only through ``ProbeOracle.probe`` and
returns a :class:`RunRecord`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction, check_random_state
from .estimate import default_sample_count, estimate_q, exact_estimate, recompute_schedule
from .graph import Matching, Pair, ProbeOracle, ProbGraph, norm_pair
from .sampler import cached_policy, delta_scaled_targets, sample_order

Q_MODES = ("paper", "fast", "exact")


class NotBipartiteError(ValueError):
    pass


@dataclass
class TwoStageConfig:
    alpha: float = 0.255
    sample_profile: str = "fast"
    zeta: float = 0.05
    seed: int = 0
    samples: int | None = None
    relabel: bool = False

    def __post_init__(self):
        check_fraction(self.alpha, "alpha")
        check_fraction(self.zeta, "zeta")
        if self.sample_profile not in Q_MODES:
            raise ValueError(f"sample_profile must be one of {Q_MODES}")

    @property
    def phi(self) -> float:
        """Per-iteration Stage-2 factor (1 - 1/e)(1 - exp(-1/(2 alpha)))."""
        return (1.0 - math.exp(-1.0)) * (1.0 - math.exp(-1.0 / (2.0 * self.alpha)))


@dataclass
class ProbeInfo:
    pair: Pair
    present: bool
    stage: int
    q: float = math.nan
    p: float = math.nan
    iteration: int = 0


@dataclass
class RunRecord:
    matching: Matching
    probes: list = field(default_factory=list)
    stage1_matches: int = 0
    stage2_matches: int = 0
    details: list = field(default_factory=list)
    estimations: int = 0
    stage2_graph: ProbGraph | None = None
    frozen_q: dict = field(default_factory=dict)
    partitions: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.matching)

    def stage2_iteration_of(self) -> dict:
        """Stage-2 iteration index at which each Stage-2 pair was matched."""
        return {d.pair: d.iteration for d in self.details if d.stage == 2 and d.present}


def _record(oracle: ProbeOracle, **kw) -> RunRecord:
    return RunRecord(matching=oracle.matching(), probes=list(oracle.log), **kw)


def _estimate(res: ProbGraph, cfg: TwoStageConfig, rng):
    if cfg.sample_profile == "exact":
        return exact_estimate(res).q
    active = len({x for e in res.pairs for x in e})
    c = cfg.samples or default_sample_count(max(active, 2), cfg.sample_profile)
    return estimate_q(res, c, "maximum", rng, relabel=cfg.relabel).q


def run_two_stage(g: ProbGraph, oracle: ProbeOracle, cfg: TwoStageConfig | None = None, rng=None) -> RunRecord:
    """Prune high-ratio pairs, then match through random bipartitions.

    Stage 1 repeatedly probes the candidate with the largest estimated
    ``q/p`` while it is at least ``alpha``, re-estimating q on the residual
    graph (every probe in exact mode, after ``recompute_schedule`` probes
    otherwise). Stage 2 freezes q and repeatedly splits the live vertices
    into L (the larger half) and R; each L vertex scans its R candidates in
    an order drawn from the delta-scaled target policy until one is present.
    """
    cfg = cfg or TwoStageConfig()
    rng = check_random_state(cfg.seed if rng is None else rng)
    alpha = cfg.alpha
    res = g
    details: list[ProbeInfo] = []
    q = _estimate(res, cfg, rng)
    estimations = 1
    stale = False
    budget = 1 if cfg.sample_profile == "exact" else recompute_schedule(int(sum(q.values())), cfg.zeta)
    stage1 = 0
    while True:
        best, best_ratio = None, -1.0
        for e, pe in res.items():
            ratio = q.get(e, 0.0) / pe
            if ratio > best_ratio:
                best, best_ratio = e, ratio
        if best is None or best_ratio < alpha:
            if stale:
                q = _estimate(res, cfg, rng)
                estimations += 1
                stale = False
                budget = 1 if cfg.sample_profile == "exact" else recompute_schedule(int(sum(q.values())), cfg.zeta)
                continue
            break
        pe = res.p(*best)
        present = oracle.probe(*best)
        details.append(ProbeInfo(best, present, 1, q.get(best, 0.0), pe))
        if present:
            stage1 += 1
            res = res.residual(removed=best)
        else:
            res = res.residual(absent=[best])
        stale = True
        budget -= 1
        if budget <= 0:
            q = _estimate(res, cfg, rng)
            estimations += 1
            stale = False
            budget = 1 if cfg.sample_profile == "exact" else recompute_schedule(int(sum(q.values())), cfg.zeta)

    frozen = {e: x for e, x in q.items() if e in res}
    record = run_stage_two(res, frozen, oracle, alpha, rng)
    record.details[:0] = details
    record.stage1_matches = stage1
    record.estimations = estimations
    return record


def run_stage_two(res: ProbGraph, frozen: dict, oracle: ProbeOracle, alpha: float, rng=None) -> RunRecord:
    """Stage 2 alone: random bipartitions with delta-scaled probe orders.

    ``res`` is the residual graph left by Stage 1 and ``frozen`` the q values
    that stay fixed from here on. Exposed separately so the per-vertex
    guarantee can be exercised with any frozen q.
    """
    rng = check_random_state(rng)
    details: list[ProbeInfo] = []
    partitions = []
    stage2 = 0
    adj: dict[int, dict[int, float]] = {}
    for (a, b), pe in res.items():
        adj.setdefault(a, {})[b] = pe
        adj.setdefault(b, {})[a] = pe
    X = sorted(adj)
    iteration = 0
    while len(X) >= 2 and _has_internal_pair(X, adj):
        perm = rng.permutation(len(X))
        half = (len(X) + 1) // 2
        L = sorted(X[i] for i in perm[:half])
        R = sorted(X[i] for i in perm[half:])
        Rset = set(R)
        partitions.append((tuple(L), tuple(R)))
        for u in L:
            nbrs = [v for v in sorted(adj.get(u, ())) if v in Rset]
            if not nbrs:
                continue
            pairs = [norm_pair(u, v) for v in nbrs]
            profile = delta_scaled_targets(
                [frozen.get(e, 0.0) for e in pairs], [adj[u][v] for v in nbrs], alpha
            )
            for idx in sample_order(cached_policy(profile), rng):
                e = pairs[idx]
                present = oracle.probe(*e)
                details.append(ProbeInfo(e, present, 2, frozen.get(e, 0.0), adj[u][nbrs[idx]], iteration))
                v = nbrs[idx]
                if present:
                    stage2 += 1
                    _drop_vertex(adj, u)
                    _drop_vertex(adj, v)
                    Rset.discard(v)
                    break
                del adj[u][v]
                del adj[v][u]
        for u in L:
            _drop_vertex(adj, u)
        X = [v for v in R if v in Rset and any(w in Rset for w in adj.get(v, ()))]
        iteration += 1
    return _record(
        oracle,
        stage2_matches=stage2,
        details=details,
        stage2_graph=res,
        frozen_q=frozen,
        partitions=partitions,
    )


def _drop_vertex(adj, u):
    for w in adj.pop(u, {}):
        adj[w].pop(u, None)


def _has_internal_pair(X, adj) -> bool:
    xs = set(X)
    return any(w in xs for u in X for w in adj.get(u, ()))


def run_greedy(g: ProbGraph, oracle: ProbeOracle, order: str = "index", rng=None) -> RunRecord:
    """Probe every positive pair once, in index or uniformly random order."""
    pairs = list(g.pairs)
    if order == "random":
        rng = check_random_state(rng)
        pairs = [pairs[i] for i in rng.permutation(len(pairs))]
    elif order != "index":
        raise ValueError(f"unknown greedy order {order!r}")
    removed = oracle.removed
    for u, v in pairs:
        if u in removed or v in removed:
            continue
        oracle.probe(u, v)
    return _record(oracle, stage1_matches=len(oracle.matched))


def run_random_vertex_greedy(g: ProbGraph, oracle: ProbeOracle, rng=None) -> RunRecord:
    """Visit vertices in random order; each probes live neighbors in random order."""
    rng = check_random_state(rng)
    adj: dict[int, list[int]] = {}
    for a, b in g.pairs:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    removed = oracle.removed
    for u in rng.permutation(g.n).tolist():
        if u in removed or u not in adj:
            continue
        nbrs = [v for v in adj[u] if v not in removed and not oracle.was_probed(norm_pair(u, v))]
        for i in rng.permutation(len(nbrs)).tolist():
            if oracle.probe(u, nbrs[i]):
                break
    return _record(oracle, stage1_matches=len(oracle.matched))


def run_oblivious_bipartite(g: ProbGraph, oracle: ProbeOracle, rng=None) -> RunRecord:
    """Random-order oblivious matching on a bipartite instance.

    Both sides are shuffled; each left vertex, in shuffled order, probes its
    right neighbors in the right side's shuffled order until one is present.
    """
    ok, color = g.is_bipartite()
    if not ok:
        raise NotBipartiteError("instance support is not bipartite")
    rng = check_random_state(rng)
    left = [v for v in range(g.n) if color[v] == 0]
    right = [v for v in range(g.n) if color[v] == 1]
    left = [left[i] for i in rng.permutation(len(left))]
    rank = {v: i for i, v in enumerate(right[i] for i in rng.permutation(len(right)))}
    removed = oracle.removed
    for u in left:
        for v in sorted(g.neighbors(u), key=rank.__getitem__):
            if v in removed:
                continue
            if oracle.probe(u, v):
                break
    return _record(oracle, stage1_matches=len(oracle.matched))


# estimator-style front ends ---------------------------------------------


class _OnlineAlgorithm(BaseEstimator):
    """Common ``fit``/``run`` protocol: fit binds the instance, run plays one trial."""

    def fit(self, graph: ProbGraph, y=None):
        self.graph_ = graph
        return self

    def _check_fitted(self):
        if not hasattr(self, "graph_"):
            raise RuntimeError(f"{type(self).__name__} must be fit on an instance before run()")


class TwoStageMatcher(_OnlineAlgorithm):
    def __init__(self, alpha=0.255, q_mode="fast", zeta=0.05, samples=None, relabel=False, random_state=0):
        self.alpha = alpha
        self.q_mode = q_mode
        self.zeta = zeta
        self.samples = samples
        self.relabel = relabel
        self.random_state = random_state

    def config(self) -> TwoStageConfig:
        seed = self.random_state if isinstance(self.random_state, int) else 0
        return TwoStageConfig(self.alpha, self.q_mode, self.zeta, seed, self.samples, self.relabel)

    def fit(self, graph, y=None):
        self.config_ = self.config()
        return super().fit(graph)

    def run(self, oracle: ProbeOracle, rng=None) -> RunRecord:
        self._check_fitted()
        return run_two_stage(self.graph_, oracle, self.config_, rng)


class GreedyMatcher(_OnlineAlgorithm):
    def __init__(self, order="index"):
        self.order = order

    def run(self, oracle, rng=None):
        self._check_fitted()
        return run_greedy(self.graph_, oracle, self.order, rng)


class RandomVertexGreedy(_OnlineAlgorithm):
    def run(self, oracle, rng=None):
        self._check_fitted()
        return run_random_vertex_greedy(self.graph_, oracle, rng)


class ObliviousBipartite(_OnlineAlgorithm):
    def fit(self, graph, y=None):
        if not graph.is_bipartite()[0]:
            raise NotBipartiteError("oblivious-bipartite needs a bipartite instance")
        return super().fit(graph)

    def run(self, oracle, rng=None):
        self._check_fitted()
        return run_oblivious_bipartite(self.graph_, oracle, rng)


ALGORITHMS = {
    "twostage": TwoStageMatcher,
    "greedy": GreedyMatcher,
    "random-greedy": RandomVertexGreedy,
    "oblivious-bipartite": ObliviousBipartite,
}


def make_algorithm(name: str, **params) -> _OnlineAlgorithm:
    try:
        cls = ALGORITHMS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    valid = cls().get_params()
    return cls(**{k: v for k, v in params.items() if k in valid and v is not None})
