import math

import numpy as np
import pytest
from sklearn.base import clone

from smcp._validation import trial_rng
from smcp.algorithms import (
    GreedyMatcher,
    NotBipartiteError,
    ObliviousBipartite,
    RandomVertexGreedy,
    TwoStageConfig,
    TwoStageMatcher,
    make_algorithm,
    run_greedy,
    run_stage_two,
    run_two_stage,
)
from smcp.graph import ProbeOracle, ProbGraph, RealizedGraph, complete_graph, generate_instance, sample_realization
from smcp.matching import exact_q_table, expected_opt, max_matching


class SpyOracle(ProbeOracle):
    """Counts probes; algorithms must touch nothing but ``probe``."""

    def __init__(self, realization):
        super().__init__(realization)
        self.calls = 0

    def probe(self, u, v):
        self.calls += 1
        return super().probe(u, v)


def all_algorithms():
    return [
        TwoStageMatcher(q_mode="exact"),
        TwoStageMatcher(q_mode="fast", samples=300),
        GreedyMatcher("index"),
        GreedyMatcher("random"),
        RandomVertexGreedy(),
    ]


def play(alg, g, seed, t=0):
    oracle = SpyOracle(sample_realization(g, trial_rng(seed, t, 0)))
    return oracle, alg.fit(g).run(oracle, trial_rng(seed, t, 1))


@pytest.mark.parametrize("alg", all_algorithms(), ids=lambda a: repr(a))
def test_commitment_and_no_repeats(alg, k4, path3, k33):
    for g in (k4, path3, k33):
        for t in range(30):
            oracle, rec = play(alg, g, 5, t)
            present = {e for e, ok in rec.probes if ok}
            assert set(rec.matching) == present
            pairs = [e for e, _ in rec.probes]
            assert len(pairs) == len(set(pairs)) == oracle.calls
            assert rec.stage1_matches + rec.stage2_matches == rec.size


@pytest.mark.parametrize("alg", all_algorithms()[2:], ids=lambda a: repr(a))
def test_baselines_are_maximal(alg, k4, k33):
    for g in (k4, k33):
        for t in range(30):
            oracle, rec = play(alg, g, 8, t)
            matched = rec.matching.vertices()
            realized = oracle._ProbeOracle__edges
            assert all(u in matched or v in matched for u, v in realized)


def test_oracle_state_is_private():
    oracle = ProbeOracle(RealizedGraph(2, frozenset({(0, 1)})))
    assert not hasattr(oracle, "edges")
    assert not hasattr(oracle, "realization")


def test_two_stage_examples():
    empty = ProbGraph(3, {})
    rec = run_two_stage(empty, ProbeOracle(RealizedGraph(3, frozenset())), TwoStageConfig(sample_profile="exact"))
    assert rec.size == 0 and rec.probes == []
    single = ProbGraph(2, {(0, 1): 1.0})
    rec = run_two_stage(single, ProbeOracle(RealizedGraph(2, frozenset({(0, 1)}))), TwoStageConfig(sample_profile="exact"))
    assert rec.size == 1 and rec.stage1_matches == 1


def test_path_probes_outer_edge_first(path3):
    cfg = TwoStageConfig(sample_profile="exact")
    for t in range(50):
        real = sample_realization(path3, trial_rng(3, t, 0))
        rec = run_two_stage(path3, ProbeOracle(real), cfg, trial_rng(3, t, 1))
        assert rec.probes[0][0] in ((0, 1), (2, 3))
        if (1, 2) in [e for e, _ in rec.probes]:
            # the middle pair only comes up once both outer pairs are gone or dead
            before = [e for e, _ in rec.probes[: [e for e, _ in rec.probes].index((1, 2))]]
            assert (0, 1) in before


def test_stage_one_threshold_and_charging(k4, path3, k33):
    cfg = TwoStageConfig(sample_profile="exact")
    for g in (k4, path3, k33):
        for t in range(40):
            rec = run_two_stage(g, ProbeOracle(sample_realization(g, trial_rng(2, t, 0))), cfg, trial_rng(2, t, 1))
            for d in rec.details:
                if d.stage == 1:
                    assert d.q / d.p >= cfg.alpha
                    assert 2 * (d.p - d.q) + d.q <= (2 - cfg.alpha) * d.p + 1e-12
            if rec.stage2_graph is not None:
                q = exact_q_table(rec.stage2_graph).q_star
                assert all(x / rec.stage2_graph.p(*e) < cfg.alpha for e, x in q.items())


def test_stage_two_partition_discipline():
    g = complete_graph(6, 0.9)
    opt = expected_opt(g).mean
    q = {e: opt / g.m for e in g.pairs}
    for t in range(200):
        oracle = ProbeOracle(sample_realization(g, trial_rng(4, t, 0)))
        rec = run_stage_two(g, q, oracle, 0.255, trial_rng(4, t, 1))
        assert rec.partitions
        L0, R0 = rec.partitions[0]
        assert len(L0) == 3 and len(R0) == 3
        for d in rec.details:
            L, R = map(set, rec.partitions[d.iteration])
            u, v = d.pair
            assert (u in L and v in R) or (u in R and v in L)
        for i in range(1, len(rec.partitions)):
            assert set(sum(rec.partitions[i], ())) <= set(rec.partitions[i - 1][1])


def test_stage_two_runs_under_relabeled_estimates():
    g = complete_graph(6, 0.9)
    alg = TwoStageMatcher(q_mode="fast", samples=4000, relabel=True).fit(g)
    rec = alg.run(ProbeOracle(sample_realization(g, trial_rng(0, 0, 0))), trial_rng(0, 0, 1))
    assert rec.partitions and rec.stage2_matches > 0


def test_determinism(k4):
    alg = TwoStageMatcher(q_mode="fast", samples=500)
    a = play(alg, k4, 21, 3)[1]
    b = play(clone(alg), k4, 21, 3)[1]
    assert a.probes == b.probes and a.details == b.details


def test_greedy_examples():
    g = complete_graph(4, 1.0)
    rec = run_greedy(g, ProbeOracle(sample_realization(g, 0)))
    assert rec.size == 2
    disjoint = ProbGraph(6, {(0, 1): 0.5, (2, 3): 0.5, (4, 5): 0.5})
    for t in range(20):
        real = sample_realization(disjoint, trial_rng(1, t, 0))
        assert len(run_greedy(disjoint, ProbeOracle(real)).matching) == len(real.edges)
    with pytest.raises(ValueError):
        run_greedy(g, ProbeOracle(sample_realization(g, 0)), order="sideways")


def test_greedy_half_bound(k4, k33):
    for g in (k4, k33):
        for t in range(300):
            real = sample_realization(g, trial_rng(6, t, 0))
            rec = run_greedy(g, ProbeOracle(real), "random", trial_rng(6, t, 1))
            assert 2 * rec.size >= len(max_matching(real))


def test_oblivious_bipartite():
    g = generate_instance("bipartite", {"n_left": 5, "n_right": 5, "p": 0.8})
    alg = ObliviousBipartite().fit(g)
    total = sum(alg.run(ProbeOracle(sample_realization(g, trial_rng(9, t, 0))), trial_rng(9, t, 1)).size
                for t in range(10_000))
    assert total / 10_000 / expected_opt(g, "monte-carlo", trials=20_000, rng=1).mean >= 0.6
    with pytest.raises(NotBipartiteError):
        ObliviousBipartite().fit(complete_graph(3, 0.5))
    single = ProbGraph(2, {(0, 1): 1.0})
    assert ObliviousBipartite().fit(single).run(ProbeOracle(sample_realization(single, 0)), 0).size == 1


def test_recompute_count_is_logarithmic():
    worst = 0.0
    for s in range(100):
        g = generate_instance("sparse-random", {"n": 30, "density": 0.2}, s)
        alg = TwoStageMatcher(q_mode="fast", samples=40).fit(g)
        rec = alg.run(ProbeOracle(sample_realization(g, trial_rng(s, 0, 0))), trial_rng(s, 0, 1))
        worst = max(worst, rec.estimations / (10 * math.log(g.m)))
    assert worst <= 1.0


def test_factory_and_params():
    alg = make_algorithm("twostage", alpha=0.3, order="random", samples=None)
    assert isinstance(alg, TwoStageMatcher) and alg.alpha == 0.3
    assert make_algorithm("greedy", order="random").order == "random"
    with pytest.raises(ValueError):
        make_algorithm("magic")
    with pytest.raises(RuntimeError):
        GreedyMatcher().run(ProbeOracle(RealizedGraph(2, frozenset())))
    with pytest.raises(ValueError):
        TwoStageConfig(alpha=1.5)
    assert TwoStageConfig().phi == pytest.approx(0.543, abs=1e-3)
