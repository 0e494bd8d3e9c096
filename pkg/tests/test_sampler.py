import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcp.sampler import (
    InfeasibleProfileError,
    Leaf,
    Mix,
    TargetProfile,
    brute_force_first_probs,
    build_policy,
    delta_factor,
    delta_scaled_targets,
    feasibility_margin,
    first_occurrence_probs,
    order_win_probs,
    prefix_feasibility_equals_full,
    prefix_slacks,
    ratio_order,
    sample_order,
    slack_removal,
)


def random_profile(rng, k_max=8, zero_p=0.1, zero_r=0.1):
    k = int(rng.integers(1, k_max + 1))
    p = rng.uniform(0, 1, k) ** rng.choice([0.5, 1, 3])
    p[rng.random(k) < zero_p] = 0.0
    r = rng.uniform(0, 1, k) * p
    r[rng.random(k) < zero_r] = 0.0
    return TargetProfile(p, r)


def feasible(profile):
    y = feasibility_margin(profile)
    return profile if math.isinf(y) else profile.scaled(y)


profiles = st.integers(1, 8).flatmap(
    lambda k: st.tuples(
        st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k),
        st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k),
    )
).map(lambda pr: TargetProfile(np.array(pr[0]), np.array(pr[0]) * np.array(pr[1])))


def test_margin_examples():
    assert feasibility_margin(TargetProfile([0.5], [0.5])) == pytest.approx(1.0)
    assert feasibility_margin(TargetProfile([0.5, 0.5], [0.375, 0.375])) == pytest.approx(1.0)
    assert feasibility_margin(TargetProfile([0.5, 0.5], [0.6, 0.1])) == pytest.approx(0.5 / 0.6)
    assert feasibility_margin(TargetProfile([0.0, 0.5], [0.1, 0.1])) == 0.0
    assert math.isinf(feasibility_margin(TargetProfile([0.3, 0.5], [0.0, 0.0])))


def test_profile_validation():
    with pytest.raises(ValueError):
        TargetProfile([0.5, 0.5], [0.1])
    with pytest.raises(ValueError):
        TargetProfile([1.5], [0.1])
    with pytest.raises(ValueError):
        TargetProfile([0.5], [-0.1])


def test_ratio_order_ties_and_degenerate_events():
    p = np.array([0.5, 0.0, 0.5, 0.0, 0.25])
    r = np.array([0.25, 0.0, 0.25, 0.1, 0.125])
    assert list(ratio_order(p, r)) == [3, 0, 2, 4, 1]


def test_single_event_policy():
    policy = build_policy(TargetProfile([0.4], [0.4]))
    assert isinstance(policy.root, Leaf)
    assert sample_order(policy, 0) == [0]
    assert first_occurrence_probs(policy, [0.4]) == pytest.approx([0.4])


def test_symmetric_pair_needs_uniform_mix():
    profile = TargetProfile([0.5, 0.5], [0.375, 0.375])
    policy = build_policy(profile)
    probs = first_occurrence_probs(policy, profile.p)
    assert probs == pytest.approx([0.375, 0.375], abs=1e-12)
    assert brute_force_first_probs(policy, profile.p) == pytest.approx(probs, abs=1e-12)


def test_fixed_order_probabilities():
    assert order_win_probs([0, 1], [0.5, 0.5]) == pytest.approx([0.5, 0.25])
    policy = build_policy(TargetProfile([0.5, 0.5], [0.5, 0.0]))
    assert first_occurrence_probs(policy, [0.5, 0.5]) == pytest.approx([0.5, 0.25])


def test_full_mix_is_fixed_order():
    node = Mix(1.0, (2, 0, 1))
    from smcp.sampler import OrderPolicy

    policy = OrderPolicy(root=node, k=3)
    rng = np.random.default_rng(0)
    assert all(sample_order(policy, rng) == [2, 0, 1] for _ in range(20))


def test_infeasible_zero_probability_target():
    with pytest.raises(InfeasibleProfileError):
        build_policy(TargetProfile([0.0, 0.5], [0.1, 0.1]))


@settings(max_examples=400, deadline=None)
@given(profiles)
def test_soundness_and_conservation(profile):
    policy = build_policy(profile)
    probs = first_occurrence_probs(policy, profile.p)
    assert np.all(probs >= policy.targets - 1e-9)
    assert probs.sum() == pytest.approx(1.0 - np.prod(1.0 - profile.p), abs=1e-9)
    order = sample_order(policy, 1)
    assert sorted(order) == list(range(profile.k))


def test_exact_matches_enumeration(rng):
    for _ in range(300):
        profile = random_profile(rng, k_max=6)
        policy = build_policy(profile)
        assert brute_force_first_probs(policy, profile.p) == pytest.approx(
            first_occurrence_probs(policy, profile.p), abs=1e-12
        )


def test_sampling_frequencies_match_exact():
    profile = TargetProfile([0.3, 0.6, 0.2, 0.8], [0.2, 0.3, 0.05, 0.2])
    policy = build_policy(profile)
    exact = first_occurrence_probs(policy, profile.p)
    rng = np.random.default_rng(99)
    n = 100_000
    counts = np.zeros(4)
    p = profile.p
    draws = rng.random((n, 4)) < p
    for t in range(n):
        for e in sample_order(policy, rng):
            if draws[t, e]:
                counts[e] += 1
                break
    freq = counts / n
    sigma = np.sqrt(exact * (1 - exact) / n)
    assert np.all(np.abs(freq - exact) <= 4 * sigma + 1e-12)


def test_prefix_check(rng):
    for _ in range(200):
        assert prefix_feasibility_equals_full(random_profile(rng, k_max=12))
    assert prefix_feasibility_equals_full(TargetProfile([0.4] * 3, [0.2] * 3))
    assert prefix_feasibility_equals_full(TargetProfile([0.4, 0.7, 0.1], [0.2, 0.0, 0.05]))


def test_prefix_check_counterexample_for_plain_minimum_slack():
    # a strictly feasible profile whose tightest subset is not a ratio prefix
    p = np.array([0.9, 0.01])
    r = np.array([0.45, 0.004])
    order = ratio_order(p, r)
    assert list(order) == [0, 1]
    assert prefix_slacks(p, r).min() > 0.006 - 1e-12
    assert 0.01 - 0.004 < prefix_slacks(p, r).min()
    assert prefix_feasibility_equals_full(TargetProfile(p, r))


def _step_one_input(rng):
    """A ratio-sorted, full-set-tight profile with positive targets and no tight proper prefix."""
    while True:
        k = int(rng.integers(2, 9))
        p = rng.uniform(0.05, 1.0, k)
        r = rng.uniform(0.05, 1.0, k) * p
        y = feasibility_margin(TargetProfile(p, r))
        r = r * y
        order = ratio_order(p, r)
        p, r = p[order], r[order]
        slack = prefix_slacks(p, r, np.arange(k))
        if slack[:-1].min() > 1e-6 and abs(slack[-1]) < 1e-9:
            return p, r


def test_step_one_preserves_ratio_order_and_tightens(rng):
    hits = {"prefix": 0, "target": 0, "none": 0}
    for _ in range(400):
        p, r = _step_one_input(rng)
        z, r_new, binding = slack_removal(p, r)
        hits[binding] += 1
        assert 0.0 <= z <= 1.0
        if r_new is None:
            continue
        ratio = r_new / p
        assert np.all(np.diff(ratio) <= 1e-9)
        slack = prefix_slacks(p, r_new, np.arange(p.size))
        assert slack.min() >= -1e-9
        if binding == "prefix":
            assert np.min(np.abs(slack[:-1])) <= 1e-9
        else:
            assert np.min(r_new) == 0.0
    assert hits["prefix"] > 0


def test_construction_grows_linearly():
    rng = np.random.default_rng(4)
    sizes = {}
    for k in (250, 500, 1000):
        p = rng.uniform(0.001, 0.05, k)
        r = rng.uniform(0, 1, k) * p
        policy = build_policy(TargetProfile(p, r))
        sizes[k] = policy.n_nodes
        assert policy.prefix_evals <= 4 * k * k
    assert sizes[1000] < 2.5 * sizes[500] < 6.25 * sizes[250]


def test_delta_factor_examples():
    assert delta_factor(1.0, 0.255) == pytest.approx(1 - math.exp(-1 / 0.255))
    assert delta_factor(1.0, 0.255) == pytest.approx(0.9802, abs=1e-4)
    assert delta_factor(0.0, 0.255) == pytest.approx(1 / 0.255)
    assert delta_factor(1e-12, 0.255) == pytest.approx(1 / 0.255, rel=1e-6)


def test_delta_scaled_targets_always_feasible(rng):
    for _ in range(200):
        k = int(rng.integers(1, 8))
        p = rng.uniform(0, 1, k)
        q = rng.uniform(0, 1, k) * p
        profile = delta_scaled_targets(q, p, 0.255)
        assert feasibility_margin(profile) >= 1 - 1e-9
    empty = delta_scaled_targets([], [], 0.255)
    assert empty.k == 0
    assert delta_scaled_targets([0.0], [0.5], 0.255).r.tolist() == [0.0]


def test_delta_chain_by_enumeration(rng):
    alpha = 0.255
    for _ in range(150):
        k = int(rng.integers(1, 13))
        p = rng.uniform(0.01, 1.0, k)
        q = p * rng.uniform(0, alpha, k)
        total = q.sum()
        # the chain needs a vertex-level budget: total q at most 1
        if total > 1.0:
            q = q / total
            total = 1.0
        delta = delta_factor(total, alpha)
        for size in range(1, k + 1):
            for subset in itertools.combinations(range(k), size):
                s = list(subset)
                assert 1 - np.prod(1 - p[s]) >= delta * q[s].sum() - 1e-12
        assert feasibility_margin(TargetProfile(p, delta * q)) >= 1 - 1e-12
