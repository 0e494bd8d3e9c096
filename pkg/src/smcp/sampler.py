"""Distributions over scan orders with guaranteed first-occurrence probabilities.

Given independent events with probabilities ``p`` and targets ``r``, a
scan order is a permutation; event ``i`` "wins" if it occurs and no event
before it in the order occurs. A target profile is feasible iff, for every
subset ``S``, ``sum(r[S]) <= 1 - prod(1 - p[S])``. Sorting events by
decreasing ``r/p`` reduces that check to prefixes.

:func:`build_policy` constructs a mixture/split tree whose induced order
distribution meets every feasible target. Each node either mixes the fixed
order "lowest ratio first" with a recursive residual problem (slack
removal), or splits at a tight prefix and scans the prefix first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import check_random_state

SLACK_TOL = 1e-9


class InfeasibleProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TargetProfile:
    p: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        r = np.asarray(self.r, dtype=float).reshape(-1)
        if p.shape != r.shape:
            raise ValueError(f"p and r lengths differ ({p.size} vs {r.size})")
        if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
            raise ValueError("event probabilities must lie in [0, 1]")
        if np.any(~np.isfinite(r)) or np.any(r < 0):
            raise ValueError("targets must be finite and non-negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)

    @property
    def k(self) -> int:
        return self.p.size

    def scaled(self, y: float) -> "TargetProfile":
        return TargetProfile(self.p, self.r * y)

    def key(self):
        return (tuple(self.p.tolist()), tuple(self.r.tolist()))


def ratio_order(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Indices sorted by decreasing r/p, ties by ascending index.

    Events with p = 0 and r > 0 come first (infinite ratio); p = 0 and r = 0
    come last.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, r / np.where(p > 0, p, 1.0), np.where(r > 0, np.inf, -1.0))
    return np.lexsort((np.arange(p.size), -ratio))


def prefix_slacks(p: np.ndarray, r: np.ndarray, order: np.ndarray | None = None) -> np.ndarray:
    """``1 - prod(1-p) - sum(r)`` over the ratio-sorted prefixes."""
    if order is None:
        order = ratio_order(p, r)
    return 1.0 - np.cumprod(1.0 - p[order]) - np.cumsum(r[order])


def feasibility_margin(profile: TargetProfile) -> float:
    """Largest ``y`` such that targets ``y * r`` remain feasible.

    ``y >= 1`` iff the profile is feasible; ``inf`` when every target is 0.
    A positive target on an impossible event gives 0.
    """
    p, r = profile.p, profile.r
    if np.any((p == 0) & (r > 0)):
        return 0.0
    keep = p > 0
    p, r = p[keep], r[keep]
    if not np.any(r > 0):
        return math.inf
    order = ratio_order(p, r)
    # expm1/log1p keeps tiny probabilities from rounding the reach to zero
    with np.errstate(divide="ignore"):
        reach = -np.expm1(np.cumsum(np.log1p(-p[order])))
    total = np.cumsum(r[order])
    ok = total > 0
    with np.errstate(over="ignore"):
        return float(np.min(reach[ok] / total[ok]))


def prefix_feasibility_equals_full(profile: TargetProfile, tol: float = 1e-12) -> bool:
    """Check that ratio-sorted prefixes decide feasibility exactly as all subsets do.

    Compares, against brute force over all ``2^k - 1`` subsets, (a) the
    scaling margin ``min (1 - prod(1-p)) / sum(r)`` and (b) the violated slack
    ``min(0, min slack)``. Plain minimum slack need not sit at a prefix when
    the profile is strictly feasible (a low-probability singleton can be
    tighter), so it is not compared. Test helper; k <= 15.
    """
    # events with p = r = 0 never change any constraint
    keep = (profile.p > 0) | (profile.r > 0)
    p, r = profile.p[keep], profile.r[keep]
    k = p.size
    if k == 0:
        return True
    if k > 15:
        raise ValueError("subset enumeration limited to k <= 15")
    masks = np.arange(1, 1 << k, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(k)) & 1).astype(bool)
    with np.errstate(divide="ignore"):
        reach = -np.expm1(np.where(bits, np.log1p(-p), 0.0).sum(axis=1))
    total = bits.astype(float) @ r
    slack = reach - total
    violated_full = min(0.0, float(slack.min()))
    violated_prefix = min(0.0, float(prefix_slacks(p, r).min()))
    if abs(violated_full - violated_prefix) > tol:
        return False
    y_prefix = feasibility_margin(TargetProfile(p, r))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratios = np.where(total > 0, reach / total, np.inf)
    y_full = float(ratios.min())
    if math.isinf(y_prefix) or math.isinf(y_full):
        return math.isinf(y_prefix) and math.isinf(y_full)
    return abs(y_full - y_prefix) <= tol * max(1.0, y_full)


# policy tree ------------------------------------------------------------


class Leaf:
    __slots__ = ("event",)

    def __init__(self, event: int):
        self.event = event

    def __repr__(self):
        return f"Leaf({self.event})"


class Mix:
    """With probability ``z`` scan ``order``; otherwise follow ``rest``."""

    __slots__ = ("z", "order", "rest")

    def __init__(self, z: float, order: tuple, rest=None):
        self.z = z
        self.order = order
        self.rest = rest

    def __repr__(self):
        return f"Mix(z={self.z:.6g}, order={self.order}, rest={self.rest!r})"


class Split:
    """Scan every event of ``prefix`` before any event of ``suffix``."""

    __slots__ = ("prefix", "suffix")

    def __init__(self, prefix=None, suffix=None):
        self.prefix = prefix
        self.suffix = suffix

    def __repr__(self):
        return f"Split({self.prefix!r}, {self.suffix!r})"


@dataclass
class OrderPolicy:
    root: object
    k: int
    tail: tuple = ()
    ordering: tuple = ()
    scale: float = 1.0
    n_nodes: int = 0
    prefix_evals: int = 0
    depth: int = 0
    targets: np.ndarray = field(default=None, repr=False)


def _fixed(events) -> object:
    events = tuple(int(e) for e in events)
    return Leaf(events[0]) if len(events) == 1 else Mix(1.0, events)


def slack_removal(p: np.ndarray, r: np.ndarray, tol: float = SLACK_TOL):
    """Largest mixing weight for the fixed lowest-ratio-first order.

    ``p`` and ``r`` must already be in decreasing-ratio order with all
    targets positive and no proper prefix tight. Returns ``(z, r_new,
    binding)`` where ``binding`` is ``"prefix"``, ``"target"`` (a residual
    target reached zero) or ``"none"`` (z = 1).
    """
    k = p.size
    # win probability of each event when scanning in reverse ratio order
    after = np.ones(k)
    if k > 1:
        after[:-1] = np.cumprod((1.0 - p)[::-1])[::-1][1:]
    win = p * after
    reach = 1.0 - np.cumprod(1.0 - p)
    slack = reach - np.cumsum(r)
    denom = reach - np.cumsum(win)
    z, binding, arg = 1.0, "none", -1
    for m in range(k - 1):
        if denom[m] > 0.0:
            zm = max(slack[m], 0.0) / denom[m]
            if zm < z:
                z, binding, arg = zm, "prefix", m
    with np.errstate(divide="ignore"):
        caps = np.where(win > 0, r / np.where(win > 0, win, 1.0), np.inf)
    j = int(np.argmin(caps))
    if caps[j] < z:
        z, binding, arg = float(caps[j]), "target", j
    if z >= 1.0 - 1e-12:
        return 1.0, None, "none"
    r_new = np.maximum((r - z * win) / (1.0 - z), 0.0)
    if binding == "target":
        r_new[arg] = 0.0
    return float(z), r_new, binding


def build_policy(profile: TargetProfile, tol: float = SLACK_TOL) -> OrderPolicy:
    """Construct an order distribution meeting (scaled) targets.

    Targets are first multiplied by :func:`feasibility_margin` so that some
    prefix constraint is tight. Raises :class:`InfeasibleProfileError` if a
    positive target sits on an impossible event.
    """
    p_all, r_all = profile.p, profile.r
    k = profile.k
    impossible = p_all == 0
    if np.any(impossible & (r_all > 0)):
        raise InfeasibleProfileError("positive target on an event with probability 0")
    tail = tuple(int(i) for i in np.flatnonzero(impossible))
    live = np.flatnonzero(~impossible)
    y = feasibility_margin(TargetProfile(p_all[live], r_all[live])) if live.size else math.inf
    if y == 0.0:
        raise InfeasibleProfileError("profile cannot be scaled to feasibility")
    scale = 1.0 if math.isinf(y) else y
    r_scaled = r_all * scale
    policy = OrderPolicy(root=None, k=k, tail=tail, scale=scale, targets=r_scaled)
    if live.size == 0:
        policy.ordering = tail
        return policy
    policy.ordering = tuple(int(live[i]) for i in ratio_order(p_all[live], r_scaled[live]))

    max_depth = 4 * max(k, 1)
    # each task: (events, targets, setter, depth); setter attaches the built node
    holder = {}
    tasks = [(live, r_scaled[live], lambda node: holder.__setitem__("root", node), 0)]
    while tasks:
        events, r, attach, depth = tasks.pop()
        if depth > max_depth:
            raise RuntimeError("order policy construction did not terminate")
        policy.depth = max(policy.depth, depth)
        policy.n_nodes += 1
        policy.prefix_evals += events.size
        p = p_all[events]
        order = ratio_order(p, r)
        events, p, r = events[order], p[order], r[order]
        zero = r <= 0.0
        if zero.all():
            attach(_fixed(events))
            continue
        if zero.any():
            node = Split(suffix=_fixed(events[zero]))
            attach(node)
            tasks.append((events[~zero], r[~zero], _setter(node, "prefix"), depth + 1))
            continue
        if events.size == 1:
            attach(Leaf(int(events[0])))
            continue
        stay = np.cumprod(1.0 - p)
        slack = 1.0 - stay - np.cumsum(r)
        tight = np.flatnonzero(slack[:-1] <= tol)
        if tight.size:
            cut = int(tight[0]) + 1
            node = Split()
            attach(node)
            through = stay[cut - 1]
            suffix_r = r[cut:] / through if through > 0.0 else np.zeros(events.size - cut)
            tasks.append((events[cut:], suffix_r, _setter(node, "suffix"), depth + 1))
            tasks.append((events[:cut], r[:cut], _setter(node, "prefix"), depth + 1))
            continue
        z, r_new, _ = slack_removal(p, r, tol)
        reverse = tuple(int(e) for e in events[::-1])
        if r_new is None:
            attach(Mix(1.0, reverse))
            continue
        node = Mix(z, reverse)
        attach(node)
        tasks.append((events, r_new, _setter(node, "rest"), depth + 1))
    policy.root = holder["root"]
    return policy


def _setter(node, attr):
    return lambda child: setattr(node, attr, child)


@lru_cache(maxsize=65536)
def _cached_policy(key) -> OrderPolicy:
    p, r = key
    return build_policy(TargetProfile(np.array(p), np.array(r)))


def cached_policy(profile: TargetProfile) -> OrderPolicy:
    """Memoized :func:`build_policy`; policies are never mutated after construction."""
    return _cached_policy(profile.key())


def sample_order(policy: OrderPolicy, rng=None) -> list[int]:
    """Draw one scan order (a permutation of all events)."""
    rng = check_random_state(rng)
    out: list[int] = []
    stack = [policy.root] if policy.root is not None else []
    while stack:
        node = stack.pop()
        if type(node) is Leaf:
            out.append(node.event)
        elif type(node) is Split:
            stack.append(node.suffix)
            stack.append(node.prefix)
        elif node.z >= 1.0 or rng.random() < node.z:
            out.extend(node.order)
        else:
            stack.append(node.rest)
    out.extend(policy.tail)
    return out


def first_occurrence_probs(policy: OrderPolicy, p) -> np.ndarray:
    """Exact probability that each event is the earliest occurring in the order.

    Walks the tree once, carrying the probability of reaching each node with
    no earlier event having occurred.
    """
    p = np.asarray(p, dtype=float)
    out = np.zeros(policy.k)
    stack = [(policy.root, 1.0)] if policy.root is not None else []
    while stack:
        node, mass = stack.pop()
        if mass == 0.0:
            continue
        if type(node) is Leaf:
            out[node.event] += mass * p[node.event]
        elif type(node) is Split:
            stack.append((node.prefix, mass))
            stack.append((node.suffix, mass * _none_occur(node.prefix, p)))
        else:
            if node.z > 0.0:
                w = mass * node.z
                for e in node.order:
                    out[e] += w * p[e]
                    w *= 1.0 - p[e]
            if node.z < 1.0:
                stack.append((node.rest, mass * (1.0 - node.z)))
    return out


def _none_occur(node, p) -> float:
    return float(np.prod([1.0 - p[e] for e in _events(node)]))


def _events(node) -> list[int]:
    out = []
    stack = [node]
    while stack:
        x = stack.pop()
        if type(x) is Leaf:
            out.append(x.event)
        elif type(x) is Split:
            stack.extend((x.prefix, x.suffix))
        else:
            out.extend(x.order)
    return out


def order_win_probs(order, p) -> np.ndarray:
    """Win probabilities for one fixed scan order."""
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.size)
    w = 1.0
    for e in order:
        out[e] = w * p[e]
        w *= 1.0 - p[e]
    return out


def brute_force_first_probs(policy: OrderPolicy, p) -> np.ndarray:
    """Enumerate every order the policy can emit together with its weight.

    Exponential in the number of Mix nodes; test oracle only.
    """
    p = np.asarray(p, dtype=float)
    out = np.zeros(policy.k)
    for order, weight in _enumerate_orders(policy.root):
        out += weight * order_win_probs(list(order) + list(policy.tail), p)
    return out


def _enumerate_orders(node):
    if node is None:
        return [((), 1.0)]
    if type(node) is Leaf:
        return [((node.event,), 1.0)]
    if type(node) is Split:
        return [
            (a + b, wa * wb)
            for (a, wa), (b, wb) in itertools.product(_enumerate_orders(node.prefix), _enumerate_orders(node.suffix))
        ]
    fixed = [(node.order, node.z)] if node.z > 0 else []
    if node.z >= 1.0:
        return fixed
    return fixed + [(o, w * (1.0 - node.z)) for o, w in _enumerate_orders(node.rest)]


def delta_factor(q_sum: float, alpha: float) -> float:
    """Scaling ``(1 - exp(-Q/alpha)) / Q``, with limit ``1/alpha`` at Q = 0."""
    if q_sum <= 0.0:
        return 1.0 / alpha
    return -math.expm1(-q_sum / alpha) / q_sum


def delta_scaled_targets(q, p, alpha: float) -> TargetProfile:
    """Targets ``delta * q`` for one vertex's neighbor scan.

    If estimation noise makes the scaled targets infeasible they are shrunk
    by the feasibility margin, so the result is always feasible.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    r = delta_factor(float(q.sum()), alpha) * q
    profile = TargetProfile(p, r)
    y = feasibility_margin(profile)
    if y < 1.0:
        profile = profile.scaled(y)
    return profile
