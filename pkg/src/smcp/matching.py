"""Offline matching: blossom, brute force, bounded augmentation and exact tables."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from ._validation import check_fraction, check_random_state
from .graph import Matching, Pair, ProbGraph, RealizedGraph, sample_realization

EXACT_PAIR_LIMIT = 20
BRUTE_FORCE_EDGE_LIMIT = 45


class TooLargeError(ValueError):
    """Raised when an exhaustive computation exceeds its size guard."""


def _adjacency(n: int, edges) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for row in adj:
        row.sort()
    return adj


def _to_matching(match: list[int]) -> Matching:
    return Matching(frozenset((u, v) for u, v in enumerate(match) if v > u))


def max_matching(g: RealizedGraph) -> Matching:
    """Maximum-cardinality matching on a general graph (Edmonds' blossom).

    Starts from the greedy matching over ascending vertices and neighbors,
    then augments from each free vertex in ascending order. O(n^3).
    """
    n = g.n
    adj = _adjacency(n, g.edges)
    match = [-1] * n
    for u in range(n):
        if match[u] == -1:
            for v in adj[u]:
                if match[v] == -1:
                    match[u], match[v] = v, u
                    break

    def find_augmenting(root: int) -> tuple[int, list[int]]:
        used = [False] * n
        parent = [-1] * n
        base = list(range(n))

        def lca(a: int, b: int) -> int:
            seen = [False] * n
            while True:
                a = base[a]
                seen[a] = True
                if match[a] == -1:
                    break
                a = parent[match[a]]
            while True:
                b = base[b]
                if seen[b]:
                    return b
                b = parent[match[b]]

        def mark_path(v: int, b: int, child: int, blossom: list[bool]) -> None:
            while base[v] != b:
                blossom[base[v]] = blossom[base[match[v]]] = True
                parent[v] = child
                child = match[v]
                v = parent[match[v]]

        used[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for to in adj[v]:
                if base[v] == base[to] or match[v] == to:
                    continue
                if to == root or (match[to] != -1 and parent[match[to]] != -1):
                    cur = lca(v, to)
                    blossom = [False] * n
                    mark_path(v, cur, to, blossom)
                    mark_path(to, cur, v, blossom)
                    for i in range(n):
                        if blossom[base[i]]:
                            base[i] = cur
                            if not used[i]:
                                used[i] = True
                                queue.append(i)
                elif parent[to] == -1:
                    parent[to] = v
                    if match[to] == -1:
                        return to, parent
                    used[match[to]] = True
                    queue.append(match[to])
        return -1, parent

    for root in range(n):
        if match[root] != -1 or not adj[root]:
            continue
        end, parent = find_augmenting(root)
        v = end
        while v != -1:
            pv = parent[v]
            nxt = match[pv]
            match[v], match[pv] = pv, v
            v = nxt
    return _to_matching(match)


def brute_force_max_matching(g: RealizedGraph) -> Matching:
    """Exhaustive search; returns the lexicographically smallest maximum matching.

    Edges are indexed in ascending pair order. Matchings are visited
    include-first, which is lexicographic order among equal-size sets, so the
    first maximum found is the canonical one.
    """
    edges = g.sorted_edges()
    if len(edges) > BRUTE_FORCE_EDGE_LIMIT:
        raise TooLargeError(f"brute force limited to {BRUTE_FORCE_EDGE_LIMIT} edges, got {len(edges)}")
    best: list[Pair] = []
    chosen: list[Pair] = []
    used: set[int] = set()

    def search(i: int) -> None:
        nonlocal best
        if len(chosen) + (len(edges) - i) <= len(best):
            return
        if i == len(edges):
            if len(chosen) > len(best):
                best = list(chosen)
            return
        u, v = edges[i]
        if u not in used and v not in used:
            chosen.append((u, v))
            used.update((u, v))
            search(i + 1)
            chosen.pop()
            used.difference_update((u, v))
        search(i + 1)

    search(0)
    return Matching(frozenset(best))


def greedy_maximal_matching(g: RealizedGraph) -> Matching:
    used: set[int] = set()
    out = []
    for u, v in g.sorted_edges():
        if u not in used and v not in used:
            out.append((u, v))
            used.update((u, v))
    return Matching(frozenset(out))


def is_maximal(matching: Matching, g: RealizedGraph) -> bool:
    covered = matching.vertices()
    return all(u in covered or v in covered for u, v in g.edges)


def approx_max_matching(g: RealizedGraph, zeta: float) -> Matching:
    """Matching of size at least ``(1 - zeta)`` times the maximum.

    Augments a greedy maximal matching along augmenting paths of at most
    ``2*ceil(1/zeta) - 1`` edges until none remain. With no augmenting path
    that short, the matching is within ``k/(k+1)`` of maximum for
    ``k = ceil(1/zeta)``.
    """
    zeta = check_fraction(zeta, "zeta")
    k = math.ceil(1.0 / zeta)
    max_len = 2 * k - 1
    n = g.n
    adj = _adjacency(n, g.edges)
    match = [-1] * n
    for u, v in greedy_maximal_matching(g):
        match[u], match[v] = v, u

    def search(x: int, length: int, on_path: set[int], path: list[int]) -> list[int] | None:
        # x is an outer vertex; try a non-matching edge out of it
        for w in adj[x]:
            if w in on_path or match[x] == w:
                continue
            if match[w] == -1:
                return path + [w]
            if length + 2 >= max_len:
                continue
            mate = match[w]
            if mate in on_path:
                continue
            on_path.update((w, mate))
            found = search(mate, length + 2, on_path, path + [w, mate])
            on_path.difference_update((w, mate))
            if found:
                return found
        return None

    improved = True
    while improved:
        improved = False
        for root in range(n):
            if match[root] != -1 or not adj[root]:
                continue
            path = search(root, 0, {root}, [root])
            if path:
                for a, b in zip(path[::2], path[1::2]):
                    match[a], match[b] = b, a
                improved = True
    return _to_matching(match)


# exact enumeration over realizations -------------------------------------


class _LexTable:
    """Maximum matching size and canonical matching for every edge subset.

    Subsets are bitmasks over the ProbGraph's pair order. The canonical
    matching of a subset is its lexicographically smallest maximum matching
    (same rule as :func:`brute_force_max_matching`). Built in O(2^m) numpy
    work by grouping masks on their lowest set bit.
    """

    def __init__(self, g: ProbGraph):
        m = g.m
        if m > EXACT_PAIR_LIMIT:
            raise TooLargeError(f"exact enumeration limited to {EXACT_PAIR_LIMIT} pairs, got {m}")
        self.pairs = g.pairs
        self.m = m
        touch = []
        for i, (a, b) in enumerate(g.pairs):
            bits = 0
            for j, (c, d) in enumerate(g.pairs):
                if {a, b} & {c, d}:
                    bits |= 1 << j
            touch.append(bits)
        size = 1 << m
        nu = np.zeros(size, dtype=np.int8)
        member = np.zeros(size, dtype=np.int64)
        for b in range(m - 1, -1, -1):
            ks = np.arange(1 << (m - b - 1), dtype=np.int64)
            masks = ((ks << 1) | 1) << b
            without = masks ^ (1 << b)
            after = masks & ~touch[b]
            take = nu[after] + 1
            skip = nu[without]
            include = take >= skip
            nu[masks] = np.where(include, take, skip)
            member[masks] = np.where(include, member[after] | (1 << b), member[without])
        self.nu = nu
        self.member = member
        probs = np.ones(1)
        for q in g.probs:
            probs = np.concatenate([probs * (1.0 - q), probs * q])
        self.weights = probs

    def matching_of(self, mask: int) -> list[Pair]:
        bits = int(self.member[mask])
        return [e for i, e in enumerate(self.pairs) if bits >> i & 1]

    def membership(self) -> np.ndarray:
        """(2^m, m) boolean matrix: pair i in canonical matching of mask."""
        shifts = np.arange(self.m, dtype=np.int64)
        return (self.member[:, None] >> shifts) & 1 == 1


@lru_cache(maxsize=4096)
def lex_table(g: ProbGraph) -> _LexTable:
    return _LexTable(g)


@dataclass(frozen=True)
class ExactQTable:
    q_star: dict
    total: float

    def Q(self, u: int) -> float:
        return sum(q for e, q in self.q_star.items() if u in e)


@lru_cache(maxsize=4096)
def _exact_q_cached(g: ProbGraph) -> ExactQTable:
    table = lex_table(g)
    if g.m == 0:
        return ExactQTable({}, 0.0)
    q = table.weights @ table.membership()
    q_star = {e: float(x) for e, x in zip(g.pairs, q)}
    return ExactQTable(q_star, float(sum(q_star.values())))


def exact_q_table(g: ProbGraph) -> ExactQTable:
    """Probability each pair lies in the canonical maximum matching.

    Enumerates all 2^m realizations (m <= 20 positive pairs).
    """
    return _exact_q_cached(g)


class Estimate(NamedTuple):
    mean: float
    ci95: float


def expected_opt(g: ProbGraph, mode: str = "exact", trials: int = 10_000, rng=None) -> Estimate:
    """Expected maximum matching size, exactly or by Monte Carlo.

    Monte Carlo mode reports the half-width of a normal 95% interval.
    """
    if mode == "exact":
        table = lex_table(g)
        return Estimate(float(table.weights @ table.nu), 0.0)
    if mode in ("monte-carlo", "mc"):
        if trials < 2:
            raise ValueError("Monte Carlo mode needs at least 2 trials")
        rng = check_random_state(rng)
        sizes = np.array([len(max_matching(sample_realization(g, rng))) for _ in range(trials)], dtype=float)
        return Estimate(float(sizes.mean()), float(1.96 * sizes.std(ddof=1) / math.sqrt(trials)))
    raise ValueError(f"unknown mode {mode!r}")
