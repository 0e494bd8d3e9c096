"""Probabilistic graphs, realizations and the probe/commit oracle.

Vertices are dense integers ``0..n-1`` and pairs are stored as ``(u, v)``
tuples with ``u < v``. A :class:`ProbGraph` only keeps pairs whose edge
probability is strictly positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ._validation import check_probability, check_random_state

Pair = tuple[int, int]


class ProbeError(RuntimeError):
    """Raised when an algorithm breaks the probing contract."""


class InstanceError(ValueError):
    """Raised for malformed instance parameters or files."""


def norm_pair(u: int, v: int) -> Pair:
    if u == v:
        raise InstanceError(f"self-loop ({u}, {v}) is not a valid pair")
    return (u, v) if u < v else (v, u)


class ProbGraph:
    """Vertex count plus a sparse symmetric map of edge probabilities.

    Instances are immutable; the residual-graph helpers return new objects.
    """

    __slots__ = ("n", "pairs", "probs", "_index", "_key")

    def __init__(self, n: int, p: Mapping[Pair, float] | Iterable[tuple[Pair, float]] = ()):
        if int(n) != n or n < 0:
            raise InstanceError(f"vertex count must be a non-negative integer, got {n!r}")
        n = int(n)
        items = p.items() if isinstance(p, Mapping) else p
        table: dict[Pair, float] = {}
        for (u, v), prob in items:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"pair ({u}, {v}) out of range for n={n}")
            key = norm_pair(u, v)
            prob = check_probability(prob, f"p{key}", exc=InstanceError)
            if key in table and table[key] != prob:
                raise InstanceError(f"conflicting probabilities for pair {key}")
            if prob > 0.0:
                table[key] = prob
        self.n = n
        self.pairs: tuple[Pair, ...] = tuple(sorted(table))
        self.probs = np.array([table[e] for e in self.pairs], dtype=float)
        self.probs.setflags(write=False)
        self._index = {e: i for i, e in enumerate(self.pairs)}
        self._key = (n, self.pairs, tuple(self.probs.tolist()))

    @property
    def m(self) -> int:
        """Number of pairs with positive probability."""
        return len(self.pairs)

    def p(self, u: int, v: int) -> float:
        i = self._index.get(norm_pair(u, v))
        return 0.0 if i is None else float(self.probs[i])

    def index(self, pair: Pair) -> int:
        return self._index[pair]

    def __contains__(self, pair) -> bool:
        return pair in self._index

    def items(self):
        return zip(self.pairs, self.probs.tolist())

    def neighbors(self, u: int) -> list[int]:
        return sorted(b if a == u else a for a, b in self.pairs if u in (a, b))

    def key(self):
        """Hashable identity used for memoizing per-graph computations."""
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, ProbGraph) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"ProbGraph(n={self.n}, m={self.m})"

    def restrict(self, keep: Iterable[Pair]) -> "ProbGraph":
        keep = set(keep)
        return ProbGraph(self.n, {e: q for e, q in self.items() if e in keep})

    def residual(self, removed: Iterable[int] = (), absent: Iterable[Pair] = ()) -> "ProbGraph":
        """Graph left after removing matched vertices and zeroing probed-absent pairs."""
        removed = set(removed)
        absent = set(absent)
        return ProbGraph(
            self.n,
            {
                e: q
                for e, q in self.items()
                if e not in absent and e[0] not in removed and e[1] not in removed
            },
        )

    def is_bipartite(self) -> tuple[bool, list[int]]:
        """Two-color the positive-probability support; returns (ok, colors)."""
        color = [-1] * self.n
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.pairs:
            adj[a].append(b)
            adj[b].append(a)
        for s in range(self.n):
            if color[s] != -1:
                continue
            color[s] = 0
            stack = [s]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if color[y] == -1:
                        color[y] = 1 - color[x]
                        stack.append(y)
                    elif color[y] == color[x]:
                        return False, color
        return True, color

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [{"u": u, "v": v, "p": q} for (u, v), q in self.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProbGraph":
        try:
            n = data["n"]
            edges = data["edges"]
        except (KeyError, TypeError) as exc:
            raise InstanceError("instance must have 'n' and 'edges' fields") from exc
        if not isinstance(n, int) or isinstance(n, bool):
            raise InstanceError("'n' must be an integer")
        seen = set()
        table = {}
        for rec in edges:
            try:
                u, v, q = rec["u"], rec["v"], rec["p"]
            except (KeyError, TypeError) as exc:
                raise InstanceError(f"bad edge record {rec!r}") from exc
            if not (isinstance(u, int) and isinstance(v, int)):
                raise InstanceError(f"vertex ids must be integers: {rec!r}")
            if not u < v:
                raise InstanceError(f"edge records require u < v: {rec!r}")
            if (u, v) in seen:
                raise InstanceError(f"duplicate pair ({u}, {v})")
            seen.add((u, v))
            table[(u, v)] = q
        return cls(n, table)


@dataclass(frozen=True)
class RealizedGraph:
    n: int
    edges: frozenset

    def sorted_edges(self) -> list[Pair]:
        return sorted(self.edges)


@dataclass(frozen=True)
class Matching:
    pairs: frozenset = frozenset()

    def __post_init__(self):
        seen = set()
        for u, v in self.pairs:
            if u in seen or v in seen or u == v:
                raise ValueError(f"pairs are not vertex-disjoint: {sorted(self.pairs)}")
            seen.update((u, v))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def vertices(self) -> set[int]:
        return {x for e in self.pairs for x in e}


def sample_realization(g: ProbGraph, rng=None) -> RealizedGraph:
    """Include each pair independently with its probability."""
    rng = check_random_state(rng)
    if g.m == 0:
        return RealizedGraph(g.n, frozenset())
    present = rng.random(g.m) < g.probs
    return RealizedGraph(g.n, frozenset(e for e, keep in zip(g.pairs, present) if keep))


class ProbeOracle:
    """Hides one realization and enforces probe-and-commit semantics.

    The realization is only reachable through :meth:`probe`. Probing a pair
    twice, or a pair touching an already matched vertex, raises
    :class:`ProbeError`.
    """

    def __init__(self, realization: RealizedGraph):
        self.__edges = realization.edges
        self.n = realization.n
        self.matched: list[Pair] = []
        self.probed_absent: set[Pair] = set()
        self.removed: set[int] = set()
        self.log: list[tuple[Pair, bool]] = []
        self._probed: set[Pair] = set()

    def probe(self, u: int, v: int) -> bool:
        pair = norm_pair(u, v)
        if pair in self._probed:
            raise ProbeError(f"pair {pair} was already probed")
        if pair[0] in self.removed or pair[1] in self.removed:
            raise ProbeError(f"pair {pair} touches a matched vertex")
        self._probed.add(pair)
        present = pair in self.__edges
        if present:
            self.matched.append(pair)
            self.removed.update(pair)
        else:
            self.probed_absent.add(pair)
        self.log.append((pair, present))
        return present

    def was_probed(self, pair: Pair) -> bool:
        return pair in self._probed

    def matching(self) -> Matching:
        return Matching(frozenset(self.matched))


@dataclass
class CandidateState:
    alive: set[int] = field(default_factory=set)
    candidates: set[Pair] = field(default_factory=set)

    def neighbors(self, u: int) -> list[int]:
        return sorted(b if a == u else a for a, b in self.candidates if u in (a, b))


def candidate_state(g: ProbGraph, oracle: ProbeOracle) -> CandidateState:
    removed = oracle.removed
    cands = {
        e
        for e in g.pairs
        if e[0] not in removed and e[1] not in removed and not oracle.was_probed(e)
    }
    alive = {x for e in cands for x in e}
    return CandidateState(alive, cands)


# generators --------------------------------------------------------------

INSTANCE_KINDS = ("uniform-complete", "sparse-random", "bipartite", "path", "file")


def _check_n(n, name="n") -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise InstanceError(f"{name} must be a non-negative integer, got {n!r}")
    return int(n)


def generate_instance(kind: str, params: Mapping | None = None, rng=None) -> ProbGraph:
    """Build a :class:`ProbGraph` of the given kind.

    Parameters by kind:

    * ``uniform-complete``: ``n``, ``p``.
    * ``sparse-random``: ``n``, ``density`` (pair inclusion probability),
      optional ``p_low``/``p_high`` (uniform edge probabilities, default 0..1).
    * ``bipartite``: ``n_left``, ``n_right``, ``p``, optional ``density``.
      Left vertices are ``0..n_left-1``.
    * ``path``: ``probs``, the edge probabilities along a path.
    * ``file``: ``path`` to a JSON instance.
    """
    params = dict(params or {})
    rng = check_random_state(rng)
    if kind == "uniform-complete":
        n = _check_n(params["n"])
        p = check_probability(params["p"], "p", exc=InstanceError)
        return ProbGraph(n, {(u, v): p for u in range(n) for v in range(u + 1, n)})
    if kind == "sparse-random":
        n = _check_n(params["n"])
        density = check_probability(params.get("density", 0.5), "density", exc=InstanceError)
        lo = check_probability(params.get("p_low", 0.0), "p_low", exc=InstanceError)
        hi = check_probability(params.get("p_high", 1.0), "p_high", exc=InstanceError)
        if lo > hi:
            raise InstanceError("p_low must not exceed p_high")
        table = {}
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < density:
                    table[(u, v)] = float(rng.uniform(lo, hi)) if hi > lo else lo
        return ProbGraph(n, table)
    if kind == "bipartite":
        nl = _check_n(params["n_left"], "n_left")
        nr = _check_n(params["n_right"], "n_right")
        p = check_probability(params["p"], "p", exc=InstanceError)
        density = check_probability(params.get("density", 1.0), "density", exc=InstanceError)
        table = {}
        for u in range(nl):
            for v in range(nl, nl + nr):
                if density >= 1.0 or rng.random() < density:
                    table[(u, v)] = p
        return ProbGraph(nl + nr, table)
    if kind == "path":
        probs = list(params["probs"])
        return ProbGraph(len(probs) + 1 if probs else 0, {(i, i + 1): q for i, q in enumerate(probs)})
    if kind == "file":
        return load_instance(params["path"])
    raise InstanceError(f"unknown instance kind {kind!r}; expected one of {INSTANCE_KINDS}")


def load_instance(path) -> ProbGraph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc
    return ProbGraph.from_dict(data)


def save_instance(g: ProbGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=1) + "\n")


def complete_graph(n: int, p: float) -> ProbGraph:
    return generate_instance("uniform-complete", {"n": n, "p": p})
