"""The fixed colour graph H and its structural analyses.

Colours are the integers ``0..q-1``. Loops are allowed and mean that a
colour may sit next to itself on the path.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ColourIndexError,
    DisconnectedGraph,
    EmptyGraph,
    GraphParseError,
    NoWalk,
)

__all__ = [
    "Bipartition",
    "ColourGraph",
    "BUILTIN_NAMES",
    "builtin",
    "colour_classes",
    "has_all_two_paths",
    "load_graph",
    "max_degree",
    "s_edge_walk",
]


@dataclass(frozen=True)
class ColourGraph:
    """An undirected graph on colours ``0..q-1`` with optional loops.

    Instances are immutable and hashable, so they can key caches and be
    shared between workers. Construction validates symmetry, the presence
    of at least one edge, and connectivity.
    """

    q: int
    adjacency: tuple[tuple[bool, ...], ...]
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be positive")
        if len(self.adjacency) != self.q or any(len(r) != self.q for r in self.adjacency):
            raise ValueError("adjacency must be a q x q matrix")
        for i in range(self.q):
            for j in range(i):
                if self.adjacency[i][j] != self.adjacency[j][i]:
                    raise ValueError(f"adjacency not symmetric at ({i}, {j})")
        if not any(any(r) for r in self.adjacency):
            raise EmptyGraph("H has no edges")
        if not _connected(self.q, self.adjacency):
            raise DisconnectedGraph("H must be connected")

    @classmethod
    def from_edges(cls, q: int, edges: Iterable[Sequence[int]], name: str | None = None) -> "ColourGraph":
        adj = [[False] * q for _ in range(q)]
        for i, j in edges:
            if not (0 <= i < q and 0 <= j < q):
                raise ColourIndexError(f"edge ({i}, {j}) out of range for q={q}")
            adj[i][j] = adj[j][i] = True
        return cls(q, tuple(tuple(r) for r in adj), name)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Read-only boolean adjacency matrix."""
        a = np.array(self.adjacency, dtype=bool)
        a.setflags(write=False)
        return a

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(j for j in range(self.q) if self.adjacency[i][j]) for i in range(self.q))

    @cached_property
    def max_degree(self) -> int:
        return max(len(nb) for nb in self.neighbours)

    @cached_property
    def bipartition(self) -> "Bipartition":
        return colour_classes(self)

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition.is_bipartite

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i in range(self.q) for j in range(i, self.q) if self.adjacency[i][j])

    def has_edge(self, c: int, d: int) -> bool:
        return self.adjacency[c][d]

    def digest(self) -> str:
        """Short content hash of (q, edge set); names are ignored."""
        payload = json.dumps({"q": self.q, "edges": [list(e) for e in self.edges]})
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {"q": self.q, "edges": [list(e) for e in self.edges]}

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return f"ColourGraph({label}q={self.q}, edges={list(self.edges)})"


def _connected(q, adjacency):
    seen = {0}
    todo = [0]
    while todo:
        c = todo.pop()
        for d in range(q):
            if adjacency[c][d] and d not in seen:
                seen.add(d)
                todo.append(d)
    return len(seen) == q


@dataclass(frozen=True)
class Bipartition:
    """Two-colouring of H, or an odd closed walk proving there is none.

    ``class_of[c]`` is 1 or 2 when H is bipartite; otherwise ``class_of`` is
    None and ``witness`` is a closed walk ``(c0, ..., c0)`` with an odd
    number of edges.
    """

    class_of: tuple[int, ...] | None
    witness: tuple[int, ...] | None = None

    @property
    def is_bipartite(self) -> bool:
        return self.class_of is not None

    def classes(self) -> tuple[frozenset[int], frozenset[int]]:
        if self.class_of is None:
            raise ValueError("graph is not bipartite")
        one = frozenset(c for c, k in enumerate(self.class_of) if k == 1)
        two = frozenset(c for c, k in enumerate(self.class_of) if k == 2)
        return one, two


def max_degree(h: ColourGraph) -> int:
    """Largest neighbour-set size; a loop counts the colour once."""
    return h.max_degree


def colour_classes(h: ColourGraph) -> Bipartition:
    for c in range(h.q):
        if h.adjacency[c][c]:
            return Bipartition(None, (c, c))
    level = [-1] * h.q
    parent = [-1] * h.q
    level[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in h.neighbours[u]:
            if level[v] < 0:
                level[v] = level[u] + 1
                parent[v] = u
                queue.append(v)
            elif level[v] == level[u]:
                # same BFS parity on both ends of an edge: odd cycle through the root
                return Bipartition(None, _odd_walk(parent, u, v))
    if any(x < 0 for x in level):
        raise DisconnectedGraph("H must be connected")
    return Bipartition(tuple(1 if x % 2 == 0 else 2 for x in level))


def _odd_walk(parent, u, v):
    def to_root(c):
        out = [c]
        while parent[c] >= 0:
            c = parent[c]
            out.append(c)
        return out

    up = to_root(u)[::-1]  # root .. u
    down = to_root(v)  # v .. root
    return tuple(up + down)


def has_all_two_paths(h: ColourGraph) -> tuple[bool, tuple[int, int] | None]:
    """Check that every pair of colours (equal ones included) has a common neighbour.

    Returns ``(True, None)`` or ``(False, (c1, c2))`` with the
    lexicographically first failing pair, ``c1 <= c2``.
    """
    nb = [set(x) for x in h.neighbours]
    for c1 in range(h.q):
        for c2 in range(c1, h.q):
            if not nb[c1] & nb[c2]:
                return False, (c1, c2)
    return True, None


def s_edge_walk(h: ColourGraph, c1: int, c2: int, s: int) -> tuple[int, ...]:
    """A walk with exactly ``s`` edges from ``c1`` to ``c2``.

    Takes the shortest walk of the right parity (BFS over colour x parity,
    neighbours visited in ascending order) and pads it by going back and
    forth on its final edge.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    start = (c1, 0)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        c, par = node
        for d in h.neighbours[c]:
            nxt = (d, 1 - par)
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    goal = (c2, s % 2)
    if goal not in parent:
        raise NoWalk(f"no walk of parity {s % 2} from {c1} to {c2}")
    walk = []
    node = goal
    while node is not None:
        walk.append(node[0])
        node = parent[node]
    walk.reverse()
    if len(walk) - 1 > s:
        raise NoWalk(f"shortest walk from {c1} to {c2} with parity {s % 2} has {len(walk) - 1} edges > {s}")
    if len(walk) == 1 and s > 0:
        walk.append(h.neighbours[c1][0])
        walk.append(c1)
    back, last = walk[-2:] if len(walk) > 1 else (c1, c1)
    while len(walk) - 1 < s:
        walk.extend((back, last))
    return tuple(walk)


BUILTIN_NAMES = ("clique", "independent_set", "widom_rowlinson", "beach", "path")


def builtin(name: str, q: int | None = None) -> ColourGraph:
    """Named colour graphs.

    ``widom_rowlinson(q)`` has ``q + 1`` colours: 0 is the empty site and
    1..q are particle types; every colour carries a loop and the empty
    colour touches every particle. ``beach`` is the four-colour
    Burton-Steif graph with colours (-2, -1, +1, +2) relabelled 0..3:
    same-sign colours are all adjacent (loops included) and -1 touches +1.
    Both follow the standard literature definitions of these models.
    """
    if name == "clique":
        if q is None or q < 2:
            raise ValueError("clique needs q >= 2")
        return ColourGraph.from_edges(q, [(i, j) for i in range(q) for j in range(i + 1, q)], f"clique({q})")
    if name == "independent_set":
        return ColourGraph.from_edges(2, [(0, 0), (0, 1)], "independent_set")
    if name == "widom_rowlinson":
        if q is None or q < 1:
            raise ValueError("widom_rowlinson needs q >= 1")
        edges = [(0, 0)] + [(0, i) for i in range(1, q + 1)] + [(i, i) for i in range(1, q + 1)]
        return ColourGraph.from_edges(q + 1, edges, f"widom_rowlinson({q})")
    if name == "beach":
        edges = [(0, 0), (0, 1), (1, 1), (2, 2), (2, 3), (3, 3), (1, 2)]
        return ColourGraph.from_edges(4, edges, "beach")
    if name == "path":
        if q is None or q < 2:
            raise ValueError("path needs q >= 2")
        return ColourGraph.from_edges(q, [(i, i + 1) for i in range(q - 1)], f"path({q})")
    raise ValueError(f"unknown builtin graph {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def load_graph(text: str, name: str | None = None) -> ColourGraph:
    """Parse the line-oriented graph format or its JSON equivalent.

    Text form: ``#`` comments, a ``q <int>`` header, then ``edge i j``
    lines. A ``;`` also ends a statement, so ``"q 2; edge 0 0; edge 0 1"``
    is accepted on one line.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
            q = int(obj["q"])
            edges = [(int(e[0]), int(e[1])) for e in obj.get("edges", [])]
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise GraphParseError(f"bad JSON graph: {exc}") from exc
        if not edges:
            raise EmptyGraph("H has no edges")
        return ColourGraph.from_edges(q, edges, name)

    q = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        for stmt in raw.split(";"):
            stmt = stmt.strip()
            if not stmt or stmt.startswith("#"):
                continue
            parts = stmt.split()
            if q is None:
                if parts[0] != "q" or len(parts) != 2:
                    raise GraphParseError(f"expected 'q <int>', got {stmt!r}", lineno)
                try:
                    q = int(parts[1])
                except ValueError:
                    raise GraphParseError(f"bad colour count {parts[1]!r}", lineno) from None
                if q < 1:
                    raise GraphParseError("q must be positive", lineno)
                continue
            if parts[0] != "edge" or len(parts) != 3:
                raise GraphParseError(f"expected 'edge <i> <j>', got {stmt!r}", lineno)
            try:
                i, j = int(parts[1]), int(parts[2])
            except ValueError:
                raise GraphParseError(f"bad edge {stmt!r}", lineno) from None
            if not (0 <= i < q and 0 <= j < q):
                raise ColourIndexError(f"colour index out of range in {stmt!r} (q={q})", lineno)
            edges.append((i, j))
    if q is None:
        raise GraphParseError("missing 'q <int>' header")
    if not edges:
        raise EmptyGraph("H has no edges")
    return ColourGraph.from_edges(q, edges, name)
