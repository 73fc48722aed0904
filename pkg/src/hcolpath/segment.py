"""Transfer-matrix counting, sampling and marginals for runs of path sites.

A segment is a run of ``l`` consecutive sites ``v_1..v_l``. Its boundary
is the colour of the site just left of ``v_1`` and just right of ``v_l``
(``None`` when the run touches an end of the path), plus an optional
per-site set of allowed colours used to pin bipartite parity classes.

Counts are exact Python integers. Batch samplers work with normalised
floating-point messages instead, which keeps long segments cheap; the
per-site conditional probabilities then carry a relative error of a few
ulps, i.e. a sampling bias below ``l * q * 1e-15`` in total variation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import CapExceeded, EmptySupport
from .hgraph import ColourGraph

__all__ = [
    "BoundarySpec",
    "FiniteDistribution",
    "SegmentCounts",
    "class_mask",
    "count_colourings",
    "enumerate_state_space",
    "exact_uniform_sample",
    "resolve_class",
    "sample_segment",
    "sample_segments",
    "segment_counts",
    "site_marginal",
]

Mask = tuple[frozenset[int], ...]


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary of a segment: left/right colour (``None`` = free end) and mask."""

    left: int | None = None
    right: int | None = None
    mask: Mask | None = None

    def reversed(self) -> "BoundarySpec":
        mask = None if self.mask is None else self.mask[::-1]
        return BoundarySpec(self.right, self.left, mask)

    def _check(self, h: ColourGraph, l: int):
        for c in (self.left, self.right):
            if c is not None and not 0 <= c < h.q:
                raise ValueError(f"boundary colour {c} out of range")
        if self.mask is not None:
            if len(self.mask) != l:
                raise ValueError(f"mask has {len(self.mask)} entries, segment has {l} sites")
            if any(not m for m in self.mask):
                raise ValueError("mask entries must be non-empty")


@dataclass(frozen=True)
class SegmentCounts:
    """Exact colouring counts for one segment.

    ``table[j][k]`` (1 <= j <= l) is the number of valid colourings of
    ``v_j..v_l`` with ``v_j = k``; it is zero when ``k`` is masked out at
    ``v_j``. Row 0 is the same count seen from a left neighbour: the
    number of colourings of ``v_1..v_l`` given the site left of ``v_1``
    has colour ``k``.
    """

    l: int
    bc: BoundarySpec
    table: tuple[tuple[int, ...], ...]
    total: int


@dataclass(frozen=True)
class FiniteDistribution:
    support: tuple
    probs: tuple

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def vector(self, q: int) -> np.ndarray:
        out = np.zeros(q)
        for c, p in zip(self.support, self.probs):
            out[c] = float(p)
        return out


def _allowed(h, bc, j):
    """Allowed colours at site j (1-based) as a bool list."""
    if bc.mask is None:
        return None
    m = bc.mask[j - 1]
    return [c in m for c in range(h.q)]


@lru_cache(maxsize=512)
def _counts(h: ColourGraph, l: int, bc: BoundarySpec) -> SegmentCounts:
    q = h.q
    nb = h.neighbours
    rows = [None] * (l + 1)
    last = [1 if (bc.right is None or h.adjacency[k][bc.right]) else 0 for k in range(q)]
    allow = _allowed(h, bc, l)
    if allow is not None:
        last = [x if allow[k] else 0 for k, x in enumerate(last)]
    rows[l] = tuple(last)
    for j in range(l - 1, 0, -1):
        nxt = rows[j + 1]
        allow = _allowed(h, bc, j)
        rows[j] = tuple(
            0 if (allow is not None and not allow[k]) else sum(nxt[k2] for k2 in nb[k]) for k in range(q)
        )
    rows[0] = tuple(sum(rows[1][k2] for k2 in nb[k]) for k in range(q))
    total = rows[0][bc.left] if bc.left is not None else sum(rows[1])
    return SegmentCounts(l, bc, tuple(rows), total)


def segment_counts(h: ColourGraph, l: int, bc: BoundarySpec = BoundarySpec()) -> SegmentCounts:
    """Exact counts of H-colourings of an ``l``-site segment under ``bc``.

    An infeasible boundary gives ``total == 0``; nothing is raised.
    """
    if l < 1:
        raise ValueError("segment length must be >= 1")
    bc._check(h, l)
    return _counts(h, l, bc)


def count_colourings(h: ColourGraph, n: int, cls: str | None = None) -> int:
    """Size of the chosen colouring class of the ``n``-site path."""
    return segment_counts(h, n, BoundarySpec(None, None, class_mask(h, n, cls))).total


def _randbelow(rng: np.random.Generator, n: int) -> int:
    if n <= 0:
        raise ValueError("n must be positive")
    if n < 2**62:
        return int(rng.integers(n))
    nbytes = (n.bit_length() + 7) // 8
    excess = nbytes * 8 - n.bit_length()
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if r < n:
            return r


def _pick(rng, weights):
    r = _randbelow(rng, sum(weights))
    for k, w in enumerate(weights):
        if r < w:
            return k
        r -= w
    raise AssertionError("unreachable")


def sample_segment(h: ColourGraph, l: int, bc: BoundarySpec, rng: np.random.Generator, size: int | None = None):
    """Uniform sample of the valid colourings of a segment.

    With ``size=None`` a single tuple is drawn by exact integer arithmetic.
    With an integer ``size`` an ``(size, l)`` array is drawn by the
    vectorised float sampler.
    """
    if size is not None:
        left = np.full(size, -1 if bc.left is None else bc.left)
        right = np.full(size, -1 if bc.right is None else bc.right)
        return sample_segments(h, l, left, right, rng, bc.mask)
    sc = segment_counts(h, l, bc)
    if sc.total == 0:
        raise EmptySupport(f"no colouring of {l} sites between {bc.left} and {bc.right}")
    adj = h.adjacency
    t = sc.table
    if bc.left is None:
        first = list(t[1])
    else:
        first = [t[1][k] if adj[bc.left][k] else 0 for k in range(h.q)]
    out = [_pick(rng, first)]
    for j in range(2, l + 1):
        a = out[-1]
        out.append(_pick(rng, [t[j][k] if adj[a][k] else 0 for k in range(h.q)]))
    return tuple(out)


@lru_cache(maxsize=256)
def _float_table(h: ColourGraph, l: int, right: int, mask: Mask | None) -> np.ndarray:
    """Row-normalised float version of the count table for one right boundary.

    ``right == -1`` means a free right end.
    """
    a = h.matrix.astype(float)
    t = np.zeros((l + 1, h.q))
    t[l] = 1.0 if right < 0 else a[:, right]
    if mask is not None:
        t[l] *= [c in mask[l - 1] for c in range(h.q)]
    for j in range(l - 1, 0, -1):
        row = a @ t[j + 1]
        if mask is not None:
            row *= [c in mask[j - 1] for c in range(h.q)]
        top = row.max()
        t[j] = row / top if top > 0 else row
    t.setflags(write=False)
    return t


def sample_segments(
    h: ColourGraph,
    l: int,
    left: np.ndarray,
    right: np.ndarray,
    rng: np.random.Generator,
    mask: Mask | None = None,
    uniforms: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorised heat-bath fill: one segment per row of ``left``/``right``.

    ``left`` and ``right`` hold boundary colours, ``-1`` for a free end.
    ``uniforms`` (shape ``(N, l)``) may be supplied to share randomness
    between calls; rows with equal boundaries and equal uniforms produce
    equal fillings.
    """
    left = np.asarray(left)
    right = np.asarray(right)
    n = left.shape[0]
    a = h.matrix.astype(float)
    out = np.empty((n, l), dtype=np.int16)
    if uniforms is None:
        uniforms = rng.random((n, l))
    codes = np.unique(right)
    tables = np.stack([_float_table(h, l, int(c), mask) for c in codes])
    which = np.searchsorted(codes, right)
    prev = left
    for j in range(1, l + 1):
        w = tables[which, j, :]
        if j == 1:
            w = np.where((prev >= 0)[:, None], a[np.maximum(prev, 0)] * w, w)
        else:
            w = a[prev] * w
        cum = np.cumsum(w, axis=1)
        tot = cum[:, -1]
        if np.any(tot <= 0):
            bad = int(np.argmax(tot <= 0))
            raise EmptySupport(
                f"no colouring of {l} sites between {int(left[bad])} and {int(right[bad])} (-1 = free)"
            )
        u = uniforms[:, j - 1] * tot
        pick = (cum <= u[:, None]).sum(axis=1)
        pick = np.minimum(pick, h.q - 1)
        out[:, j - 1] = pick
        prev = pick
    return out


def site_marginal(h: ColourGraph, l: int, bc: BoundarySpec, j: int, exact: bool = False) -> FiniteDistribution:
    """Law of the colour at ``v_j`` under the uniform colouring of the segment.

    Support lists every colour ``0..q-1``; with ``exact=True`` the
    probabilities are Fractions.
    """
    if not 1 <= j <= l:
        raise ValueError(f"site {j} outside 1..{l}")
    sc = segment_counts(h, l, bc)
    if sc.total == 0:
        raise EmptySupport(f"no colouring of {l} sites between {bc.left} and {bc.right}")
    fwd = _forward(h, l, bc, j)
    weights = [fwd[k] * sc.table[j][k] for k in range(h.q)]
    tot = sum(weights)
    if exact:
        probs = tuple(Fraction(w, tot) for w in weights)
    else:
        probs = tuple(w / tot for w in weights)
    return FiniteDistribution(tuple(range(h.q)), probs)


def _forward(h, l, bc, j):
    """Number of colourings of ``v_1..v_{j-1}`` compatible with ``v_j = k``."""
    q = h.q
    adj = h.adjacency
    f = [1 if (bc.left is None or adj[bc.left][k]) else 0 for k in range(q)]
    for site in range(1, j):
        allow = _allowed(h, bc, site)
        if allow is not None:
            f = [x if allow[k] else 0 for k, x in enumerate(f)]
        f = [sum(f[k] for k in h.neighbours[k2]) for k2 in range(q)]
    return f


def resolve_class(h: ColourGraph, cls: str | None) -> str | None:
    """Normalise a class selector to None (all colourings), 'omega1' or 'omega2'.

    ``'auto'`` picks 'omega1' for bipartite H and None otherwise.
    """
    if cls in (None, "omega", "all"):
        return None
    if cls == "auto":
        return "omega1" if h.is_bipartite else None
    if cls not in ("omega1", "omega2"):
        raise ValueError(f"unknown class {cls!r}")
    if not h.is_bipartite:
        raise ValueError(f"class {cls!r} needs a bipartite H")
    return cls


def class_mask(h: ColourGraph, n: int, cls: str | None, lo: int = 1, hi: int | None = None) -> Mask | None:
    """Per-site allowed colours for sites ``lo..hi`` of an ``n``-site path."""
    cls = resolve_class(h, cls)
    if cls is None:
        return None
    hi = n if hi is None else hi
    c1, c2 = h.bipartition.classes()
    odd, even = (c1, c2) if cls == "omega1" else (c2, c1)
    return tuple(odd if site % 2 == 1 else even for site in range(lo, hi + 1))


def enumerate_state_space(h: ColourGraph, n: int, cls: str | None = None, cap: int = 10**6) -> np.ndarray:
    """All H-colourings of the ``n``-site path in the chosen class.

    Rows are colourings in lexicographic order (leftmost site most
    significant). Raises CapExceeded when any prefix level grows past ``cap``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mask = class_mask(h, n, cls)
    allowed = np.ones((n, h.q), dtype=bool)
    if mask is not None:
        for i, m in enumerate(mask):
            allowed[i] = [c in m for c in range(h.q)]
    dtype = np.int8 if h.q < 128 else np.int16
    states = np.flatnonzero(allowed[0]).astype(dtype)[:, None]
    a = h.matrix
    for j in range(1, n):
        ok = a[states[:, -1]] & allowed[j]
        rows, cols = np.nonzero(ok)
        if rows.size > cap:
            raise CapExceeded(f"{rows.size} prefixes of length {j + 1} exceed cap {cap}")
        states = np.concatenate([states[rows], cols.astype(dtype)[:, None]], axis=1)
    return states


def exact_uniform_sample(h: ColourGraph, n: int, cls: str | None, rng: np.random.Generator) -> tuple[int, ...]:
    """Perfect uniform sample from the chosen colouring class."""
    return sample_segment(h, n, BoundarySpec(None, None, class_mask(h, n, cls)), rng)


def is_valid_colouring(h: ColourGraph, x: Sequence[int]) -> bool:
    adj = h.adjacency
    return all(adj[x[i]][x[i + 1]] for i in range(len(x) - 1))
