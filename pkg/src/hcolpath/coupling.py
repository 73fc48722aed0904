"""Couplings of segment distributions and the disagreement they leave behind.

The block coupling used throughout works on a segment whose left
neighbour differs between two copies (colours ``c1`` and ``c2``) and
whose right neighbour ``d`` is shared (or free). With stride ``s`` it
repeatedly

1. couples the two laws of the colour ``s`` sites ahead maximally,
2. fills the ``s - 1`` sites in between independently in each copy,
3. restarts from the two colours just chosen,

and once fewer than ``s`` sites remain it couples site by site
(stride 1). Equal colours at a stride point make the two remaining laws
identical, after which both copies are filled identically. Stride 1
throughout is the site-by-site greedy coupling.

Exact per-site disagreement probabilities are obtained by a dynamic
programme over the joint colour pair at stride points (``q**2`` states).
The vectorised sampler draws from exactly the same coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .chains import Block, BlockSchedule, ChainParams, blocks_fixedorder, blocks_rnd
from .errors import ConditionViolated, EmptySupport
from .hgraph import ColourGraph, has_all_two_paths
from .segment import BoundarySpec, FiniteDistribution, class_mask, sample_segments, segment_counts

__all__ = [
    "CouplingTable",
    "DisagreementProfile",
    "RndContraction",
    "coupled_scan_fixedorder",
    "coupled_step_rnd",
    "disagreement_profile",
    "disagreement_profile_v1",
    "disagreement_profile_vs",
    "empirical_profile",
    "expected_hamming_rnd",
    "maximal_coupling",
    "sample_coupled_segments",
    "tv_distance",
    "wilson_interval",
]

Z99 = 2.5758293035489004


def _as_pair(p, q):
    """Align two distributions on a common, ordered outcome list."""
    if isinstance(p, FiniteDistribution):
        p = p.as_dict()
    if isinstance(q, FiniteDistribution):
        q = q.as_dict()
    if isinstance(p, Mapping) and isinstance(q, Mapping):
        support = sorted(set(p) | set(q), key=repr)
        return support, np.array([float(p.get(k, 0)) for k in support]), np.array([float(q.get(k, 0)) for k in support])
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions live on different outcome sets")
    return list(range(len(p))), p, q


def tv_distance(p, q) -> float:
    """Half the L1 distance between two finite distributions."""
    _, a, b = _as_pair(p, q)
    return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class CouplingTable:
    support: tuple
    joint: np.ndarray

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.joint.sum(axis=1), self.joint.sum(axis=0)

    def disagreement(self) -> float:
        return float(1.0 - np.trace(self.joint))


def _maximal_joint(p, q):
    m = np.minimum(p, q)
    agree = m.sum()
    joint = np.diag(m)
    rest = 1.0 - agree
    if rest > 1e-15:
        joint = joint + np.outer(p - m, q - m) / rest
    return joint


def maximal_coupling(p, q) -> CouplingTable:
    """Maximal coupling: ``min(p, q)`` on the diagonal, residuals coupled independently."""
    support, a, b = _as_pair(p, q)
    return CouplingTable(tuple(support), _maximal_joint(a, b))


def wilson_interval(k: int, n: int, z: float = Z99) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class DisagreementProfile:
    """Per-site disagreement probabilities ``probs[j-1]`` for sites ``v_1..v_l``."""

    probs: tuple[float, ...]
    provenance: str = "exact-dp"
    samples: int | None = None
    ci: tuple[tuple[float, float], ...] | None = None

    @property
    def total(self) -> float:
        return float(sum(self.probs))

    def __len__(self):
        return len(self.probs)


def _power_table(a_int, s):
    """Integer matrix powers ``A^0..A^s`` as nested lists."""
    q = len(a_int)
    powers = [[[int(i == j) for j in range(q)] for i in range(q)]]
    for _ in range(s):
        prev = powers[-1]
        powers.append([[sum(prev[i][k] * a_int[k][j] for k in range(q)) for j in range(q)] for i in range(q)])
    return powers


@lru_cache(maxsize=64)
def _stride_data(h: ColourGraph, s: int):
    """Walk counts and the in-between bridge laws for stride ``s``.

    ``bridge[a, c, t-1, e]`` is the law of the colour ``t`` sites after a
    site coloured ``a`` given the colour ``s`` sites after it is ``c``.
    ``mismatch[a, b, a2, b2, t-1]`` is the disagreement probability of two
    independent such fills.
    """
    q = h.q
    a_int = [[int(v) for v in row] for row in h.adjacency]
    powers = _power_table(a_int, s)
    if s == 1:
        return powers, None, None
    bridge = np.zeros((q, q, s - 1, q))
    for a in range(q):
        for c in range(q):
            tot = powers[s][a][c]
            if tot == 0:
                continue
            for t in range(1, s):
                for e in range(q):
                    bridge[a, c, t - 1, e] = powers[t][a][e] * powers[s - t][e][c] / tot
    overlap = np.einsum("actk,bdtk->abcdt", bridge, bridge)
    mismatch = 1.0 - overlap
    return powers, bridge, mismatch


def _marginals(walks, row, q):
    """``M[a, c]``: law of the colour ``walks``-steps ahead of a site coloured ``a``.

    ``walks[a][c]`` counts the fillings in between and ``row[c]`` the
    completions to the right. Rows with no valid filling are NaN.
    """
    out = np.full((q, q), np.nan)
    for a in range(q):
        weights = [walks[a][c] * row[c] for c in range(q)]
        tot = sum(weights)
        if tot:
            out[a] = [w / tot for w in weights]
    return out


def _kernel(marg):
    """Maximal couplings of every pair of rows: ``K[a, b, a2, b2]``."""
    q = marg.shape[0]
    m = np.nan_to_num(marg)
    mn = np.minimum(m[:, None, :], m[None, :, :])
    rest = 1.0 - mn.sum(axis=-1)
    res_a = m[:, None, :] - mn
    res_b = m[None, :, :] - mn
    safe = np.where(rest > 1e-15, rest, 1.0)
    k = np.einsum("abi,abj->abij", res_a, res_b) / safe[:, :, None, None]
    k = np.where((rest > 1e-15)[:, :, None, None], k, 0.0)
    idx = np.arange(q)
    k[:, :, idx, idx] += mn
    return k


def _feasible(marg, mass):
    bad = np.isnan(marg[:, 0])
    if (mass.sum(axis=1)[bad] > 0).any() or (mass.sum(axis=0)[bad] > 0).any():
        raise EmptySupport("a reachable boundary colour admits no filling of the rest of the segment")


def disagreement_profile(h: ColourGraph, l: int, c1: int, c2: int, right: int | None, stride: int) -> DisagreementProfile:
    """Exact per-site disagreement of the stride-``stride`` block coupling."""
    return _profile(h, l, c1, c2, right, stride)


@lru_cache(maxsize=1024)
def _profile(h, l, c1, c2, right, stride):
    if l < 1 or stride < 1:
        raise ValueError("l and stride must be positive")
    q = h.q
    table = segment_counts(h, l, BoundarySpec(None, right)).table
    for c in (c1, c2):
        if table[0][c] == 0:
            raise EmptySupport(f"no colouring of {l} sites between {c} and {right}")
    probs = np.zeros(l)
    if c1 == c2:
        return DisagreementProfile(tuple(probs))
    mass = np.zeros((q, q))
    mass[c1, c2] = 1.0
    powers, _, mismatch = _stride_data(h, stride)
    one = _stride_data(h, 1)[0]
    pos = 0
    while pos + stride <= l and mass.any():
        marg = _marginals(powers[stride], table[pos + stride], q)
        _feasible(marg, mass)
        k = _kernel(marg)
        if stride > 1:
            probs[pos : pos + stride - 1] = np.einsum("ab,abcd,abcdt->t", mass, k, mismatch)
        nxt = np.einsum("ab,abcd->cd", mass, k)
        np.fill_diagonal(nxt, 0.0)
        mass = nxt
        pos += stride
        probs[pos - 1] = mass.sum()
    while pos < l and mass.any():
        marg = _marginals(one[1], table[pos + 1], q)
        _feasible(marg, mass)
        nxt = np.einsum("ab,abcd->cd", mass, _kernel(marg))
        np.fill_diagonal(nxt, 0.0)
        mass = nxt
        pos += 1
        probs[pos - 1] = mass.sum()
    return DisagreementProfile(tuple(float(p) for p in probs))


def disagreement_profile_v1(h: ColourGraph, l: int, c1: int, c2: int, d: int | None) -> DisagreementProfile:
    """Site-by-site greedy coupling of two segments whose left neighbours differ.

    Needs every pair of colours to share a neighbour.
    """
    ok, witness = has_all_two_paths(h)
    if not ok:
        raise ConditionViolated(f"colours {witness} have no common neighbour")
    if l < 2:
        raise ValueError("l must be >= 2")
    return _profile(h, l, c1, c2, d, 1)


def disagreement_profile_vs(h: ColourGraph, l: int, c1: int, c2: int, d: int | None, s: int) -> DisagreementProfile:
    """Stride-``s`` coupling: greedy at ``v_s, v_2s, ...``, independent fills in between."""
    return _profile(h, l, c1, c2, d, s)


def _pick_rows(cum, u):
    pick = (cum <= (u * cum[:, -1])[:, None]).sum(axis=1)
    return np.minimum(pick, cum.shape[1] - 1)


def sample_coupled_segments(h, l, c1, c2, right, stride, rng):
    """Draw coupled fillings ``(X, Y)`` of shape ``(N, l)`` from the block coupling.

    ``c1``, ``c2`` are per-replica left colours and ``right`` per-replica
    right colours (``-1`` = free end). Replicas with ``c1 == c2`` get
    identical fillings.
    """
    c1 = np.asarray(c1, dtype=int)
    c2 = np.asarray(c2, dtype=int)
    right = np.asarray(right, dtype=int)
    n = c1.shape[0]
    x = np.empty((n, l), dtype=np.int16)
    y = np.empty((n, l), dtype=np.int16)
    for code in np.unique(right):
        rows = np.flatnonzero(right == code)
        gx, gy = _sample_group(h, l, c1[rows], c2[rows], None if code < 0 else int(code), stride, rng)
        x[rows] = gx
        y[rows] = gy
    return x, y


def _sample_group(h, l, a, b, right, stride, rng):
    q = h.q
    n = a.shape[0]
    table = segment_counts(h, l, BoundarySpec(None, right)).table
    bad = [c for c in set(a.tolist()) | set(b.tolist()) if table[0][c] == 0]
    if bad:
        raise EmptySupport(f"no colouring of {l} sites between {bad[0]} and {right}")
    powers = _stride_data(h, stride)[0]
    adj = h.matrix.astype(float)
    x = np.empty((n, l), dtype=np.int16)
    y = np.empty((n, l), dtype=np.int16)
    pos = 0
    step = stride
    while pos < l:
        if pos + step > l:
            step = 1
            powers = _stride_data(h, 1)[0]
        marg = _marginals(powers[step], table[pos + step], q)
        if np.isnan(marg[a, 0]).any() or np.isnan(marg[b, 0]).any():
            raise EmptySupport("a boundary colour admits no filling of the rest of the segment")
        k = _kernel(marg).reshape(q, q, q * q)
        cum = np.cumsum(k[a, b], axis=1)
        pick = _pick_rows(cum, rng.random(n))
        na, nb = pick // q, pick % q
        if step > 1:
            power = np.array(powers, dtype=float)
            u1 = rng.random((n, step - 1))
            u2 = np.where(((a == b) & (na == nb))[:, None], u1, rng.random((n, step - 1)))
            pa, pb = a, b
            for t in range(1, step):
                # law of site pos+t given the previous site and the colour at pos+step
                wa = adj[pa] * power[step - t][:, na].T
                wb = adj[pb] * power[step - t][:, nb].T
                pa = _pick_rows(np.cumsum(wa, axis=1), u1[:, t - 1])
                pb = _pick_rows(np.cumsum(wb, axis=1), u2[:, t - 1])
                x[:, pos + t - 1] = pa
                y[:, pos + t - 1] = pb
        pos += step
        x[:, pos - 1] = na
        y[:, pos - 1] = nb
        a, b = na, nb
    return x, y


def empirical_profile(h, l, c1, c2, right, stride, samples, rng) -> DisagreementProfile:
    """Monte-Carlo estimate of the profile with 99% Wilson intervals per site."""
    left1 = np.full(samples, c1)
    left2 = np.full(samples, c2)
    code = np.full(samples, -1 if right is None else right)
    x, y = sample_coupled_segments(h, l, left1, left2, code, stride, rng)
    counts = (x != y).sum(axis=0)
    return DisagreementProfile(
        tuple(float(c) / samples for c in counts),
        f"empirical({samples})",
        samples,
        tuple(wilson_interval(int(c), samples) for c in counts),
    )


def _as_batch(x, y):
    single = np.ndim(x) == 1
    xs = np.array(x, dtype=np.int16, ndmin=2)
    ys = np.array(y, dtype=np.int16, ndmin=2)
    if xs.shape != ys.shape:
        raise ValueError("x and y must have the same shape")
    return single, xs, ys


def _coupled_block(h, xs, ys, block, cls, stride, rng):
    """Apply the block coupling to every replica in place."""
    n = xs.shape[1]
    m = xs.shape[0]
    lo, hi = block.lo, block.hi
    size = hi - lo + 1
    free = np.full(m, -1)
    lx = xs[:, lo - 2].astype(int) if lo > 1 else free
    ly = ys[:, lo - 2].astype(int) if lo > 1 else free
    rx = xs[:, hi].astype(int) if hi < n else free
    ry = ys[:, hi].astype(int) if hi < n else free
    ldiff = lx != ly
    rdiff = rx != ry
    both = ldiff & rdiff
    if both.any():
        raise AssertionError(f"both boundaries of block {lo}-{hi} disagree")
    same = ~(ldiff | rdiff)
    if same.any():
        rows = np.flatnonzero(same)
        fill = sample_segments(h, size, lx[rows], rx[rows], rng, class_mask(h, n, cls, lo, hi))
        xs[rows, lo - 1 : hi] = fill
        ys[rows, lo - 1 : hi] = fill
    if ldiff.any():
        rows = np.flatnonzero(ldiff)
        fx, fy = sample_coupled_segments(h, size, lx[rows], ly[rows], rx[rows], stride, rng)
        xs[rows, lo - 1 : hi] = fx
        ys[rows, lo - 1 : hi] = fy
    if rdiff.any():
        rows = np.flatnonzero(rdiff)
        fx, fy = sample_coupled_segments(h, size, rx[rows], ry[rows], lx[rows], stride, rng)
        xs[rows, lo - 1 : hi] = fx[:, ::-1]
        ys[rows, lo - 1 : hi] = fy[:, ::-1]


def coupled_scan_fixedorder(h, params: ChainParams, x, y, rng, schedule: BlockSchedule | None = None):
    """One coupled scan of the fixed-order chain.

    Blocks with agreeing boundaries get the identity coupling; a block
    with one disagreeing boundary gets the stride-``params.s`` block
    coupling oriented away from that boundary. ``x`` and ``y`` may be
    single states or ``(N, n)`` arrays of replicas.
    """
    single, xs, ys = _as_batch(x, y)
    schedule = schedule or blocks_fixedorder(xs.shape[1], params.u)
    for block in schedule.blocks:
        _coupled_block(h, xs, ys, block, params.cls, params.s, rng)
    if single:
        return tuple(int(c) for c in xs[0]), tuple(int(c) for c in ys[0])
    return xs, ys


def coupled_step_rnd(h, params: ChainParams, x, y, rng, schedule: BlockSchedule | None = None):
    """One coupled random-update step, an independent block choice per replica."""
    single, xs, ys = _as_batch(x, y)
    schedule = schedule or blocks_rnd(xs.shape[1], params.w)
    picks = rng.integers(len(schedule), size=xs.shape[0])
    for k in np.unique(picks):
        rows = np.flatnonzero(picks == k)
        sx, sy = xs[rows], ys[rows]
        _coupled_block(h, sx, sy, schedule.blocks[int(k)], params.cls, params.s, rng)
        xs[rows] = sx
        ys[rows] = sy
    if single:
        return tuple(int(c) for c in xs[0]), tuple(int(c) for c in ys[0])
    return xs, ys


@dataclass(frozen=True)
class RndContraction:
    """Exact one-step expected Hamming distance of the random-update coupling."""

    value: float
    threshold: float
    passed: bool
    site: int
    n: int
    blocks: int
    containing: int
    adjacent: tuple[tuple[int, int, float], ...] = field(default=())
    guaranteed: bool = True


def expected_hamming_rnd(h, params: ChainParams, x, y, schedule: BlockSchedule | None = None) -> RndContraction:
    """Exact ``E[Ham(x', y')]`` after one coupled step from a pair differing at one site.

    Blocks containing the disagreement clear it, blocks touching it
    contribute ``1 +`` the summed disagreement profile of the block
    coupling, every other block leaves the distance at 1. ``threshold``
    is ``1 - s / (n + 2 s q^s + s - 1)``.
    """
    x, y = tuple(x), tuple(y)
    n = len(x)
    diff = [j for j in range(n) if x[j] != y[j]]
    if len(diff) != 1:
        raise ValueError(f"x and y must differ at exactly one site, got {len(diff)}")
    i = diff[0] + 1
    schedule = schedule or blocks_rnd(n, params.w)
    containing = 0
    others = 0
    adjacent = []
    total = 0.0
    for block in schedule.blocks:
        if i in block:
            containing += 1
        elif block.lo == i + 1:
            far = x[block.hi] if block.hi < n else None
            prof = _profile(h, block.size, x[i - 1], y[i - 1], far, params.s)
            adjacent.append((block.lo, block.hi, 1.0 + prof.total))
            total += 1.0 + prof.total
        elif block.hi == i - 1:
            far = x[block.lo - 2] if block.lo > 1 else None
            prof = _profile(h, block.size, x[i - 1], y[i - 1], far, params.s)
            adjacent.append((block.lo, block.hi, 1.0 + prof.total))
            total += 1.0 + prof.total
        else:
            others += 1
    value = (total + others) / len(schedule)
    q, s = params.q, params.s
    threshold = 1.0 - s / (n + 2 * s * q**s + s - 1)
    return RndContraction(value, threshold, value < threshold, i, n, len(schedule), containing, tuple(adjacent),
                          not params.overrides)
