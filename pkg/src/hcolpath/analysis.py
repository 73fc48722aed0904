"""Mixing-time verification: exact distribution evolution and bound checks.

Exact evolution works on the enumerated state space. A heat-bath move on
a block is uniform on the *fiber* of the current state, i.e. the states
that agree with it outside the block, so one move maps a probability
vector ``p`` to ``fiber_mean(p)``. States are encoded as base-``q``
integers (leftmost site most significant), so a fiber key is the code
with the block's digits cleared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import Context, Decimal
from fractions import Fraction
from typing import Sequence

import numpy as np

from .chains import ChainParams, schedule_for
from .coupling import disagreement_profile_v1
from .errors import CapExceeded, ConditionViolated, NotReached
from .hgraph import ColourGraph, has_all_two_paths
from .segment import BoundarySpec, class_mask, segment_counts, site_marginal

__all__ = [
    "AlphaReport",
    "BoundReport",
    "ExactEvolver",
    "IdentityReport",
    "ObstructionReport",
    "TvCurve",
    "TvEstimate",
    "check_identities",
    "dobrushin_alpha",
    "empirical_tv",
    "evolve_distribution",
    "first_colouring",
    "floor_sum",
    "mixing_time_exact",
    "predicted_mixing_bound",
    "start_panel",
    "stationarity_residual",
    "two_path_obstruction",
    "window_law",
]

_CTX = Context(prec=60)


# ---------------------------------------------------------------- evolution


def _codes(h: ColourGraph, n: int, cls, cap: int) -> np.ndarray:
    """Sorted base-q codes of every colouring in the class."""
    if n * math.log2(max(h.q, 2)) >= 62:
        raise CapExceeded(f"{h.q}**{n} codes do not fit in 64 bits")
    mask = class_mask(h, n, cls)
    allowed = np.ones((n, h.q), dtype=bool)
    if mask is not None:
        for i, m in enumerate(mask):
            allowed[i] = [c in m for c in range(h.q)]
    last = np.flatnonzero(allowed[0])
    codes = last.astype(np.int64)
    a = h.matrix
    for j in range(1, n):
        rows, cols = np.nonzero(a[last] & allowed[j])
        if rows.size > cap:
            raise CapExceeded(f"state space exceeds cap {cap} (at least {rows.size} states)")
        codes = codes[rows] * h.q + cols
        last = cols
    return codes


class ExactEvolver:
    """Exact transition operators of a block chain on the enumerated space.

    ``p`` may be a single distribution (shape ``(N,)``) or a stack of
    distributions (shape ``(S, N)``).
    """

    def __init__(self, h: ColourGraph, params: ChainParams, n: int, cap: int = 20000, schedule=None):
        self.h = h
        self.params = params
        self.n = n
        self.schedule = schedule or schedule_for(params, n)
        self.codes = _codes(h, n, params.cls, cap)
        self.size = self.codes.size
        if self.size > cap:
            raise CapExceeded(f"{self.size} states exceed cap {cap}")
        self._fibers = [self._fiber(b.lo, b.hi) for b in self.schedule.blocks]

    def _fiber(self, lo, hi):
        q, n = self.h.q, self.n
        high = q ** (n - lo + 1)
        low = q ** (n - hi)
        key = (self.codes // high) * high + self.codes % low
        _, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        return inv.ravel(), counts.astype(float)

    def index(self, x: Sequence[int]) -> int:
        code = 0
        for c in x:
            code = code * self.h.q + int(c)
        k = int(np.searchsorted(self.codes, code))
        if k >= self.size or self.codes[k] != code:
            raise ValueError(f"{tuple(x)} is not in the enumerated state space")
        return k

    def state(self, k: int) -> tuple[int, ...]:
        code = int(self.codes[k])
        out = []
        for _ in range(self.n):
            code, c = divmod(code, self.h.q)
            out.append(c)
        return tuple(reversed(out))

    def point_mass(self, x) -> np.ndarray:
        p = np.zeros(self.size)
        p[self.index(x)] = 1.0
        return p

    def uniform(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def block_move(self, p: np.ndarray, k: int) -> np.ndarray:
        inv, counts = self._fibers[k]
        if p.ndim == 1:
            return (np.bincount(inv, p, minlength=counts.size) / counts)[inv]
        return np.stack([(np.bincount(inv, row, minlength=counts.size) / counts)[inv] for row in p])

    def step(self, p: np.ndarray, order=None) -> np.ndarray:
        """One scan, or for the random-update chain one step (mixture over blocks)."""
        if self.schedule.kind == "rnd":
            return sum(self.block_move(p, k) for k in range(len(self.schedule))) / len(self.schedule)
        for k in order if order is not None else range(len(self.schedule)):
            p = self.block_move(p, k)
        return p

    def tv(self, p: np.ndarray):
        dev = 0.5 * np.abs(p - 1.0 / self.size).sum(axis=-1)
        return dev if np.ndim(dev) else float(dev)


@dataclass(frozen=True)
class TvCurve:
    """``(t, tv)`` points; ``half_widths`` only for empirical curves."""

    points: tuple[tuple[int, float], ...]
    mode: str = "exact"
    half_widths: tuple[float, ...] | None = None
    start: tuple[int, ...] | None = None

    def to_csv(self) -> str:
        if self.half_widths is None:
            rows = ["t,tv"] + [f"{t},{tv:.17g}" for t, tv in self.points]
        else:
            rows = ["t,tv,ci"] + [f"{t},{tv:.17g},{hw:.17g}" for (t, tv), hw in zip(self.points, self.half_widths)]
        return "\n".join(rows) + "\n"

    def at(self, t: int) -> float:
        for tt, tv in self.points:
            if tt == t:
                return tv
        raise KeyError(t)


def evolve_distribution(h, params: ChainParams, n: int, start, t_max: int, cap: int = 20000, order=None,
                        evolver: ExactEvolver | None = None) -> TvCurve:
    """Exact TV-to-uniform curve from a point mass at ``start`` for ``t = 0..t_max``."""
    ev = evolver or ExactEvolver(h, params, n, cap)
    p = ev.point_mass(start)
    points = [(0, ev.tv(p))]
    for t in range(1, t_max + 1):
        p = ev.step(p, order)
        points.append((t, ev.tv(p)))
    return TvCurve(tuple(points), "exact", None, tuple(int(c) for c in start))


def mixing_time_exact(curve: TvCurve, eps: float) -> int:
    """Least recorded ``t > 0`` with ``tv <= eps``."""
    for t, tv in curve.points:
        if t > 0 and tv <= eps:
            return t
    raise NotReached(f"tv never drops to {eps} within t <= {curve.points[-1][0]}")


def stationarity_residual(h, params: ChainParams, n: int, cap: int = 20000) -> float:
    """``max |P u - u|`` for the uniform vector ``u`` and one scan (or step)."""
    ev = ExactEvolver(h, params, n, cap)
    u = ev.uniform()
    return float(np.abs(ev.step(u) - u).max())


# ---------------------------------------------------------------- empirical TV


def first_colouring(h: ColourGraph, n: int, cls=None, largest: bool = False) -> tuple[int, ...]:
    """Lexicographically smallest (or largest) colouring in the class."""
    mask = class_mask(h, n, cls)
    table = segment_counts(h, n, BoundarySpec(None, None, mask)).table
    out = []
    prev = None
    for j in range(1, n + 1):
        for c in (range(h.q - 1, -1, -1) if largest else range(h.q)):
            if table[j][c] and (prev is None or h.adjacency[prev][c]):
                out.append(c)
                prev = c
                break
    return tuple(out)


def window_law(h: ColourGraph, n: int, cls, lo: int, hi: int) -> dict:
    """Exact law of ``(x_lo, ..., x_hi)`` under the uniform colouring."""
    mask = class_mask(h, n, cls)
    allow = [set(range(h.q)) if mask is None else mask[i] for i in range(n)]
    left = [1] * h.q
    if lo > 1:
        lt = segment_counts(h, lo - 1, BoundarySpec(None, None, None if mask is None else mask[: lo - 1])).table
        left = [sum(lt[lo - 1][b] for b in h.neighbours[c]) for c in range(h.q)]
    right = [1] * h.q
    if hi < n:
        rmask = None if mask is None else mask[hi:]
        right = [segment_counts(h, n - hi, BoundarySpec(c, None, rmask)).total for c in range(h.q)]
    weights = {}
    for w in itertools.product(*(sorted(allow[i]) for i in range(lo - 1, hi))):
        if all(h.adjacency[w[i]][w[i + 1]] for i in range(len(w) - 1)):
            val = left[w[0]] * right[w[-1]]
            if val:
                weights[w] = val
    tot = sum(weights.values())
    return {k: v / tot for k, v in weights.items()}


@dataclass(frozen=True)
class TvEstimate:
    estimate: float
    ci: tuple[float, float]
    samples: int
    projection: str
    support: int


def empirical_tv(h, params: ChainParams, n: int, t: int, samples: int, rng, start=None, window=None,
                 cap: int = 20000) -> TvEstimate:
    """TV between ``samples`` chain runs of length ``t`` and the exact uniform law.

    Compares full states when the space is enumerable and no ``window``
    is given, otherwise the joint law of sites ``window = (lo, hi)``
    (at most 8 sites). The interval adds a McDiarmid term at 99% to a
    plug-in bound on the estimator's bias.
    """
    from .chains import run_scan_batch, step_rnd_batch

    schedule = schedule_for(params, n)
    start = tuple(start) if start is not None else first_colouring(h, n, params.cls)
    states = np.tile(np.array(start, dtype=np.int16), (samples, 1))
    for _ in range(t):
        if params.kind == "rnd":
            step_rnd_batch(h, params, schedule, states, rng)
        else:
            run_scan_batch(h, params, schedule, states, rng)
    if window is None:
        codes = _codes(h, n, params.cls, cap)
        pw = h.q ** np.arange(n - 1, -1, -1, dtype=np.int64)
        idx = np.searchsorted(codes, states.astype(np.int64) @ pw)
        emp = np.bincount(idx, minlength=codes.size) / samples
        target = np.full(codes.size, 1.0 / codes.size)
        projection = "full"
    else:
        lo, hi = window
        if not 1 <= lo <= hi <= n or hi - lo + 1 > 8:
            raise CapExceeded("window must be at most 8 sites inside the path")
        law = window_law(h, n, params.cls, lo, hi)
        keys = sorted(law)
        pos = {k: i for i, k in enumerate(keys)}
        obs = np.zeros(len(keys))
        for row, cnt in zip(*np.unique(states[:, lo - 1 : hi], axis=0, return_counts=True)):
            obs[pos[tuple(int(c) for c in row)]] += cnt
        emp = obs / samples
        target = np.array([law[k] for k in keys])
        projection = f"window {lo}-{hi}"
    est = 0.5 * float(np.abs(emp - target).sum())
    bias = 0.5 * float(np.sqrt(emp * (1 - emp) / samples).sum())
    hw = math.sqrt(math.log(2 / 0.01) / (2 * samples))
    return TvEstimate(est, (max(0.0, est - bias - hw), min(1.0, est + bias + hw)), samples, projection, target.size)


def start_panel(h: ColourGraph, n: int, cls, rng, k: int = 10) -> list[tuple[int, ...]]:
    """Lexicographic extremes plus ``k`` perfect uniform samples.

    The worst start over this panel is only a lower bound on the worst
    start overall.
    """
    from .segment import exact_uniform_sample

    panel = [first_colouring(h, n, cls), first_colouring(h, n, cls, largest=True)]
    panel += [exact_uniform_sample(h, n, cls, rng) for _ in range(k)]
    return panel


# ---------------------------------------------------------------- Dobrushin


@dataclass(frozen=True)
class AlphaReport:
    max_degree: int
    l1: int
    alpha_exact_max: float
    alpha_simple: float
    threshold: float
    attained_at: int
    passed: bool
    by_distance: tuple[float, ...] = field(default=())
    alpha_coupling: float | None = None


def _alpha_terms(p, l1):
    out = []
    for d in range(1, math.ceil(l1 / 2) + 1):
        far = p ** (l1 - 1) if d == 1 else p ** (l1 - d + 1)
        out.append(p**d + far)
    return out


def dobrushin_alpha(h: ColourGraph, l1: int | None = None, with_coupling: bool = False) -> AlphaReport:
    """Influence bound for block length ``l1`` (default: the canonical one).

    ``by_distance[d-1]`` is the bound on the total influence on a site
    ``d`` steps inside a block. With ``with_coupling`` the same sum is
    also evaluated from exact greedy-coupling profiles, maximised over
    boundary colours for each side separately.
    """
    ok, witness = has_all_two_paths(h)
    if not ok:
        raise ConditionViolated(f"colours {witness} have no common neighbour")
    delta2 = h.max_degree**2
    if l1 is None:
        from .chains import make_params

        l1 = make_params(h).l1
    p = 1.0 - 1.0 / delta2
    terms = _alpha_terms(p, l1)
    best = max(terms)
    simple = p + p ** (l1 - 1)
    threshold = 1.0 - 1.0 / (delta2 * (delta2 + 1))
    coupling = None
    if with_coupling and l1 >= 2:
        prof = np.zeros(l1)
        for c1, c2 in itertools.permutations(range(h.q), 2):
            for d in [None, *range(h.q)]:
                try:
                    vals = disagreement_profile_v1(h, l1, c1, c2, d).probs
                except Exception:  # infeasible boundary triple
                    continue
                prof = np.maximum(prof, vals)
        coupling = max(prof[d - 1] + prof[l1 - d] for d in range(1, math.ceil(l1 / 2) + 1))
    return AlphaReport(h.max_degree, l1, best, simple, threshold, terms.index(best) + 1,
                       best <= simple + 1e-15 and simple < threshold, tuple(terms),
                       None if coupling is None else float(coupling))


# ---------------------------------------------------------------- obstruction


@dataclass(frozen=True)
class ObstructionReport:
    found: bool
    pair: tuple[int, int] | None = None
    x: tuple[int, ...] | None = None
    y: tuple[int, ...] | None = None
    site: int | None = None
    supports: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    disjoint: bool | None = None
    same_class: bool | None = None


def _distances(h, src):
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for c in frontier:
            for d in h.neighbours[c]:
                if d not in dist:
                    dist[d] = dist[c] + 1
                    nxt.append(d)
        frontier = nxt
    return dist


def two_path_obstruction(h: ColourGraph, n: int = 3) -> ObstructionReport:
    """Look for colours with no common neighbour and build the disagreement witness.

    Among such pairs the one farthest apart in ``h`` is used (ties broken
    lexicographically). ``x`` colours site 1 with ``c1``, ``y`` flips it to
    ``c2``; the block ``{2..n}`` then has next-site laws with disjoint
    supports, so any coupling disagrees at site 2 with probability 1.
    """
    nb = [set(x) for x in h.neighbours]
    pairs = [(c1, c2) for c1, c2 in itertools.combinations(range(h.q), 2) if not nb[c1] & nb[c2]]
    if not pairs:
        return ObstructionReport(False)
    c1, c2 = max(pairs, key=lambda pr: (_distances(h, pr[0])[pr[1]], -pr[0], -pr[1]))
    x = [c1]
    for _ in range(n - 1):
        x.append(h.neighbours[x[-1]][0])
    x = tuple(x)
    y = (c2,) + x[1:]
    sup = []
    for c in (c1, c2):
        law = site_marginal(h, n - 1, BoundarySpec(c, None), 1)
        sup.append(tuple(k for k, pr in zip(law.support, law.probs) if pr > 0))
    part = h.bipartition.class_of
    same = True if part is None else part[c1] == part[c2]
    return ObstructionReport(True, (c1, c2), x, y, 1, (sup[0], sup[1]), not set(sup[0]) & set(sup[1]), same)


# ---------------------------------------------------------------- bounds


@dataclass(frozen=True)
class BoundReport:
    kind: str
    value: int
    unit: str
    n: int
    eps: float
    guaranteed: bool = True


def _ceil(x: Decimal) -> int:
    return int(x.to_integral_value(rounding="ROUND_CEILING"))


def predicted_mixing_bound(kind: str, h: ColourGraph, n: int, eps: float, params: ChainParams | None = None) -> BoundReport:
    """Mixing-time upper bound for the chain, natural log, rounded up.

    Scans for the two scan chains, block updates for the random-update
    chain. Bounds computed from overridden params carry no guarantee.
    """
    log = (Decimal(n) / Decimal(str(eps))).ln(_CTX)
    q = h.q
    guaranteed = params is None or not params.overrides
    if kind == "anyorder":
        d2 = h.max_degree**2
        return BoundReport(kind, _ceil(d2 * (d2 + 1) * log), "scans", n, eps, guaranteed)
    s = params.s if params is not None else 4 * q + 1
    if kind == "fixedorder":
        return BoundReport(kind, _ceil((4 * s * q**s + 2) * log), "scans", n, eps, guaranteed)
    if kind == "rnd":
        return BoundReport(kind, _ceil((n + 2 * s * q**s + s - 1) * log / s), "block-updates", n, eps, guaranteed)
    raise ValueError(f"unknown chain kind {kind!r}")


# ---------------------------------------------------------------- identities


@dataclass(frozen=True)
class IdentityReport:
    sum_rank_checked: int
    sum_rank_violations: tuple
    floor_sum_checked: int
    floor_sum_violations: tuple
    floor_sum_min_slack: float

    @property
    def passed(self) -> bool:
        return not self.sum_rank_violations and not self.floor_sum_violations


def floor_sum(s: int, k: int, x: int) -> Fraction:
    """``sum_{j=1}^{sk} (1 - 1/x)^floor(j/s)`` exactly."""
    r = Fraction(x - 1, x)
    return sum((r ** (j // s) for j in range(1, s * k + 1)), Fraction(0))


def check_identities(p_steps: int = 100, j_max: int = 50, l_extra: int = 50, s_max: int = 20, k_max: int = 20,
                     x_max: int = 50) -> IdentityReport:
    """Grid check of the two rank/sum inequalities used by the mixing proofs.

    ``p^j + p^(l-j+1) >= p^(j+1) + p^(l-j)`` for ``p`` on a grid,
    ``j <= j_max`` and ``2j <= l <= 2j + l_extra``; and
    ``sum_{j<=sk} (1-1/x)^floor(j/s) < s x``. Float near-misses are
    re-checked with exact rationals.
    """
    ps = np.linspace(0.0, 1.0, p_steps + 1)
    bad_rank = []
    checked = 0
    for j in range(1, j_max + 1):
        ls = np.arange(2 * j, 2 * j + l_extra + 1)
        lhs = ps[:, None] ** j + ps[:, None] ** (ls - j + 1)
        rhs = ps[:, None] ** (j + 1) + ps[:, None] ** (ls - j)
        checked += lhs.size
        for pi, li in zip(*np.nonzero(lhs - rhs < 1e-12)):
            pf = Fraction(int(pi), p_steps)
            l = int(ls[li])
            if pf**j + pf ** (l - j + 1) < pf ** (j + 1) + pf ** (l - j):
                bad_rank.append((float(pf), j, l))
    bad_floor = []
    slack = math.inf
    count = 0
    for s in range(1, s_max + 1):
        for x in range(1, x_max + 1):
            r = 1.0 - 1.0 / x
            terms = r ** (np.arange(1, s * k_max + 1) // s)
            partial = np.cumsum(terms)[s - 1 :: s]
            gaps = s * x - partial
            count += gaps.size
            slack = min(slack, float(gaps.min()))
            for k in np.flatnonzero(gaps < 1e-9) + 1:
                if floor_sum(s, int(k), x) >= s * x:
                    bad_floor.append((s, int(k), x))
    return IdentityReport(checked, tuple(bad_rank), count, tuple(bad_floor), slack)
