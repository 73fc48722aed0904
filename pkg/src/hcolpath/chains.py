"""Block heat-bath Markov chains on H-colourings of the n-site path.

Three chains share one move, the heat-bath update of a block of
consecutive sites, and differ in how blocks are laid out and visited:

``anyorder``
    blocks of ``l1`` sites covering the path, visited once per scan in
    any order;
``fixedorder``
    blocks ``[k*u + 1, (k+2)*u]`` (last one clipped at ``n``), visited in
    ascending ``k``;
``rnd``
    ``n + w - 1`` blocks of at most ``w`` sites, every site in exactly
    ``w`` of them, one uniformly random block per step.

States are tuples of colour indices (site 1 first). Batch variants
operate on ``(N, n)`` integer arrays, one replica per row.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from decimal import Context, Decimal
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ClassMismatch, EmptySupport, NoWalk, PathTooShort
from .hgraph import ColourGraph, s_edge_walk
from .segment import BoundarySpec, class_mask, exact_uniform_sample, is_valid_colouring, resolve_class
from .segment import sample_segment, sample_segments

__all__ = [
    "Block",
    "BlockSchedule",
    "ChainParams",
    "KINDS",
    "blocks_anyorder",
    "blocks_fixedorder",
    "blocks_rnd",
    "ergodicity_witness",
    "hamming_path",
    "heat_bath_update",
    "in_extended_class",
    "is_valid_colouring",
    "make_params",
    "run_chain",
    "run_scan",
    "run_scan_batch",
    "schedule_for",
    "state_class",
    "step_rnd",
    "step_rnd_batch",
]

KINDS = ("anyorder", "fixedorder", "rnd")
OVERRIDABLE = ("l1", "s", "beta", "u", "gamma", "w")


_CTX = Context(prec=80)


def ceil_ln(x: int, factor: int = 1) -> int:
    """``ceil(factor * ln(x))`` evaluated with 80 significant digits."""
    val = Decimal(factor) * Decimal(x).ln(_CTX)
    return int(val.to_integral_value(rounding="ROUND_CEILING"))


@dataclass(frozen=True)
class ChainParams:
    """Block-size constants of the three chains.

    ``u`` is the half-length ``beta * s`` of a fixed-order block
    (``l2 = 2u``) and ``w`` the random-update block size ``s * gamma``.
    Anything listed in ``overrides`` was set by hand and voids the
    mixing-time guarantees attached to the default constants.
    """

    kind: str
    q: int
    max_degree: int
    l1: int
    s: int
    beta: int
    u: int
    l2: int
    gamma: int
    w: int
    overrides: tuple[str, ...] = ()
    cls: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["overrides"] = list(self.overrides)
        # big constants stay exact in JSON
        return d


def make_params(h: ColourGraph, kind: str = "anyorder", overrides: dict | None = None, cls: str | None = "auto") -> ChainParams:
    if kind not in KINDS:
        raise ValueError(f"unknown chain kind {kind!r}")
    ov = dict(overrides or {})
    unknown = set(ov) - set(OVERRIDABLE)
    if unknown:
        raise ValueError(f"cannot override {sorted(unknown)}; choose from {OVERRIDABLE}")
    for key, val in ov.items():
        if int(val) < 1:
            raise ValueError(f"override {key} must be positive")
    q = h.q
    d = h.max_degree
    l1 = int(ov.get("l1", ceil_ln(d * d + 1, d * d) + 1))
    s = int(ov.get("s", 4 * q + 1))
    qs = q**s
    beta = int(ov.get("beta", ceil_ln(2 * s * qs + 1) * qs))
    u = int(ov.get("u", beta * s))
    gamma = int(ov.get("gamma", 2 * qs + 1))
    w = int(ov.get("w", s * gamma))
    return ChainParams(kind, q, d, l1, s, beta, u, 2 * u, gamma, w, tuple(sorted(ov)), resolve_class(h, cls))


class Block(NamedTuple):
    """Inclusive 1-based site interval."""

    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, site):
        return self.lo <= site <= self.hi


@dataclass(frozen=True)
class BlockSchedule:
    kind: str
    n: int
    blocks: tuple[Block, ...]
    size: int = field(default=0)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, k):
        return self.blocks[k]

    def multiplicity(self) -> list[int]:
        """Number of blocks containing each site 1..n."""
        diff = [0] * (self.n + 2)
        for b in self.blocks:
            diff[b.lo] += 1
            diff[b.hi + 1] -= 1
        out, run = [], 0
        for site in range(1, self.n + 1):
            run += diff[site]
            out.append(run)
        return out


def blocks_anyorder(n: int, l1: int) -> BlockSchedule:
    """Tiling by ``l1``-site blocks; the last block is shifted left to end at ``n``."""
    if n < 1 or l1 < 1:
        raise ValueError("n and l1 must be positive")
    if n <= l1:
        return BlockSchedule("anyorder", n, (Block(1, n),), l1)
    m1 = -(-n // l1)
    blocks = [Block((k - 1) * l1 + 1, k * l1) for k in range(1, m1)]
    blocks.append(Block(n - l1 + 1, n))
    return BlockSchedule("anyorder", n, tuple(blocks), l1)


def blocks_fixedorder(n: int, u: int) -> BlockSchedule:
    """Overlapping blocks ``[k*u + 1, min((k+2)*u, n)]`` for ``k = 0..n//u - 1``."""
    if u < 1:
        raise ValueError("u must be positive")
    if n < u:
        raise PathTooShort(f"fixed-order schedule needs n >= u (n={n}, u={u})")
    count = n // u
    blocks = tuple(Block(k * u + 1, min((k + 2) * u, n)) for k in range(count))
    return BlockSchedule("fixedorder", n, blocks, u)


def blocks_rnd(n: int, w: int) -> BlockSchedule:
    """The ``n + w - 1`` random-update blocks; every site lies in exactly ``w`` of them."""
    if n < 1 or w < 1:
        raise ValueError("n and w must be positive")
    blocks = [Block(k, min(k + w - 1, n)) for k in range(1, n + 1)]
    # for n < w the wrap-around blocks are cut at n, which keeps the multiplicity at w
    blocks += [Block(1, min(n + w - k, n)) for k in range(n + 1, n + w)]
    return BlockSchedule("rnd", n, tuple(blocks), w)


def schedule_for(params: ChainParams, n: int) -> BlockSchedule:
    if params.kind == "anyorder":
        return blocks_anyorder(n, params.l1)
    if params.kind == "fixedorder":
        return blocks_fixedorder(n, params.u)
    return blocks_rnd(n, params.w)


def state_class(h: ColourGraph, x: Sequence[int]) -> str | None:
    """'omega1' / 'omega2' if ``x`` respects that parity pattern, else None.

    Only meaningful for bipartite H.
    """
    part = h.bipartition.class_of
    if part is None:
        return None
    first = part[x[0]]
    for site, c in enumerate(x, start=1):
        if part[c] != (first if site % 2 == 1 else 3 - first):
            return None
    return "omega1" if first == 1 else "omega2"


def in_extended_class(h: ColourGraph, x: Sequence[int], cls: str | None) -> bool:
    """Membership of the extended space for the class (every state if H is not bipartite)."""
    cls = resolve_class(h, cls)
    if cls is None:
        return all(0 <= c < h.q for c in x)
    return state_class(h, x) == cls


def _boundaries(state, block, n):
    left = state[block.lo - 2] if block.lo > 1 else None
    right = state[block.hi] if block.hi < n else None
    return left, right


def heat_bath_update(h: ColourGraph, state: Sequence[int], block: Block, cls: str | None, rng: np.random.Generator):
    """Resample the block uniformly given its boundary colours."""
    n = len(state)
    if not 1 <= block.lo <= block.hi <= n:
        raise ValueError(f"block {block} outside 1..{n}")
    left, right = _boundaries(state, block, n)
    bc = BoundarySpec(int(left) if left is not None else None, int(right) if right is not None else None,
                      class_mask(h, n, cls, block.lo, block.hi))
    try:
        fill = sample_segment(h, block.size, bc, rng)
    except EmptySupport as exc:
        raise EmptySupport(f"block {block.lo}-{block.hi} of state {tuple(state)}: {exc}") from None
    return tuple(state[: block.lo - 1]) + fill + tuple(state[block.hi :])


def _scan_order(schedule, order, rng):
    m = len(schedule)
    if order is None:
        return range(m)
    if isinstance(order, str):
        if order != "random":
            raise ValueError(f"unknown order {order!r}")
        if schedule.kind == "fixedorder":
            raise ValueError("fixed-order chain scans blocks in ascending order only")
        return rng.permutation(m).tolist()
    order = list(order)
    if sorted(order) != list(range(m)):
        raise ValueError("order must be a permutation of the block indices")
    if schedule.kind == "fixedorder" and order != list(range(m)):
        raise ValueError("fixed-order chain scans blocks in ascending order only")
    return order


def run_scan(h, params, schedule, state, rng, order=None, check=False):
    """One full scan: a heat-bath update of every block in ``order``."""
    if schedule.kind == "rnd":
        raise ValueError("random-update chain has no scans; use step_rnd")
    cls = params.cls
    for k in _scan_order(schedule, order, rng):
        state = heat_bath_update(h, state, schedule.blocks[k], cls, rng)
        if check and not in_extended_class(h, state, cls):
            raise AssertionError(f"state left the state space after block {k}: {state}")
    return state


def step_rnd(h, params, schedule, state, rng):
    """One random-update step: heat-bath on a uniformly chosen block."""
    k = int(rng.integers(len(schedule)))
    return heat_bath_update(h, state, schedule.blocks[k], params.cls, rng)


def _batch_update(h, states, block, cls, rng, rows=None):
    n = states.shape[1]
    sub = states if rows is None else states[rows]
    left = sub[:, block.lo - 2].astype(int) if block.lo > 1 else np.full(sub.shape[0], -1)
    right = sub[:, block.hi].astype(int) if block.hi < n else np.full(sub.shape[0], -1)
    fill = sample_segments(h, block.size, left, right, rng, class_mask(h, n, cls, block.lo, block.hi))
    if rows is None:
        states[:, block.lo - 1 : block.hi] = fill
    else:
        states[rows, block.lo - 1 : block.hi] = fill


def run_scan_batch(h, params, schedule, states, rng, order=None):
    """In-place scan of every replica (rows of ``states``), same block order for all."""
    for k in _scan_order(schedule, order, rng):
        _batch_update(h, states, schedule.blocks[k], params.cls, rng)
    return states


def step_rnd_batch(h, params, schedule, states, rng):
    """In-place random-update step, an independent block choice per replica."""
    picks = rng.integers(len(schedule), size=states.shape[0])
    for k in np.unique(picks):
        _batch_update(h, states, schedule.blocks[int(k)], params.cls, rng, rows=np.flatnonzero(picks == k))
    return states


def run_chain(h, params, n, t, rng, start=None, order=None, record_every=0, schedule=None):
    """Run ``t`` scans (or steps for ``rnd``) from ``start``.

    ``start`` defaults to a perfect uniform sample. Returns the final
    state and a list of ``(t, state)`` records taken every
    ``record_every`` scans (t = 0 included); no records when 0.
    """
    schedule = schedule or schedule_for(params, n)
    state = tuple(start) if start is not None else exact_uniform_sample(h, n, params.cls, rng)
    trajectory = [(0, state)] if record_every else []
    for step in range(1, t + 1):
        if params.kind == "rnd":
            state = step_rnd(h, params, schedule, state, rng)
        else:
            state = run_scan(h, params, schedule, state, rng, order)
        if record_every and step % record_every == 0:
            trajectory.append((step, state))
    return state, trajectory


def ergodicity_witness(h, params, x, y, schedule=None):
    """States ``x = sigma^0, ..., sigma^(m+1) = y`` with each step confined to one block.

    ``sigma^(k+1)`` follows ``y`` up to a splice walk ending just after
    block ``k`` and ``x`` from there on, so a heat-bath move on block ``k``
    reaches it from ``sigma^k`` with positive probability. The splice has
    ``min(s, u + 1)`` edges, shortened if no walk of that length exists.
    """
    x, y = tuple(x), tuple(y)
    n = len(x)
    if len(y) != n:
        raise ValueError("x and y must have the same length")
    for z in (x, y):
        if not is_valid_colouring(h, z):
            raise ValueError(f"{z} is not an H-colouring")
    if h.is_bipartite and state_class(h, x) != state_class(h, y):
        raise ClassMismatch("x and y lie in different parity classes")
    schedule = schedule or blocks_fixedorder(n, params.u)
    u = schedule.size
    limit = min(params.s, u + 1)
    if x == y:
        return [x] * (len(schedule) + 1)
    seq = [x]
    for k in range(len(schedule)):
        end = (k + 2) * u
        if end >= n:
            seq.append(y)
            continue
        walk = None
        for length in range(limit, 0, -1):
            a = end - length + 1
            try:
                walk = s_edge_walk(h, y[a - 1], x[end], length)
                break
            except NoWalk:
                continue
        if walk is None:
            raise NoWalk(f"no splice walk for block {k}")
        seq.append(y[:a] + walk[1:-1] + x[end:])
    return seq


def hamming_path(x, y, h: ColourGraph | None = None):
    """States ``z^j`` agreeing with ``y`` on sites ``1..j`` and with ``x`` after."""
    x, y = tuple(x), tuple(y)
    if len(x) != len(y):
        raise ValueError("x and y must have the same length")
    if h is not None and h.is_bipartite:
        cx, cy = state_class(h, x), state_class(h, y)
        if cx is None or cx != cy:
            raise ClassMismatch("x and y are not in the same extended parity class")
    return [y[:j] + x[j:] for j in range(len(x) + 1)]
