"""Verification suites behind ``hcolpath verify``.

Each suite returns a :class:`SuiteResult` whose rows are individual
checks. ``status`` is 0 when every check passes, 1 when one fails and 2
when the instance is too large to verify exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analysis import (
    ExactEvolver,
    check_identities,
    dobrushin_alpha,
    predicted_mixing_bound,
    start_panel,
    stationarity_residual,
    two_path_obstruction,
)
from .chains import make_params
from .coupling import disagreement_profile_v1, disagreement_profile_vs, expected_hamming_rnd
from .errors import CapExceeded, EmptySupport
from .hgraph import ColourGraph, builtin, has_all_two_paths
from .segment import BoundarySpec, exact_uniform_sample, segment_counts, site_marginal

SUITES = (
    "dobrushin",
    "obstruction",
    "greedy",
    "linecoup",
    "smallcoup",
    "rnd-contraction",
    "identities",
    "stationarity",
    "thm1-tv",
)

TOL = 1e-12


@dataclass(frozen=True)
class Row:
    check: str
    value: object
    bound: object
    ok: bool | None  # None: informational, not counted


@dataclass
class SuiteResult:
    name: str
    rows: list[Row] = field(default_factory=list)
    infeasible: str | None = None
    info: dict = field(default_factory=dict)

    @property
    def status(self) -> int:
        if self.infeasible:
            return 2
        return 0 if all(r.ok is not False for r in self.rows) else 1

    def table(self) -> str:
        lines = [f"suite {self.name}"]
        width = max([len(r.check) for r in self.rows] + [5])
        for r in self.rows:
            mark = {True: "PASS", False: "FAIL", None: "info"}[r.ok]
            lines.append(f"  {r.check:<{width}}  {_fmt(r.value):>22}  {_fmt(r.bound):>22}  {mark}")
        if self.infeasible:
            lines.append(f"  infeasible: {self.infeasible}")
        for key, val in self.info.items():
            lines.append(f"  {key}: {_fmt(val)}")
        lines.append("result: " + {0: "PASS", 1: "FAIL", 2: "INFEASIBLE"}[self.status])
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "status": self.status,
            "rows": [{"check": r.check, "value": _jsonable(r.value), "bound": _jsonable(r.bound), "ok": r.ok}
                     for r in self.rows],
            "infeasible": self.infeasible,
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, Fraction):
        return f"{float(v):.10g}"
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def builtin_panel() -> list[ColourGraph]:
    return [
        builtin("clique", 2),
        builtin("clique", 3),
        builtin("clique", 4),
        builtin("independent_set"),
        builtin("widom_rowlinson", 3),
        builtin("widom_rowlinson", 4),
        builtin("beach"),
        builtin("path", 4),
    ]


def _triples(h):
    """Ordered pairs of distinct left colours with every right boundary (None = free)."""
    for c1, c2 in itertools.permutations(range(h.q), 2):
        for d in [None, *range(h.q)]:
            yield c1, c2, d


def _feasible(h, l, c, d):
    return segment_counts(h, l, BoundarySpec(c, d)).total > 0


def suite_dobrushin(graphs) -> SuiteResult:
    res = SuiteResult("dobrushin")
    for h in graphs:
        ok, _ = has_all_two_paths(h)
        if not ok:
            res.rows.append(Row(f"{h.name}: two-path condition fails", None, None, None))
            continue
        rep = dobrushin_alpha(h)
        res.rows.append(Row(f"{h.name}: alpha (l1={rep.l1})", rep.alpha_simple, rep.threshold, rep.passed))
        res.rows.append(Row(f"{h.name}: maximiser at d=1", rep.attained_at, 1, rep.attained_at == 1))
    return res


def suite_obstruction(graphs) -> SuiteResult:
    res = SuiteResult("obstruction")
    for h in graphs:
        rep = two_path_obstruction(h)
        two_path, _ = has_all_two_paths(h)
        ok = rep.found != two_path and (not rep.found or rep.disjoint)
        res.rows.append(Row(f"{h.name}: obstruction", rep.pair if rep.found else "none", "", ok))
    return res


def suite_greedy(h, extra: int = 3) -> SuiteResult:
    """TV of the two laws at ``v_s`` is at most ``1 - q^-s``, exactly."""
    res = SuiteResult("greedy")
    s = 4 * h.q + 1
    bound = 1 - Fraction(1, h.q**s)
    for length in range(s, s + extra + 1):
        worst = Fraction(0)
        for c1, c2, d in _triples(h):
            if c1 > c2 or not (_feasible(h, length, c1, d) and _feasible(h, length, c2, d)):
                continue
            a = site_marginal(h, length, BoundarySpec(c1, d), s, exact=True).probs
            b = site_marginal(h, length, BoundarySpec(c2, d), s, exact=True).probs
            worst = max(worst, sum(abs(x - y) for x, y in zip(a, b)) / 2)
        res.rows.append(Row(f"{h.name}: l'={length} max TV at v_{s}", worst, bound, worst <= bound))
    return res


def suite_linecoup(graphs, lengths=range(2, 13)) -> SuiteResult:
    """Greedy profile: ``p_j <= r^j`` for ``j < l`` and ``p_l <= r^(l-1)``, ``r = 1 - 1/Delta^2``."""
    res = SuiteResult("linecoup")
    for h in graphs:
        ok, _ = has_all_two_paths(h)
        if not ok:
            res.rows.append(Row(f"{h.name}: two-path condition fails", None, None, None))
            continue
        r = 1.0 - 1.0 / h.max_degree**2
        for l in lengths:
            worst = -np.inf
            for c1, c2, d in _triples(h):
                try:
                    prof = disagreement_profile_v1(h, l, c1, c2, d).probs
                except EmptySupport:
                    continue
                bounds = [r**j for j in range(1, l)] + [r ** (l - 1)]
                worst = max(worst, max(p - b for p, b in zip(prof, bounds)))
            res.rows.append(Row(f"{h.name}: l={l} max(p_j - bound_j)", float(worst), 0.0, worst <= TOL))
    return res


def suite_smallcoup(h, lengths=(18,), s: int | None = None) -> SuiteResult:
    """Stride profile: ``p_j <= (1 - q^-s)^floor(j/s)``."""
    res = SuiteResult("smallcoup")
    s = s or 4 * h.q + 1
    r = 1.0 - 1.0 / h.q**s
    for l in lengths:
        worst = -np.inf
        for c1, c2, d in _triples(h):
            try:
                prof = disagreement_profile_vs(h, l, c1, c2, d, s).probs
            except EmptySupport:
                continue
            worst = max(worst, max(p - r ** (j // s) for j, p in enumerate(prof, start=1)))
        res.rows.append(Row(f"{h.name}: l={l} s={s} max(p_j - bound_j)", float(worst), 0.0, worst <= TOL))
    return res


def adjacent_pair_panel(h, n: int, count: int, rng, w: int):
    """Pairs differing at one site, spread over the path, with varied far-boundary colours."""
    sites = sorted({1, n, *np.linspace(1, n, count).astype(int).tolist()})
    extra = count - len(sites)
    while extra > 0:
        sites.append(int(rng.integers(1, n + 1)))
        extra -= 1
    pairs = []
    for i in sites[:count]:
        x = list(exact_uniform_sample(h, n, None, rng))
        for far in (i - w - 1, i + w + 1):
            if 1 <= far <= n:
                x[far - 1] = int(rng.integers(h.q))
        c2 = (x[i - 1] + 1 + int(rng.integers(h.q - 1))) % h.q
        y = list(x)
        y[i - 1] = c2
        pairs.append((tuple(x), tuple(y)))
    return pairs


def suite_rnd_contraction(h, n: int, rng, count: int = 20, overrides=None) -> SuiteResult:
    params = make_params(h, "rnd", overrides, cls=None)
    res = SuiteResult("rnd-contraction")
    for x, y in adjacent_pair_panel(h, n, count, rng, params.w):
        rep = expected_hamming_rnd(h, params, x, y)
        res.rows.append(Row(f"n={n} i={rep.site}", rep.value, rep.threshold, rep.passed))
    res.info["guaranteed"] = not params.overrides
    return res


def suite_identities() -> SuiteResult:
    rep = check_identities()
    res = SuiteResult("identities")
    res.rows.append(Row(f"sum_rank ({rep.sum_rank_checked} cases) violations", len(rep.sum_rank_violations), 0,
                        not rep.sum_rank_violations))
    res.rows.append(Row(f"floor_sum ({rep.floor_sum_checked} cases) violations", len(rep.floor_sum_violations), 0,
                        not rep.floor_sum_violations))
    res.info["floor_sum min slack"] = rep.floor_sum_min_slack
    return res


def suite_stationarity(graphs, n: int = 8, overrides=None) -> SuiteResult:
    ov = {"l1": 3, "u": 2, "w": 3} if overrides is None else overrides
    res = SuiteResult("stationarity")
    for h in graphs:
        for kind in ("anyorder", "fixedorder", "rnd"):
            try:
                resid = stationarity_residual(h, make_params(h, kind, ov), n)
            except CapExceeded as exc:
                res.infeasible = str(exc)
                return res
            res.rows.append(Row(f"{h.name}: {kind} n={n} residual", resid, TOL, resid <= TOL))
    return res


def suite_thm1_tv(h, n: int, eps: float, rng, overrides=None, cap: int = 20000, panel: int = 10) -> SuiteResult:
    res = SuiteResult("thm1-tv")
    params = make_params(h, "anyorder", overrides)
    bound = predicted_mixing_bound("anyorder", h, n, eps, params)
    try:
        ev = ExactEvolver(h, params, n, cap)
    except CapExceeded as exc:
        res.infeasible = str(exc)
        return res
    starts = start_panel(h, n, params.cls, rng, panel)
    p = np.stack([ev.point_mass(x) for x in starts])
    hit = [None] * len(starts)
    for t in range(1, bound.value + 1):
        p = ev.step(p)
        tv = ev.tv(p)
        for k, v in enumerate(tv):
            if hit[k] is None and v <= eps:
                hit[k] = t
    tv = ev.tv(p)
    for x, v in zip(starts, tv):
        res.rows.append(Row(f"start {''.join(map(str, x))}", float(v), eps, bool(v <= eps)))
    res.info["t*"] = bound.value
    res.info["max tv at t*"] = float(tv.max())
    if all(t is not None for t in hit):
        res.info["observed mixing time (panel max)"] = max(hit)
    res.info["guaranteed"] = bound.guaranteed
    return res
