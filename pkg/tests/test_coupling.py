import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from oracles import coupled_profile, expected_hamming, fillings
from hcolpath.chains import make_params
from hcolpath.coupling import (
    coupled_scan_fixedorder,
    coupled_step_rnd,
    disagreement_profile,
    disagreement_profile_v1,
    disagreement_profile_vs,
    empirical_profile,
    expected_hamming_rnd,
    maximal_coupling,
    sample_coupled_segments,
    tv_distance,
    wilson_interval,
)
from hcolpath.errors import ConditionViolated, EmptySupport
from hcolpath.hgraph import builtin, has_all_two_paths
from hcolpath.segment import BoundarySpec, site_marginal

TWO_PATH = [g for g in (builtin("clique", 3), builtin("clique", 4), builtin("independent_set"),
                        builtin("widom_rowlinson", 2), builtin("widom_rowlinson", 3)) if has_all_two_paths(g)[0]]


def test_tv_examples():
    assert tv_distance({"a": 1}, {"a": 1}) == 0
    assert tv_distance({"a": 1}, {"b": 1}) == 1
    assert tv_distance({"a": 1}, {"a": 0.5, "b": 0.5}) == 0.5
    assert tv_distance([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        tv_distance([1.0], [0.5, 0.5])


def test_maximal_coupling_examples():
    same = maximal_coupling({"a": 0.3, "b": 0.7}, {"a": 0.3, "b": 0.7})
    assert same.disagreement() == pytest.approx(0.0)
    assert np.allclose(same.joint, np.diag([0.3, 0.7]))
    half = maximal_coupling({"a": 1}, {"a": 0.5, "b": 0.5})
    assert half.disagreement() == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=6), st.data())
def test_maximal_coupling_marginals(p, data):
    q = data.draw(st.lists(st.floats(0, 1), min_size=len(p), max_size=len(p)))
    if sum(p) == 0 or sum(q) == 0:
        return
    p = np.array(p) / sum(p)
    q = np.array(q) / sum(q)
    table = maximal_coupling(p, q)
    rows, cols = table.marginals()
    assert np.allclose(rows, p, atol=1e-12) and np.allclose(cols, q, atol=1e-12)
    assert (table.joint >= -1e-15).all()
    assert np.allclose(np.diag(table.joint), np.minimum(p, q))
    assert table.disagreement() == pytest.approx(tv_distance(p, q), abs=1e-12)
    # the independent coupling never does better
    assert table.disagreement() <= 1 - float(p @ q) + 1e-12


def test_profile_frozen_values(k3, iset):
    # exact rationals from the brute-force coupling in tests/oracles.py
    cases = [
        (k3, 6, 0, 1, 2, 1, ["21/43", "11/43", "5/43", "3/43", "1/43", "1/43"]),
        (iset, 6, 0, 1, 0, 3, ["8/21", "5/13", "5/91", "2/91", "5/273", "1/273"]),
        (k3, 7, 2, 0, 1, 3, ["568/765", "436/765", "11/85", "4/45", "56/765", "1/85", "1/85"]),
    ]
    for h, l, c1, c2, d, s, frozen in cases:
        got = disagreement_profile(h, l, c1, c2, d, s).probs
        assert got == pytest.approx([float(Fraction(f)) for f in frozen], abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([builtin("clique", 3), builtin("independent_set"), builtin("beach"), builtin("path", 3)]),
       st.data())
def test_profile_matches_brute_force(h, data):
    l = data.draw(st.integers(1, 5))
    s = data.draw(st.integers(1, 3))
    c1 = data.draw(st.integers(0, h.q - 1))
    c2 = data.draw(st.integers(0, h.q - 1))
    d = data.draw(st.sampled_from([None, *range(h.q)]))
    if not fillings(h, l, c1, d) or not fillings(h, l, c2, d):
        with pytest.raises(EmptySupport):
            disagreement_profile(h, l, c1, c2, d, s)
        return
    try:
        oracle = coupled_profile(h, l, c1, c2, d, s)
    except ZeroDivisionError:  # some intermediate colour has no completion
        with pytest.raises(EmptySupport):
            disagreement_profile(h, l, c1, c2, d, s)
        return
    got = disagreement_profile(h, l, c1, c2, d, s).probs
    assert got == pytest.approx([float(x) for x in oracle], abs=1e-12)


def test_equal_left_colours_give_zero(k3, iset):
    assert disagreement_profile_v1(k3, 6, 1, 1, 0).probs == (0.0,) * 6
    assert disagreement_profile_vs(iset, 20, 0, 0, None, 9).probs == (0.0,) * 20


def test_v1_requires_two_paths():
    with pytest.raises(ConditionViolated):
        disagreement_profile_v1(builtin("beach"), 4, 0, 1, None)
    with pytest.raises(ValueError):
        disagreement_profile_v1(builtin("clique", 3), 1, 0, 1, None)


@pytest.mark.parametrize("h", TWO_PATH, ids=lambda h: h.name)
def test_base_case_bound(h):
    bound = 1 - 1 / h.max_degree**2
    for c1, c2 in itertools.permutations(range(h.q), 2):
        for d in [None, *range(h.q)]:
            prof = disagreement_profile_v1(h, 2, c1, c2, d).probs
            assert max(prof) <= bound + 1e-12


@pytest.mark.parametrize("h", TWO_PATH, ids=lambda h: h.name)
def test_greedy_profile_bounds(h):
    r = 1 - 1 / h.max_degree**2
    for l in range(2, 13):
        for c1, c2 in itertools.permutations(range(h.q), 2):
            for d in [None, *range(h.q)]:
                prof = disagreement_profile_v1(h, l, c1, c2, d).probs
                for j, p in enumerate(prof[:-1], start=1):
                    assert p <= r**j + 1e-12
                assert prof[-1] <= r ** (l - 1) + 1e-12


def test_stride_profile_bound(iset):
    s = 9
    r = 1 - 1 / 2**s
    for c1, c2 in [(0, 1), (1, 0)]:
        for d in (None, 0, 1):
            prof = disagreement_profile_vs(iset, 18, c1, c2, d, s).probs
            assert all(0 <= p <= r ** (j // s) + 1e-12 for j, p in enumerate(prof, start=1))


def test_stride_point_marginal_bound(iset):
    s = 9
    for length in range(9, 13):
        for d in (None, 0, 1):
            a = site_marginal(iset, length, BoundarySpec(0, d), s, exact=True).probs
            b = site_marginal(iset, length, BoundarySpec(1, d), s, exact=True).probs
            tv = sum(abs(x - y) for x, y in zip(a, b)) / 2
            assert tv <= 1 - Fraction(1, 2**s)
            # the stride point is coupled maximally, so its disagreement is that TV
            assert disagreement_profile_vs(iset, length, 0, 1, d, s).probs[s - 1] == pytest.approx(float(tv))


def test_empirical_matches_exact(k3):
    rng = np.random.default_rng(17)
    exact = disagreement_profile_v1(k3, 8, 0, 1, 2).probs
    emp = empirical_profile(k3, 8, 0, 1, 2, 1, 100000, rng)
    assert emp.provenance == "empirical(100000)" and emp.samples == 100000
    assert max(abs(a - b) for a, b in zip(emp.probs, exact)) < 0.01
    assert all(lo <= p <= hi for p, (lo, hi) in zip(emp.probs, emp.ci))


def test_sampled_coupling_preserves_marginals(iset):
    rng = np.random.default_rng(23)
    n = 100000
    x, y = sample_coupled_segments(iset, 5, np.zeros(n, int), np.ones(n, int), np.zeros(n, int), 3, rng)
    for left, sample in ((0, x), (1, y)):
        support = fillings(iset, 5, left, 0)
        idx = {w: i for i, w in enumerate(support)}
        counts = np.zeros(len(support))
        rows, k = np.unique(sample, axis=0, return_counts=True)
        for r, c in zip(rows, k):
            counts[idx[tuple(int(v) for v in r)]] += c
        assert chisquare(counts).pvalue >= 0.001


def test_sampler_identity_when_left_equal(k3):
    rng = np.random.default_rng(1)
    left = np.array([0, 1, 2, 0])
    x, y = sample_coupled_segments(k3, 20, left, left, np.array([-1, 0, 1, 2]), 4, rng)
    assert (x == y).all()


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.07
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_expected_hamming_frozen(iset):
    # exact value 41/50 from the brute-force coupling oracle
    x = (0, 1, 0, 0, 1, 0, 0, 0)
    y = (0, 1, 0, 1, 1, 0, 0, 0)
    params = make_params(iset, "rnd", {"w": 3, "s": 2})
    assert expected_hamming(iset, x, y, 3, 2) == Fraction(41, 50)
    rep = expected_hamming_rnd(iset, params, x, y)
    assert rep.value == pytest.approx(41 / 50, abs=1e-14)
    assert rep.containing == 3 and len(rep.adjacent) == 2 and not rep.guaranteed


def test_expected_hamming_single_site(iset):
    rep = expected_hamming_rnd(iset, make_params(iset, "rnd", {"w": 4}), (0,), (1,))
    assert rep.value == 0.0


def test_expected_hamming_rejects_bad_pairs(iset):
    with pytest.raises(ValueError):
        expected_hamming_rnd(iset, make_params(iset, "rnd"), (0, 0), (0, 0))


def test_expected_hamming_matches_simulation(iset):
    rng = np.random.default_rng(31)
    params = make_params(iset, "rnd", {"w": 6})
    x = [0] * 30
    x[9] = 1
    x[20] = 1
    y = list(x)
    y[14] = 1
    exact = expected_hamming_rnd(iset, params, x, y).value
    trials = 100000
    xs = np.tile(np.array(x, dtype=np.int16), (trials, 1))
    ys = np.tile(np.array(y, dtype=np.int16), (trials, 1))
    xs, ys = coupled_step_rnd(iset, params, xs, ys, rng)
    assert abs((xs != ys).sum(axis=1).mean() - exact) < 0.005


def test_coupled_scan_equal_pair(iset):
    params = make_params(iset, "fixedorder", {"u": 4})
    x = (0, 1, 0, 0) * 8
    a, b = coupled_scan_fixedorder(iset, params, x, x, np.random.default_rng(0))
    assert a == b


def test_coupled_scan_contracts(iset):
    params = make_params(iset, "fixedorder", {"u": 4})
    rng = np.random.default_rng(2)
    base = np.zeros(32, dtype=np.int16)
    worst = 0.0
    for i in range(32):
        x = base.copy()
        y = base.copy()
        y[i] = 1
        xs = np.tile(x, (2000, 1))
        ys = np.tile(y, (2000, 1))
        xs, ys = coupled_scan_fixedorder(iset, params, xs, ys, rng)
        d = (xs != ys).sum(axis=1)
        worst = max(worst, d.mean() + 2.576 * d.std() / math.sqrt(d.size))
    assert worst < 1


def test_coupled_scan_rejects_double_disagreement(iset):
    params = make_params(iset, "fixedorder", {"u": 2})
    # blocks 1-4, 3-6, ...: the first spreads the disagreement at 5 leftwards,
    # after which block 3-6 can see disagreements at both 2 and 7
    xs = np.zeros((1000, 8), dtype=np.int16)
    ys = np.tile(np.array([0, 0, 0, 0, 1, 0, 1, 0], dtype=np.int16), (1000, 1))
    with pytest.raises(AssertionError):
        coupled_scan_fixedorder(iset, params, xs, ys, np.random.default_rng(0))
