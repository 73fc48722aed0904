from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from oracles import block_matrix, colourings
from hcolpath.chains import (
    Block,
    blocks_anyorder,
    blocks_fixedorder,
    blocks_rnd,
    ergodicity_witness,
    hamming_path,
    heat_bath_update,
    in_extended_class,
    make_params,
    run_chain,
    run_scan,
    run_scan_batch,
    schedule_for,
    state_class,
    step_rnd,
    step_rnd_batch,
)
from hcolpath.errors import ClassMismatch, PathTooShort
from hcolpath.hgraph import builtin
from hcolpath.segment import enumerate_state_space, exact_uniform_sample, is_valid_colouring


def spans(schedule):
    return [(b.lo, b.hi) for b in schedule]


def test_params_canonical(k3, iset):
    p = make_params(iset, "fixedorder")
    assert (p.l1, p.s, p.beta, p.l2, p.gamma) == (8, 9, 5120, 92160, 1025)
    assert p.u == 46080 and p.w == 9225 and p.overrides == ()
    assert make_params(k3).l1 == 8
    assert make_params(builtin("widom_rowlinson", 4)).l1 == 83


def test_params_big_constants_exact():
    p = make_params(builtin("clique", 3))
    assert p.s == 13
    assert p.beta == 18 * 3**13  # ceil(ln(2*13*3^13 + 1)) = 18
    assert p.gamma == 2 * 3**13 + 1


def test_params_overrides(k3):
    p = make_params(k3, "anyorder", {"l1": 3})
    assert p.l1 == 3 and p.overrides == ("l1",)
    assert p.to_json()["overrides"] == ["l1"]
    with pytest.raises(ValueError):
        make_params(k3, "anyorder", {"l2": 3})
    with pytest.raises(ValueError):
        make_params(k3, "anyorder", {"u": 0})
    with pytest.raises(ValueError):
        make_params(k3, "gibbs")


def test_blocks_anyorder_examples():
    assert spans(blocks_anyorder(7, 3)) == [(1, 3), (4, 6), (5, 7)]
    assert spans(blocks_anyorder(6, 3)) == [(1, 3), (4, 6)]
    assert spans(blocks_anyorder(2, 3)) == [(1, 2)]


def test_blocks_fixedorder_examples():
    assert spans(blocks_fixedorder(12, 3)) == [(1, 6), (4, 9), (7, 12), (10, 12)]
    assert spans(blocks_fixedorder(13, 3)) == [(1, 6), (4, 9), (7, 12), (10, 13)]
    assert spans(blocks_fixedorder(6, 3)) == [(1, 6), (4, 6)]
    with pytest.raises(PathTooShort):
        blocks_fixedorder(5, 6)


def test_blocks_rnd_examples():
    sched = blocks_rnd(5, 3)
    assert spans(sched) == [(1, 3), (2, 4), (3, 5), (4, 5), (5, 5), (1, 2), (1, 1)]
    assert sched.multiplicity() == [3] * 5


@pytest.mark.parametrize("size", [1, 2, 3, 5, 8, 13])
def test_coverage_and_sizes(size):
    for n in range(1, 201):
        a = blocks_anyorder(n, size)
        assert set().union(*(range(b.lo, b.hi + 1) for b in a)) == set(range(1, n + 1))
        assert all(b.size == min(size, n) for b in a)
        r = blocks_rnd(n, size)
        assert len(r) == n + size - 1 and r.multiplicity() == [size] * n
        if n >= size:
            f = blocks_fixedorder(n, size)
            assert len(f) == n // size
            assert set().union(*(range(b.lo, b.hi + 1) for b in f)) == set(range(1, n + 1))
            assert all(b.size == 2 * size for b in f.blocks[:-1]) and f.blocks[-1].size >= size


def test_heat_bath_single_site(k3):
    rng = np.random.default_rng(1)
    counts = Counter(heat_bath_update(k3, (0, 1, 0), Block(2, 2), None, rng) for _ in range(20000))
    assert set(counts) == {(0, 1, 0), (0, 2, 0)}
    assert abs(counts[(0, 1, 0)] / 20000 - 0.5) < 0.015


def test_heat_bath_outside_unchanged(k3):
    rng = np.random.default_rng(2)
    x = exact_uniform_sample(k3, 12, None, rng)
    for lo, hi in [(1, 4), (5, 9), (10, 12)]:
        y = heat_bath_update(k3, x, Block(lo, hi), None, rng)
        assert y[: lo - 1] == x[: lo - 1] and y[hi:] == x[hi:]
        assert is_valid_colouring(k3, y)


def test_block_kernel_fixes_uniform(k3):
    states = colourings(k3, 6)
    mat = block_matrix(states, 2, 4)
    u = Fraction(1, len(states))
    for j in range(len(states)):
        assert sum(mat[i][j] * u for i in range(len(states))) == u
    for row in mat:
        assert sum(row) == 1


def test_scan_is_exact_when_single_block(k3):
    params = make_params(k3)
    rng = np.random.default_rng(0)
    sched = schedule_for(params, 5)
    counts = Counter(run_scan(k3, params, sched, (0, 1, 0, 1, 0), rng) for _ in range(24000))
    assert len(counts) == 48
    assert max(abs(c / 24000 - 1 / 48) for c in counts.values()) < 0.006


def test_fixedorder_rejects_other_orders(iset):
    params = make_params(iset, "fixedorder", {"u": 3})
    sched = schedule_for(params, 12)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        run_scan(iset, params, sched, (0,) * 12, rng, order=[1, 0, 2, 3])
    with pytest.raises(ValueError):
        run_scan(iset, params, sched, (0,) * 12, rng, order="random")


def test_anyorder_accepts_permutation(k3):
    params = make_params(k3, "anyorder", {"l1": 3})
    sched = schedule_for(params, 9)
    rng = np.random.default_rng(0)
    out = run_scan(k3, params, sched, (0, 1) * 4 + (0,), rng, order=[2, 0, 1], check=True)
    assert is_valid_colouring(k3, out)
    run_scan(k3, params, sched, out, rng, order="random", check=True)
    with pytest.raises(ValueError):
        run_scan(k3, params, sched, out, rng, order=[0, 0, 1])


def test_rnd_block_choice_uniform(iset):
    params = make_params(iset, "rnd", {"w": 3})
    sched = blocks_rnd(5, 3)
    rng = np.random.default_rng(8)
    touched = 0
    x = (0, 0, 0, 0, 0)
    trials = 100000
    picks = rng.integers(len(sched), size=trials)
    counts = np.bincount(picks, minlength=len(sched))
    chi2 = ((counts - trials / 7) ** 2 / (trials / 7)).sum()
    assert chi2 < 22.46  # 6 dof, p = 0.001
    touched = sum(counts[k] for k, b in enumerate(sched) if 1 in b)
    assert abs(touched / trials - 3 / 7) < 0.01
    y = step_rnd(iset, params, sched, x, rng)
    assert is_valid_colouring(iset, y)


def test_run_chain_reproducible(k3):
    params = make_params(k3)
    a, _ = run_chain(k3, params, 12, 20, np.random.default_rng(7))
    b, _ = run_chain(k3, params, 12, 20, np.random.default_rng(7))
    c, traj = run_chain(k3, params, 12, 20, np.random.default_rng(8), record_every=5)
    assert a == b
    assert [t for t, _ in traj] == [0, 5, 10, 15, 20]
    assert all(is_valid_colouring(k3, s) for _, s in traj)


def test_chain_closure_bipartite():
    h = builtin("path", 4)
    params = make_params(h, "anyorder", {"l1": 3}, cls="omega2")
    rng = np.random.default_rng(3)
    start = exact_uniform_sample(h, 10, "omega2", rng)
    final, traj = run_chain(h, params, 10, 30, rng, start=start, record_every=1)
    assert all(state_class(h, s) == "omega2" and is_valid_colouring(h, s) for _, s in traj)


def test_batch_matches_single_site_law(k3):
    params = make_params(k3, "anyorder", {"l1": 2})
    sched = schedule_for(params, 4)
    rng = np.random.default_rng(12)
    states = np.tile(np.array([0, 1, 0, 1], dtype=np.int16), (60000, 1))
    run_scan_batch(k3, params, sched, states, rng)
    rows, counts = np.unique(states, axis=0, return_counts=True)
    assert k3.matrix[rows[:, :-1], rows[:, 1:]].all()
    # exact law after one scan from (0,1,0,1), by enumeration
    states_all = colourings(k3, 4)
    idx = {s: i for i, s in enumerate(states_all)}
    p = [Fraction(0)] * len(states_all)
    p[idx[(0, 1, 0, 1)]] = Fraction(1)
    for lo, hi in [(1, 2), (3, 4)]:
        mat = block_matrix(states_all, lo, hi)
        p = [sum(p[i] * mat[i][j] for i in range(len(p))) for j in range(len(p))]
    emp = {tuple(int(c) for c in r): k / 60000 for r, k in zip(rows, counts)}
    tv = 0.5 * sum(abs(emp.get(s, 0) - float(p[idx[s]])) for s in states_all)
    assert tv < 0.02
    step_rnd_batch(k3, make_params(k3, "rnd", {"w": 2}), blocks_rnd(4, 2), states, rng)
    assert k3.matrix[states[:, :-1], states[:, 1:]].all()


def test_ergodicity_witness_valid(k3):
    params = make_params(k3, "fixedorder", {"u": 3})
    sched = blocks_fixedorder(12, 3)
    states = [tuple(r) for r in enumerate_state_space(k3, 12).tolist()]
    rng = np.random.default_rng(21)
    for _ in range(50):
        x = states[rng.integers(len(states))]
        y = states[rng.integers(len(states))]
        seq = ergodicity_witness(k3, params, x, y)
        assert seq[0] == x and seq[-1] == y and len(seq) == len(sched) + 1
        for k, (a, b) in enumerate(zip(seq, seq[1:])):
            blk = sched.blocks[k]
            assert a[: blk.lo - 1] == b[: blk.lo - 1] and a[blk.hi :] == b[blk.hi :]
            assert is_valid_colouring(k3, b)


def test_ergodicity_witness_constant_and_mismatch(k3):
    params = make_params(k3, "fixedorder", {"u": 3})
    x = (0, 1, 2) * 4
    assert ergodicity_witness(k3, params, x, x) == [x] * 5
    c2 = builtin("clique", 2)
    with pytest.raises(ClassMismatch):
        ergodicity_witness(c2, make_params(c2, "fixedorder", {"u": 2}), (0, 1, 0, 1), (1, 0, 1, 0))


def test_hamming_path_examples(k3):
    z = hamming_path((0, 1, 0, 1), (1, 0, 1, 0))
    assert z[2] == (1, 0, 0, 1)
    assert sum(a != b for a, b in zip(z[1], z[2])) == 1
    x = (0, 1, 2, 0)
    assert hamming_path(x, x) == [x] * 5


def test_hamming_path_classes():
    c2 = builtin("clique", 2)
    x, y = (0, 1, 0, 1), (0, 1, 0, 1)
    assert all(in_extended_class(c2, z, "omega1") for z in hamming_path(x, y, c2))
    with pytest.raises(ClassMismatch):
        hamming_path((0, 1, 0, 1), (1, 0, 1, 0), c2)


def test_hamming_path_random_pairs(k3):
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = tuple(int(c) for c in rng.integers(3, size=12))
        y = tuple(int(c) for c in rng.integers(3, size=12))
        z = hamming_path(x, y, k3)
        assert z[0] == x and z[-1] == y
        assert all(sum(a != b for a, b in zip(u, v)) <= 1 for u, v in zip(z, z[1:]))
