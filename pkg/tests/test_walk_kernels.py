import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floydwalk.graph_core import FreeProduct, HalfLine, Lattice, RegularTree, ball, complete_graph
from floydwalk.walk_kernels import (Kernel, kappa_step_distribution, n_step_matrix, sample_trajectory, step,
                                    step_length_distribution, step_stats, stream_rng, transition_matrix,
                                    validate_irreducibility)

TREE = RegularTree(2)

KERNELS = [Kernel(TREE), Kernel(TREE, "lazy_rw", hold=0.5), Kernel(TREE, "tree_drift", b=0.8),
           Kernel(Lattice(2)), Kernel(Lattice(3), "lazy_rw", hold=0.25), Kernel(HalfLine()),
           Kernel(FreeProduct((2, 3))), Kernel(TREE, "bounded_range_mixture", weights=[0.2, 0.5, 0.3]),
           Kernel(Lattice(2), "bounded_range_mixture", weights=[0.0, 0.6, 0.4])]


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: f"{type(k.g).__name__}-{k.rule}")
def test_rows_stochastic_and_bounded_range(k):
    for v in ball(k.g, 3).vertices[:60]:
        trans = k.transitions(v)
        assert abs(sum(p for _, p, _ in trans) - 1.0) <= 1e-12
        for w, p, d in trans:
            assert p > 0 and d <= k.M
            assert k.g.distance(v, w) == d


def test_step_examples():
    rng = stream_rng(0, 0)
    counts = {}
    for _ in range(30_000):
        w, _ = step(Kernel(TREE), TREE.base, rng)
        counts[w] = counts.get(w, 0) + 1
    assert set(counts) == {(1, 0), (1, 1), (1, 2)}
    for c in counts.values():
        assert abs(c / 30_000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 30_000)
    lazy = Kernel(TREE, "lazy_rw", hold=0.5)
    assert lazy.transitions((2, 1))[0] == ((2, 1), 0.5, 0)
    drift = Kernel(TREE, "tree_drift", b=0.8)
    trans = drift.transitions((2, 1))
    assert trans[0][1] == pytest.approx(0.2)
    assert sum(p for w, p, _ in trans[1:]) == pytest.approx(0.8)


def test_trajectory_basics():
    k = Kernel(TREE)
    t0 = sample_trajectory(k, TREE.base, 0, seed=1)
    assert t0.positions == [TREE.base]
    a = sample_trajectory(k, TREE.base, 500, seed=5, stream=2)
    b = sample_trajectory(k, TREE.base, 500, seed=5, stream=2)
    c = sample_trajectory(k, TREE.base, 500, seed=5, stream=3)
    assert a.positions == b.positions and a.positions != c.positions
    for z, lv in zip(a.positions, a.levels):
        assert TREE.level(z) == lv
    for x, y, d in zip(a.positions, a.positions[1:], a.step_lengths):
        assert TREE.distance(x, y) == d
        assert any(w == y for w, _, _ in k.transitions(x))


def test_half_line_two_steps_reflecting():
    # reflecting at 0: 0 -> 1 surely, then back to 0 with probability 1/2
    dist = kappa_step_distribution(Kernel(HalfLine()), 0, 2)
    assert dist == {0: 0.5, 2: 0.5}


def test_distances_from_start_stack_matches_oracle():
    tr = sample_trajectory(Kernel(TREE), (3, 4), 400, seed=9)
    fast = tr.distances_from_start(TREE)
    slow = [TREE.distance(tr.positions[0], z) for z in tr.positions]
    assert fast.tolist() == slow


def test_n_step_examples():
    k = Kernel(TREE)
    b = ball(TREE, 3)
    mats, flags = n_step_matrix(k, b, 3)
    e = b.index[TREE.base]
    assert mats[1][e, e] == pytest.approx(1 / 3)
    assert (mats[0] - transition_matrix(k, b)).nnz == 0
    assert mats[2][e, e] == 0.0
    assert flags == []
    assert n_step_matrix(k, ball(TREE, 1), 3)[1]


def test_chapman_kolmogorov_monotone_in_radius():
    k = Kernel(TREE)
    vals = []
    for R in (2, 3, 4, 6):
        b = ball(TREE, R)
        mats, _ = n_step_matrix(k, b, 6)
        vals.append(mats[5][b.index[TREE.base], b.index[TREE.base]])
    assert all(y >= x for x, y in zip(vals, vals[1:]))
    exact = kappa_step_distribution(k, TREE.base, 6)[TREE.base]
    assert vals[-1] == pytest.approx(exact, rel=1e-12)


def test_certificates_and_irreducibility():
    for k in KERNELS:
        ok, worst = validate_irreducibility(k, pairs=50)
        assert ok, (k.rule, worst)
    c = Kernel(TREE).certificates()
    assert (c.M, c.eps0, c.K) == (1, 1 / 3, 1)
    assert Kernel(TREE, "tree_drift").certificates().reversing_measure is None


@pytest.mark.parametrize("k", [Kernel(TREE), Kernel(Lattice(2), "lazy_rw"), Kernel(HalfLine()),
                               Kernel(TREE, "bounded_range_mixture", weights=[0.1, 0.6, 0.3])])
def test_reversibility_residual(k):
    m = k.certificates().reversing_measure
    for v in ball(k.g, 3).vertices:
        for w, p, _ in k.transitions(v):
            back = sum(pp for u, pp, _ in k.transitions(w) if u == v)
            assert abs(m(v) * p - m(w) * back) <= 1e-12


def test_step_length_examples():
    st_srw = step_stats(Kernel(TREE), trials=0)
    sigma = step_length_distribution(Kernel(TREE), TREE.base)
    assert sigma.tolist() == [0.0, 1.0]
    assert st_srw.phi.tolist() == [1.0, 1.0] and st_srw.m_bar == 1.0
    lazy = step_stats(Kernel(TREE, "lazy_rw", hold=0.5), trials=0)
    assert lazy.phi[1] == 0.5 and lazy.m_bar == 0.5
    mix = step_stats(Kernel(TREE, "bounded_range_mixture", weights=[0.2, 0.5, 0.3]), trials=0)
    assert mix.phi.tolist() == pytest.approx([1.0, 0.8, 0.3])
    assert mix.m_bar <= 2


def test_tree_speed_oracle():
    # drift of |Z_n| away from e is (q - 1)/(q + 1) = 1/3
    st_ = step_stats(Kernel(TREE), trials=10, N=10_000, seed=0)
    assert abs(st_.speed_mean - 1 / 3) <= max(3 * st_.speed_ci, 0.01)
    assert st_.speed_ci <= 0.02
    assert 0 < st_.speed_lower <= 1 / 3 <= st_.speed_upper <= 1


def test_trajectory_csv():
    tr = sample_trajectory(Kernel(TREE), TREE.base, 3, seed=0)
    buf = io.StringIO()
    tr.to_csv(TREE, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("#") and lines[1] == "k,vertex,level"
    assert len(lines) == 6


def test_invalid_kernels():
    with pytest.raises(ValueError):
        Kernel(Lattice(2), "tree_drift")
    with pytest.raises(ValueError):
        Kernel(TREE, "lazy_rw", hold=1.0)
    with pytest.raises(ValueError):
        Kernel(TREE, "bounded_range_mixture", weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        Kernel(TREE, "no_such_rule")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 63), stream=st.integers(0, 1000), hold=st.floats(0, 0.9))
def test_lazy_paths_respect_kernel(seed, stream, hold):
    k = Kernel(Lattice(2), "lazy_rw", hold=hold)
    tr = sample_trajectory(k, (0, 0), 50, seed, stream)
    for x, y in zip(tr.positions, tr.positions[1:]):
        assert any(w == y for w, _, _ in k.transitions(x))
    assert tr.levels.tolist() == [abs(a) + abs(b) for a, b in tr.positions]
