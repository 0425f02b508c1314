import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floydwalk.dirichlet_lab import (EventSpec, check_event_Av, default_partition,
                                     dirichlet_convergence_scan, event_probability_scan,
                                     floyd_cluster_partition, harmonic_measure, region_cells,
                                     sector_partition, skeleton_bound, skeleton_violations,
                                     tree_partition, tree_ray, wilson_interval)
from floydwalk.errors import FloydWalkError
from floydwalk.floyd_metric import FloydFunction
from floydwalk.graph_core import FreeProduct, Lattice, RegularTree
from floydwalk.walk_kernels import Kernel, Trajectory, sample_trajectory

TREE = RegularTree(2)
SRW = Kernel(TREE)
SPEC = EventSpec(alpha=0.5, eps=1 / 12, horizon=1000, m_bar=1.0, m_lower=1 / 3)


def _path(g, positions):
    lv = np.array([g.level(p) for p in positions], dtype=np.int64)
    st_ = np.array([g.distance(a, b) for a, b in zip(positions, positions[1:])], dtype=np.int64)
    return Trajectory(0, 0, positions[0], list(positions), lv, st_)


def _brute(traj, spec, v, g):
    lv = g.level(v)
    ok = {"c2": True, "c3": True, "c4": True, "c5": True}
    for n in range(spec.horizon + 1):
        z = traj.positions[n]
        if n >= spec.alpha * lv:
            ok["c2"] &= g.distance(v, z) <= (spec.m_bar + spec.eps) * n
            ok["c4"] &= g.level(z) >= (spec.m_lower - spec.eps) * n
        if n < spec.horizon and n > spec.alpha * lv:
            ok["c3"] &= g.distance(z, traj.positions[n + 1]) <= spec.eps * n
        if not (lv == 0 and n == 0):
            ok["c5"] &= g.level(z) > spec.eps * lv
    return ok


def test_event_spec_validation():
    with pytest.raises(ValueError):
        EventSpec(0.0, 0.1, 10, 1.0, 0.3)
    with pytest.raises(ValueError):
        EventSpec(0.5, 0.1, 0, 1.0, 0.3)


def test_constant_path_at_base():
    e = TREE.base
    tr = _path(TREE, [e] * 11)
    spec = EventSpec(0.5, 0.1, 10, 1.0, 0.3)
    ev = check_event_Av(tr, spec, e, TREE)
    # condition 5 read for n >= 1 at v = e: |Z_n| = 0 is not > 0
    assert not ev.c5 and not ev.all
    out = _path(TREE, [e] + [(n, 0) for n in range(1, 11)])
    assert check_event_Av(out, spec, e, TREE).c5


def test_event_errors():
    tr = sample_trajectory(SRW, (8, 0), 10, 0)
    with pytest.raises(ValueError):
        check_event_Av(tr, EventSpec(0.5, 0.1, 10, 1.0, 0.3), (8, 1), TREE)
    with pytest.raises(ValueError):
        check_event_Av(tr, EventSpec(2.0, 0.1, 10, 1.0, 0.3), (8, 0), TREE)
    with pytest.raises(ValueError):
        event_probability_scan(SRW, SPEC, [(2, 0)], trials=0)
    with pytest.raises(ValueError):
        event_probability_scan(SRW, SPEC, [(4, 0), (2, 0)], trials=1)


def test_tiny_eps_breaks_condition_3():
    tr = sample_trajectory(SRW, (8, 0), 1000, 1)
    ev = check_event_Av(tr, EventSpec(0.5, 1e-6, 1000, 1.0, 1 / 3), (8, 0), TREE)
    assert not ev.c3


def test_depth8_conditions():
    # with eps = m_lower/4 a unit step exceeds eps*n just after alpha|v| = 4, so (3) cannot hold;
    # the other conditions pass at high rate
    res = event_probability_scan(SRW, SPEC, [(8, 0)], trials=300, seed=5)["estimates"][0]
    assert res.per_condition["c3"] == 0.0 and res.p_hat == 0.0
    for c in ("c2", "c4", "c5"):
        assert res.per_condition[c] >= 0.8
    loose = EventSpec(0.5, 0.25, 1000, 1.0, 1 / 3)
    assert event_probability_scan(SRW, loose, [(8, 0)], trials=300, seed=5)["estimates"][0].p_hat >= 0.8


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 12))
def test_event_conditions_match_brute_force(seed, depth):
    v = (depth, 0)
    spec = EventSpec(0.5, 0.2, 150, 1.0, 1 / 3)
    tr = sample_trajectory(SRW, v, 150, seed)
    ev = check_event_Av(tr, spec, v, TREE)
    assert {"c2": ev.c2, "c3": ev.c3, "c4": ev.c4, "c5": ev.c5} == _brute(tr, spec, v, TREE)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 20), st.floats(0.01, 0.5))
def test_eps_monotone_conditions_2_3(seed, depth, eps):
    v = (depth, 0)
    tr = sample_trajectory(SRW, v, 200, seed)
    a = check_event_Av(tr, EventSpec(0.5, eps, 200, 1.0, 1 / 3), v, TREE)
    b = check_event_Av(tr, EventSpec(0.5, 2 * eps, 200, 1.0, 1 / 3), v, TREE)
    assert (not a.c2 or b.c2) and (not a.c3 or b.c3)


def test_wilson_interval():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.236590, abs=1e-6) and hi == pytest.approx(0.763410, abs=1e-6)
    assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_skeleton_holds_on_passing_trajectories():
    spec = EventSpec(0.5, 0.25, 400, 1.0, 1 / 3)
    v = (12, 0)           # threshold (1 + 0.25)/0.25 = 5
    bad = passed = 0
    for t in range(100):
        tr = sample_trajectory(SRW, v, 400, 11, stream=t)
        if check_event_Av(tr, spec, v, TREE).all:
            passed += 1
            bad += skeleton_violations(tr, spec, TREE)
    assert passed > 50 and bad == 0


def test_skeleton_bound_geometric_closed_form():
    # k = 6, c = 1/3 - 1/8 = 5/24, floor(ck) = 1: tau(2) + (sum_{i>=1} tau(i)) / c = 5 + 30 * 24/5
    sk = skeleton_bound(FloydFunction.geometric(0.5), SPEC, 12)
    assert sk["k"] == 6 and sk["c"] == pytest.approx(5 / 24)
    assert sk["bound"] == pytest.approx(149.0, rel=1e-12)
    # floor(ck) = 0 brings tau(0) = 10 T(1) = 10 into the tail; tau(1) = 10 as well
    sk = skeleton_bound(FloydFunction.geometric(0.5), SPEC, 6)
    assert sk["bound"] == pytest.approx(10 + (30 + 10) * 24 / 5, rel=1e-12)


def test_harmonic_symmetry_at_root():
    part = tree_partition(TREE, 12, 1)
    hm = harmonic_measure(SRW, TREE.base, part, paths=3000, seed=1)
    assert hm.unhit == 0
    for w, se in zip(hm.weights, hm.stderr):
        assert abs(w - 1 / 3) <= 3 * max(se, 1e-3)
    assert hm.counts.sum() + hm.unhit == hm.paths


def test_harmonic_gamblers_ruin():
    part = tree_partition(TREE, 14, 1)
    hm = harmonic_measure(SRW, (4, 5), part, paths=2000, seed=2)
    cell = part.cell_of((4, 5))
    assert hm.weights[cell] >= 15 / 16 - 3 * hm.stderr[cell]


def test_harmonic_start_on_exit_sphere():
    part = tree_partition(TREE, 6, 2)
    hm = harmonic_measure(SRW, (6, 17), part, paths=50, seed=0)
    assert hm.weights[part.cell_of((6, 17))] == 1.0 and hm.unhit == 0
    with pytest.raises(ValueError):
        harmonic_measure(SRW, (7, 0), part, paths=5)


def test_harmonic_horizon_flag():
    hm = harmonic_measure(SRW, TREE.base, tree_partition(TREE, 30, 1), paths=100, horizon=20, seed=0)
    assert hm.unhit_mass == 1.0 and hm.flags


def test_harmonic_bookkeeping_lattice_and_free_product():
    lat = Lattice(2)
    hm = harmonic_measure(Kernel(lat), lat.base, sector_partition(lat, 8), paths=300, horizon=2000, seed=3)
    assert hm.counts.sum() + hm.unhit == 300 and len(hm.weights) == 8
    fp = FreeProduct([2, 3])
    f = FloydFunction.geometric(0.5)
    part = floyd_cluster_partition(fp, f, 5, 0.5)
    hm = harmonic_measure(Kernel(fp), fp.base, part, paths=200, seed=4)
    assert hm.counts.sum() + hm.unhit == 200
    sphere_cover = sum(len(m) for m in part.members)
    assert sphere_cover == len(set(u for m in part.members for u in m))
    assert all(d < 0.25 + 1e-12 for d in part.diameters)


def test_tree_region_selection():
    f = FloydFunction.geometric(0.5)
    part = tree_partition(TREE, 10, 3, f)
    ref = (10, 0)
    assert region_cells(part, f, ref, 1e-9) == [0]
    assert region_cells(part, f, ref, 100.0) == part.labels


def test_scan_whole_space_and_trend():
    f = FloydFunction.geometric(0.5)
    part = default_partition(TREE, 16, f, cell_depth=4)
    ray = tree_ray(TREE, [2, 4, 8])
    scan = dirichlet_convergence_scan(SRW, f, ray, [0.5 * f(0), 100.0], part, paths=600, seed=1, spec=SPEC)
    whole = [r for r in scan["rows"] if r["r"] == 100.0]
    assert all(r["weight"] == 1.0 for r in whole)
    w = [r["weight"] for r in scan["rows"] if r["r"] == 0.5 * f(0)]
    assert w[-1] > w[0] and all(scan["non_decreasing"].values())
    assert set(scan["skeleton"]) == {2, 4, 8}
    with pytest.raises(FloydWalkError):
        dirichlet_convergence_scan(SRW, FloydFunction.polynomial(1.5), ray, [0.5], part, paths=5)


def test_from_stats_requires_speed():
    class S:
        m_bar, speed_lower = 1.0, 0.0
    with pytest.raises(FloydWalkError):
        EventSpec.from_stats(S())
    S.speed_lower = 0.3
    s = EventSpec.from_stats(S())
    assert s.alpha == 0.5 and s.eps == pytest.approx(0.075)
