"""Events A_v(alpha, eps), first-exit harmonic measure and the mu_v -> delta_xi scan.

Harmonic measure on the Floyd boundary is approximated by the distribution
of the cell through which the walk first reaches the sphere ``S_{R_exit}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FloydWalkError
from .floyd_metric import FloydFunction, FloydMetric, tail_sums, tau, tau_partial_sums, tau_series_total
from .graph_core import GraphOracle, Lattice, RegularTree, ball, geodesic
from .walk_kernels import Kernel, StepStats, sample_trajectory, stream_rng


# ---- events ------------------------------------------------------------------
@dataclass(frozen=True)
class EventSpec:
    alpha: float
    eps: float
    horizon: int
    m_bar: float
    m_lower: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.eps > 0 and self.horizon >= 1):
            raise ValueError("alpha, eps must be > 0 and horizon >= 1")

    @classmethod
    def from_stats(cls, stats: StepStats, horizon: int = 1000, alpha=None, eps=None) -> "EventSpec":
        """Defaults ``alpha = 1/(2 m_bar)`` and ``eps = m_lower/4``."""
        m_bar, m_lower = stats.m_bar, stats.speed_lower
        if not m_lower > 0:
            raise FloydWalkError("no positive linear speed observed; events need m_lower > 0",
                                 code="dirichlet_lab.no_speed")
        return cls(1.0 / (2.0 * m_bar) if alpha is None else alpha,
                   m_lower / 4.0 if eps is None else eps, horizon, m_bar, m_lower)

    def threshold(self) -> float:
        """``|v|`` beyond which the skeleton inequalities are asserted."""
        return (self.m_bar + self.eps) / self.eps

    def describe(self) -> dict:
        return {"alpha": self.alpha, "eps": self.eps, "horizon": self.horizon,
                "m_bar": self.m_bar, "m_lower": self.m_lower, "skeleton_threshold": self.threshold()}


@dataclass
class EventCheck:
    c2: bool
    c3: bool
    c4: bool
    c5: bool

    @property
    def all(self) -> bool:
        return self.c2 and self.c3 and self.c4 and self.c5


def check_event_Av(traj, spec: EventSpec, v, g: GraphOracle, dists=None) -> EventCheck:
    """Conditions 2-5 over ``n <= horizon``; condition 1 holds by construction.

    At ``v = e`` condition 5 is evaluated for ``n >= 1`` only.
    """
    if traj.positions[0] != v:
        raise ValueError("trajectory must start at v")
    H = spec.horizon
    if traj.N < H:
        raise ValueError("trajectory shorter than the event horizon")
    lv = g.level(v)
    if H < spec.alpha * lv:
        raise ValueError(f"horizon {H} < alpha |v| = {spec.alpha * lv}")
    n = np.arange(H + 1)
    d0 = traj.distances_from_start(g)[: H + 1] if dists is None else dists[: H + 1]
    lev = traj.levels[: H + 1]
    steps = traj.step_lengths[:H]
    late = n >= spec.alpha * lv
    c2 = bool(np.all(d0[late] <= (spec.m_bar + spec.eps) * n[late]))
    strict = n[:-1] > spec.alpha * lv
    c3 = bool(np.all(steps[strict] <= spec.eps * n[:-1][strict]))
    c4 = bool(np.all(lev[late] >= (spec.m_lower - spec.eps) * n[late]))
    first = 1 if lv == 0 else 0
    c5 = bool(np.all(lev[first:] > spec.eps * lv))
    return EventCheck(c2, c3, c4, c5)


def skeleton_violations(traj, spec: EventSpec, g: GraphOracle, dists=None) -> int:
    """Count failures of ``2 (Z_0 ^ Z_k) >= |v|/3`` and ``2 (Z_n ^ Z_{n+1}) >= (2 m_lower - 3 eps) n``."""
    lv = int(traj.levels[0])
    d0 = traj.distances_from_start(g) if dists is None else dists
    k = math.ceil(spec.alpha * lv)
    bad = 0
    if k <= spec.horizon and lv + traj.levels[k] - d0[k] < lv / 3.0:
        bad += 1
    H = spec.horizon
    n = np.arange(H)
    late = n >= spec.alpha * lv
    g2 = traj.gromov2()[:H]
    bad += int(np.sum(g2[late] < (2 * spec.m_lower - 3 * spec.eps) * n[late]))
    return bad


def wilson_interval(k: int, n: int, z: float = 1.96):
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class EventEstimate:
    level: int
    trials: int
    passed: int
    p_hat: float
    ci: tuple
    per_condition: dict
    skeleton_checked: bool
    skeleton_violations: int


def event_probability_scan(kernel: Kernel, spec: EventSpec, v_list, trials: int = 2000,
                           seed: int = 0) -> dict:
    g = kernel.g
    if trials < 1:
        raise ValueError("trials must be >= 1")
    levels = [g.level(v) for v in v_list]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("v_list must have increasing |v|")
    out = []
    for i, v in enumerate(v_list):
        passed, viol = 0, 0
        cond = {"c2": 0, "c3": 0, "c4": 0, "c5": 0}
        check_sk = levels[i] > spec.threshold()
        for t in range(trials):
            tr = sample_trajectory(kernel, v, spec.horizon, seed, stream=1_000_000 * (i + 1) + t)
            d0 = tr.distances_from_start(g)
            ev = check_event_Av(tr, spec, v, g, d0)
            for name in cond:
                cond[name] += getattr(ev, name)
            if ev.all:
                passed += 1
                if check_sk:
                    viol += skeleton_violations(tr, spec, g, d0)
        out.append(EventEstimate(levels[i], trials, passed, passed / trials,
                                 wilson_interval(passed, trials),
                                 {k: c / trials for k, c in cond.items()}, check_sk, viol))
    p = [e.p_hat for e in out]
    steps = list(zip(p, p[1:]))
    return {"estimates": out,
            "non_decreasing": all(b >= a for a, b in steps),
            "trend_up_steps": sum(b > a for a, b in steps),
            "spec": spec.describe()}


# ---- boundary cells ----------------------------------------------------------
@dataclass
class BoundaryCellPartition:
    """Disjoint cells covering ``S_{R_exit}``; ``cell_of`` works on any vertex at level >= R_exit."""
    R_exit: int
    kind: str
    labels: list
    members: list            # vertices of S_{R_exit} per cell (None when implicit)
    diameters: list          # d_f diameter of each cell (None if not computed)
    cell_depth: int = None
    _lookup: dict = field(default=None, repr=False)
    _g: GraphOracle = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.labels)

    def cell_of(self, v) -> int:
        g = self._g
        if self.kind == "tree":
            return g.ancestor(v, self.cell_depth)[1]
        if self.kind == "sector":
            return _sector(v, self.n_cells)
        u = v
        if g.level(u) > self.R_exit:
            u = geodesic(g, g.base, v, g.level(v) + 1)[self.R_exit]
        return self._lookup[u]

    def describe(self) -> dict:
        return {"R_exit": self.R_exit, "kind": self.kind, "cells": self.n_cells,
                "cell_depth": self.cell_depth, "diameters": self.diameters}


def _sector(v, k):
    if len(v) == 2:
        ang = math.atan2(v[1], v[0]) % (2 * math.pi)
        return min(int(ang / (2 * math.pi) * k), k - 1)
    axis = int(np.argmax(np.abs(v)))
    return 2 * axis + (1 if v[axis] < 0 else 0)


def tree_partition(g: RegularTree, R_exit: int, cell_depth: int = 1, f: FloydFunction = None):
    if not 1 <= cell_depth <= R_exit:
        raise ValueError("need 1 <= cell_depth <= R_exit")
    n = g.sphere_size(cell_depth)
    diam = None
    if f is not None:
        T = tail_sums(f, R_exit + 1)
        diam = [float(2 * (T[cell_depth] - T[R_exit]))] * n
    return BoundaryCellPartition(R_exit, "tree", list(range(n)), None, diam, cell_depth, _g=g)


def sector_partition(g: Lattice, R_exit: int, sectors: int = 8):
    k = sectors if g.d == 2 else 2 * g.d
    return BoundaryCellPartition(R_exit, "sector", list(range(k)), None, None, _g=g)


def floyd_cluster_partition(g: GraphOracle, f: FloydFunction, R_exit: int, r: float):
    """Greedy clustering of ``S_{R_exit}``: each cell is a ``d_f``-ball of radius ``r/4`` (diameter < r/2)."""
    metric = FloydMetric(g, f, R_exit + 4)
    b = ball(g, R_exit)
    sphere = sorted(b.sphere(R_exit))
    left = list(sphere)
    members, lookup, diams = [], {}, []
    while left:
        c = left[0]
        cell = [u for u in left if metric.distance(c, u)[0] < r / 4]
        for u in cell:
            lookup[u] = len(members)
        members.append(cell)
        diams.append(max(metric.distance(a, b)[0] for a in cell for b in cell))
        taken = set(cell)
        left = [u for u in left if u not in taken]
    return BoundaryCellPartition(R_exit, "floyd_cluster", list(range(len(members))), members,
                                 diams, _lookup=lookup, _g=g)


def default_partition(g: GraphOracle, R_exit: int, f: FloydFunction = None, r: float = None,
                      cell_depth: int = 1) -> BoundaryCellPartition:
    if isinstance(g, RegularTree):
        return tree_partition(g, R_exit, cell_depth, f)
    if isinstance(g, Lattice):
        return sector_partition(g, R_exit)
    if f is None or r is None:
        raise ValueError("Floyd clustering needs f and r")
    return floyd_cluster_partition(g, f, R_exit, r)


# ---- harmonic measure --------------------------------------------------------
@dataclass
class HarmonicMeasureEstimate:
    start: object
    counts: np.ndarray
    paths: int
    unhit: int
    R_exit: int
    stability_disagreement: float = None
    flags: list = field(default_factory=list)

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.paths

    @property
    def stderr(self) -> np.ndarray:
        w = self.weights
        return np.sqrt(w * (1 - w) / self.paths)

    @property
    def unhit_mass(self) -> float:
        return self.unhit / self.paths

    def describe(self, g: GraphOracle = None) -> dict:
        return {"start": g.encode(self.start) if g is not None else repr(self.start),
                "weights": self.weights.tolist(), "stderr": self.stderr.tolist(),
                "paths": self.paths, "unhit_mass": self.unhit_mass, "R_exit": self.R_exit,
                "stability_disagreement": self.stability_disagreement, "flags": self.flags}


def _first_hits(kernel: Kernel, start, targets, paths: int, horizon: int, rng):
    """For each path, the vertex where level first reaches each target (or None)."""
    g = kernel.g
    trans_of = kernel.transitions
    top = max(targets)
    out = []
    for _ in range(paths):
        v = start
        hits = [None] * len(targets)
        lv = g.level(v)
        for i, R in enumerate(targets):
            if lv >= R:
                hits[i] = v
        steps = 0
        u = rng.random(horizon)
        while lv < top and steps < horizon:
            acc = 0.0
            x = u[steps]
            for w, p, _ in trans_of(v):
                acc += p
                if x < acc:
                    break
            v = w
            lv = g.level(v)
            steps += 1
            for i, R in enumerate(targets):
                if hits[i] is None and lv >= R:
                    hits[i] = v
        out.append(hits)
    return out


def harmonic_measure(kernel: Kernel, start, partition: BoundaryCellPartition, paths: int = 2000,
                     horizon: int = 10_000, seed: int = 0, stability_offset: int = 5,
                     stream: int = 0) -> HarmonicMeasureEstimate:
    g = kernel.g
    R = partition.R_exit
    if g.level(start) > R:
        raise ValueError("start must lie in B_{R_exit}")
    rng = stream_rng(seed, 2_000_000 + stream)
    targets = [R, R + stability_offset] if stability_offset else [R]
    hits = _first_hits(kernel, start, targets, paths, horizon, rng)
    counts = np.zeros(partition.n_cells, dtype=np.int64)
    unhit, agree, both = 0, 0, 0
    for h in hits:
        if h[0] is None:
            unhit += 1
            continue
        c = partition.cell_of(h[0])
        counts[c] += 1
        if stability_offset and h[1] is not None:
            both += 1
            agree += partition.cell_of(h[1]) == c
    est = HarmonicMeasureEstimate(start, counts, paths, unhit, R,
                                  (1 - agree / both) if both else None)
    if est.unhit_mass > 0.1:
        est.flags.append("dirichlet_lab.horizon_too_small: unhit mass above 10%")
    return est


# ---- convergence scan ----------------------------------------------------------
def tree_cell_distance(g: RegularTree, T, ref, cell_label: int, cell_depth: int, R_exit: int):
    """``d_f`` from ``ref`` (on ``S_{R_exit}``) to the nearest point of a tree cell on ``S_{R_exit}``."""
    anc = g.ancestor(ref, cell_depth)
    if anc[1] == cell_label:
        return 0.0
    a = g.lca_level(anc, (cell_depth, cell_label))
    return float(2 * (T[a] - T[R_exit]))


def region_cells(partition: BoundaryCellPartition, f: FloydFunction, ref, r: float):
    """Cells with ``d_f(ref, cell) < r``; ``ref`` is the ray's vertex on ``S_{R_exit}``."""
    g = partition._g
    R = partition.R_exit
    if partition.kind == "tree":
        T = tail_sums(f, R + 1)
        return [c for c in partition.labels
                if tree_cell_distance(g, T, ref, c, partition.cell_depth, R) < r]
    if partition.members is None:
        raise ValueError("region selection needs explicit cell members")
    metric = FloydMetric(g, f, R + 4)
    return [c for c, mem in enumerate(partition.members)
            if min(metric.distance(ref, u)[0] for u in mem) < r]


def skeleton_bound(f: FloydFunction, spec: EventSpec, level: int) -> dict:
    """``tau(floor(|v|/6)) + c^{-1} sum_{i >= floor(c k)} tau(i)`` with ``k = ceil(alpha |v|)``."""
    k = math.ceil(spec.alpha * level)
    c = min(spec.m_lower - 1.5 * spec.eps, 1.0)
    if c <= 0:
        return {"k": k, "c": c, "bound": math.inf}
    i0 = math.floor(c * k)
    tail = tau_series_total(f)
    if i0 == 0:
        tail += tau(f, 0)
    elif i0 > 1:
        tail -= float(tau_partial_sums(f, i0 - 1)[-1])
    bound = tau(f, level // 6) + tail / c
    return {"k": k, "c": c, "i0": i0, "bound": bound}


def dirichlet_convergence_scan(kernel: Kernel, f: FloydFunction, ray, r_list, partition,
                               paths: int = 2000, seed: int = 0, spec: EventSpec = None,
                               horizon: int = 10_000) -> dict:
    if not f.n_f_summable:
        raise FloydWalkError("the scan needs sum n f(n) < infinity", code="dirichlet_lab.n_f_not_summable")
    g = kernel.g
    levels = [g.level(v) for v in ray]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("ray must have increasing |v|")
    R = partition.R_exit
    ref = _ray_exit(g, ray, R)
    regions = {r: region_cells(partition, f, ref, r) for r in r_list}
    rows = []
    for i, v in enumerate(ray):
        hm = harmonic_measure(kernel, v, partition, paths, horizon, seed, stream=i)
        for r in r_list:
            w = float(hm.counts[regions[r]].sum() / paths)
            rows.append({"level": levels[i], "r": r, "weight": w,
                         "stderr": math.sqrt(w * (1 - w) / paths), "unhit_mass": hm.unhit_mass,
                         "cells_in_region": len(regions[r]),
                         "stability_disagreement": hm.stability_disagreement})
    trend = {}
    for r in r_list:
        seq = [row for row in rows if row["r"] == r]
        trend[r] = all(b["weight"] >= a["weight"] - 3 * math.hypot(a["stderr"], b["stderr"])
                       for a, b in zip(seq, seq[1:]))
    skel = {lv: skeleton_bound(f, spec, lv) for lv in levels} if spec is not None else None
    return {"rows": rows, "non_decreasing": trend, "skeleton": skel, "R_exit": R,
            "partition": partition.describe()}


def _ray_exit(g, ray, R):
    last = ray[-1]
    if isinstance(g, RegularTree):
        v = last
        while g.level(v) < R:
            v = g.neighbors(v)[1]
        return g.ancestor(v, R) if g.level(v) > R else v
    if g.level(last) == R:
        return last
    raise ValueError("on non-tree graphs the ray must end on S_{R_exit}")


def tree_ray(g: RegularTree, depths, branch: int = 0):
    """Vertices ``(d, 0)``-style along the leftmost ray of subtree ``branch``."""
    out = []
    for d in depths:
        out.append((d, branch * g.q ** (d - 1)) if d >= 1 else (0, 0))
    return out


def scan_csv(scan: dict, fh) -> None:
    fh.write("# weight = first-exit frequency of the target region on S_R_exit; stderr binomial\n")
    fh.write("level,r,weight,stderr,unhit_mass\n")
    for row in scan["rows"]:
        fh.write(f"{row['level']},{row['r']!r},{row['weight']!r},{row['stderr']!r},{row['unhit_mass']!r}\n")
