"""Transition kernels with certificates, trajectory sampling and step statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph_core import BallGraph, GraphOracle, RegularTree

RNG_ALGORITHM = "numpy PCG64 seeded by SeedSequence([seed, stream])"

RULES = ("simple_rw", "lazy_rw", "tree_drift", "bounded_range_mixture")


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for trajectory ``stream`` of a run seeded ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class Certificates:
    M: int
    eps0: float = None
    K: int = None
    reversing_measure: object = field(default=None, compare=False, repr=False)
    measure_bounds: tuple = None

    def describe(self) -> dict:
        return {"M": self.M, "eps0": self.eps0, "K": self.K,
                "reversing_measure": None if self.reversing_measure is None else "declared",
                "measure_bounds": self.measure_bounds}


class Kernel:
    """Nearest-neighbour style kernels on a :class:`GraphOracle`.

    ``transitions(v)`` returns ``[(w, p(v, w), d(v, w)), ...]`` in a fixed
    order.

    * ``simple_rw``: uniform over neighbours.
    * ``lazy_rw(hold)``: stay with probability ``hold``, else simple step.
    * ``tree_drift(b)``: on a regular tree, mass ``b`` split over the ``q``
      children and ``1 - b`` to the parent; uniform at the root.
    * ``bounded_range_mixture(M, weights)``: with weight ``weights[j]`` jump
      to a uniform vertex of the sphere of radius ``j`` about ``v``.
    """

    def __init__(self, g: GraphOracle, rule: str = "simple_rw", hold: float = 0.5,
                 b: float = 0.75, weights=None):
        if rule not in RULES:
            raise ValueError(f"unknown kernel rule {rule!r}")
        self.g = g
        self.rule = rule
        self.hold = float(hold)
        self.b = float(b)
        if rule == "lazy_rw" and not 0 <= self.hold < 1:
            raise ValueError("hold probability must lie in [0, 1)")
        if rule == "tree_drift":
            if not isinstance(g, RegularTree):
                raise ValueError("tree_drift needs a regular tree")
            if not 0 < self.b < 1:
                raise ValueError("drift b must lie in (0, 1)")
        if rule == "bounded_range_mixture":
            w = np.asarray(weights if weights is not None else [0.0, 1.0], dtype=float)
            if w.ndim != 1 or len(w) < 2 or np.any(w < 0) or w.sum() <= 0 or w[1] <= 0:
                raise ValueError("mixture weights need w[1] > 0 and non-negative entries")
            self.weights = w / w.sum()
        else:
            self.weights = None
        self._cache = {}

    @property
    def M(self) -> int:
        if self.rule == "bounded_range_mixture":
            return int(np.flatnonzero(self.weights)[-1])
        return 1

    def transitions(self, v) -> list:
        g = self.g
        if self.rule == "simple_rw":
            ns = g.neighbors(v)
            p = 1.0 / len(ns)
            return [(w, p, 1) for w in ns]
        if self.rule == "lazy_rw":
            ns = g.neighbors(v)
            p = (1.0 - self.hold) / len(ns)
            out = [(w, p, 1) for w in ns]
            if self.hold > 0:
                out.insert(0, (v, self.hold, 0))
            return out
        if self.rule == "tree_drift":
            ns = g.neighbors(v)
            if g.level(v) == 0:
                p = 1.0 / len(ns)
                return [(w, p, 1) for w in ns]
            pc = self.b / g.q
            return [(ns[0], 1.0 - self.b, 1)] + [(w, pc, 1) for w in ns[1:]]
        return self._mixture(v)

    def _mixture(self, v):
        hit = self._cache.get(v)
        if hit is not None:
            return hit
        dist = _local_ball(self.g, v, self.M)
        spheres = [[] for _ in range(self.M + 1)]
        for u, d in dist.items():
            if d <= self.M:
                spheres[d].append(u)
        live = [j for j in range(self.M + 1) if self.weights[j] > 0 and spheres[j]]
        z = sum(self.weights[j] for j in live)
        out = []
        for j in live:
            p = self.weights[j] / z / len(spheres[j])
            out.extend((u, p, j) for u in sorted(spheres[j]))
        if len(self._cache) < 200_000:
            self._cache[v] = out
        return out

    # ---- certificates -------------------------------------------------
    def certificates(self) -> Certificates:
        g = self.g
        deg = g.max_degree()
        if self.rule == "simple_rw":
            eps0 = 1.0 / deg
        elif self.rule == "lazy_rw":
            eps0 = (1.0 - self.hold) / deg
        elif self.rule == "tree_drift":
            eps0 = min(1.0 / (g.q + 1), 1.0 - self.b, self.b / g.q)
        else:
            eps0 = self._mixture_eps0()
        measure, bounds = None, None
        if self.rule in ("simple_rw", "lazy_rw"):
            measure = lambda v: float(len(g.neighbors(v)))
            mins = min(len(g.neighbors(r)) for r in g.representatives())
            bounds = (float(mins), float(deg))
        elif self.rule == "bounded_range_mixture" and g.vertex_transitive:
            measure = lambda v: 1.0
            bounds = (1.0, 1.0)
        return Certificates(self.M, eps0, 1, measure, bounds)

    def _mixture_eps0(self):
        # p(v, w) >= w_1' / |S_1(v)| for neighbours; w_1' accounts for empty spheres
        worst = math.inf
        for r in self.g.representatives():
            for w, p, d in self.transitions(r):
                if d == 1:
                    worst = min(worst, p)
        return worst

    def describe(self) -> dict:
        d = {"rule": self.rule, "certificates": self.certificates().describe()}
        if self.rule == "lazy_rw":
            d["hold"] = self.hold
        if self.rule == "tree_drift":
            d["b"] = self.b
        if self.rule == "bounded_range_mixture":
            d["weights"] = self.weights.tolist()
        return d


def _local_ball(g, v, M):
    from collections import deque
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == M:
            continue
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def step(kernel: Kernel, v, rng) -> tuple:
    """Draw ``(w, d(v, w))``; ``rng`` is a Generator or a uniform in [0, 1)."""
    u = rng.random() if hasattr(rng, "random") else float(rng)
    trans = kernel.transitions(v)
    acc = 0.0
    for w, p, d in trans:
        acc += p
        if u < acc:
            return w, d
    w, _, d = trans[-1]
    return w, d


@dataclass
class Trajectory:
    seed: int
    stream: int
    start: object
    positions: list
    levels: np.ndarray
    step_lengths: np.ndarray

    @property
    def N(self) -> int:
        return len(self.positions) - 1

    def gromov2(self) -> np.ndarray:
        """``2 (Z_k ^ Z_{k+1})`` for ``k = 0..N-1`` (integers)."""
        return self.levels[:-1] + self.levels[1:] - self.step_lengths

    def distances_from_start(self, g: GraphOracle) -> np.ndarray:
        """``d(Z_0, Z_n)`` for all ``n``.

        On trees with nearest-neighbour steps the geodesic back to ``Z_0`` is
        kept as a stack; otherwise the oracle's distance is called per step.
        """
        if g.is_tree and (self.N == 0 or int(self.step_lengths.max()) <= 1):
            stack = [self.positions[0]]
            out = np.zeros(self.N + 1, dtype=np.int64)
            for n in range(1, self.N + 1):
                z = self.positions[n]
                if z == stack[-1]:
                    pass
                elif len(stack) > 1 and z == stack[-2]:
                    stack.pop()
                else:
                    stack.append(z)
                out[n] = len(stack) - 1
            return out
        z0 = self.positions[0]
        return np.array([g.distance(z0, z) for z in self.positions], dtype=np.int64)

    def to_csv(self, g: GraphOracle, fh) -> None:
        fh.write("# units: graph distance; |Z_k| = d(e, Z_k)\n")
        fh.write("k,vertex,level\n")
        for k, (z, lv) in enumerate(zip(self.positions, self.levels.tolist())):
            fh.write(f"{k},{g.encode(z)},{lv}\n")


def sample_trajectory(kernel: Kernel, start, N: int, seed: int, stream: int = 0) -> Trajectory:
    if N < 0:
        raise ValueError("N must be >= 0")
    g = kernel.g
    g.validate(start)
    u = stream_rng(seed, stream).random(N)
    positions = [start]
    levels = np.empty(N + 1, dtype=np.int64)
    steps = np.empty(N, dtype=np.int64)
    levels[0] = g.level(start)
    trans_of = kernel.transitions
    level_of = g.level
    v = start
    for k in range(N):
        acc = 0.0
        x = u[k]
        trans = trans_of(v)
        for w, p, d in trans:
            acc += p
            if x < acc:
                break
        v = w
        positions.append(v)
        levels[k + 1] = level_of(v)
        steps[k] = d
    return Trajectory(seed, stream, start, positions, levels, steps)


# ---- matrices on truncations ------------------------------------------------
def transition_matrix(kernel: Kernel, b: BallGraph) -> sp.csr_matrix:
    """``P`` restricted to ``B_R``; mass leaving the ball is dropped."""
    rows, cols, vals = [], [], []
    index = b.index
    for i, v in enumerate(b.vertices):
        for w, p, _ in kernel.transitions(v):
            j = index.get(w)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(p)
    n = len(b)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def n_step_matrix(kernel: Kernel, b: BallGraph, n: int):
    """``[P_R, P_R^2, ..., P_R^n]`` (sparse) and a warning flag list.

    Entries are lower bounds for the true ``p^{(k)}`` on ``B_R``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    flags = []
    if b.radius < n * kernel.M:
        flags.append(f"radius {b.radius} < n*M = {n * kernel.M}: absorbed mass may bias p^(k)")
    P = transition_matrix(kernel, b)
    out = [P]
    for _ in range(n - 1):
        out.append((out[-1] @ P).tocsr())
    return out, flags


def kappa_step_distribution(kernel: Kernel, v, kappa: int) -> dict:
    """Exact ``p^{(kappa)}(v, .)`` on the infinite graph by sparse propagation."""
    dist = {v: 1.0}
    for _ in range(kappa):
        nxt = {}
        for u, pu in dist.items():
            for w, p, _ in kernel.transitions(u):
                nxt[w] = nxt.get(w, 0.0) + pu * p
        dist = nxt
    return dist


def validate_irreducibility(kernel: Kernel, pairs: int = 100, seed: int = 0, radius: int = 6):
    """Check ``exists kappa <= K: p^{(kappa)}(v, w) >= eps0`` on sampled edges.

    Returns ``(ok, worst)`` where ``worst`` is the smallest best-over-kappa
    probability seen.
    """
    cert = kernel.certificates()
    g = kernel.g
    rng = stream_rng(seed, 10_007)
    vs = _sample_vertices(g, pairs, rng, radius)
    worst = math.inf
    cache = {}
    for v in vs:
        nbrs = g.neighbors(v)
        w = nbrs[int(rng.integers(len(nbrs)))]
        if v not in cache:
            cache[v] = [kappa_step_distribution(kernel, v, k) for k in range(1, cert.K + 1)]
        best = max(d.get(w, 0.0) for d in cache[v])
        worst = min(worst, best)
    return worst >= cert.eps0 - 1e-15, worst


def _sample_vertices(g, count, rng, radius):
    """Vertices of ``B_radius`` reached by short uniform neighbour walks."""
    out = []
    for _ in range(count):
        v = g.base
        for _ in range(int(rng.integers(radius + 1))):
            ns = g.neighbors(v)
            v = ns[int(rng.integers(len(ns)))]
        out.append(v)
    return out


# ---- step statistics --------------------------------------------------------
@dataclass
class StepStats:
    sigma: dict
    phi: np.ndarray
    m_bar: float
    speed_lower: float
    speed_upper: float
    speed_mean: float
    speed_ci: float
    trials: int
    N: int

    def describe(self) -> dict:
        return {"phi": self.phi.tolist(), "m_bar": self.m_bar, "speed_lower": self.speed_lower,
                "speed_upper": self.speed_upper, "speed_mean": self.speed_mean,
                "speed_ci_halfwidth": self.speed_ci, "trials": self.trials, "N": self.N}


def step_length_distribution(kernel: Kernel, v) -> np.ndarray:
    sigma = np.zeros(kernel.M + 1)
    for _, p, d in kernel.transitions(v):
        sigma[d] += p
    return sigma


def step_stats(kernel: Kernel, trials: int = 20, N: int = 2000, seed: int = 0,
               batches: int = 20) -> StepStats:
    """Exact ``sigma_v``/``phi``/``m_bar`` over orbit representatives plus speeds.

    ``speed_lower`` is the 1st percentile over trajectories of
    ``min |Z_n|/n`` on the final quarter; ``speed_upper`` the 99th percentile
    of ``max d(Z_0, Z_n)/n`` there. ``speed_ci`` is a 95% batch-means
    half-width for the mean speed.
    """
    g = kernel.g
    sigma = {g.encode(r): step_length_distribution(kernel, r) for r in g.representatives()}
    tails = np.array([np.cumsum(s[::-1])[::-1] for s in sigma.values()])
    phi = tails.max(axis=0)
    m_bar = float(phi[1:].sum())
    if trials <= 0 or N < 4:
        return StepStats(sigma, phi, m_bar, math.nan, math.nan, math.nan, math.nan, trials, N)
    lower, upper, slopes = [], [], []
    q0 = (3 * N) // 4
    n = np.arange(q0, N + 1)
    for t in range(trials):
        tr = sample_trajectory(kernel, g.base, N, seed, stream=t)
        lower.append(float(np.min(tr.levels[q0:] / n)))
        upper.append(float(np.max(tr.distances_from_start(g)[q0:] / n)))
        inc = np.diff(tr.levels)
        size = N // batches
        slopes.extend(inc[i * size:(i + 1) * size].mean() for i in range(batches))
    slopes = np.asarray(slopes)
    ci = 1.96 * slopes.std(ddof=1) / math.sqrt(len(slopes))
    return StepStats(sigma, phi, m_bar,
                     float(np.percentile(lower, 1, method="lower")),
                     float(np.percentile(upper, 99, method="higher")),
                     float(slopes.mean()), float(ci), trials, N)
