"""Locally finite graphs behind a lazy neighbour oracle.

Infinite graphs are never materialised; global computations run on
:class:`BallGraph` truncations ``B_R = {v : d(e, v) <= R}`` built by BFS.

Vertex handles are hashable, totally ordered Python values, injective per
family:

* regular tree of degree ``q + 1``: ``(depth, offset)`` with
  ``0 <= offset < (q + 1) q**(depth - 1)``; children of ``(n, j)`` are
  ``(n + 1, j*q + c)``.
* lattice ``Z^d``: coordinate tuples.
* half line: non-negative ints.
* free product of cyclic groups: tuples of ``(factor, power)`` syllables in
  normal form.
* explicit finite graph: whatever labels the adjacency list uses.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Hashable

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded, InvalidVertex

Vertex = Hashable

DEFAULT_VERTEX_CAP = 2_000_000


class GraphOracle:
    """Base class. Subclasses provide ``neighbors`` and ``level``."""

    family = "abstract"
    base: Vertex = None
    is_tree = False
    vertex_transitive = False
    infinite = True

    def neighbors(self, v) -> list:
        raise NotImplementedError

    def level(self, v) -> int:
        """``|v| = d(e, v)``."""
        raise NotImplementedError

    def validate(self, v) -> None:
        raise NotImplementedError

    def distance(self, v, w) -> int:
        return bfs_distances(self, v, None, stop=w)[w]

    def max_degree(self) -> int:
        raise NotImplementedError

    def representatives(self) -> list:
        """One vertex per orbit type relevant for ``sup_v`` statistics."""
        return [self.base]

    def predicted_ball_size(self, R: int):
        return None

    def encode(self, v) -> str:
        return str(v)

    def decode(self, s: str):
        return int(s)

    def describe(self) -> dict:
        return {"family": self.family}


class RegularTree(GraphOracle):
    family = "regular_tree"
    is_tree = True
    vertex_transitive = True

    def __init__(self, q: int = 2):
        if q < 1:
            raise ValueError("q must be >= 1")
        self.q = q
        self.base = (0, 0)

    def sphere_size(self, n: int) -> int:
        return 1 if n == 0 else (self.q + 1) * self.q ** (n - 1)

    def validate(self, v) -> None:
        try:
            n, j = v
        except (TypeError, ValueError):
            raise InvalidVertex(f"tree vertex must be (depth, offset), got {v!r}")
        if not (isinstance(n, int) and isinstance(j, int)) or n < 0 or not 0 <= j < self.sphere_size(n):
            raise InvalidVertex(f"invalid tree vertex {v!r}")

    def neighbors(self, v) -> list:
        n, j = v
        q = self.q
        if n == 0:
            return [(1, c) for c in range(q + 1)]
        parent = (0, 0) if n == 1 else (n - 1, j // q)
        return [parent] + [(n + 1, j * q + c) for c in range(q)]

    def level(self, v) -> int:
        return v[0]

    def parent(self, v):
        n, j = v
        if n == 0:
            return None
        return (0, 0) if n == 1 else (n - 1, j // self.q)

    def ancestor(self, v, k: int):
        n, j = v
        if k > n:
            raise ValueError("ancestor depth exceeds vertex depth")
        if k == 0:
            return (0, 0)
        return (k, j // self.q ** (n - k))

    def lca_level(self, v, w) -> int:
        lo, hi = 0, min(v[0], w[0])
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.ancestor(v, mid) == self.ancestor(w, mid):
                lo = mid
            else:
                hi = mid - 1
        return lo

    def distance(self, v, w) -> int:
        return v[0] + w[0] - 2 * self.lca_level(v, w)

    def branch(self, v):
        """Index of the depth-1 subtree containing ``v`` (None at the root)."""
        n, j = v
        return None if n == 0 else j // self.q ** (n - 1)

    def max_degree(self) -> int:
        return self.q + 1

    def representatives(self) -> list:
        return [(0, 0), (1, 0)]

    def predicted_ball_size(self, R: int) -> int:
        return sum(self.sphere_size(n) for n in range(R + 1))

    def encode(self, v) -> str:
        return f"{v[0]}:{v[1]}"

    def decode(self, s: str):
        n, j = s.split(":")
        return (int(n), int(j))

    def describe(self) -> dict:
        return {"family": self.family, "q": self.q}


class Lattice(GraphOracle):
    family = "lattice"
    vertex_transitive = True

    def __init__(self, d: int = 2):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = d
        self.base = (0,) * d

    def validate(self, v) -> None:
        if not isinstance(v, tuple) or len(v) != self.d or not all(isinstance(x, int) for x in v):
            raise InvalidVertex(f"lattice vertex must be an int {self.d}-tuple, got {v!r}")

    def neighbors(self, v) -> list:
        out = []
        for i in range(self.d):
            for s in (-1, 1):
                w = list(v)
                w[i] += s
                out.append(tuple(w))
        out.sort()
        return out

    def level(self, v) -> int:
        return sum(abs(x) for x in v)

    def distance(self, v, w) -> int:
        return sum(abs(x - y) for x, y in zip(v, w))

    def max_degree(self) -> int:
        return 2 * self.d

    def predicted_ball_size(self, R: int) -> int:
        d = self.d
        return sum(2 ** k * comb(d, k) * comb(R, k) for k in range(d + 1))

    def encode(self, v) -> str:
        return ",".join(str(x) for x in v)

    def decode(self, s: str):
        return tuple(int(x) for x in s.split(","))

    def describe(self) -> dict:
        return {"family": self.family, "d": self.d}


class HalfLine(GraphOracle):
    family = "half_line"
    is_tree = True

    def __init__(self):
        self.base = 0

    def validate(self, v) -> None:
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise InvalidVertex(f"half-line vertex must be a non-negative int, got {v!r}")

    def neighbors(self, v) -> list:
        return [1] if v == 0 else [v - 1, v + 1]

    def level(self, v) -> int:
        return v

    def distance(self, v, w) -> int:
        return abs(v - w)

    def lca_level(self, v, w) -> int:
        return min(v, w)

    def max_degree(self) -> int:
        return 2

    def representatives(self) -> list:
        return [0, 1]

    def predicted_ball_size(self, R: int) -> int:
        return R + 1


class FreeProduct(GraphOracle):
    """Cayley graph of ``Z_{n_1} * ... * Z_{n_k}`` with generators ``a_i^{+-1}``."""

    family = "free_product_preset"
    vertex_transitive = True

    def __init__(self, orders=(2, 3)):
        orders = tuple(int(n) for n in orders)
        if len(orders) < 2 or any(n < 2 for n in orders):
            raise ValueError("need at least two factors of order >= 2")
        self.orders = orders
        self.base = ()

    def validate(self, v) -> None:
        if not isinstance(v, tuple):
            raise InvalidVertex(f"free-product vertex must be a syllable tuple, got {v!r}")
        prev = None
        for syl in v:
            if not (isinstance(syl, tuple) and len(syl) == 2):
                raise InvalidVertex(f"bad syllable in {v!r}")
            i, p = syl
            if not 0 <= i < len(self.orders) or not 0 < p < self.orders[i] or i == prev:
                raise InvalidVertex(f"word {v!r} is not in normal form")
            prev = i

    def _generators(self):
        for i, n in enumerate(self.orders):
            yield i, 1
            if n > 2:
                yield i, n - 1

    def right_mul(self, v, i, p):
        n = self.orders[i]
        if v and v[-1][0] == i:
            r = (v[-1][1] + p) % n
            return v[:-1] if r == 0 else v[:-1] + ((i, r),)
        return v + ((i, p % n),)

    def neighbors(self, v) -> list:
        return sorted({self.right_mul(v, i, p) for i, p in self._generators()})

    def _syl_len(self, i, p):
        return min(p, self.orders[i] - p)

    def level(self, v) -> int:
        return sum(self._syl_len(i, p) for i, p in v)

    def distance(self, v, w) -> int:
        k = 0
        while k < len(v) and k < len(w) and v[k] == w[k]:
            k += 1
        rv, rw = v[k:], w[k:]
        if rv and rw and rv[0][0] == rw[0][0]:
            i = rv[0][0]
            mid = (rw[0][1] - rv[0][1]) % self.orders[i]
            return self.level(rv[1:]) + self.level(rw[1:]) + self._syl_len(i, mid)
        return self.level(rv) + self.level(rw)

    def max_degree(self) -> int:
        return sum(1 if n == 2 else 2 for n in self.orders)

    def encode(self, v) -> str:
        return ".".join(f"{i}^{p}" for i, p in v) or "e"

    def decode(self, s: str):
        if s == "e":
            return ()
        return tuple(tuple(int(x) for x in syl.split("^")) for syl in s.split("."))

    def describe(self) -> dict:
        return {"family": self.family, "orders": list(self.orders)}


class ExplicitFinite(GraphOracle):
    family = "explicit_finite"
    infinite = False

    def __init__(self, adjacency: dict, base=0):
        adj = {v: sorted(set(ns)) for v, ns in adjacency.items()}
        for v, ns in adj.items():
            for w in ns:
                if w == v:
                    raise ValueError(f"self-loop at {v!r}")
                if v not in adj.get(w, ()):
                    raise ValueError(f"adjacency not symmetric on edge {v!r}-{w!r}")
        if base not in adj:
            raise InvalidVertex(f"base vertex {base!r} not in graph")
        self.adj = adj
        self.base = base
        self._levels = bfs_distances(self, base, None)
        if len(self._levels) != len(adj):
            raise ValueError("graph is not connected")

    def validate(self, v) -> None:
        if v not in self.adj:
            raise InvalidVertex(f"unknown vertex {v!r}")

    def neighbors(self, v) -> list:
        return self.adj[v]

    def level(self, v) -> int:
        return self._levels[v]

    def max_degree(self) -> int:
        return max(len(ns) for ns in self.adj.values())

    def representatives(self) -> list:
        return sorted(self.adj)

    def predicted_ball_size(self, R: int) -> int:
        return sum(1 for lv in self._levels.values() if lv <= R)

    def describe(self) -> dict:
        return {"family": self.family, "vertices": len(self.adj)}


def complete_graph(n: int) -> ExplicitFinite:
    return ExplicitFinite({i: [j for j in range(n) if j != i] for i in range(n)}, base=0)


def bfs_distances(g: GraphOracle, src, R_cap, stop=None) -> dict:
    """BFS distances from ``src`` through vertices with ``|u| <= R_cap``.

    With ``stop`` set, returns as soon as that vertex is labelled.
    ``R_cap=None`` means unrestricted (finite graphs only, or with ``stop``).
    """
    dist = {src: 0}
    if src == stop:
        return dist
    queue = deque([src])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in g.neighbors(u):
            if w in dist or (R_cap is not None and g.level(w) > R_cap):
                continue
            dist[w] = du
            if w == stop:
                return dist
            queue.append(w)
    if stop is not None:
        raise CapExceeded(f"{stop!r} unreachable from {src!r} within B_{R_cap}")
    return dist


@dataclass
class BallGraph:
    """Explicit truncation ``B_R`` with CSR adjacency.

    ``exits[i]`` counts neighbours of vertex ``i`` outside the ball; those
    edges are flagged this way rather than stored.
    """

    graph: GraphOracle
    radius: int
    vertices: list
    index: dict
    levels: np.ndarray
    adjacency: sp.csr_matrix
    sphere_index: dict = field(default_factory=dict)
    exits: np.ndarray = None

    def __len__(self):
        return len(self.vertices)

    def sphere(self, n: int) -> list:
        return [self.vertices[i] for i in self.sphere_index.get(n, ())]

    def sphere_sizes(self) -> list:
        return [len(self.sphere_index.get(n, ())) for n in range(self.radius + 1)]

    def edges(self):
        coo = sp.triu(self.adjacency, k=1).tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist()))


def neighbors(g: GraphOracle, v) -> list:
    g.validate(v)
    return list(g.neighbors(v))


def ball(g: GraphOracle, R: int, cap: int = DEFAULT_VERTEX_CAP) -> BallGraph:
    if R < 0:
        raise ValueError("radius must be >= 0")
    predicted = g.predicted_ball_size(R)
    if predicted is not None and predicted > cap:
        raise CapExceeded(f"B_{R} would hold {predicted} vertices (cap {cap})")
    vertices = [g.base]
    index = {g.base: 0}
    levels = [0]
    rows, cols = [], []
    exits = []
    head = 0
    while head < len(vertices):
        u = vertices[head]
        lu = levels[head]
        out = 0
        for w in g.neighbors(u):
            j = index.get(w)
            if j is None:
                if lu == R:
                    out += 1
                    continue
                if len(vertices) >= cap:
                    raise CapExceeded(f"B_{R} exceeds vertex cap {cap}")
                j = len(vertices)
                index[w] = j
                vertices.append(w)
                levels.append(lu + 1)
            rows.append(head)
            cols.append(j)
        exits.append(out)
        head += 1
    n = len(vertices)
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    levels_arr = np.asarray(levels, dtype=np.int64)
    spheres = {k: np.flatnonzero(levels_arr == k) for k in range(R + 1)}
    return BallGraph(g, R, vertices, index, levels_arr, adj, spheres, np.asarray(exits, dtype=np.int64))


def write_edge_list(b: BallGraph, path) -> None:
    g = b.graph
    with open(path, "w") as fh:
        fh.write(f"# radius={b.radius} base={g.encode(g.base)} vertices={len(b)}\n")
        for i, j in b.edges():
            fh.write(f"{g.encode(b.vertices[i])} {g.encode(b.vertices[j])}\n")


def _check_cap(g, v, R_cap):
    g.validate(v)
    if R_cap is not None and g.level(v) > R_cap:
        raise CapExceeded(f"{v!r} lies outside B_{R_cap}")


def _has_closed_form(g) -> bool:
    return type(g).distance is not GraphOracle.distance


def graph_distance(g: GraphOracle, v, w, R_cap: int, use_closed_form: bool = True) -> int:
    _check_cap(g, v, R_cap)
    _check_cap(g, w, R_cap)
    if use_closed_form and _has_closed_form(g):
        return g.distance(v, w)
    return bfs_distances(g, v, R_cap, stop=w)[w]


def geodesic(g: GraphOracle, v, w, R_cap: int) -> list:
    """A d-geodesic from ``v`` to ``w``; ties broken by smallest parent."""
    _check_cap(g, v, R_cap)
    _check_cap(g, w, R_cap)
    dist = bfs_distances(g, v, R_cap, stop=w)
    # labels at the stopping layer are incomplete but every vertex on a
    # shortest path to w has dist < dist[w], and those layers are complete
    path = [w]
    cur = w
    while cur != v:
        k = dist[cur] - 1
        cur = min(u for u in g.neighbors(cur) if dist.get(u) == k)
        path.append(cur)
    path.reverse()
    return path


def geodesic_nearest_point(g: GraphOracle, v, w, R_cap: int, use_closed_form: bool = True):
    if use_closed_form and isinstance(g, RegularTree):
        _check_cap(g, v, R_cap)
        _check_cap(g, w, R_cap)
        a = g.lca_level(v, w)
        return g.ancestor(v, a), a
    if use_closed_form and isinstance(g, HalfLine):
        _check_cap(g, v, R_cap)
        _check_cap(g, w, R_cap)
        return min(v, w), min(v, w)
    path = geodesic(g, v, w, R_cap)
    m = min(path, key=g.level)  # min() keeps the first minimum in path order
    return m, g.level(m)


def gromov_product(g: GraphOracle, v, w, R_cap: int, use_closed_form: bool = True) -> Fraction:
    d = graph_distance(g, v, w, R_cap, use_closed_form)
    return Fraction(g.level(v) + g.level(w) - d, 2)
