"""Floyd functions, tail sums, the comparison functions nu and tau, and d_f.

A Floyd function rescales the edge ``[x, y]`` to length ``f(min(|x|, |y|))``.
All families are defined at ``n = 0`` because edges at the base vertex have
level 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra
import scipy.sparse as sp

from .errors import AxiomViolation, FloydWalkError, RangeError
from .graph_core import BallGraph, GraphOracle, ball, geodesic_nearest_point, gromov_product

# Euler-Maclaurin cut-off for polynomial tails: terms below K are summed.
_EM_DIRECT_TERMS = 32


@dataclass(frozen=True)
class TailSum:
    n: int
    value: float
    error_bound: float = 0.0

    @property
    def upper(self) -> float:
        return self.value + self.error_bound


@dataclass(frozen=True)
class FloydFunction:
    """Descriptor for a Floyd function ``f: N -> R_{>0}``.

    ``lam`` is the certified constant with ``lam * f(r) <= f(r+1)``.
    Table families (``lemma1``, ``custom_table``) hold ``table[n] = f(n)``
    for ``n <= n_max``; with ``extend=True`` they continue past the table by
    the geometric envelope ``f(n_max) * envelope_ratio**(n - n_max)``.
    """

    family: str
    lam: float
    a: float = None
    s: float = None
    table: np.ndarray = field(default=None, repr=False, compare=False)
    M: int = None
    extend: bool = False
    summable: bool = True
    n_f_summable: bool = True
    analytic_tail: bool = True

    # ---- constructors -------------------------------------------------
    @classmethod
    def geometric(cls, a: float) -> "FloydFunction":
        if not 0 < a < 1:
            raise ValueError("geometric Floyd function needs 0 < a < 1")
        return cls("geometric", lam=a, a=float(a))

    @classmethod
    def polynomial(cls, s: float) -> "FloydFunction":
        """``f(n) = (n + 1)**(-s)``; ``lam = 2**(-s)`` is the ratio at n = 0."""
        if not s > 1:
            raise ValueError("polynomial Floyd function needs s > 1")
        return cls("polynomial", lam=2.0 ** (-s), s=float(s), n_f_summable=s > 2)

    @classmethod
    def from_table(cls, values, lam: float, family: str = "custom_table", M=None,
                   extend: bool = False) -> "FloydFunction":
        table = np.asarray(values, dtype=float)
        if table.ndim != 1 or len(table) < 2:
            raise ValueError("table needs at least two values")
        table.setflags(write=False)
        ratio = _envelope_ratio(table)
        return cls(family, lam=float(lam), table=table, M=M, extend=extend,
                   summable=ratio < 1, n_f_summable=ratio < 1, analytic_tail=False)

    def with_extension(self, extend: bool = True) -> "FloydFunction":
        if self.table is None:
            return self
        return FloydFunction(self.family, self.lam, table=self.table, M=self.M, extend=extend,
                             summable=self.summable, n_f_summable=self.n_f_summable,
                             analytic_tail=False)

    # ---- evaluation ---------------------------------------------------
    @property
    def n_max(self):
        return None if self.table is None else len(self.table) - 1

    @property
    def envelope_ratio(self) -> float:
        return _envelope_ratio(self.table)

    def __call__(self, n: int) -> float:
        return eval_f(self, n)

    def values(self, n_max: int) -> np.ndarray:
        """``f(0), ..., f(n_max)`` as an array."""
        n = np.arange(n_max + 1)
        if self.family == "geometric":
            return self.a ** n.astype(float)
        if self.family == "polynomial":
            return (n + 1.0) ** (-self.s)
        if n_max <= self.n_max:
            return np.array(self.table[: n_max + 1])
        if not self.extend:
            raise RangeError(f"{self.family} table covers n <= {self.n_max}, asked for {n_max}")
        extra = self.table[-1] * self.envelope_ratio ** np.arange(1, n_max - self.n_max + 1)
        return np.concatenate([self.table, extra])

    def ratios(self, n_max: int) -> np.ndarray:
        """``f(n+1)/f(n)`` for ``n = 0..n_max-1``, computed without underflow."""
        n = np.arange(n_max, dtype=float)
        if self.family == "geometric":
            return np.full(n_max, self.a)
        if self.family == "polynomial":
            return np.exp(-self.s * np.log1p(1.0 / (n + 1.0)))
        v = self.values(n_max)
        return v[1:] / v[:-1]

    def log_values(self, n_max: int) -> np.ndarray:
        n = np.arange(n_max + 1, dtype=float)
        if self.family == "geometric":
            return n * math.log(self.a)
        if self.family == "polynomial":
            return -self.s * np.log1p(n)
        with np.errstate(divide="ignore"):
            return np.log(self.values(n_max))

    def describe(self) -> dict:
        d = {"family": self.family, "lambda": self.lam, "summable": self.summable,
             "n_f_summable": self.n_f_summable, "analytic_tail": self.analytic_tail}
        if self.a is not None:
            d["a"] = self.a
        if self.s is not None:
            d["s"] = self.s
        if self.table is not None:
            d.update(n_max=self.n_max, M=self.M, extend=self.extend,
                     envelope_ratio=self.envelope_ratio)
        return d


def _envelope_ratio(table) -> float:
    # max ratio over the last quarter of the table
    start = max(0, (3 * (len(table) - 1)) // 4)
    seg = table[start:]
    return float(np.max(seg[1:] / seg[:-1]))


def eval_f(f: FloydFunction, n: int) -> float:
    if n < 0:
        raise ValueError("Floyd functions are defined on n >= 0")
    if f.family == "geometric":
        return f.a ** n
    if f.family == "polynomial":
        return (n + 1.0) ** (-f.s)
    if n <= f.n_max:
        return float(f.table[n])
    if not f.extend:
        raise RangeError(f"{f.family} table covers n <= {f.n_max}, asked for {n}")
    return float(f.table[-1] * f.envelope_ratio ** (n - f.n_max))


def _zeta_tail(s: float, K: int):
    """``sum_{k >= K} k**(-s)`` by Euler-Maclaurin, with a remainder bound.

    ``x**(-s)`` is completely monotone, so the remainder after the B4 term
    is bounded by the magnitude of the B6 term.
    """
    value = (K ** (1.0 - s) / (s - 1.0) + 0.5 * K ** (-s)
             + s / 12.0 * K ** (-s - 1.0)
             - s * (s + 1) * (s + 2) / 720.0 * K ** (-s - 3.0))
    err = s * (s + 1) * (s + 2) * (s + 3) * (s + 4) / 30240.0 * K ** (-s - 5.0)
    return value, err


def tail_sum(f: FloydFunction, n: int) -> TailSum:
    """``T(n) = sum_{i >= n} f(i)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if f.family == "geometric":
        return TailSum(n, f.a ** n / (1.0 - f.a), 0.0)
    if f.family == "polynomial":
        # sum_{i>=n} (i+1)^-s = sum_{k>=n+1} k^-s
        K = n + 1 + _EM_DIRECT_TERMS
        head = math.fsum(k ** (-f.s) for k in range(n + 1, K))
        tail, err = _zeta_tail(f.s, K)
        return TailSum(n, head + tail, err)
    return _table_tail(f, n)


def _table_tail(f: FloydFunction, n: int) -> TailSum:
    r = f.envelope_ratio
    if r >= 1:
        raise FloydWalkError("table is not summable under its geometric envelope",
                             code="floyd_metric.divergent_tail")
    last = float(f.table[-1])
    if n <= f.n_max:
        head = math.fsum(f.table[n:])
        extra = last * r / (1.0 - r)
        return TailSum(n, head + extra, extra)
    if not f.extend:
        raise RangeError(f"{f.family} table covers n <= {f.n_max}, asked for tail at {n}")
    value = last * r ** (n - f.n_max) / (1.0 - r)
    return TailSum(n, value, value)


def tail_sums(f: FloydFunction, n_max: int) -> np.ndarray:
    """Upper values ``T(0..n_max)`` (``value + error_bound``), vectorised."""
    if f.family == "geometric":
        return f.values(n_max) / (1.0 - f.a)
    if f.table is not None and n_max > f.n_max and not f.extend:
        raise RangeError(f"{f.family} table covers n <= {f.n_max}, asked for {n_max}")
    last = tail_sum(f, n_max + 1).upper
    vals = f.values(n_max)
    # reverse cumulative sum seeded with the tail beyond n_max
    return (np.cumsum(vals[::-1]) + last)[::-1]


def nu(f: FloydFunction, n: int) -> float:
    """``nu(n) = 4 n f(n) + 2 T(n)``, upper tail bound used."""
    return 4 * n * eval_f(f, n) + 2 * tail_sum(f, n).upper


def tau(f: FloydFunction, n: int) -> float:
    """``tau(n) = 10 T(floor(n/2) + 1)``."""
    return 10 * tail_sum(f, n // 2 + 1).upper


def nu_array(f: FloydFunction, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return 4 * n * f.values(n_max) + 2 * tail_sums(f, n_max)


def tau_array(f: FloydFunction, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    T = tail_sums(f, n_max // 2 + 1)
    return 10 * T[n // 2 + 1]


def tau_partial_sums(f: FloydFunction, N: int) -> np.ndarray:
    """``sum_{n=1}^{k} tau(n)`` for ``k = 1..N``."""
    return np.cumsum(tau_array(f, N)[1:])


def tau_series_total(f: FloydFunction) -> float:
    """``sum_{n >= 1} tau(n) = 10 sum_{i >= 1} (2i - 1) f(i)``.

    Each ``f(i)`` appears in ``T(floor(n/2)+1)`` for the ``2i - 1`` values
    ``n = 1..2i-1``.
    """
    if f.family == "geometric":
        a = f.a
        return 10 * (2 * a / (1 - a) ** 2 - a / (1 - a))
    if f.family == "polynomial":
        if f.s <= 2:
            return math.inf
        from scipy.special import zeta
        s = f.s
        # sum_{i>=1} (2i-1)(i+1)^-s = sum_{k>=2} (2k-3) k^-s
        return 10 * (2 * (zeta(s - 1) - 1) - 3 * (zeta(s) - 1))
    r = f.envelope_ratio
    if r >= 1:
        return math.inf
    i = np.arange(1, f.n_max + 1)
    head = float(np.sum((2 * i - 1) * f.table[1:]))
    # sum_{j>=1} (2(N+j)-1) f(N) r^j  with N = n_max
    N, last = f.n_max, float(f.table[-1])
    geo = r / (1 - r)
    tail = last * ((2 * N - 1) * geo + 2 * r / (1 - r) ** 2)
    return 10 * (head + tail)


# ---- axioms -----------------------------------------------------------------
@dataclass
class AxiomReport:
    passed: bool
    n_max: int
    worst_ratio: float
    worst_ratio_at: int
    lam: float
    first_violation: tuple = None  # (n, kind)
    total_tail: float = None

    def raise_if_failed(self):
        if not self.passed:
            n, kind = self.first_violation
            raise AxiomViolation(f"Floyd axiom '{kind}' fails at n={n}")


def check_floyd_axioms(f: FloydFunction, n_max: int) -> AxiomReport:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    logv = f.log_values(n_max)
    ratios = f.ratios(n_max)
    violations = []
    bad = np.flatnonzero(~np.isfinite(logv))
    if bad.size:
        violations.append((int(bad[0]), "positivity"))
    bad = np.flatnonzero(ratios > 1.0)
    if bad.size:
        violations.append((int(bad[0]), "monotone"))
    bad = np.flatnonzero(ratios < f.lam)
    if bad.size:
        violations.append((int(bad[0]), "lambda"))
    total = None
    if f.summable:
        try:
            total = tail_sum(f, 0).upper
        except FloydWalkError:
            total = math.inf
        if not math.isfinite(total):
            violations.append((n_max, "summable"))
    k = int(np.argmin(ratios))
    first = min(violations) if violations else None
    return AxiomReport(not violations, n_max, float(ratios[k]), k, f.lam, first, total)


# ---- the Floyd metric on truncations ----------------------------------------
class FloydMetric:
    """``d_f`` on a graph, computed on ball truncations.

    Trees and the half line are exact: every path between two vertices
    contains the geodesic, so ``d_f`` is the rescaled geodesic length.
    Otherwise Dijkstra runs on ``B_R`` for each radius in ``radii``; values
    are upper bounds, non-increasing in ``R``, and ``converged`` means the
    last two radii agree within ``tol`` (relative).
    """

    def __init__(self, g: GraphOracle, f: FloydFunction, R: int, radii=None, tol=1e-9, cap=None):
        self.g, self.f, self.R, self.tol = g, f, R, tol
        self.exact = g.is_tree and hasattr(g, "lca_level")
        self.radii = sorted(set(radii)) if radii is not None else sorted({max(0, R - 4), R})
        self.cap = cap
        self._balls = {}
        self._rows = {}
        self._T = None

    # tree path --------------------------------------------------------------
    def _tails(self, n):
        if self._T is None or len(self._T) <= n:
            size = max(n + 1, 2 * (0 if self._T is None else len(self._T)), 64)
            self._T = tail_sums(self.f, size)
        return self._T

    def _tree_value(self, v, w):
        a = self.g.lca_level(v, w)
        lv, lw = self.g.level(v), self.g.level(w)
        T = self._tails(max(lv, lw))
        return float((T[a] - T[lv]) + (T[a] - T[lw]))

    # ball path --------------------------------------------------------------
    def ball(self, R) -> BallGraph:
        if R not in self._balls:
            self._balls[R] = ball(self.g, R) if self.cap is None else ball(self.g, R, self.cap)
        return self._balls[R]

    def weighted(self, R):
        b = self.ball(R)
        key = ("W", R)
        if key not in self._rows:
            coo = b.adjacency.tocoo()
            lv = np.minimum(b.levels[coo.row], b.levels[coo.col])
            fv = self.f.values(int(lv.max()) if lv.size else 0)
            self._rows[key] = sp.csr_matrix((fv[lv], (coo.row, coo.col)), shape=b.adjacency.shape)
        return self._rows[key]

    def _row(self, R, v):
        key = (R, v)
        if key not in self._rows:
            b = self.ball(R)
            self._rows[key] = dijkstra(self.weighted(R), directed=False, indices=b.index[v])
        return self._rows[key]

    def radii_for(self, v, w):
        need = max(self.g.level(v), self.g.level(w))
        if need > self.R:
            raise ValueError(f"R={self.R} below max(|v|, |w|)={need}")
        rs = [r for r in self.radii if r >= need]
        return rs or [self.R]

    def distance(self, v, w):
        """Return ``(value, converged)``."""
        if self.exact:
            need = max(self.g.level(v), self.g.level(w))
            if need > self.R:
                raise ValueError(f"R={self.R} below max(|v|, |w|)={need}")
            return (0.0 if v == w else self._tree_value(v, w)), True
        if v == w:
            self.radii_for(v, w)
            return 0.0, True
        vals = []
        for r in self.radii_for(v, w):
            b = self.ball(r)
            vals.append(float(self._row(r, v)[b.index[w]]))
        if len(vals) < 2:
            return vals[-1], False
        converged = abs(vals[-2] - vals[-1]) <= self.tol * abs(vals[-1])
        return vals[-1], converged

    def profile(self, v, w):
        """Values at every admissible radius (for refinement checks)."""
        out = []
        for r in self.radii_for(v, w):
            b = self.ball(r)
            out.append((r, float(self._row(r, v)[b.index[w]])))
        return out


def floyd_distance(g: GraphOracle, f: FloydFunction, v, w, R: int, radii=None, tol=1e-9):
    return FloydMetric(g, f, R, radii=radii, tol=tol).distance(v, w)


@dataclass
class Inequality1Report:
    v: object
    w: object
    d_f: float
    converged: bool
    m: object
    m_level: int
    gromov: object
    nu_m: float
    tau_vw: float

    @property
    def nu_ok(self) -> bool:
        return self.d_f <= self.nu_m

    @property
    def tau_ok(self) -> bool:
        return self.d_f <= self.tau_vw

    @property
    def passed(self) -> bool:
        return self.nu_ok and self.tau_ok


def check_inequality1(g: GraphOracle, f: FloydFunction, v, w, R: int, metric: FloydMetric = None):
    metric = metric or FloydMetric(g, f, R)
    value, conv = metric.distance(v, w)
    m, lm = geodesic_nearest_point(g, v, w, R)
    gp = gromov_product(g, v, w, R)
    if lm < gp:
        raise FloydWalkError(f"nearest geodesic point level {lm} below Gromov product {gp}",
                             code="graph_core.geodesic")
    return Inequality1Report(v, w, value, conv, m, lm, gp, nu(f, lm), tau(f, math.floor(gp)))
