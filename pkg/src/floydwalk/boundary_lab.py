"""Green-built Floyd functions and boundary convergence experiments.

``build_lemma1_function`` turns a Green profile into the table
``f(n) = 1 / (n^3 g(e, B_{n+M}))``. The experiments sample trajectories and
compare directly computed ``d_f`` Cauchy tails against the step majorant
``4 X_k f(X_k) + 2 (M+1) f(X_k)`` and, for walks with linear speed, against
the ``tau`` majorant.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FloydWalkError, HypothesisFailure, NotConverged
from .floyd_metric import FloydFunction, FloydMetric, check_floyd_axioms, tail_sums, tau_array, tau_series_total
from .graph_core import GraphOracle, RegularTree
from .green_spectral import GREEN_CONVENTION, green_ball_profile
from .walk_kernels import Kernel, Trajectory, sample_trajectory


def lambda_star(eps0: float, K: int) -> float:
    return eps0 ** 2 / (8 * (K + 1 + eps0 ** 2))


@dataclass
class Lemma1Function:
    M: int
    table: np.ndarray   # table[n] = f(n), n = 0..n_max; table[0] = table[1]
    eps0: float
    K: int
    lambda_star: float
    g_source: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return len(self.table) - 1

    def ratios(self) -> np.ndarray:
        return self.table[1:] / self.table[:-1]

    def floyd(self, extend: bool = True) -> FloydFunction:
        return FloydFunction.from_table(self.table, self.lambda_star, "lemma1", self.M, extend)

    def describe(self) -> dict:
        r = self.ratios()
        return {"M": self.M, "n_max": self.n_max, "eps0": self.eps0, "K": self.K,
                "lambda_star": self.lambda_star, "min_ratio": float(r.min()),
                "g_source": self.g_source, "convention": GREEN_CONVENTION}

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# n f(n) M={self.M} eps0={self.eps0!r} K={self.K} "
                     f"lambda_star={self.lambda_star!r}\n")
            for n, v in enumerate(self.table.tolist()):
                fh.write(f"{n} {v!r}\n")

    @classmethod
    def read(cls, path) -> "Lemma1Function":
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("# n f(n)"):
                raise ValueError("missing Lemma-1 table header")
            meta = dict(tok.split("=", 1) for tok in header.split()[3:])
            rows = [line.split() for line in fh if line.strip() and not line.startswith("#")]
        ns = [int(r[0]) for r in rows]
        if ns != list(range(len(ns))):
            raise ValueError("table rows must be n = 0, 1, 2, ... in order")
        table = np.array([float(r[1]) for r in rows])
        return cls(int(meta["M"]), table, float(meta["eps0"]), int(meta["K"]),
                   float(meta["lambda_star"]), {"method": "file"})


def lemma1_table(ball_green: np.ndarray) -> np.ndarray:
    """``ball_green[n] = g(e, B_{n+M})`` to ``f(0..n_max)`` with ``f(0) = f(1)``."""
    n = np.arange(1, len(ball_green), dtype=float)
    f = 1.0 / (n ** 3 * ball_green[1:])
    return np.concatenate([[f[0]], f])


def build_lemma1_function(kernel: Kernel, n_max: int = 1000, margin: int = None,
                          tol: float = 1e-9, mc_paths: int = 0, seed: int = 0) -> Lemma1Function:
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    cert = kernel.certificates()
    M = cert.M
    prof = green_ball_profile(kernel, n_max, M, margin=margin, tol=tol, mc_paths=mc_paths, seed=seed)
    if not prof.converged:
        raise NotConverged(f"Green profile not converged at n_max={n_max} "
                           f"(relative change {prof.max_rel_change:.3g})")
    table = lemma1_table(prof.ball_green)
    lam = lambda_star(cert.eps0, cert.K)
    out = Lemma1Function(M, table, cert.eps0, cert.K, lam, prof.describe())
    ratios = out.ratios()
    if np.any(np.diff(table) > 0) or np.any(table <= 0):
        raise FloydWalkError("Lemma-1 table is not positive and non-increasing",
                             code="boundary_lab.lemma1_monotone")
    worst = int(np.argmin(ratios))
    if ratios[worst] < lam:
        raise FloydWalkError(f"ratio f({worst + 1})/f({worst}) = {ratios[worst]:.6g} below "
                             f"lambda* = {lam:.6g}; kernel certificates are inconsistent",
                             code="boundary_lab.lemma1_ratio")
    check_floyd_axioms(out.floyd(extend=False), n_max).raise_if_failed()
    return out


# ---- step quantities --------------------------------------------------------
def xk_sequence(traj, M: int) -> np.ndarray:
    levels = traj.levels if isinstance(traj, Trajectory) else np.asarray(traj)
    return np.maximum(np.asarray(levels, dtype=np.int64) - M, 0)


@dataclass
class GromovCheck:
    steps: int
    violations: int
    first_violation: int
    strict: bool

    @property
    def passed(self) -> bool:
        return self.violations == 0


def gromov_lower_bound_check(traj: Trajectory, M: int, strict: bool = True) -> GromovCheck:
    """``Z_k ^ Z_{k+1} >= X_k`` for every step, in exact integer arithmetic.

    Compared as ``2 (Z_k ^ Z_{k+1}) >= 2 X_k``. With ``strict=False`` (a
    user-chosen ``M`` below the true range) violations are counted only.
    """
    lhs = traj.gromov2()
    rhs = 2 * xk_sequence(traj, M)[:-1]
    bad = np.flatnonzero(lhs < rhs)
    first = int(bad[0]) if bad.size else -1
    report = GromovCheck(len(lhs), int(bad.size), first, strict)
    if strict and bad.size:
        raise FloydWalkError(f"Gromov lower bound fails at step {first}: range certificate "
                             f"M={M} is too small", code="boundary_lab.gromov_bound")
    return report


# ---- d_f Cauchy tails -------------------------------------------------------
def _tree_df(g: RegularTree, T: np.ndarray, u, v) -> float:
    a = g.lca_level(u, v)
    return 2.0 * T[a] - T[g.level(u)] - T[g.level(v)]


def suffix_diameters_tree(g, T: np.ndarray, positions, grid) -> np.ndarray:
    """``sup_{m <= j < k <= N} d_f(Z_j, Z_k)`` for ``m`` in ``grid``.

    ``d_f`` is a tree metric, so the diameter of ``S + {p}`` is attained by
    ``p`` and an endpoint of the diameter of ``S``; endpoints are updated
    while the suffix grows.
    """
    want = {int(m): i for i, m in enumerate(grid)}
    out = np.zeros(len(grid))
    N = len(positions) - 1
    a = b = positions[N]
    diam = 0.0
    for k in range(N, -1, -1):
        p = positions[k]
        if k < N and p != a and p != b:
            da, db = _tree_df(g, T, p, a), _tree_df(g, T, p, b)
            if da > diam and da >= db:
                b, diam = p, da
            elif db > diam:
                a, diam = p, db
        if k in want:
            out[want[k]] = diam
    return out


def suffix_diameters_general(metric: FloydMetric, positions, grid, max_points: int = 60):
    """Same profile from a thinned point set via truncated d_f; returns (profile, all_converged)."""
    N = len(positions) - 1
    idx = np.unique(np.linspace(0, N, min(max_points, N + 1)).astype(int))
    pts = [positions[i] for i in idx]
    D = np.zeros((len(pts), len(pts)))
    ok = True
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            val, conv = metric.distance(pts[i], pts[j])
            ok &= bool(conv)
            D[i, j] = D[j, i] = val
    out = np.array([D[np.ix_(idx >= m, idx >= m)].max() if np.sum(idx >= m) > 1 else 0.0
                    for m in grid])
    return out, ok


@dataclass
class TrajectoryDiagnostics:
    stream: int
    X: np.ndarray
    xf_partial: np.ndarray
    f_partial: np.ndarray
    grid: np.ndarray
    majorant_tail: np.ndarray
    cauchy_tail: np.ndarray
    df_converged: bool
    dominated: bool
    monotone: bool

    def series(self) -> float:
        return float(self.xf_partial[-1])


@dataclass
class ConvergenceDiagnostics:
    trajectories: list
    series_mean: float
    series_stderr: float
    series_bound: float
    verdict_fraction: float
    tol: float
    m_verdict: int
    excluded: int
    table_extended: bool
    all_dominated: bool
    all_monotone: bool
    N: int
    M: int

    @property
    def series_ok(self) -> bool:
        return self.series_mean <= self.series_bound + 3 * self.series_stderr

    def summary(self) -> dict:
        return {"trials": len(self.trajectories), "N": self.N, "M": self.M,
                "series_mean": self.series_mean, "series_stderr": self.series_stderr,
                "series_bound": self.series_bound, "series_ok": self.series_ok,
                "verdict_fraction": self.verdict_fraction, "tol": self.tol,
                "m_verdict": self.m_verdict, "excluded_nonconverged": self.excluded,
                "table_extended": self.table_extended, "all_dominated": self.all_dominated,
                "all_monotone": self.all_monotone,
                "majorant": "sum_{k>=m} 4 X_k f(X_k) + 2 (M+1) f(X_k)"}

    def write_csv(self, fh) -> None:
        fh.write("# d_f in Floyd-metric units; tails are sup over m <= j < k <= N\n")
        fh.write("stream,m,majorant_tail,cauchy_tail\n")
        for t in self.trajectories:
            for m, a, c in zip(t.grid.tolist(), t.majorant_tail.tolist(), t.cauchy_tail.tolist()):
                fh.write(f"{t.stream},{m},{a!r},{c!r}\n")


def _grid(N: int, points: int = 21) -> np.ndarray:
    return np.unique(np.linspace(0, N, points).astype(int))


def _df_for(kernel, f, R):
    g = kernel.g
    if isinstance(g, RegularTree):
        T = tail_sums(f, R + 1)
        return lambda pos, grid: (suffix_diameters_tree(g, T, pos, grid), True)
    metric = FloydMetric(g, f, R)
    return lambda pos, grid: suffix_diameters_general(metric, pos, grid)


def theorem1_experiment(kernel: Kernel, f: Lemma1Function, trials: int = 200, N: int = 2000,
                        seed: int = 0, start=None, tol: float = 0.05, M: int = None,
                        grid_points: int = 21, df_radius: int = None) -> ConvergenceDiagnostics:
    g = kernel.g
    start = g.base if start is None else start
    M = f.M if M is None else M
    strict = M >= kernel.M
    ff = f.floyd(extend=True)
    grid = _grid(N, grid_points)
    m_verdict = N // 2
    if m_verdict not in grid:
        grid = np.unique(np.append(grid, m_verdict))
    trajs = [sample_trajectory(kernel, start, N, seed, stream=t) for t in range(trials)]
    top = max(int(tr.levels.max()) for tr in trajs)
    extended = top > f.n_max
    fvals = ff.values(top + M + 1)
    df_tails = _df_for(kernel, ff, df_radius or top + 2)
    out = []
    for t, tr in enumerate(trajs):
        gromov_lower_bound_check(tr, M, strict=strict)
        X = xk_sequence(tr, M)
        fX = fvals[X]
        xf = np.cumsum(X[1:] * fX[1:])
        fs = np.cumsum(fX[1:])
        terms = (4 * X[:-1] + 2 * (M + 1)) * fX[:-1]
        tails = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])
        maj = tails[grid]
        cauchy, ok = df_tails(tr.positions, grid)
        slack = 1e-12 * max(1.0, maj[0])
        out.append(TrajectoryDiagnostics(t, X, xf, fs, grid, maj, cauchy, ok,
                                         bool(np.all(cauchy <= maj + slack)),
                                         bool(np.all(np.diff(cauchy) <= 0) and np.all(np.diff(maj) <= 0))))
    series = np.array([d.series() for d in out])
    usable = [d for d in out if d.df_converged]
    iv = int(np.flatnonzero(grid == m_verdict)[0])
    frac = float(np.mean([d.majorant_tail[iv] < tol for d in usable])) if usable else 0.0
    bound = f.eps0 ** (-g.level(start)) * math.pi ** 2 / 6
    se = float(series.std(ddof=1) / math.sqrt(len(series))) if len(series) > 1 else 0.0
    return ConvergenceDiagnostics(out, float(series.mean()), se, bound, frac, tol, m_verdict,
                                  len(out) - len(usable), extended,
                                  all(d.dominated for d in usable), all(d.monotone for d in out), N, M)


# ---- tau majorant under linear speed ----------------------------------------
@dataclass
class SpeedReport:
    c0: list
    n0: int
    partial_sums: list      # sum_{k<N} tau(floor(Z_k ^ Z_{k+1})) per trajectory
    majorants: list         # prefix + c_1^{-1} sum_n tau(n) per trajectory
    tau_total: float
    verdict: str

    def describe(self) -> dict:
        return {"c0_min": min(self.c0), "c0_median": float(np.median(self.c0)), "n0": self.n0,
                "partial_sum_max": max(self.partial_sums), "tau_total": self.tau_total,
                "majorant_min": min(self.majorants), "verdict": self.verdict,
                "all_dominated": all(p <= m for p, m in zip(self.partial_sums, self.majorants))}


def rho_speed_convergence_experiment(kernel: Kernel, f: FloydFunction, trials: int = 50,
                                     N: int = 2000, seed: int = 0, start=None) -> SpeedReport:
    if not f.n_f_summable:
        raise HypothesisFailure("sum n f(n) must be finite for this experiment",
                                code="boundary_lab.n_f_not_summable")
    g = kernel.g
    start = g.base if start is None else start
    n0 = N // 4
    n = np.arange(n0, N, dtype=float)
    total = tau_series_total(f)
    c0s, sums, majs = [], [], []
    for t in range(trials):
        tr = sample_trajectory(kernel, start, N, seed, stream=t)
        G2 = tr.gromov2()
        n_safe = np.maximum(n, 1.0)
        c0 = 0.9 * float(np.min(G2[n0:] / 2.0 / n_safe))
        tau = tau_array(f, int(G2.max()) // 2 + 1)
        vals = tau[G2 // 2]
        c0s.append(c0)
        sums.append(float(math.fsum(vals)))
        c1 = min(c0, 1.0)
        majs.append(float(math.fsum(vals[:n0])) + (total / c1 if c1 > 0 else math.inf))
    verdict = "pass" if min(c0s) > 0 else "hypothesis evidence fails"
    return SpeedReport(c0s, n0, sums, majs, float(total), verdict)


def diagnostics_json(diag: ConvergenceDiagnostics) -> str:
    return json.dumps(diag.summary(), indent=2, sort_keys=True)
