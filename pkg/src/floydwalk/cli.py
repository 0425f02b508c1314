"""Command-line entry point: ``floydwalk VERB [--config PATH] [--seed N] [--threads N] [--out DIR]``.

Exit codes: 0 success, 2 usage, 3 hypothesis evidence fails, 4 internal
error, 5 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .boundary_lab import Lemma1Function, build_lemma1_function, rho_speed_convergence_experiment, theorem1_experiment
from .config import VERBS, ExperimentConfig, config_from_dict
from .dirichlet_lab import (EventSpec, default_partition, dirichlet_convergence_scan, event_probability_scan,
                            harmonic_measure, scan_csv, tree_partition, tree_ray)
from .errors import ConfigError, FloydWalkError, HypothesisFailure, NotConverged
from .floyd_metric import (FloydFunction, FloydMetric, check_floyd_axioms, check_inequality1, nu_array,
                           tail_sums, tau_array)
from .graph_core import FreeProduct, HalfLine, Lattice, RegularTree, ball, complete_graph, write_edge_list
from .green_spectral import (GREEN_CONVENTION, corollary_hypothesis_check, default_R_list, green_ball_profile,
                             green_closed_form_tree, green_exact, transience_check)
from .walk_kernels import RNG_ALGORITHM, Kernel, sample_trajectory, step_stats, stream_rng

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_INTERNAL, EXIT_CONFIG = 0, 2, 3, 4, 5
OUT_ENV = "FLOYDWALK_OUT"

CONVENTIONS = {
    "green": GREEN_CONVENTION,
    "level": "|v| = d(e, v), graph distance to the base vertex",
    "floyd_edge_length": "f(min(|x|, |y|)) for the edge [x, y]",
    "rng": RNG_ALGORITHM,
}


def build_graph(spec: dict):
    fam = spec["family"]
    if fam == "tree":
        return RegularTree(spec["q"])
    if fam == "lattice":
        return Lattice(spec["d"])
    if fam == "half_line":
        return HalfLine()
    if fam == "free_product":
        return FreeProduct(tuple(spec["orders"]))
    return complete_graph(spec["n"])


def build_kernel(spec: dict, g) -> Kernel:
    try:
        return Kernel(g, spec["rule"], hold=spec.get("hold", 0.5), b=spec.get("b", 0.75),
                      weights=spec.get("weights"))
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None


def write_csv(path: Path, comment: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


class Context:
    """Shared state for one CLI run; lazily built objects are guarded by a lock."""

    def __init__(self, cfg: ExperimentConfig, out: Path, threads: int):
        self.cfg = cfg
        self.p = cfg.params
        self.out = out
        self.threads = threads
        self.g = build_graph(cfg.graph)
        self.kernel = build_kernel(cfg.kernel, self.g)
        self.warnings = []
        self._lock = threading.Lock()
        self._lemma1 = None
        self._stats = None

    def lemma1(self) -> Lemma1Function:
        with self._lock:
            if self._lemma1 is None:
                n_max = self.cfg.floyd.get("n_max", self.p["n_max"])
                self._lemma1 = build_lemma1_function(self.kernel, n_max, mc_paths=self.p["mc_paths"],
                                                     seed=self.cfg.seed)
            return self._lemma1

    def floyd(self) -> FloydFunction:
        f = self.cfg.floyd
        if f["family"] == "geometric":
            return FloydFunction.geometric(f["a"])
        if f["family"] == "polynomial":
            return FloydFunction.polynomial(f["s"])
        if f["family"] == "lemma1":
            return self.lemma1().floyd(extend=True)
        return FloydFunction.from_table(f["values"], f["lam"], extend=True)

    def stats(self):
        with self._lock:
            if self._stats is None:
                self._stats = step_stats(self.kernel, trials=min(self.p["trials"], 50), N=self.p["N"],
                                         seed=self.cfg.seed)
            return self._stats


# ---- verbs --------------------------------------------------------------------
def run_graph(ctx: Context) -> dict:
    g = ctx.g
    R = _explicit_radius(g, ctx.p["radius"])
    b = ball(g, R)
    write_edge_list(b, ctx.out / "ball_edges.txt")
    sizes = b.sphere_sizes()
    write_csv(ctx.out / "graph_spheres.csv", "sphere sizes |S_k| and ball sizes |B_k|; k in graph distance",
              ["k", "sphere", "ball"], [(k, s, int(np.sum(sizes[:k + 1]))) for k, s in enumerate(sizes)])
    return {"graph": g.describe(), "radius": R, "vertices": len(b), "exit_edges": int(b.exits.sum())}


def _explicit_radius(g, R, cap=200_000):
    """Largest radius <= R whose predicted ball fits under ``cap``."""
    while R > 0:
        pred = g.predicted_ball_size(R)
        if pred is None or pred <= cap:
            break
        R -= 1
    return R


def run_floyd(ctx: Context) -> dict:
    f = ctx.floyd()
    n_max = ctx.p["n_max"]
    rep = check_floyd_axioms(f, n_max)
    n = np.arange(n_max + 1)
    write_csv(ctx.out / "floyd.csv", "f(n), tail T(n)=sum_{i>=n} f(i), nu(n)=4nf(n)+2T(n), "
              "tau(n)=10T(floor(n/2)+1); dimensionless",
              ["n", "f", "T", "nu", "tau"],
              zip(n.tolist(), f.values(n_max), tail_sums(f, n_max), nu_array(f, n_max), tau_array(f, n_max)))
    R = _explicit_radius(ctx.g, ctx.p["radius"])
    b = ball(ctx.g, R)
    rng = stream_rng(ctx.cfg.seed, 31)
    metric = FloydMetric(ctx.g, f, R)
    idx = rng.integers(len(b), size=(ctx.p["pairs"], 2))
    viol, nonconv = 0, 0
    for i, j in idx.tolist():
        r = check_inequality1(ctx.g, f, b.vertices[i], b.vertices[j], R, metric)
        viol += not r.passed
        nonconv += not r.converged
    if not rep.passed:
        raise HypothesisFailure(f"Floyd axioms fail: {rep.first_violation}")
    return {"floyd": f.describe(), "axioms_passed": rep.passed, "worst_ratio": rep.worst_ratio,
            "worst_ratio_at": rep.worst_ratio_at, "inequality1_pairs": ctx.p["pairs"],
            "inequality1_violations": viol, "d_f_nonconverged": nonconv, "radius": R}


def run_green(ctx: Context) -> dict:
    k = ctx.kernel
    tv = transience_check(k)
    n_max = min(ctx.p["n_max"], 200)
    prof = green_ball_profile(k, n_max, k.M, mc_paths=ctx.p["mc_paths"], seed=ctx.cfg.seed)
    spheres = prof.sphere_green
    write_csv(ctx.out / "green_profile.csv", f"expected visit counts; {GREEN_CONVENTION}",
              ["k", "g_e_S_k", "g_e_B_k"], zip(range(len(spheres)), spheres, np.cumsum(spheres)))
    out = {"transience": tv.describe(), "profile": prof.describe()}
    g = ctx.g
    if isinstance(g, RegularTree) and k.rule == "simple_rw" and g.q >= 2:
        rows = []
        for d in range(6):
            v = (d, 0)
            ex = green_exact(k, g.base, v, 30).value
            cf = green_closed_form_tree(g.q, d)
            rows.append((d, ex, cf, abs(ex - cf) / cf))
        write_csv(ctx.out / "green_tree_check.csv", "g(e,v) truncated at R=30 vs closed form",
                  ["level", "exact_truncated", "closed_form", "rel_err"], rows)
        out["closed_form_max_rel_err"] = max(r[3] for r in rows)
    return out


def run_spectral(ctx: Context) -> dict:
    R_list = ctx.p["R_list"] or list(default_R_list(ctx.kernel))
    chk = corollary_hypothesis_check(ctx.kernel, R_list, seed=ctx.cfg.seed)
    seq = chk["rho_lt_1"]["radius_sequence"]
    write_csv(ctx.out / "spectral.csv", "leading eigenvalue of P restricted to B_R (absorbing outside)",
              ["R", "rho_R"], seq)
    verdicts = {k: v["verdict"] for k, v in chk.items()}
    out = {"hypotheses": _jsonable(chk), "verdicts": verdicts}
    failed = [k for k, v in verdicts.items() if v == "fails"]
    if failed:
        raise HypothesisFailure(f"hypothesis evidence fails: {', '.join(failed)}", evidence=out)
    return out


def run_walk(ctx: Context) -> dict:
    st = ctx.stats()
    tr = sample_trajectory(ctx.kernel, ctx.g.base, ctx.p["N"], ctx.cfg.seed, 0)
    with open(ctx.out / "trajectory_0.csv", "w") as fh:
        tr.to_csv(ctx.g, fh)
    write_csv(ctx.out / "step_tails.csv", "phi(n) = sup_v sigma_v([n, inf)); step lengths in graph distance",
              ["n", "phi"], enumerate(st.phi.tolist()))
    return st.describe()


def run_lemma1(ctx: Context) -> dict:
    L = ctx.lemma1()
    L.write(ctx.out / "lemma1_table.txt")
    return L.describe()


def run_theorem1(ctx: Context) -> dict:
    L = ctx.lemma1()
    diag = theorem1_experiment(ctx.kernel, L, ctx.p["trials"], ctx.p["N"], ctx.cfg.seed, tol=ctx.p["tol"])
    with open(ctx.out / "theorem1.csv", "w") as fh:
        diag.write_csv(fh)
    out = diag.summary()
    if diag.table_extended:
        ctx.warnings.append("theorem1: trajectories left the Lemma-1 table; geometric envelope used")
    f = ctx.floyd()
    if f.n_f_summable:
        out["speed_experiment"] = rho_speed_convergence_experiment(
            ctx.kernel, f, min(ctx.p["trials"], 50), ctx.p["N"], ctx.cfg.seed).describe()
    return out


def run_dirichlet(ctx: Context, spectral: dict = None) -> dict:
    if spectral is None:
        spectral = run_spectral(ctx)
    g, k, p = ctx.g, ctx.kernel, ctx.p
    st = ctx.stats()
    spec = EventSpec.from_stats(st, horizon=p["horizon"])
    starts = _level_vertices(g, p["event_levels"])
    scan = event_probability_scan(k, spec, starts, p["event_trials"], ctx.cfg.seed)
    write_csv(ctx.out / "events.csv", "P_v(A_v) Monte Carlo with 95% Wilson intervals; level = |v|",
              ["level", "trials", "p_hat", "ci_lo", "ci_hi", "c2", "c3", "c4", "c5", "skeleton_violations"],
              [(e.level, e.trials, e.p_hat, e.ci[0], e.ci[1], e.per_condition["c2"], e.per_condition["c3"],
                e.per_condition["c4"], e.per_condition["c5"], e.skeleton_violations)
               for e in scan["estimates"]])
    out = {"events": {"spec": scan["spec"], "non_decreasing": scan["non_decreasing"],
                      "p_hat": {e.level: e.p_hat for e in scan["estimates"]},
                      "skeleton_violations": sum(e.skeleton_violations for e in scan["estimates"])}}
    f = ctx.floyd()
    r_list = [r * f(0) for r in p["r_list"]]  # config radii are in units of f(0)
    if isinstance(g, RegularTree):
        coarse = tree_partition(g, p["R_exit"], 1, f)
        hm = harmonic_measure(k, g.base, coarse, p["paths"], seed=ctx.cfg.seed)
        hm4 = harmonic_measure(k, (4, 0), coarse, p["paths"], seed=ctx.cfg.seed, stream=1)
        write_csv(ctx.out / "harmonic.csv", "first-exit cell frequencies on S_R_exit; cells = depth-1 subtrees",
                  ["start", "cell", "weight", "stderr"],
                  [(g.encode(h.start), c, h.weights[c], h.stderr[c]) for h in (hm, hm4)
                   for c in range(coarse.n_cells)])
        fine = tree_partition(g, p["R_exit"], p["cell_depth"], f)
        ds = dirichlet_convergence_scan(k, f, tree_ray(g, p["ray_depths"]), r_list, fine,
                                        p["paths"], ctx.cfg.seed, spec)
        with open(ctx.out / "dirichlet_scan.csv", "w") as fh:
            scan_csv(ds, fh)
        out["harmonic_root"] = hm.describe(g)
        out["harmonic_depth4"] = hm4.describe(g)
        out["scan"] = {"non_decreasing": ds["non_decreasing"], "rows": ds["rows"], "skeleton": ds["skeleton"]}
    else:
        part = default_partition(g, p["R_exit"], f, r_list[0])
        hm = harmonic_measure(k, g.base, part, p["paths"], seed=ctx.cfg.seed)
        write_csv(ctx.out / "harmonic.csv", "first-exit cell frequencies on S_R_exit",
                  ["start", "cell", "weight", "stderr"],
                  [(g.encode(g.base), c, hm.weights[c], hm.stderr[c]) for c in range(part.n_cells)])
        out["harmonic_root"] = hm.describe(g)
    return out


def _level_vertices(g, levels):
    out = []
    for L in levels:
        v = g.base
        while g.level(v) < L:
            v = next(w for w in g.neighbors(v) if g.level(w) > g.level(v))
        out.append(v)
    return out


SINGLE = {"graph": run_graph, "floyd": run_floyd, "green": run_green, "spectral": run_spectral,
          "walk": run_walk, "lemma1": run_lemma1, "theorem1": run_theorem1, "dirichlet": run_dirichlet}


def _guard(fn, *args):
    try:
        return "ok", fn(*args)
    except HypothesisFailure as exc:
        return "hypothesis_fails", {"code": exc.code, "message": str(exc), "evidence": exc.evidence}
    except NotConverged as exc:
        return "not_converged", {"code": exc.code, "message": str(exc)}


def _exit_for(statuses) -> int:
    statuses = set(statuses)
    if "hypothesis_fails" in statuses:
        return EXIT_HYPOTHESIS
    if "not_converged" in statuses:
        return EXIT_INTERNAL
    return EXIT_OK


def run_verify_all(ctx: Context) -> dict:
    first = ["graph", "floyd", "green", "spectral", "walk"]
    with ThreadPoolExecutor(max_workers=max(1, ctx.threads)) as pool:
        futures = [pool.submit(_guard, SINGLE[name], ctx) for name in first]
        done = [fu.result() for fu in futures]  # fixed order
    stages = dict(zip(first, done))
    if stages["green"][0] == "ok":
        stages["lemma1"] = _guard(run_lemma1, ctx)
        stages["theorem1"] = _guard(run_theorem1, ctx) if stages["lemma1"][0] == "ok" else \
            ("skipped", {"reason": "lemma1 unavailable"})
    else:
        stages["lemma1"] = stages["theorem1"] = ("skipped", {"reason": "transience required"})
    if stages["spectral"][0] == "ok":
        stages["dirichlet"] = _guard(run_dirichlet, ctx, stages["spectral"][1])
    else:
        stages["dirichlet"] = ("skipped", {"reason": "spectral hypotheses fail"})
    return {name: {"status": s, **r} for name, (s, r) in stages.items()}


def run_command(verb: str, cfg: ExperimentConfig, out_dir=None, threads: int = None):
    """Run ``verb``; returns ``(exit_code, report)`` and writes ``report.json`` plus CSVs."""
    if verb not in VERBS:
        raise ConfigError(f"unknown verb {verb!r}")
    out = Path(out_dir or os.environ.get(OUT_ENV) or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    report = {"verb": verb, "config_hash": cfg.hash(), "config": cfg.to_dict(), "version": __version__,
              "conventions": CONVENTIONS}
    code = EXIT_OK
    try:
        ctx = Context(cfg, out, threads)
        if verb == "verify-all":
            results = run_verify_all(ctx)
        else:
            status, res = _guard(SINGLE[verb], ctx)
            results = {verb: {"status": status, **res}}
        code = _exit_for(r["status"] for r in results.values())
        report["results"] = results
        report["warnings"] = ctx.warnings
    except ConfigError:
        raise
    except FloydWalkError as exc:
        code = EXIT_INTERNAL
        report["error"] = {"code": exc.code, "message": str(exc)}
    except Exception as exc:  # surfaced, never swallowed silently
        code = EXIT_INTERNAL
        report["error"] = {"code": "floydwalk.internal", "message": f"{type(exc).__name__}: {exc}"}
    report["status"] = {EXIT_OK: "ok", EXIT_HYPOTHESIS: "hypothesis evidence fails",
                        EXIT_INTERNAL: "internal error" if "error" in report else "not converged"}[code]
    report["exit_code"] = code
    report["wall_clock_s"] = time.perf_counter() - t0
    with open(out / "report.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code, report


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if x is None or isinstance(x, (str, int, bool)):
        return x
    return repr(x)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floydwalk", description="Random walks and Floyd boundaries.")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", metavar="PATH", help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    ap.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.config:
            raw = json.loads(Path(args.config).read_text())
        else:
            raw = {"graph": {"family": "tree", "q": 2}}
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = config_from_dict(raw)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        code, report = run_command(args.verb, cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.verb}: {report['status']} (exit {code}); report at "
          f"{Path(args.out or os.environ.get(OUT_ENV) or cfg.out) / 'report.json'}")
    if "error" in report:
        print(f"error [{report['error']['code']}]: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
