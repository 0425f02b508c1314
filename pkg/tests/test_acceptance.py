"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from floydwalk.boundary_lab import build_lemma1_function, theorem1_experiment
from floydwalk.cli import EXIT_HYPOTHESIS, run_command
from floydwalk.config import config_from_dict
from floydwalk.dirichlet_lab import (EventSpec, dirichlet_convergence_scan, event_probability_scan,
                                     harmonic_measure, tree_partition, tree_ray)
from floydwalk.floyd_metric import (FloydFunction, FloydMetric, check_floyd_axioms, check_inequality1,
                                    nu_array, tau_array, tau_partial_sums)
from floydwalk.graph_core import Lattice, RegularTree, ball
from floydwalk.green_spectral import (green_closed_form_tree, green_exact, green_monte_carlo,
                                      spectral_radius_estimate)
from floydwalk.walk_kernels import Kernel, step_stats

TREE = RegularTree(2)
SRW = Kernel(TREE)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def lemma1_small():
    return build_lemma1_function(SRW, n_max=1000)


def test_criterion_01_floyd_axioms(verdict):
    lemma = build_lemma1_function(SRW, n_max=10_000).floyd(extend=False)
    fams = {f"geometric({a})": (FloydFunction.geometric(a), a) for a in (0.3, 0.5, 0.9)}
    fams["polynomial(2.5)"] = (FloydFunction.polynomial(2.5), 2 ** -2.5)
    fams["polynomial(3)"] = (FloydFunction.polynomial(3), 0.125)
    t0 = time.perf_counter()
    reports = {name: check_floyd_axioms(f, 10_000) for name, (f, _) in fams.items()}
    reports["lemma1"] = check_floyd_axioms(lemma, 10_000)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports.values()) and elapsed < 1.0
    for name, (_, worst) in fams.items():
        ok &= abs(reports[name].worst_ratio - worst) <= 1e-12
    ok &= reports["polynomial(3)"].worst_ratio_at == 0
    verdict(1, ok, f"worst ratios {{{', '.join(f'{k}: {r.worst_ratio:.12g}' for k, r in reports.items())}}}, "
                   f"{elapsed:.3f} s")


def test_criterion_02_green_oracle(verdict):
    t0 = time.perf_counter()
    rel = [abs(green_exact(SRW, TREE.base, (d, 0), 30).value / green_closed_form_tree(2, d) - 1)
           for d in range(6)]
    z = []
    for d in range(6):
        est = green_monte_carlo(SRW, TREE.base, (d, 0), 100_000, 1000, seed=d)
        z.append(abs(est.value - green_closed_form_tree(2, d)) / est.stderr)
    elapsed = time.perf_counter() - t0
    ok = max(rel) < 1e-6 and max(z) <= 3 and elapsed < 120
    verdict(2, ok, f"max rel err {max(rel):.2e}, max MC z-score {max(z):.2f}, {elapsed:.1f} s")


def test_criterion_03_lemma1_bound(verdict):
    t0 = time.perf_counter()
    L = build_lemma1_function(SRW, n_max=1000)
    elapsed = time.perf_counter() - t0
    ratios = L.ratios()[:51]
    n = np.arange(1, 1001, dtype=float)
    rel = np.max(np.abs(L.table[1:] * n ** 3 * (3 * n + 5) - 1))
    ok = (L.eps0, L.K, L.M) == (1 / 3, 1, 1) and abs(L.lambda_star - 1 / 152) < 1e-15
    ok &= bool(ratios.min() >= 1 / 152) and rel < 1e-9 and elapsed < 60
    verdict(3, ok, f"min ratio n<=50 {ratios.min():.6g} vs 1/152, closed-form rel err {rel:.2e}, {elapsed:.1f} s")


def test_criterion_04_inequality1(verdict, lemma1_small):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    cases = [(TREE, FloydFunction.geometric(0.5)), (TREE, lemma1_small.floyd()),
             (Lattice(3), FloydFunction.geometric(0.5))]
    bad_nu = bad_tau = checked = 0
    for g, f in cases:
        verts = ball(g, 15).vertices
        metric = FloydMetric(g, f, 15)
        for _ in range(1000):
            i, j = rng.integers(0, len(verts), 2)
            rep = check_inequality1(g, f, verts[i], verts[j], 15, metric)
            bad_nu += not rep.nu_ok
            bad_tau += not rep.tau_ok
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = bad_nu == 0 and bad_tau == 0 and elapsed < 120
    verdict(4, ok, f"{checked} pairs, nu violations {bad_nu}, tau violations {bad_tau}, {elapsed:.1f} s")


def test_criterion_05_theorem1(verdict, lemma1_small):
    t0 = time.perf_counter()
    try:
        d = theorem1_experiment(SRW, lemma1_small, trials=200, N=2000, seed=0)
        gromov_ok = True
    except Exception as exc:  # the strict Gromov check raises on the first bad step
        verdict(5, False, f"experiment raised {exc}")
    elapsed = time.perf_counter() - t0
    s = d.summary()
    ok = gromov_ok and s["series_ok"] and s["m_verdict"] == 1000 and s["verdict_fraction"] >= 0.95
    ok &= s["all_dominated"] and elapsed < 600
    verdict(5, ok, f"(a) Gromov bound held on every step, (b) series mean {s['series_mean']:.4f} "
                   f"+/- {s['series_stderr']:.4f} vs pi^2/6, (c) fraction {s['verdict_fraction']:.3f}, "
                   f"(d) dominated {s['all_dominated']} ({s['excluded_nonconverged']} excluded), {elapsed:.1f} s")


def test_criterion_06_spectral(verdict):
    t0 = time.perf_counter()
    tree = spectral_radius_estimate(SRW, [5, 10, 15, 20, 40, 80])
    seq = dict(tree.radius_sequence)
    vals = [v for _, v in tree.radius_sequence]
    lat = spectral_radius_estimate(Kernel(Lattice(2)), [40])
    elapsed = time.perf_counter() - t0
    ok = abs(seq[15] - 2 * math.sqrt(2) / 3) < 0.03 and all(b > a for a, b in zip(vals, vals[1:]))
    ok &= lat.rho_hat >= 0.99 and elapsed < 180
    verdict(6, ok, f"tree rho(R=15) {seq[15]:.5f}, sequence {[round(v, 5) for v in vals]}, "
                   f"lattice d=2 rho(R=40) {lat.rho_hat:.5f}, {elapsed:.1f} s")


def test_criterion_07_tau_lemma(verdict, lemma1_small):
    fams = [FloydFunction.geometric(a) for a in (0.3, 0.5, 0.9)]
    fams += [FloydFunction.polynomial(s) for s in (1.5, 2.5, 3)] + [lemma1_small.floyd()]
    t0 = time.perf_counter()
    worst = []
    for f in fams:
        nu, tau = nu_array(f, 10_000)[1:], tau_array(f, 10_000)[1:]
        worst.append(int(np.sum(nu > tau)))
    ps = tau_partial_sums(FloydFunction.geometric(0.5), 400)
    inc = float(np.max(np.diff(ps)[199:]))
    elapsed = time.perf_counter() - t0
    ok = sum(worst) == 0 and inc < 1e-8 and elapsed < 1.0
    verdict(7, ok, f"nu>tau counts for 1<=n<=1e4 {worst}, max increment beyond N=200 {inc:.2e}, "
                   f"{elapsed:.3f} s")


def test_criterion_08_events(verdict):
    t0 = time.perf_counter()
    stats = step_stats(SRW, trials=50, N=2000, seed=0)
    spec = EventSpec.from_stats(stats, horizon=1000)
    scan = event_probability_scan(SRW, spec, [(2, 0), (4, 0), (8, 0)], trials=2000, seed=0)
    deep = event_probability_scan(SRW, spec, [(32, 0), (64, 0)], trials=2000, seed=1)
    elapsed = time.perf_counter() - t0
    p = [e.p_hat for e in scan["estimates"]]
    checked = [e for e in scan["estimates"] + deep["estimates"] if e.skeleton_checked]
    viol = sum(e.skeleton_violations for e in checked)
    ok = scan["non_decreasing"] and p[2] >= p[0] and checked and viol == 0 and elapsed < 600
    verdict(8, ok, f"P_hat at 2,4,8 = {p}; at 32,64 = {[e.p_hat for e in deep['estimates']]}; "
                   f"skeleton threshold {spec.threshold():.2f}, violations {viol} over "
                   f"{sum(e.passed for e in checked)} passing paths, {elapsed:.1f} s")


def test_criterion_09_dirichlet(verdict):
    t0 = time.perf_counter()
    f = FloydFunction.geometric(0.5)
    coarse = tree_partition(TREE, 24, 1, f)
    root = harmonic_measure(SRW, TREE.base, coarse, 3000, seed=0)
    sym = all(abs(w - 1 / 3) <= 3 * se for w, se in zip(root.weights, root.stderr))
    d4 = harmonic_measure(SRW, (4, 0), coarse, 3000, seed=0, stream=1)
    c = coarse.cell_of((4, 0))
    ruin = d4.weights[c] >= 15 / 16 - 3 * d4.stderr[c]
    fine = tree_partition(TREE, 24, 6, f)
    scan = dirichlet_convergence_scan(SRW, f, tree_ray(TREE, [2, 4, 8, 16]), [0.5 * f(0)], fine,
                                      paths=2000, seed=0)
    w = [r["weight"] for r in scan["rows"]]
    elapsed = time.perf_counter() - t0
    ok = sym and ruin and all(scan["non_decreasing"].values()) and w[-1] >= 0.95 and elapsed < 600
    verdict(9, ok, f"root weights {np.round(root.weights, 4).tolist()}, depth-4 own cell "
                   f"{d4.weights[c]:.4f}, ray weights {w}, {elapsed:.1f} s")


def test_criterion_10_negative_control(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = config_from_dict({"graph": {"family": "lattice", "d": 2},
                            "params": {"trials": 50, "N": 1000, "pairs": 100, "radius": 15}})
    code, report = run_command("verify-all", cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    res = report.get("results", {})
    gates = {k: res.get(k, {}).get("status") for k in ("green", "spectral")}
    ok = code == EXIT_HYPOTHESIS and "error" not in report and gates == {
        "green": "hypothesis_fails", "spectral": "hypothesis_fails"} and elapsed < 180
    ok &= res["green"]["code"] == "green_spectral.transience_required"
    verdict(10, ok, f"exit {code}, gates {gates}, {elapsed:.1f} s")


def test_criterion_11_reproducibility(verdict, tmp_path):
    raw = {"graph": {"family": "tree", "q": 2}, "seed": 11,
           "params": {"trials": 20, "N": 400, "event_trials": 100, "paths": 300, "n_max": 200,
                      "radius": 10, "pairs": 50}}
    codes = [run_command("verify-all", config_from_dict(raw), tmp_path / d, threads=4)[0] for d in "ab"]
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".csv", ".txt"))
    same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names]
    ok = codes == [0, 0] and len(names) >= 8 and all(same)
    verdict(11, ok, f"exit codes {codes}, {sum(same)}/{len(names)} artifact files byte-identical")
