"""Experiment configuration: strict JSON schema, canonical serialization and hashing.

Schema (all top-level keys optional except ``graph``)::

    {
      "graph":  {"family": "tree", "q": 2}          # tree | lattice(d) | half_line
                                                     # | free_product(orders) | complete(n)
      "kernel": {"rule": "simple_rw"}               # + hold | b | weights
      "floyd":  {"family": "geometric", "a": 0.5}   # polynomial(s) | lemma1(n_max)
                                                     # | custom_table(values, lam)
      "operation": null,                            # default verb when the CLI gives none
      "params": {...},                              # see PARAM_DEFAULTS
      "seed": 0,
      "out": "out"
    }
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

VERBS = ("graph", "floyd", "green", "spectral", "walk", "lemma1", "theorem1", "dirichlet", "verify-all")

GRAPH_FIELDS = {
    "tree": {"q": 2},
    "lattice": {"d": 2},
    "half_line": {},
    "free_product": {"orders": [2, 3]},
    "complete": {"n": 3},
}
KERNEL_FIELDS = {
    "simple_rw": {},
    "lazy_rw": {"hold": 0.5},
    "tree_drift": {"b": 0.75},
    "bounded_range_mixture": {"weights": [0.0, 1.0]},
}
FLOYD_FIELDS = {
    "geometric": {"a": 0.5},
    "polynomial": {"s": 3.0},
    "lemma1": {"n_max": 1000},
    "custom_table": {"values": None, "lam": None},
}
PARAM_DEFAULTS = {
    "radius": 20,          # ball radius for graph / floyd / green checks
    "trials": 200,         # trajectories per experiment
    "N": 2000,             # trajectory length
    "horizon": 1000,       # event horizon
    "paths": 2000,         # harmonic-measure paths
    "pairs": 200,          # random vertex pairs for inequality checks
    "n_max": 1000,         # Floyd / Green table range
    "R_list": None,        # spectral radii; null picks the family default
    "tol": 0.05,           # majorant-tail tolerance
    "mc_paths": 0,         # Green Monte Carlo cross-check paths
    "event_levels": [2, 4, 8, 16, 32, 64],
    "event_trials": 2000,
    "ray_depths": [2, 4, 8, 16],
    "r_list": [0.5],       # target-region radii in units of f(0)
    "R_exit": 24,
    "cell_depth": 6,
}
_INT_MIN = {"radius": 0, "trials": 1, "N": 4, "horizon": 1, "paths": 1, "pairs": 1, "n_max": 2,
            "mc_paths": 0, "event_trials": 1, "R_exit": 1, "cell_depth": 1}


@dataclass
class ExperimentConfig:
    graph: dict
    kernel: dict = field(default_factory=lambda: {"rule": "simple_rw"})
    floyd: dict = field(default_factory=lambda: {"family": "geometric", "a": 0.5})
    operation: str = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "out"

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _section(raw, name, table, key):
    if not isinstance(raw, dict):
        _fail(name, "must be an object")
    kind = raw.get(key)
    if kind not in table:
        _fail(f"{name}.{key}", f"must be one of {sorted(table)}, got {kind!r}")
    allowed = table[kind]
    extra = set(raw) - set(allowed) - {key}
    if extra:
        _fail(name, f"unknown field(s) {sorted(extra)} for {key}={kind!r}")
    out = {key: kind}
    for k, default in allowed.items():
        v = raw.get(k, default)
        if v is None:
            _fail(f"{name}.{k}", "is required")
        out[k] = v
    return out


def _check_int(path, v, lo):
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"must be an integer, got {v!r}")
    if v < lo:
        _fail(path, f"must be >= {lo}, got {v}")


def _check_num(path, v, lo=None, hi=None, lo_open=False, hi_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"must be a number, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        _fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        _fail(path, f"must be {'<' if hi_open else '<='} {hi}, got {v}")


def _validate_graph(g):
    fam = g["family"]
    if fam == "tree":
        _check_int("graph.q", g["q"], 1)
    elif fam == "lattice":
        _check_int("graph.d", g["d"], 1)
    elif fam == "free_product":
        o = g["orders"]
        if not isinstance(o, list) or len(o) < 2:
            _fail("graph.orders", "must be a list of at least two integers")
        for i, x in enumerate(o):
            _check_int(f"graph.orders[{i}]", x, 2)
    elif fam == "complete":
        _check_int("graph.n", g["n"], 2)


def _validate_kernel(k):
    if k["rule"] == "lazy_rw":
        _check_num("kernel.hold", k["hold"], 0, 1, hi_open=True)
    elif k["rule"] == "tree_drift":
        _check_num("kernel.b", k["b"], 0, 1, lo_open=True, hi_open=True)
    elif k["rule"] == "bounded_range_mixture":
        w = k["weights"]
        if not isinstance(w, list) or len(w) < 2:
            _fail("kernel.weights", "must be a list of at least two numbers")
        for i, x in enumerate(w):
            _check_num(f"kernel.weights[{i}]", x, 0)


def _validate_floyd(f):
    fam = f["family"]
    if fam == "geometric":
        _check_num("floyd.a", f["a"], 0, 1, lo_open=True, hi_open=True)
    elif fam == "polynomial":
        _check_num("floyd.s", f["s"], 1, lo_open=True)
    elif fam == "lemma1":
        _check_int("floyd.n_max", f["n_max"], 2)
    else:
        vals = f["values"]
        if not isinstance(vals, list) or len(vals) < 2:
            _fail("floyd.values", "must be a list of at least two numbers")
        for i, x in enumerate(vals):
            _check_num(f"floyd.values[{i}]", x, 0, lo_open=True)
        _check_num("floyd.lam", f["lam"], 0, 1, lo_open=True)


def _validate_params(raw):
    if not isinstance(raw, dict):
        _fail("params", "must be an object")
    extra = set(raw) - set(PARAM_DEFAULTS)
    if extra:
        _fail("params", f"unknown field(s) {sorted(extra)}")
    p = copy.deepcopy(PARAM_DEFAULTS)
    p.update(copy.deepcopy(raw))
    for k, lo in _INT_MIN.items():
        _check_int(f"params.{k}", p[k], lo)
    _check_num("params.tol", p["tol"], 0, lo_open=True)
    if p["R_list"] is not None:
        if not isinstance(p["R_list"], list) or not p["R_list"]:
            _fail("params.R_list", "must be a non-empty list or null")
        for i, x in enumerate(p["R_list"]):
            _check_int(f"params.R_list[{i}]", x, 1)
        if any(b <= a for a, b in zip(p["R_list"], p["R_list"][1:])):
            _fail("params.R_list", "must be strictly increasing")
    for name in ("event_levels", "ray_depths"):
        seq = p[name]
        if not isinstance(seq, list) or not seq:
            _fail(f"params.{name}", "must be a non-empty list")
        for i, x in enumerate(seq):
            _check_int(f"params.{name}[{i}]", x, 0)
        if any(b <= a for a, b in zip(seq, seq[1:])):
            _fail(f"params.{name}", "must be strictly increasing")
    if not isinstance(p["r_list"], list) or not p["r_list"]:
        _fail("params.r_list", "must be a non-empty list")
    for i, x in enumerate(p["r_list"]):
        _check_num(f"params.r_list[{i}]", x, 0, lo_open=True)
    if p["cell_depth"] > p["R_exit"]:
        _fail("params.cell_depth", "must not exceed params.R_exit")
    return p


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    known = {"graph", "kernel", "floyd", "operation", "params", "seed", "out"}
    extra = set(raw) - known
    if extra:
        _fail("config", f"unknown field(s) {sorted(extra)}")
    if "graph" not in raw:
        _fail("graph", "is required")
    graph = _section(raw["graph"], "graph", GRAPH_FIELDS, "family")
    _validate_graph(graph)
    kernel = _section(raw.get("kernel", {"rule": "simple_rw"}), "kernel", KERNEL_FIELDS, "rule")
    _validate_kernel(kernel)
    floyd = _section(raw.get("floyd", {"family": "geometric"}), "floyd", FLOYD_FIELDS, "family")
    _validate_floyd(floyd)
    op = raw.get("operation")
    if op is not None and op not in VERBS:
        _fail("operation", f"must be one of {list(VERBS)}, got {op!r}")
    params = _validate_params(raw.get("params", {}))
    seed = raw.get("seed", 0)
    _check_int("seed", seed, 0)
    if seed >= 2 ** 64:
        _fail("seed", "must fit in 64 bits")
    out = raw.get("out", "out")
    if not isinstance(out, str) or not out:
        _fail("out", "must be a non-empty string")
    return ExperimentConfig(graph, kernel, floyd, op, params, seed, out)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return config_from_dict(raw)


def serialize(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
