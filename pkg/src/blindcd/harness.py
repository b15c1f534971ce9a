"""Seeded Monte-Carlo sweeps, named experiment presets and CSV output."""
from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis
from .boost import PRESETS, DecompositionProblem, boosted_blind_cd
from .detect import blind_cd, blind_cd_from_cov, oracle_spectral
from .errors import ConfigError
from .excitation import (BIPARTITE_STUBBORN, IDENTITY_SUBSET, MODES, ROW_BERNOULLI, degroot_signals,
                         gen_signals, gen_sketch, pricing_game_signals, true_covariance)
from .filters import Diffusion, filter_from_dict
from .graph import SbmParams, eig_laplacian, karate_club, load_edge_list, load_labels, \
    ratio_cut, sbm_generate
from .numerics import KMeansParams

SCHEMA_VERSION = 1
SCENARIOS = ("diffusion", "pricing", "degroot", "edgelist")
METHODS = ("blind", "blind_true", "boosted", "oracle")
SWEEP_AXES = ("n_samples", "r", "taps")
_SCENARIO_PRESET = {"diffusion": "diffusion", "edgelist": "diffusion", "pricing": "pricing",
                    "degroot": "opinion"}
_DEFAULT_MODE = {"diffusion": ROW_BERNOULLI, "edgelist": ROW_BERNOULLI, "pricing": IDENTITY_SUBSET,
                 "degroot": BIPARTITE_STUBBORN}

_TOP_KEYS = {"schema_version", "name", "scenario", "graph", "filter", "excitation", "n_samples",
             "sigma_w2", "latent", "methods", "decomposition", "sweep", "seeds", "kmeans", "theory", "k"}
_GRAPH_KEYS = {"type", "n", "k", "a", "b", "a_mult", "b_mult", "edges", "labels", "indexing", "weighted"}
_EXC_KEYS = {"mode", "r", "p_b", "connectivity"}
_DEC_KEYS = {"preset", "kappa_scale", "rho_scale", "regularizer", "alpha", "max_iter", "tol"}
_KM_KEYS = {"restarts", "seed", "max_iter"}


def _unknown(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    graph: dict
    seeds: tuple
    methods: tuple
    n_samples: int = 1000
    sigma_w2: float | None = 1e-2
    filter: dict | None = None
    excitation: dict = field(default_factory=dict)
    latent: str = "uniform"
    decomposition: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    kmeans: dict = field(default_factory=dict)
    theory: bool = False
    k: int | None = None
    name: str = ""
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        _unknown(d, _TOP_KEYS, "config")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"config.schema_version: expected {SCHEMA_VERSION}, got {d.get('schema_version')!r}")
        scenario = d.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"config.scenario: expected one of {SCENARIOS}, got {scenario!r}")
        graph = d.get("graph")
        if graph is None:
            raise ConfigError("config.graph: required")
        _unknown(graph, _GRAPH_KEYS, "config.graph")
        if graph.get("type") not in ("sbm", "edgelist", "karate"):
            raise ConfigError("config.graph.type: expected 'sbm', 'edgelist' or 'karate'")
        if graph["type"] == "sbm":
            for key in ("n", "k"):
                if not isinstance(graph.get(key), int) or graph[key] < 1:
                    raise ConfigError(f"config.graph.{key}: positive integer required")
            if not (("a" in graph and "b" in graph) or ("a_mult" in graph and "b_mult" in graph)):
                raise ConfigError("config.graph: give either a/b or a_mult/b_mult")
        if graph["type"] == "edgelist":
            for key in ("edges", "labels"):
                if not isinstance(graph.get(key), str):
                    raise ConfigError(f"config.graph.{key}: path required")
        exc = dict(d.get("excitation", {}))
        _unknown(exc, _EXC_KEYS, "config.excitation")
        exc.setdefault("mode", _DEFAULT_MODE[scenario])
        if exc["mode"] not in MODES:
            raise ConfigError(f"config.excitation.mode: expected one of {MODES}")
        if not isinstance(exc.get("r"), int) or exc["r"] < 1:
            raise ConfigError("config.excitation.r: positive integer required")
        methods = d.get("methods")
        if not methods or not isinstance(methods, list):
            raise ConfigError("config.methods: nonempty list required")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"config.methods: unknown method(s) {bad}; expected {METHODS}")
        if len(set(methods)) != len(methods):
            raise ConfigError("config.methods: duplicates")
        seeds = d.get("seeds")
        if not seeds or not isinstance(seeds, list) or not all(isinstance(s, int) and s >= 0 for s in seeds):
            raise ConfigError("config.seeds: nonempty list of nonnegative integers required")
        filt = d.get("filter")
        if scenario in ("diffusion", "edgelist"):
            if filt is None:
                raise ConfigError("config.filter: required for this scenario")
            try:
                filter_from_dict(filt)
            except ValueError as exc:
                raise ConfigError(f"config.filter: {exc}") from None
        elif filt is not None:
            raise ConfigError(f"config.filter: not used by scenario {scenario!r}")
        dec = dict(d.get("decomposition", {}))
        _unknown(dec, _DEC_KEYS, "config.decomposition")
        if "preset" in dec and dec["preset"] not in PRESETS:
            raise ConfigError(f"config.decomposition.preset: expected one of {sorted(PRESETS)}")
        sweep = dict(d.get("sweep", {}))
        _unknown(sweep, set(SWEEP_AXES), "config.sweep")
        for axis, vals in sweep.items():
            if not isinstance(vals, list) or not vals or not all(isinstance(v, int) and v > 0 for v in vals):
                raise ConfigError(f"config.sweep.{axis}: nonempty list of positive integers required")
        if "taps" in sweep and not (filt and filt.get("variant") == "diffusion"):
            raise ConfigError("config.sweep.taps: needs a diffusion filter")
        km = dict(d.get("kmeans", {}))
        _unknown(km, _KM_KEYS, "config.kmeans")
        n_samples = d.get("n_samples", 1000)
        if not isinstance(n_samples, int) or n_samples < 1:
            raise ConfigError("config.n_samples: positive integer required")
        sigma = d.get("sigma_w2", 1e-2)
        if sigma is not None and (not isinstance(sigma, (int, float)) or sigma < 0):
            raise ConfigError("config.sigma_w2: nonnegative number or null required")
        if sigma is None and scenario != "pricing":
            raise ConfigError("config.sigma_w2: null is only meaningful for the pricing scenario")
        latent = d.get("latent", "uniform")
        if latent not in ("uniform", "normal"):
            raise ConfigError("config.latent: expected 'uniform' or 'normal'")
        k = d.get("k")
        if k is not None and (not isinstance(k, int) or k < 1):
            raise ConfigError("config.k: positive integer required")
        return cls(scenario=scenario, graph=dict(graph), seeds=tuple(seeds), methods=tuple(methods),
                   n_samples=n_samples, sigma_w2=sigma, filter=filt, excitation=exc, latent=latent,
                   decomposition=dec, sweep=sweep, kmeans=km, theory=bool(d.get("theory", False)),
                   k=k, name=str(d.get("name", "")), base_dir=str(base_dir))

    @classmethod
    def from_json(cls, text: str, base_dir=".") -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d, base_dir)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text, path.parent)

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION, "name": self.name, "scenario": self.scenario,
             "graph": self.graph, "excitation": self.excitation, "n_samples": self.n_samples,
             "sigma_w2": self.sigma_w2, "latent": self.latent, "methods": list(self.methods),
             "decomposition": self.decomposition, "sweep": self.sweep, "seeds": list(self.seeds),
             "kmeans": self.kmeans, "theory": self.theory}
        if self.filter is not None:
            d["filter"] = self.filter
        if self.k is not None:
            d["k"] = self.k
        return d

    def sweep_points(self) -> list[dict]:
        """Cartesian product of the sweep axes; unswept axes take their base value."""
        base = {"n_samples": self.n_samples, "r": self.excitation["r"]}
        if self.filter and self.filter.get("variant") == "diffusion":
            base["taps"] = self.filter["taps"]
        axes = [a for a in SWEEP_AXES if a in self.sweep]
        pts = []
        for combo in itertools.product(*(self.sweep[a] for a in axes)):
            p = dict(base)
            p.update(zip(axes, combo))
            pts.append(p)
        return pts


@dataclass
class ResultRow:
    seed: int
    point: int
    n_samples: int
    r: int
    taps: int | None
    method: str
    status: str = "ok"
    error: str = ""
    pe: float = math.nan
    misclassified: int | None = None
    ratio_cut: float = math.nan
    f_objective: float = math.nan
    runtime_ms: float = math.nan
    eta: float = math.nan
    gamma: float = math.nan
    gamma_bound: float = math.nan
    delta: float = math.nan
    bound_lhs: float = math.nan
    bound_rhs: float = math.nan

    def sort_key(self):
        return (self.seed, self.point, self.method)


COLUMNS = [f.name for f in fields(ResultRow)]


def _sub_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def _build_graph(cfg: ExperimentConfig, seed: int):
    g = cfg.graph
    if g["type"] == "karate":
        return karate_club()
    if g["type"] == "edgelist":
        base = Path(cfg.base_dir)
        graph = load_edge_list(base / g["edges"], indexing=g.get("indexing", "zero"),
                               weighted=bool(g.get("weighted", False)))
        truth = load_labels(base / g["labels"], indexing=g.get("indexing", "zero"))
        if truth.n != graph.n:
            raise ConfigError(f"config.graph.labels: {truth.n} labels for {graph.n} nodes")
        return graph, truth
    if "a_mult" in g:
        p = SbmParams.log_scaled(g["n"], g["k"], g["a_mult"], g["b_mult"], _sub_seed(seed, 0))
    else:
        p = SbmParams(g["n"], g["k"], g["a"], g["b"], _sub_seed(seed, 0))
    return sbm_generate(p)


def _decomposition(cfg: ExperimentConfig, n_samples: int, r: int) -> DecompositionProblem:
    d = cfg.decomposition
    c1, c2 = PRESETS[d.get("preset", _SCENARIO_PRESET[cfg.scenario])]
    kw = {key: d[key] for key in ("regularizer", "max_iter", "tol") if key in d}
    if d.get("alpha") is not None:
        kw["alpha"] = float(d["alpha"])
    return DecompositionProblem.scaled(d.get("kappa_scale", c1), d.get("rho_scale", c2), n_samples, r, **kw)


def _filter_for(cfg: ExperimentConfig, point: dict):
    f = filter_from_dict(cfg.filter)
    if isinstance(f, Diffusion) and "taps" in point:
        f = Diffusion(point["taps"], f.alpha)
    return f


def _trial(cfg: ExperimentConfig, seed: int, pidx: int, point: dict) -> list[ResultRow]:
    """All methods on one (seed, sweep point)."""
    base = dict(seed=seed, point=pidx, n_samples=point["n_samples"], r=point["r"], taps=point.get("taps"))
    try:
        graph, truth = _build_graph(cfg, seed)
        k = cfg.k or truth.k
        eig = eig_laplacian(graph)
        exc = cfg.excitation
        kw = {}
        if exc["mode"] == ROW_BERNOULLI and "p_b" in exc:
            kw["p_b"] = exc["p_b"]
        if exc["mode"] == BIPARTITE_STUBBORN and exc.get("connectivity") is not None:
            kw["connectivity"] = exc["connectivity"]
        sketch = gen_sketch(exc["mode"], graph.n, point["r"], _sub_seed(seed, 1, point["r"]), **kw)
        sig_seed = _sub_seed(seed, 2, pidx)
        filt = None
        if cfg.scenario in ("diffusion", "edgelist"):
            filt = _filter_for(cfg, point)
            batch = gen_signals(graph, filt, sketch, point["n_samples"], cfg.sigma_w2, cfg.latent,
                                sig_seed, eig=eig)
        elif cfg.scenario == "pricing":
            batch, _ = pricing_game_signals(graph, sketch, point["n_samples"], cfg.sigma_w2, sig_seed,
                                            latent=cfg.latent)
        else:
            batch, _ = degroot_signals(graph, sketch, point["n_samples"], cfg.sigma_w2, sig_seed,
                                       latent=cfg.latent)
    except Exception as exc:  # noqa: BLE001 - every trial failure becomes a row
        return [ResultRow(**base, method=m, status="failed", error=f"{type(exc).__name__}: {exc}")
                for m in cfg.methods]

    km = KMeansParams(**cfg.kmeans)
    rows = []
    for method in cfg.methods:
        row = ResultRow(**base, method=method)
        t0 = time.perf_counter()
        try:
            sol = None
            if method == "blind":
                det = blind_cd(batch, k, km)
            elif method == "blind_true":
                if filt is None:
                    raise ValueError("blind_true needs a known graph filter")
                det = blind_cd_from_cov(true_covariance(eig, filt, sketch), k, km, method)
            elif method == "boosted":
                det, sol = boosted_blind_cd(batch, k, _decomposition(cfg, point["n_samples"], point["r"]), km)
            else:
                det = oracle_spectral(eig, k, km)
            row.runtime_ms = (time.perf_counter() - t0) * 1e3
            p = det.partition
            row.pe = analysis.error_rate(p, truth)
            row.misclassified = analysis.misclassified(p, truth)
            if not np.any(p.sizes() == 0):
                row.ratio_cut = ratio_cut(graph, p)
                row.f_objective = analysis.f_objective(eig, p)
            if cfg.theory and filt is not None and method in ("blind", "boosted"):
                if method == "blind":
                    rep = analysis.theorem1_report(eig, filt, sketch, batch, det, truth=truth)
                else:
                    rep = analysis.corollary1_report(eig, filt, sketch, sol.s_star, det, truth=truth)
                row.eta, row.gamma, row.gamma_bound = rep.eta, rep.gamma_exact, rep.gamma_bound
                row.delta, row.bound_lhs, row.bound_rhs = rep.delta, rep.lhs_value, rep.rhs_bound
        except Exception as exc:  # noqa: BLE001
            row.status = "failed"
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def theory_instance(cfg: ExperimentConfig) -> dict:
    """Theory reports for the first seed and sweep point of a synthetic config."""
    if cfg.scenario not in ("diffusion", "edgelist"):
        return {"scenario": cfg.scenario, "conditions": "unevaluable without a known graph filter"}
    seed, point = cfg.seeds[0], cfg.sweep_points()[0]
    graph, truth = _build_graph(cfg, seed)
    k = cfg.k or truth.k
    eig = eig_laplacian(graph)
    exc = cfg.excitation
    kw = {"p_b": exc["p_b"]} if exc["mode"] == ROW_BERNOULLI and "p_b" in exc else {}
    sketch = gen_sketch(exc["mode"], graph.n, point["r"], _sub_seed(seed, 1, point["r"]), **kw)
    filt = _filter_for(cfg, point)
    batch = gen_signals(graph, filt, sketch, point["n_samples"], cfg.sigma_w2, cfg.latent,
                        _sub_seed(seed, 2, 0), eig=eig)
    km = KMeansParams(**cfg.kmeans)
    out = {"seed": seed, "point": point, "k": k}
    if "blind" in cfg.methods or "boosted" not in cfg.methods:
        det = blind_cd(batch, k, km)
        rep = analysis.theorem1_report(eig, filt, sketch, batch, det, truth=truth)
        out["blind"] = dict(rep.to_dict(), pe=analysis.error_rate(det.partition, truth))
    if "boosted" in cfg.methods:
        det, sol = boosted_blind_cd(batch, k, _decomposition(cfg, point["n_samples"], point["r"]), km)
        rep = analysis.corollary1_report(eig, filt, sketch, sol.s_star, det, truth=truth)
        out["boosted"] = dict(rep.to_dict(), pe=analysis.error_rate(det.partition, truth))
    return out


def _run_task(args):
    cfg, seed, pidx, point = args
    return _trial(cfg, seed, pidx, point)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRow]:
    """Every (seed, sweep point, method) trial, sorted by that key.

    Trials are independent and seeded from (seed, sweep point), so any
    ``jobs`` value yields the same rows.
    """
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    tasks = [(cfg, s, i, p) for s in cfg.seeds for i, p in enumerate(cfg.sweep_points())]
    rows: list[ResultRow] = []
    if jobs == 1 or len(tasks) == 1:
        for t in tasks:
            rows.extend(_run_task(t))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                rows.extend(part)
    rows.sort(key=ResultRow.sort_key)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else format(v, ".17g")
    return str(v)


def write_csv(rows, out=None, *, include_runtime: bool = False) -> str:
    """Header plus one line per row; floats at 17 significant digits.

    Wall-clock runtime is left out unless asked for, so that identical
    configs give byte-identical files.
    """
    cols = [c for c in COLUMNS if include_runtime or c != "runtime_ms"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows, method: str, axis: str = "n_samples") -> dict:
    """Mean Pe and its standard error per value of ``axis`` for one method (ok rows only)."""
    out = {}
    for val in sorted({getattr(r, axis) for r in rows if r.method == method}):
        pes = np.array([r.pe for r in rows if r.method == method and getattr(r, axis) == val
                        and r.status == "ok"])
        if pes.size:
            se = pes.std(ddof=1) / math.sqrt(pes.size) if pes.size > 1 else 0.0
            out[val] = (float(pes.mean()), float(se), int(pes.size))
    return out


# Presets ------------------------------------------------------------------------

_SBM = {"type": "sbm", "n": 150, "k": 3, "a_mult": 8.0, "b_mult": 1.0}
_SBM_DYN = {"type": "sbm", "n": 150, "k": 3, "a_mult": 8.0, "b_mult": 0.5}

PRESET_CONFIGS = {
    "fig2": {
        "schema_version": SCHEMA_VERSION, "name": "fig2", "scenario": "diffusion", "graph": _SBM,
        "filter": {"variant": "diffusion", "taps": 16, "alpha": None},
        "excitation": {"mode": ROW_BERNOULLI, "r": 15}, "sigma_w2": 1e-2,
        "methods": ["blind", "blind_true", "oracle"],
        "sweep": {"n_samples": [100, 1000, 10000, 100000], "taps": [2, 4, 8, 16]},
        "seeds": list(range(50)),
    },
    "fig3": {
        "schema_version": SCHEMA_VERSION, "name": "fig3", "scenario": "diffusion", "graph": _SBM,
        "filter": {"variant": "diffusion", "taps": 16, "alpha": None},
        "excitation": {"mode": ROW_BERNOULLI, "r": 15}, "n_samples": 1000, "sigma_w2": 1e-2,
        "methods": ["blind", "boosted", "oracle"], "decomposition": {"preset": "diffusion"},
        "sweep": {"r": [5, 15, 25, 35, 45]}, "seeds": list(range(50)),
    },
    "karate": {
        "schema_version": SCHEMA_VERSION, "name": "karate", "scenario": "diffusion",
        "graph": {"type": "karate"}, "filter": {"variant": "diffusion", "taps": 6, "alpha": None},
        "excitation": {"mode": ROW_BERNOULLI, "r": 5}, "n_samples": 1000, "sigma_w2": 1e-2,
        "methods": ["blind", "boosted", "oracle"], "decomposition": {"preset": "diffusion"},
        "seeds": list(range(20)),
    },
    "pricing": {
        "schema_version": SCHEMA_VERSION, "name": "pricing", "scenario": "pricing", "graph": _SBM_DYN,
        "excitation": {"mode": IDENTITY_SUBSET, "r": 15}, "n_samples": 10000, "sigma_w2": None,
        "methods": ["blind", "boosted", "oracle"], "decomposition": {"preset": "pricing"},
        "sweep": {"r": [5, 15, 25, 35, 45]}, "seeds": list(range(50)),
    },
    "opinion": {
        "schema_version": SCHEMA_VERSION, "name": "opinion", "scenario": "degroot", "graph": _SBM_DYN,
        "excitation": {"mode": BIPARTITE_STUBBORN, "r": 15}, "n_samples": 10000, "sigma_w2": 1e-2,
        "methods": ["blind", "boosted", "oracle"], "decomposition": {"preset": "opinion"},
        "sweep": {"r": [5, 15, 25, 35, 45]}, "seeds": list(range(50)),
    },
}


def preset(name: str) -> ExperimentConfig:
    try:
        d = PRESET_CONFIGS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESET_CONFIGS)}") from None
    return ExperimentConfig.from_dict(copy.deepcopy(d))


def preset_dict(name: str) -> dict:
    if name not in PRESET_CONFIGS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESET_CONFIGS)}")
    return copy.deepcopy(PRESET_CONFIGS[name])


