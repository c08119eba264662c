"""Experiment orchestration: graph generation, selection, Monte-Carlo MSE.

A JSON experiment config names a graph source, the measurement and
regularizer filters, the noise level, the methods to compare, a solver, and
the sampled-node percentages. For each (method, percentage) cell the
harness selects a set, evaluates the analytic cost, and estimates the
empirical MSE over seeded Monte-Carlo trials.

Randomness is derived from one master seed through counter-based spawn
keys, one stream per trial, so reruns reproduce every record regardless of
the worker count (GSAMPLE_THREADS caps threads; default serial).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costs import CostKind, cost_value
from .estimator import build_state, estimate
from .exceptions import InfeasibleError, ObservabilityError
from .graphs import WeightedGraph, build_laplacian, delete_node, is_connected, read_edge_list
from .greedy import GreedyConfig, greedy_select
from .model import BandlimitedSpec, ProblemInstance, SamplingVector, perturb_topology
from .pgd import PGDConfig, pgd_solve
from .spectral import FilterSpec, spectral_decompose

_TRACE_KINDS = frozenset({CostKind.BMSE, CostKind.BCRB, CostKind.WC_MSE})
_CHUNK = 512


@dataclass
class ExperimentConfig:
    """Everything a run needs; mirrors the JSON config file layout."""

    graph: dict
    h_m: dict
    h_r: dict
    mu: float = 0.1
    sigma2: float | None = 0.01
    noise_cov_path: str | None = None
    x0: str | dict = "zero"
    methods: list[str] = field(default_factory=lambda: ["BMSE"])
    band: str | list[int] = "low-half"
    solver: str = "greedy"
    greedy: dict = field(default_factory=dict)
    pgd: dict = field(default_factory=dict)
    q_percents: list[float] = field(default_factory=lambda: [40.0, 60.0, 80.0])
    trials: int = 1000
    seed: int = 0
    robustness: dict = field(default_factory=lambda: {"kind": "none"})

    def __post_init__(self):
        for q in self.q_percents:
            if not 0.0 < q <= 100.0:
                raise ValueError("q percentages must lie in (0, 100]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.solver not in ("greedy", "pgd"):
            raise ValueError("solver must be 'greedy' or 'pgd'")
        if self.sigma2 is None and self.noise_cov_path is None:
            raise ValueError("either sigma2 or noise_cov_path is required")
        for m in self.methods:
            CostKind(m)


@dataclass(frozen=True)
class ResultRecord:
    method: str
    q_pct: float
    mse: float
    cost: float
    wall_ms: float
    seed: int
    selected: tuple[int, ...]


@dataclass(frozen=True)
class SweepRecord:
    sweep: float
    record: ResultRecord


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def config_from_dict(data: dict) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**data)


def filter_from_dict(spec: dict, n: int) -> FilterSpec:
    """Build a FilterSpec from its JSON form, resolving band shorthands."""
    spec = dict(spec)
    family = spec.pop("family")
    exponent = float(spec.pop("exponent", 1.0))
    if family == "identity":
        fs = FilterSpec.identity()
    elif family == "laplacian-power":
        fs = FilterSpec.laplacian_power(spec.pop("k", 1))
    elif family == "gmrf":
        fs = FilterSpec.gmrf()
    elif family == "tikhonov":
        fs = FilterSpec.tikhonov(spec.pop("alpha"))
    elif family == "diffusion":
        fs = FilterSpec.diffusion(spec.pop("tau"))
    elif family == "inverse-diffusion":
        fs = FilterSpec.inverse_diffusion(spec.pop("tau"))
    elif family == "ideal-projector":
        fs = FilterSpec.ideal_projector(_resolve_indices(spec.pop("indices"), n))
    elif family == "custom":
        fs = FilterSpec.custom(spec.pop("values"))
    else:
        raise ValueError(f"unknown filter family {family!r}")
    if spec:
        raise ValueError(f"unused filter parameters for {family!r}: {sorted(spec)}")
    if exponent != 1.0:
        fs = dataclasses.replace(fs, exponent=exponent)
    return fs


def _resolve_indices(indices, n: int) -> tuple[int, ...]:
    if indices == "low-half":
        return tuple(range(n // 2))
    if indices == "high-half":
        return tuple(range(n - n // 2, n))
    if indices == "low-half-complement":
        return tuple(range(n // 2, n))
    if indices == "high-half-complement":
        return tuple(range(n - n // 2))
    return tuple(int(i) for i in indices)


def band_from_config(band, n: int) -> BandlimitedSpec:
    if band == "low-half":
        return BandlimitedSpec.low_half(n)
    if band == "high-half":
        return BandlimitedSpec.high_half(n)
    return BandlimitedSpec(tuple(int(i) for i in band))


def generate_er_graph(n: int, p: float, weight_mean: float, weight_std: float,
                      rng: np.random.Generator) -> WeightedGraph:
    """Erdos-Renyi graph with normal edge weights truncated below at 1e-3.

    Disconnected draws are rejected, up to 100 attempts.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    for _ in range(100):
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p:
                    w = max(float(rng.normal(weight_mean, weight_std)), 1e-3)
                    edges.append((i, j, w))
        graph = WeightedGraph(n, tuple(edges))
        if is_connected(graph):
            return graph
    raise InfeasibleError("could not draw a connected graph in 100 attempts")


def build_graph(config: ExperimentConfig) -> WeightedGraph:
    g = config.graph
    if g["kind"] == "er":
        seed = g.get("seed")
        ss = (np.random.SeedSequence(seed) if seed is not None
              else np.random.SeedSequence(config.seed, spawn_key=(0,)))
        graph = generate_er_graph(g["n"], g["p"], g.get("weight_mean", 1.0),
                                  g.get("weight_std", 0.0), np.random.default_rng(ss))
    elif g["kind"] == "edgelist":
        graph = read_edge_list(g["path"], n_nodes=g.get("n_nodes"))
    else:
        raise ValueError(f"unknown graph source {g.get('kind')!r}")
    pin = g.get("pin_node")
    if pin is not None:
        graph = delete_node(graph, int(pin))
    return graph


def build_instance(config: ExperimentConfig, graph: WeightedGraph) -> ProblemInstance:
    n = graph.n_nodes
    decomp = spectral_decompose(build_laplacian(graph))
    if config.noise_cov_path is not None:
        R = np.loadtxt(config.noise_cov_path)
    else:
        R = config.sigma2 * np.eye(n)
    if config.x0 == "zero":
        x0 = np.zeros(n)
    else:
        x0 = np.loadtxt(config.x0["path"])
    return ProblemInstance(
        decomp=decomp,
        h_m=filter_from_dict(config.h_m, n),
        h_r=filter_from_dict(config.h_r, n),
        noise_cov=R,
        mu=config.mu,
        x0=x0,
    )


def _worker_count() -> int:
    raw = os.environ.get("GSAMPLE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def select_set(config: ExperimentConfig, instance: ProblemInstance, kind: CostKind,
               q: int, band: BandlimitedSpec) -> list[int]:
    """Pick q nodes with the configured solver; PGD sets are topped up to q."""
    if config.solver == "greedy":
        fast = config.greedy.get("fast_path", "auto")
        if fast == "auto":
            if kind in _TRACE_KINDS and instance.noise_is_diagonal:
                fast = "exact-rank-one"
            else:
                fast = "off"
        gc = GreedyConfig(kind=kind, budget=q, fast_path=fast, band=band)
        return list(greedy_select(instance, gc).selected)
    pc = PGDConfig(budget=q, **config.pgd)
    res = pgd_solve(instance, kind, pc, band=band)
    selected = list(res.selected)
    if len(selected) < q:
        for i in np.argsort(-res.relaxed, kind="stable"):
            if int(i) not in selected:
                selected.append(int(i))
            if len(selected) == q:
                break
    return sorted(selected)


def monte_carlo_errors(est_instance: ProblemInstance, data_instance: ProblemInstance,
                       d: SamplingVector, trials: int, master_seed: int,
                       cell_key: tuple[int, ...]) -> np.ndarray:
    """Squared estimation errors over seeded trials, one RNG stream per trial.

    Trial t draws x from the data instance's prior, then measurement noise,
    from the stream spawn_key = cell_key + (t,). The estimator may be built
    on a different instance (robustness protocols).
    """
    state = build_state(est_instance, d)
    n = data_instance.n
    if data_instance.mu <= 0.0:
        raise ValueError("Monte-Carlo trials draw from the prior, which needs mu > 0")
    scale = 1.0 / math.sqrt(data_instance.mu)
    errors = np.empty(trials)

    def run_chunk(t0: int, t1: int) -> tuple[int, np.ndarray]:
        m = t1 - t0
        Z = np.empty((n, m))
        E = np.empty((n, m))
        for j in range(m):
            rng = np.random.default_rng(
                np.random.SeedSequence(master_seed, spawn_key=cell_key + (t0 + j,)))
            Z[:, j] = rng.standard_normal(n)
            E[:, j] = rng.standard_normal(n)
        X = data_instance.x0[:, None] + scale * (data_instance.prior_half @ Z)
        Y = d.values[:, None] * (data_instance.h_m_mat @ X + data_instance.noise_chol @ E)
        Xhat = estimate(state, Y)
        return t0, ((Xhat - X) ** 2).sum(axis=0)

    spans = [(t, min(t + _CHUNK, trials)) for t in range(0, trials, _CHUNK)]
    workers = _worker_count()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t0, err in pool.map(lambda s: run_chunk(*s), spans):
                errors[t0:t0 + err.size] = err
    else:
        for t0, t1 in spans:
            _, err = run_chunk(t0, t1)
            errors[t0:t0 + err.size] = err
    return errors


def empirical_mse(est_instance, data_instance, d, trials, master_seed, cell_key):
    """Mean squared error and its Monte-Carlo standard error."""
    errors = monte_carlo_errors(est_instance, data_instance, d, trials,
                                master_seed, cell_key)
    return float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(trials))


def _record_cost(kind: CostKind, instance: ProblemInstance, d: SamplingVector,
                 band: BandlimitedSpec) -> float:
    try:
        return cost_value(kind, instance, d, band=band)
    except ObservabilityError:
        return math.nan  # infeasible at this budget; the run continues


def run_monte_carlo(config: ExperimentConfig) -> list[ResultRecord]:
    """Full sweep: for each method and percentage select, score, and simulate."""
    graph = build_graph(config)
    instance = build_instance(config, graph)
    n = instance.n
    band = band_from_config(config.band, n)
    records = []
    for mi, method in enumerate(config.methods):
        kind = CostKind(method)
        for qi, q_pct in enumerate(config.q_percents):
            q = int(round(q_pct * n / 100.0))
            if q < 1:
                raise ValueError(f"q percentage {q_pct} selects no nodes at n={n}")
            t_start = time.perf_counter()
            selected = select_set(config, instance, kind, q, band)
            d = SamplingVector.from_indices(selected, n, budget=q)
            cost = _record_cost(kind, instance, d, band)
            mse, _ = empirical_mse(instance, instance, d, config.trials,
                                   config.seed, (1, mi, qi))
            wall_ms = 1e3 * (time.perf_counter() - t_start)
            records.append(ResultRecord(method, float(q_pct), mse, cost, wall_ms,
                                        config.seed, tuple(selected)))
    return records


def run_robustness_sweep(config: ExperimentConfig) -> list[SweepRecord]:
    """Fig-2-style robustness protocols at the first configured percentage.

    sigma sweep: the sampling set is fixed at the nominal noise level; each
    sweep value re-runs data generation and estimation at that noise level.

    delta sweep: the graph is perturbed by `delta` random edge edits; both
    the selector and the estimator see the perturbed Laplacian while the
    data comes from the true one. delta = 0 reproduces the nominal records.
    """
    sweep = config.robustness
    kind = sweep.get("kind")
    if kind not in ("sigma", "delta"):
        raise ValueError("robustness sweep kind must be 'sigma' or 'delta'")
    values = list(sweep["values"])
    graph = build_graph(config)
    instance = build_instance(config, graph)
    n = instance.n
    band = band_from_config(config.band, n)
    q_pct = config.q_percents[0]
    q = int(round(q_pct * n / 100.0))
    out: list[SweepRecord] = []

    if kind == "sigma":
        nominal_sets = {}
        for mi, method in enumerate(config.methods):
            nominal_sets[method] = select_set(config, instance, CostKind(method), q, band)
        for value in values:
            noisy = dataclasses.replace(instance, noise_cov=float(value) * np.eye(n))
            for mi, method in enumerate(config.methods):
                t_start = time.perf_counter()
                selected = nominal_sets[method]
                d = SamplingVector.from_indices(selected, n, budget=q)
                cost = _record_cost(CostKind(method), noisy, d, band)
                mse, _ = empirical_mse(noisy, noisy, d, config.trials,
                                       config.seed, (1, mi, 0))
                wall_ms = 1e3 * (time.perf_counter() - t_start)
                out.append(SweepRecord(float(value), ResultRecord(
                    method, float(q_pct), mse, cost, wall_ms, config.seed,
                    tuple(selected))))
        return out

    for si, value in enumerate(values):
        delta = int(value)
        if delta == 0:
            perturbed = instance
        else:
            rng = np.random.default_rng(np.random.SeedSequence(config.seed,
                                                               spawn_key=(2, si)))
            pgraph = perturb_topology(graph, delta, rng)
            perturbed = dataclasses.replace(
                instance, decomp=spectral_decompose(build_laplacian(pgraph)))
        for mi, method in enumerate(config.methods):
            t_start = time.perf_counter()
            selected = select_set(config, perturbed, CostKind(method), q, band)
            d = SamplingVector.from_indices(selected, n, budget=q)
            cost = _record_cost(CostKind(method), perturbed, d, band)
            mse, _ = empirical_mse(perturbed, instance, d, config.trials,
                                   config.seed, (1, mi, 0))
            wall_ms = 1e3 * (time.perf_counter() - t_start)
            out.append(SweepRecord(float(delta), ResultRecord(
                method, float(q_pct), mse, cost, wall_ms, config.seed,
                tuple(selected))))
    return out


# -- result serialization ----------------------------------------------------

_HEADER = "method,q_pct,mse,cost,wall_ms,seed,selected"


def _fmt(x: float) -> str:
    return f"{x:.17e}"


def emit_results(records: list[ResultRecord], path) -> None:
    """Write records as CSV; numbers keep full precision for exact re-parsing."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + "\n")
        for r in records:
            selected = ";".join(str(i) for i in r.selected)
            fh.write(f"{r.method},{_fmt(r.q_pct)},{_fmt(r.mse)},{_fmt(r.cost)},"
                     f"{_fmt(r.wall_ms)},{r.seed},{selected}\n")


def read_results(path) -> list[ResultRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _HEADER:
            raise ValueError(f"unexpected results header: {header!r}")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            method, q_pct, mse, cost, wall_ms, seed, selected = line.split(",")
            sel = tuple(int(i) for i in selected.split(";")) if selected else ()
            records.append(ResultRecord(method, float(q_pct), float(mse), float(cost),
                                        float(wall_ms), int(seed), sel))
    return records


def emit_sweep_results(records: list[SweepRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sweep," + _HEADER + "\n")
        for s in records:
            r = s.record
            selected = ";".join(str(i) for i in r.selected)
            fh.write(f"{_fmt(s.sweep)},{r.method},{_fmt(r.q_pct)},{_fmt(r.mse)},"
                     f"{_fmt(r.cost)},{_fmt(r.wall_ms)},{r.seed},{selected}\n")
