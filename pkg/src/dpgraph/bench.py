"""Benchmark harness: generate, release, evaluate, emit CSV rows.

One bench run fixes a weight scale and sweeps (size, mechanism, trial) cells.
Rows use the stable schema ``n,mech,metric,value,seed``; per-trial rows come
first, then ``mean_<metric>`` aggregate rows keyed by the base seed.  Cell
failures become NaN rows so a sweep never dies halfway.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .evaluation import evaluate_dense, evaluate_graphs, evaluate_sketch
from .generate import erdos_renyi_graph, resolve_weight_scale
from .graph import PrivacyBudget
from .mechanisms import MECHANISMS, MechanismConfig, release
from .randomness import NoiseSource

__all__ = ["BenchRow", "BenchSpec", "CSV_HEADER", "run_bench", "write_csv"]

CSV_HEADER = ("n", "mech", "metric", "value", "seed")


@dataclass(frozen=True)
class BenchRow:
    n: int
    mech: str
    metric: str
    value: float
    seed: int


@dataclass(frozen=True)
class BenchSpec:
    """One sweep: sizes x mechanisms x trials at a fixed weight scale."""

    sizes: tuple[int, ...]
    mechanisms: tuple[str, ...]
    weight_scale: str | float = "1"
    weight_dist: str = "uniform"
    avg_degree: float = 4.0
    trials: int = 5
    seed: int = 0
    eps: float = 1.0
    delta: float | None = None  # None: n^-10 per size
    beta: float | None = None
    mixing_multiplier: float = 1.0
    jl_dimension: int | None = None
    jl_eta: float = 0.1
    spectral: bool = True
    max_cut: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 2:
            raise ValueError("sizes must all be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.mechanisms) - set(MECHANISMS)
        if unknown:
            raise ValueError(f"unknown mechanisms {sorted(unknown)}")

    def delta_for(self, n: int) -> float:
        return self.delta if self.delta is not None else float(n) ** -10.0


def _cell_metrics(spec: BenchSpec, n: int, mech: str, trial: int) -> dict[str, float]:
    delta = spec.delta_for(n)
    budget = PrivacyBudget(spec.eps, delta)
    config = MechanismConfig(
        budget=budget,
        beta=spec.beta,
        mixing_multiplier=spec.mixing_multiplier,
        jl_dimension=spec.jl_dimension,
        jl_eta=spec.jl_eta,
    )
    gen_rng = NoiseSource.from_seed(spec.seed, (n, trial)).generator
    graph = erdos_renyi_graph(
        n,
        gen_rng,
        avg_degree=spec.avg_degree,
        weight_high=resolve_weight_scale(spec.weight_scale, n),
        weight_dist=spec.weight_dist,
    )
    source = NoiseSource.from_seed(spec.seed, (n, trial, _mech_id(mech)))
    start = time.perf_counter()
    result = release(graph, mech, config, source)
    elapsed = time.perf_counter() - start
    metrics: dict[str, float] = {"time_release_s": elapsed}
    if result.dense is not None:
        metrics.update(evaluate_dense(graph, result.dense, spectral=spec.spectral))
    elif result.sketch is not None:
        metrics.update(evaluate_sketch(graph, result.sketch.matrix))
    elif result.graph is not None:
        metrics.update(
            evaluate_graphs(
                graph, result.graph, spectral=spec.spectral, max_cut=spec.max_cut
            )
        )
    return metrics


def _mech_id(mech: str) -> int:
    return MECHANISMS.index(mech)


def _planned_metrics(spec: BenchSpec, mech: str) -> list[str]:
    planned = ["time_release_s"]
    if mech == "jl":
        planned.append("spectral")
        return planned
    planned += ["l1", "eval", "max_singleton_cut"]
    if spec.spectral:
        planned.append("spectral")
    if spec.max_cut and mech != "gauss":
        planned.append("max_cut")
    return planned


def _run_cell(args) -> list[BenchRow]:
    spec, n, mech, trial = args
    # string hashes are salted per process; derive the recorded seed arithmetically
    cell_seed = (spec.seed * 1000003 + n * 8191 + _mech_id(mech) * 127 + trial) & 0x7FFFFFFF
    try:
        metrics = _cell_metrics(spec, n, mech, trial)
    except Exception:
        metrics = {name: math.nan for name in _planned_metrics(spec, mech)}
    return [BenchRow(n, mech, name, value, cell_seed) for name, value in metrics.items()]


def run_bench(spec: BenchSpec, *, progress=None) -> list[BenchRow]:
    """Execute the sweep; returns per-trial rows followed by mean rows."""
    if any(m in ("walk", "walk-confidential") for m in spec.mechanisms):
        from . import _fastwalk

        _fastwalk.warmup()  # compile outside the timed region
    cells = [
        (spec, n, mech, trial)
        for n in spec.sizes
        for mech in spec.mechanisms
        for trial in range(spec.trials)
    ]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = []
        for cell in cells:
            results.append(_run_cell(cell))
            if progress is not None:
                progress(cell[1:])
    rows = [row for cell_rows in results for row in cell_rows]
    rows += _mean_rows(rows, spec)
    return rows


def _mean_rows(rows: list[BenchRow], spec: BenchSpec) -> list[BenchRow]:
    grouped: dict[tuple[int, str, str], list[float]] = {}
    for row in rows:
        grouped.setdefault((row.n, row.mech, row.metric), []).append(row.value)
    means = []
    for (n, mech, metric), values in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        means.append(BenchRow(n, mech, f"mean_{metric}", float(np.mean(values)), spec.seed))
    return means


def write_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([row.n, row.mech, row.metric, repr(row.value), row.seed])


def summarize(rows: list[BenchRow], metric: str) -> dict[tuple[int, str], float]:
    """Mean-row lookup {(n, mech): value} for one metric."""
    out = {}
    for row in rows:
        if row.metric == f"mean_{metric}":
            out[(row.n, row.mech)] = row.value
    return out
