"""Synthetic input graphs for the benchmark harness.

Erdos-Renyi G(n, c/n) with a constant expected average degree keeps the graph
sparse at every scale; each present edge gets a weight from one of two
models: ``uniform`` draws from [1, W], ``fixed`` assigns exactly W.
"""

from __future__ import annotations

import math

import numpy as np

from .graph import WeightedGraph, num_edge_slots

__all__ = ["erdos_renyi_graph", "resolve_weight_scale"]


def resolve_weight_scale(scale, n: int) -> float:
    """Map a scale spec ('1' | 'sqrt_n' | 'n' | numeric string | number) to W."""
    if isinstance(scale, (int, float)):
        value = float(scale)
    else:
        text = str(scale).strip()
        if text == "sqrt_n":
            value = math.sqrt(n)
        elif text == "n":
            value = float(n)
        else:
            value = float(text)
    if value < 1:
        raise ValueError(f"weight scale must be >= 1, got {value}")
    return value


def _distinct_indices(num_slots: int, m: int, rng: np.random.Generator) -> np.ndarray:
    if m > num_slots:
        raise ValueError(f"cannot place {m} edges in {num_slots} slots")
    if m == 0:
        return np.empty(0, np.int64)
    if num_slots <= 4 * m:
        return np.sort(rng.choice(num_slots, size=m, replace=False).astype(np.int64))
    chosen: set[int] = set()
    while len(chosen) < m:
        batch = rng.integers(0, num_slots, size=2 * (m - len(chosen)))
        for e in batch.tolist():
            if len(chosen) == m:
                break
            chosen.add(e)
    return np.fromiter(sorted(chosen), np.int64, count=m)


def erdos_renyi_graph(
    n: int,
    rng: np.random.Generator,
    *,
    avg_degree: float | None = None,
    edge_probability: float | None = None,
    weight_high: float = 1.0,
    weight_dist: str = "uniform",
) -> WeightedGraph:
    """Sample G(n, p) with weighted edges; p = avg_degree / n unless given."""
    if (avg_degree is None) == (edge_probability is None):
        raise ValueError("give exactly one of avg_degree or edge_probability")
    p = edge_probability if edge_probability is not None else avg_degree / n
    if not 0 <= p <= 1:
        raise ValueError(f"edge probability {p} outside [0, 1]")
    if weight_dist not in ("uniform", "fixed"):
        raise ValueError(f"unknown weight model {weight_dist!r}")
    if weight_high < 1:
        raise ValueError(f"weight bound must be >= 1, got {weight_high}")
    slots = num_edge_slots(n)
    m = int(rng.binomial(slots, p)) if slots else 0
    eidx = _distinct_indices(slots, m, rng)
    if weight_dist == "uniform":
        weights = rng.uniform(1.0, weight_high, size=m) if weight_high > 1 else np.ones(m)
    else:
        weights = np.full(m, weight_high)
    return WeightedGraph._from_sorted_arrays(n, eidx, weights)
