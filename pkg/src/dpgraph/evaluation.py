"""Error metrics and report assembly for released graphs.

Exact metrics (brute-force worst cut, total-variation tables) are guarded by
explicit state-space bounds; the spectral metric is an iterative power method
over sparse matrix-vector products so it scales to benchmark sizes.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .graph import WeightedGraph, eval_linear_worst, l1_distance
from .randomness import NoiseSource
from .sampler import SparseExpDistribution, sample_many

__all__ = [
    "ErrorReport",
    "SpectralEstimate",
    "empirical_topology_law",
    "evaluate_dense",
    "evaluate_graphs",
    "evaluate_sketch",
    "laplacian_matrix",
    "max_cut_error",
    "multinomial_tv_slack",
    "spectral_norm_diff",
    "spectral_norm_matrix",
    "tv_distance",
]

MAX_CUT_VERTEX_LIMIT = 24
EMPIRICAL_LAW_STATE_LIMIT = 10**4
EMPIRICAL_LAW_MIN_TRIALS = 10**4


def _signed_difference_edges(
    g: WeightedGraph, h: WeightedGraph
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Union-support edge list of g - h as (us, vs, signed weights)."""
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} vs {h.n}")
    union = np.union1d(g.edge_indices, h.edge_indices)
    diff = np.zeros(len(union))
    pos = np.searchsorted(union, g.edge_indices)
    diff[pos] = g.edge_weights
    pos = np.searchsorted(union, h.edge_indices)
    diff[pos] -= h.edge_weights
    keep = diff != 0
    from .graph import edge_endpoints_array

    us, vs = edge_endpoints_array(union[keep], g.n)
    return us, vs, diff[keep]


def max_cut_error(g: WeightedGraph, h: WeightedGraph) -> tuple[float, frozenset[int]]:
    """Worst |cut_g(S) - cut_h(S)| over all S, with a witnessing S.

    Enumerates the 2^n subsets in Gray-code order so each step updates the
    running cut value along the single flipped vertex's incident difference
    edges.  Refuses above n = 24.
    """
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} vs {h.n}")
    n = g.n
    if n > MAX_CUT_VERTEX_LIMIT:
        raise ValueError(
            f"brute-force cut enumeration refused for n={n} > {MAX_CUT_VERTEX_LIMIT}"
        )
    us, vs, ws = _signed_difference_edges(g, h)
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for u, v, w in zip(us.tolist(), vs.tolist(), ws.tolist()):
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
    side = [False] * n
    current = 0.0
    best = 0.0
    best_mask = 0
    mask = 0
    for i in range(1, 1 << n):
        v = (i & -i).bit_length() - 1
        v_side = side[v]
        delta = 0.0
        for u, w in adjacency[v]:
            delta += w if side[u] == v_side else -w
        current += delta
        side[v] = not v_side
        mask ^= 1 << v
        if abs(current) > best:
            best = abs(current)
            best_mask = mask
    witness = frozenset(v for v in range(n) if best_mask >> v & 1)
    return best, witness


class SpectralEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def _power_iteration(matvec, n, *, tol, max_iter, seed) -> SpectralEstimate:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    norm = np.linalg.norm(x)
    if norm == 0:
        return SpectralEstimate(0.0, True, 0)
    x /= norm
    previous = math.inf
    estimate = 0.0
    for it in range(1, max_iter + 1):
        y = matvec(x)
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return SpectralEstimate(0.0, True, it)
        if abs(estimate - previous) <= tol * estimate:
            return SpectralEstimate(estimate, True, it)
        previous = estimate
        x = y / estimate
    return SpectralEstimate(estimate, False, max_iter)


def spectral_norm_diff(
    g: WeightedGraph,
    h: WeightedGraph,
    *,
    tol: float = 1e-9,
    max_iter: int = 10_000,
    seed: int = 0,
    return_info: bool = False,
):
    """Largest |eigenvalue| of L_g - L_h by power iteration on sparse products."""
    us, vs, ws = _signed_difference_edges(g, h)
    n = g.n

    def matvec(x):
        d = ws * (x[us] - x[vs])
        return np.bincount(us, weights=d, minlength=n) - np.bincount(
            vs, weights=d, minlength=n
        )

    est = _power_iteration(matvec, n, tol=tol, max_iter=max_iter, seed=seed)
    return est if return_info else est.value


def spectral_norm_matrix(
    matrix: np.ndarray,
    *,
    tol: float = 1e-9,
    max_iter: int = 10_000,
    seed: int = 0,
    return_info: bool = False,
):
    """Largest |eigenvalue| of a dense symmetric matrix by power iteration."""
    matrix = np.asarray(matrix, dtype=np.float64)
    est = _power_iteration(
        lambda x: matrix @ x, matrix.shape[0], tol=tol, max_iter=max_iter, seed=seed
    )
    return est if return_info else est.value


def laplacian_matrix(graph: WeightedGraph) -> np.ndarray:
    """Dense Laplacian D - A; intended for n small enough to afford n^2."""
    if graph.n > 4000:
        raise ValueError(f"dense Laplacian refused for n={graph.n}")
    L = np.zeros((graph.n, graph.n))
    us, vs = graph.endpoints()
    w = graph.edge_weights
    np.add.at(L, (us, vs), -w)
    np.add.at(L, (vs, us), -w)
    diag = np.bincount(us, weights=w, minlength=graph.n) + np.bincount(
        vs, weights=w, minlength=graph.n
    )
    L[np.diag_indices(graph.n)] = diag
    return L


def tv_distance(p: dict, q: dict) -> float:
    """Half the l1 distance between two probability tables on the same support."""
    for name, table in (("p", p), ("q", q)):
        total = sum(table.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"table {name} sums to {total}, not 1")
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def multinomial_tv_slack(num_states: int, trials: int) -> float:
    """Three-sigma sampling-error allowance for an empirical TV estimate.

    Expected TV of the empirical distribution is at most
    ``sqrt(num_states / trials) / 2``; the second term covers three standard
    deviations of the (1/2 / sqrt(trials))-sub-Gaussian fluctuation.
    """
    return 0.5 * math.sqrt(num_states / trials) + 1.5 * math.sqrt(1.0 / trials)


def empirical_topology_law(
    dist: SparseExpDistribution,
    start: Iterable[int],
    steps: int,
    trials: int,
    source: NoiseSource,
    *,
    engine: str = "auto",
) -> tuple[dict[frozenset[int], float], float]:
    """Frequency table of walk endpoints over seeded independent trials.

    Returns ``(frequencies, slack)`` where slack is the 3-sigma multinomial
    TV estimate for this many trials over the full state space.
    """
    num_states = math.comb(dist.num_items, dist.subset_size)
    if num_states > EMPIRICAL_LAW_STATE_LIMIT:
        raise ValueError(
            f"state space {num_states} exceeds the bound {EMPIRICAL_LAW_STATE_LIMIT}"
        )
    if trials < EMPIRICAL_LAW_MIN_TRIALS:
        raise ValueError(f"need at least {EMPIRICAL_LAW_MIN_TRIALS} trials, got {trials}")
    outcomes = sample_many(dist, start, steps, trials, source, engine=engine)
    counts = Counter(outcomes)
    freq = {frozenset(state): c / trials for state, c in counts.items()}
    return freq, multinomial_tv_slack(num_states, trials)


@dataclass
class ErrorReport:
    """One release's metrics, parameters, and wall-clock timings."""

    mechanism: str
    eps: float
    delta: float
    seed: int
    metrics: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name, value in self.metrics.items():
            if value is None:
                continue
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"metric {name}={value} must be finite and >= 0")

    def to_dict(self) -> dict:
        self.validate()
        return {
            "mechanism": self.mechanism,
            "eps": self.eps,
            "delta": self.delta,
            "seed": self.seed,
            "metrics": dict(self.metrics),
            "timings": dict(self.timings),
            "info": _jsonable(self.info),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def evaluate_graphs(
    original: WeightedGraph,
    released: WeightedGraph,
    *,
    spectral: bool = True,
    max_cut: bool = False,
) -> dict[str, float]:
    """Standard metric map between two sparse graphs."""
    metrics = {
        "l1": l1_distance(original, released),
        "eval": eval_linear_worst(original, released),
        "max_singleton_cut": float(
            np.abs(original.weighted_degrees() - released.weighted_degrees()).max()
        )
        if original.n
        else 0.0,
    }
    if spectral:
        metrics["spectral"] = spectral_norm_diff(original, released)
    if max_cut:
        metrics["max_cut"] = max_cut_error(original, released)[0]
    return metrics


def evaluate_dense(
    original: WeightedGraph, dense_release: np.ndarray, *, spectral: bool = True
) -> dict[str, float]:
    """Metrics against a signed dense released vector (the Gaussian baseline)."""
    diff = original.to_dense() - dense_release
    metrics = {
        "l1": float(np.abs(diff).sum()),
        "eval": float(max(diff[diff > 0].sum() if (diff > 0).any() else 0.0,
                          -diff[diff < 0].sum() if (diff < 0).any() else 0.0)),
    }
    if spectral:
        nz = np.nonzero(diff)[0]
        from .graph import edge_endpoints_array

        us, vs = edge_endpoints_array(nz, original.n)
        ws = diff[nz]
        if original.n <= 2000:
            L = np.zeros((original.n, original.n))
            np.add.at(L, (us, vs), -ws)
            np.add.at(L, (vs, us), -ws)
            diag = np.bincount(us, weights=ws, minlength=original.n) + np.bincount(
                vs, weights=ws, minlength=original.n
            )
            L[np.diag_indices(original.n)] = diag
            metrics["spectral"] = spectral_norm_matrix(L)
            metrics["max_singleton_cut"] = float(np.abs(diag).max())
        else:
            n = original.n

            def matvec(x):
                d = ws * (x[us] - x[vs])
                return np.bincount(us, weights=d, minlength=n) - np.bincount(
                    vs, weights=d, minlength=n
                )

            metrics["spectral"] = _power_iteration(
                matvec, n, tol=1e-9, max_iter=10_000, seed=0
            ).value
    return metrics


def evaluate_sketch(original: WeightedGraph, sketch_matrix: np.ndarray) -> dict[str, float]:
    """Spectral error of a dense Laplacian sketch (no graph-space metrics exist)."""
    diff = laplacian_matrix(original) - sketch_matrix
    return {"spectral": spectral_norm_matrix(diff)}
