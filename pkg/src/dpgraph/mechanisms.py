"""Private graph-release mechanisms and experiment baselines.

Four mechanisms release a sparse synthetic graph from a confidential one:

* ``filter_release`` -- per-edge Laplace noise followed by a high-pass
  threshold ``2 ln(2n/delta) / eps``; touches only the confidential edge set,
  so it runs in O(m) time and space and never grows the support.
* ``exchange_release`` -- samples a k-edge topology from the exponential
  distribution proportional to ``exp(eps * w_e)`` per edge via the
  basis-exchange walk, then publishes Laplace-noised weights on the sampled
  slots.  ``k`` is either the (public) edge count or a Laplace-perturbed
  confidential count.
* ``topology_known_release`` -- pure Laplace weights for the weaker model
  where the edge set itself is public.
* two O(n^2) baselines: dense Gaussian perturbation (``analyze_gauss_release``)
  and a random-projection Laplacian sketch (``jl_release``).

All mechanisms draw edge noise in ascending edge-index order so scripted
sources replay deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import PrivacyBudget, WeightedGraph, num_edge_slots
from .randomness import NoiseSource
from .sampler import SparseExpDistribution, mixing_steps, run_walk

__all__ = [
    "AnalyzeGaussRelease",
    "LaplacianSketch",
    "MECHANISMS",
    "MechanismConfig",
    "ReleaseResult",
    "analyze_gauss_release",
    "confidential_subset_size",
    "exchange_release",
    "filter_release",
    "filter_threshold",
    "gaussian_sigma",
    "jl_default_dimension",
    "jl_release",
    "release",
    "topology_known_release",
]

MECHANISMS = ("filter", "walk", "walk-confidential", "topo-laplace", "gauss", "jl")

_GAUSS_MAX_N = 15_000
_JL_MAX_CELLS = 1 << 27


@dataclass(frozen=True)
class MechanismConfig:
    """Knobs shared by the CLI and benchmark harness."""

    budget: PrivacyBudget
    beta: float | None = None
    mixing_multiplier: float = 1.0
    jl_dimension: int | None = None
    jl_eta: float = 0.1

    def __post_init__(self):
        if self.beta is not None and not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.mixing_multiplier <= 0:
            raise ValueError("mixing multiplier must be positive")
        if self.jl_dimension is not None and self.jl_dimension < 1:
            raise ValueError("jl dimension must be >= 1")
        if not 0 < self.jl_eta < 1:
            raise ValueError(f"jl eta must lie in (0, 1), got {self.jl_eta}")


@dataclass(frozen=True)
class LaplacianSketch:
    """Dense symmetric Laplacian estimate produced by the projection baseline."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (self.n, self.n):
            raise ValueError(f"matrix shape {m.shape} does not match n={self.n}")
        skew = float(np.abs(m - m.T).max()) if self.n else 0.0
        if skew > 1e-9:
            raise ValueError(f"sketch asymmetry {skew} exceeds 1e-9")
        object.__setattr__(self, "matrix", (m + m.T) / 2.0)


@dataclass(frozen=True)
class AnalyzeGaussRelease:
    """Dense Gaussian baseline output.

    ``dense`` keeps the signed released vector (its negative entries matter
    for evaluation fidelity); ``graph`` is the positive-part sparse view.
    """

    graph: WeightedGraph
    dense: np.ndarray
    sigma: float


def filter_threshold(n: int, budget: PrivacyBudget) -> float:
    """High-pass cutoff 2 ln(2n/delta) / eps."""
    return 2.0 * math.log(2.0 * n / budget.delta) / budget.eps


def filter_release(
    graph: WeightedGraph,
    budget: PrivacyBudget,
    source: NoiseSource,
    *,
    info: dict | None = None,
) -> WeightedGraph:
    """Noise every confidential edge, then drop weights at or below the cutoff.

    Exactly ``graph.edge_count`` Laplace draws, ascending edge index.  The
    output support is a subset of the input support and every kept weight
    exceeds the threshold.
    """
    threshold = filter_threshold(graph.n, budget)
    eidx = graph.edge_indices
    if len(eidx):
        noisy = graph.edge_weights + source.laplace(1.0 / budget.eps, size=len(eidx))
        keep = noisy > threshold
        released = WeightedGraph._from_sorted_arrays(graph.n, eidx[keep], noisy[keep])
    else:
        released = WeightedGraph(graph.n)
    if info is not None:
        info.update(
            threshold=threshold,
            kept_edges=released.edge_count,
            noise_draws=graph.edge_count,
        )
    return released


def confidential_subset_size(
    edge_count: int, num_slots: int, eps: float, beta: float, source: NoiseSource
) -> int:
    """Noisy slot count floor(m + Lap(1/eps) + ln(1/beta)/eps), clamped to [0, N]."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    shifted = edge_count + source.laplace(1.0 / eps) + math.log(1.0 / beta) / eps
    return int(min(num_slots, max(0.0, math.floor(shifted))))


def _start_subset(graph: WeightedGraph, k: int) -> frozenset[int]:
    """k-subset maximizing the stationary mass: all of E plus lowest-index
    non-edges, or the k heaviest edges when k < |E| (ties to lower index)."""
    eidx = graph.edge_indices
    m = len(eidx)
    if k <= m:
        order = np.lexsort((eidx, -graph.edge_weights))
        return frozenset(eidx[order[:k]].tolist())
    members = set(eidx.tolist())
    extra = k - m
    candidate = 0
    while extra:
        if candidate not in members:
            members.add(candidate)
            extra -= 1
        candidate += 1
    return frozenset(members)


def exchange_release(
    graph: WeightedGraph,
    budget: PrivacyBudget,
    source: NoiseSource,
    *,
    k_mode: str = "public",
    beta: float | None = None,
    mixing_multiplier: float = 1.0,
    engine: str = "auto",
    info: dict | None = None,
) -> WeightedGraph:
    """Basis-exchange topology sampling plus Laplace reweighting.

    ``k_mode="public"`` keeps the true edge count; ``"confidential"`` first
    perturbs it (one extra Laplace draw, ``beta`` defaulting to the budget's
    delta).  After the walk, each sampled slot gets ``max(0, w_e + Lap(1/eps))``
    in ascending index order -- exactly ``k`` weight draws -- and zero results
    are dropped from the output map.
    """
    if k_mode not in ("public", "confidential"):
        raise ValueError(f"unknown k_mode {k_mode!r}")
    eps = budget.eps
    m = graph.edge_count
    slots = graph.num_slots
    if k_mode == "confidential":
        k = confidential_subset_size(m, slots, eps, beta if beta is not None else budget.delta, source)
    else:
        k = m
    if info is not None:
        info.update(k=k, mode=k_mode)
    if k == 0:
        if info is not None:
            info.update(walk_steps=0, topology=frozenset(), clamped_zero=0)
        return WeightedGraph(graph.n)

    start = _start_subset(graph, k)
    dist = SparseExpDistribution.from_graph(graph, eps, k)
    steps = mixing_steps(k, slots, eps, budget.delta, mixing_multiplier)
    topology = run_walk(dist, start, steps, source, engine=engine)

    chosen = np.fromiter(sorted(topology), np.int64, count=k)
    eidx = graph.edge_indices
    if m:
        pos = np.searchsorted(eidx, chosen)
        pos_c = np.minimum(pos, m - 1)
        found = eidx[pos_c] == chosen
        base = np.where(found, graph.edge_weights[pos_c], 0.0)
    else:
        base = np.zeros(k)
    noisy = np.maximum(0.0, base + source.laplace(1.0 / eps, size=k))
    keep = noisy > 0
    released = WeightedGraph._from_sorted_arrays(graph.n, chosen[keep], noisy[keep])
    if info is not None:
        info.update(
            walk_steps=steps,
            topology=topology,
            clamped_zero=int((~keep).sum()),
            start_overlap=len(start & set(eidx.tolist())),
        )
    return released


def topology_known_release(
    graph: WeightedGraph,
    eps: float,
    source: NoiseSource,
    *,
    info: dict | None = None,
) -> WeightedGraph:
    """Laplace weights on the public topology: w_e + Lap(1/eps) per edge.

    No threshold.  Edges whose noised weight lands at or below zero cannot be
    stored (the sparse map keeps strictly positive entries only); they are
    reported as explicitly zero-weight released values via ``info``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    eidx = graph.edge_indices
    if len(eidx):
        noisy = graph.edge_weights + source.laplace(1.0 / eps, size=len(eidx))
        keep = noisy > 0
        released = WeightedGraph._from_sorted_arrays(graph.n, eidx[keep], noisy[keep])
        zeroed = eidx[~keep]
    else:
        released = WeightedGraph(graph.n)
        zeroed = np.empty(0, np.int64)
    if info is not None:
        info.update(zeroed_edges=zeroed.tolist(), noise_draws=graph.edge_count)
    return released


def gaussian_sigma(budget: PrivacyBudget) -> float:
    """Gaussian-mechanism calibration sqrt(2 ln(1.25/delta)) / eps at sensitivity 1."""
    return math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.eps


def analyze_gauss_release(
    graph: WeightedGraph,
    budget: PrivacyBudget,
    source: NoiseSource,
    *,
    info: dict | None = None,
) -> AnalyzeGaussRelease:
    """Dense Gaussian baseline: N(0, sigma^2) on all C(n,2) pairs.

    O(n^2) by design.  The signed dense vector is retained for evaluation;
    the sparse graph view stores only the positive entries.
    """
    if graph.n > _GAUSS_MAX_N:
        raise ValueError(
            f"dense baseline refused for n={graph.n} > {_GAUSS_MAX_N} (O(n^2) memory)"
        )
    sigma = gaussian_sigma(budget)
    dense = np.zeros(graph.num_slots)
    dense[graph.edge_indices] = graph.edge_weights
    dense += source.gaussian(sigma, size=graph.num_slots)
    positive = dense > 0
    eidx = np.nonzero(positive)[0].astype(np.int64)
    released = WeightedGraph._from_sorted_arrays(graph.n, eidx, dense[positive])
    if info is not None:
        info.update(sigma=sigma, noise_draws=graph.num_slots)
    return AnalyzeGaussRelease(graph=released, dense=dense, sigma=sigma)


def jl_default_dimension(budget: PrivacyBudget, eta: float) -> int:
    """Projection rank ceil(8 ln(2/delta) / eta^2)."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    return math.ceil(8.0 * math.log(2.0 / budget.delta) / (eta * eta))


def jl_release(
    graph: WeightedGraph,
    budget: PrivacyBudget,
    source: NoiseSource,
    *,
    dimension: int | None = None,
    eta: float = 0.1,
    info: dict | None = None,
) -> LaplacianSketch:
    """Random-projection sketch (1/r) * (M E)^T (M E) of the Laplacian.

    The Gaussian matrix is never materialized: only the r-vector column for
    each present edge is drawn (ascending edge index), so memory stays
    O(r n).  The sketch is unbiased for the true Laplacian.
    """
    r = dimension if dimension is not None else jl_default_dimension(budget, eta)
    if r < 1:
        raise ValueError(f"projection rank must be >= 1, got {r}")
    if r * graph.n > _JL_MAX_CELLS:
        raise ValueError(f"projection of {r}x{graph.n} exceeds the memory guard")
    projected = np.zeros((r, graph.n))
    us, vs = graph.endpoints()
    roots = np.sqrt(graph.edge_weights)
    for u, v, sw in zip(us.tolist(), vs.tolist(), roots.tolist()):
        column = source.gaussian(1.0, size=r)
        projected[:, u] += sw * column
        projected[:, v] -= sw * column
    sketch = projected.T @ projected / r
    if info is not None:
        info.update(dimension=r, noise_draws=r * graph.edge_count)
    return LaplacianSketch(graph.n, sketch)


@dataclass
class ReleaseResult:
    """Uniform wrapper for the CLI and benchmark harness."""

    mechanism: str
    graph: WeightedGraph | None = None
    dense: np.ndarray | None = None
    sketch: LaplacianSketch | None = None
    info: dict = field(default_factory=dict)


def release(
    graph: WeightedGraph,
    mechanism: str,
    config: MechanismConfig,
    source: NoiseSource,
    *,
    engine: str = "auto",
) -> ReleaseResult:
    """Run one mechanism by CLI name."""
    info: dict = {}
    if mechanism == "filter":
        out = filter_release(graph, config.budget, source, info=info)
        return ReleaseResult(mechanism, graph=out, info=info)
    if mechanism in ("walk", "walk-confidential"):
        out = exchange_release(
            graph,
            config.budget,
            source,
            k_mode="public" if mechanism == "walk" else "confidential",
            beta=config.beta,
            mixing_multiplier=config.mixing_multiplier,
            engine=engine,
            info=info,
        )
        return ReleaseResult(mechanism, graph=out, info=info)
    if mechanism == "topo-laplace":
        out = topology_known_release(graph, config.budget.eps, source, info=info)
        return ReleaseResult(mechanism, graph=out, info=info)
    if mechanism == "gauss":
        gauss = analyze_gauss_release(graph, config.budget, source, info=info)
        return ReleaseResult(mechanism, graph=gauss.graph, dense=gauss.dense, info=info)
    if mechanism == "jl":
        sketch = jl_release(
            graph,
            config.budget,
            source,
            dimension=config.jl_dimension,
            eta=config.jl_eta,
            info=info,
        )
        return ReleaseResult(mechanism, sketch=sketch, info=info)
    raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
