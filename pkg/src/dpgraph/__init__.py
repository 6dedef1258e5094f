"""Differentially private release of sparse synthetic graphs.

Linear-time mechanisms that output a sparse synthetic graph approximating
all cut queries and the Laplacian spectrum of a confidential weighted graph,
plus a continual-observation streaming mode and an evaluation/benchmark
harness.
"""

from .graph import (
    PrivacyBudget,
    WeightedGraph,
    cut_st_value,
    cut_value,
    edge_endpoints,
    edge_index,
    eval_linear_worst,
    l1_distance,
    laplacian_quadratic,
    num_edge_slots,
    read_graph,
    write_graph,
)
from .randomness import NoiseSource, ScriptedNoiseExhausted, resolve_seed
from .sampler import (
    SparseExpDistribution,
    exact_pi,
    exact_transition_matrix,
    exact_transition_row,
    mixing_steps,
    run_walk,
)

__version__ = "0.1.0"

__all__ = [
    "NoiseSource",
    "PrivacyBudget",
    "ScriptedNoiseExhausted",
    "SparseExpDistribution",
    "WeightedGraph",
    "cut_st_value",
    "cut_value",
    "edge_endpoints",
    "edge_index",
    "eval_linear_worst",
    "exact_pi",
    "exact_transition_matrix",
    "exact_transition_row",
    "l1_distance",
    "laplacian_quadratic",
    "mixing_steps",
    "num_edge_slots",
    "read_graph",
    "resolve_seed",
    "run_walk",
    "write_graph",
]
