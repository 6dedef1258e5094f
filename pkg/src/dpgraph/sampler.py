"""Sparse exponential-mechanism sampling over k-subsets.

The target distribution over subsets ``S`` of ``[N]`` with ``|S| = k`` is

    pi[S]  proportional to  prod_{e in S} exp(eps * w_e),

equivalently ``exp(-eps * ||x - x|S||_1)`` up to an S-independent factor,
where ``x`` is the sparse weight vector.  Sampling runs a basis-exchange
walk: each step removes one uniformly chosen element and re-inserts an
element of the complement with probability proportional to its factor
``exp(eps * w)``.  The insertion draw never materializes the zero-weight
ground elements; a single aggregate leaf of the weight tree carries their
count, so a walk over an N = C(n,2) ground set costs O(m) space and
O(log m) per step.

Everything here is log-domain: ``exp(eps * w)`` overflows for realistic
weighted graphs, while log-masses add.  A compiled kernel in
:mod:`dpgraph._fastwalk` runs the same chain for long walks; the classes in
this module are the reference implementation and the exact small-instance
oracles used to validate both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .graph import WeightedGraph
from .randomness import NoiseSource

__all__ = [
    "BasisExchangeWalk",
    "SparseExpDistribution",
    "WeightTree",
    "exact_pi",
    "exact_transition_matrix",
    "exact_transition_row",
    "mixing_steps",
    "run_walk",
    "sample_many",
]

EXACT_PI_LIMIT = 10**6
EXACT_ROW_LIMIT = 10**4

_NEG_INF = float("-inf")


def _log_e2eps_plus_1(eps: float) -> float:
    """ln(e^(2*eps) + 1) without overflow."""
    return float(np.logaddexp(2.0 * eps, 0.0))


@dataclass(frozen=True)
class SparseExpDistribution:
    """Distribution over k-subsets of [N] with mass prod exp(eps * w_e).

    ``weights`` is sparse; indices absent from it have weight zero.  Explicit
    zero entries are dropped so the stored support is exactly the positive
    part.
    """

    num_items: int
    subset_size: int
    eps: float
    weights: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_items < 0:
            raise ValueError("ground-set size must be non-negative")
        if not 0 <= self.subset_size <= self.num_items:
            raise ValueError(
                f"subset size {self.subset_size} outside [0, {self.num_items}]"
            )
        if self.eps < 0 or not math.isfinite(self.eps):
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        cleaned = {}
        for i, w in self.weights.items():
            if not 0 <= i < self.num_items:
                raise ValueError(f"index {i} outside [0, {self.num_items})")
            if w < 0 or not math.isfinite(w):
                raise ValueError(f"weight {w} at index {i} must be >= 0")
            if w > 0:
                cleaned[int(i)] = float(w)
        object.__setattr__(self, "weights", cleaned)

    @classmethod
    def from_graph(cls, graph: WeightedGraph, eps: float, subset_size: int) -> "SparseExpDistribution":
        return cls(graph.num_slots, subset_size, eps, dict(graph.weights))

    def log_mass(self, subset: Iterable[int]) -> float:
        """Unnormalized log-mass eps * sum_{e in S} w_e."""
        s = set(subset)
        if len(s) != self.subset_size:
            raise ValueError(f"subset has size {len(s)}, expected {self.subset_size}")
        return self.eps * sum(self.weights.get(e, 0.0) for e in s)

    def log_mass_l1(self, subset: Iterable[int]) -> float:
        """Same mass via the l1 form eps*||x||_1 - eps*||x - x|S||_1."""
        s = set(subset)
        if len(s) != self.subset_size:
            raise ValueError(f"subset has size {len(s)}, expected {self.subset_size}")
        total = sum(self.weights.values())
        outside = sum(w for e, w in self.weights.items() if e not in s)
        return self.eps * total - self.eps * outside


def mixing_steps(
    k: int, num_items: int, eps: float, delta: float, multiplier: float = 1.0
) -> int:
    """Walk length driving the output law within TV delta/(e^(2 eps)+1) of pi.

    Instantiates the strongly-log-concave mixing bound
    ``T = k * (ln ln(1/pi(S0)) + 2 ln(1/alpha) + ln 4)`` with
    ``alpha = delta / (e^(2 eps) + 1)`` and the start-state bound
    ``ln(1/pi(S0)) <= k * ln N``, assuming the walk starts from a mass
    maximizer.  ``multiplier`` scales the whole count for benchmarking the
    unspecified constant.
    """
    if not 1 <= k <= num_items:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={num_items}")
    if eps < 0 or not math.isfinite(eps):
        raise ValueError(f"eps must be >= 0, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if multiplier <= 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    loglog = math.log(k * math.log(max(num_items, 3)) + 2.0)
    tv_term = 2.0 * (_log_e2eps_plus_1(eps) - math.log(delta))
    return math.ceil(multiplier * k * (loglog + tv_term + math.log(4.0)))


class WeightTree:
    """Logsumexp tree over the sparse support plus one zero-aggregate leaf.

    Support leaves 0..s-1 hold log-mass ``eps * w`` (set to -inf while the
    element sits inside the walk's current subset).  The aggregate leaf for
    zero-weight ground elements sits beside the support subtree at the root:
    it stores ``ln(count)`` of the zero-weight elements currently outside the
    subset, and count changes never touch the support subtree.  Internal
    nodes hold the logsumexp of their children, so enable/disable/sample all
    touch O(log s) nodes.
    """

    def __init__(self, support: list[tuple[int, float]], eps: float, num_items: int, *, check: bool = False):
        support = sorted(support)
        self.indices = np.array([e for e, _ in support], dtype=np.int64)
        self.leaf_log_mass = np.array([eps * w for _, w in support])
        self.num_items = num_items
        self._check = check
        s = len(support)
        size = 1
        while size < max(s, 1):
            size *= 2
        self._base = size
        self._node = np.full(2 * size, _NEG_INF)
        self._node[size : size + s] = self.leaf_log_mass
        for i in range(size - 1, 0, -1):
            self._node[i] = np.logaddexp(self._node[2 * i], self._node[2 * i + 1])
        self.zero_available = num_items - s
        self._updates = 0

    @property
    def zero_log_mass(self) -> float:
        return math.log(self.zero_available) if self.zero_available > 0 else _NEG_INF

    @property
    def root_log_mass(self) -> float:
        """Log-mass of everything available: support subtree plus zero leaf."""
        return float(np.logaddexp(self._node[1], self.zero_log_mass))

    def _update(self, leaf: int, value: float) -> None:
        i = self._base + leaf
        self._node[i] = value
        i //= 2
        while i:
            self._node[i] = np.logaddexp(self._node[2 * i], self._node[2 * i + 1])
            i //= 2
        self._updates += 1
        if self._check:
            err = self.consistency_error()
            if err > 1e-9:
                raise AssertionError(f"weight-tree root drifted by {err}")
        elif self._updates % 65536 == 0 and self.consistency_error() > 1e-9:
            self.rebuild()

    def consistency_error(self) -> float:
        """|root - flat logsumexp of all available leaves|; stays below 1e-9."""
        leaves = self._node[self._base : self._base + max(len(self.indices), 1)]
        finite = list(leaves[np.isfinite(leaves)]) + (
            [self.zero_log_mass] if self.zero_available > 0 else []
        )
        flat = float(np.logaddexp.reduce(finite)) if finite else _NEG_INF
        root = self.root_log_mass
        if flat == _NEG_INF and root == _NEG_INF:
            return 0.0
        return abs(root - flat)

    def rebuild(self) -> None:
        for i in range(self._base - 1, 0, -1):
            self._node[i] = np.logaddexp(self._node[2 * i], self._node[2 * i + 1])

    def support_position(self, index: int) -> int:
        """Leaf slot of a support element, or -1 if the index carries no weight."""
        pos = int(np.searchsorted(self.indices, index))
        if pos < len(self.indices) and self.indices[pos] == index:
            return pos
        return -1

    def disable(self, leaf: int) -> None:
        self._update(leaf, _NEG_INF)

    def enable(self, leaf: int) -> None:
        self._update(leaf, float(self.leaf_log_mass[leaf]))

    def add_zero_available(self, delta: int) -> None:
        self.zero_available += delta
        if self.zero_available < 0:
            raise RuntimeError("zero-aggregate count dropped below zero")

    def sample_leaf(self, source: NoiseSource) -> int:
        """Pick an available leaf by mass; ``len(indices)`` denotes the zero lump."""
        support_log = float(self._node[1])
        zero_log = self.zero_log_mass
        if support_log == _NEG_INF and zero_log == _NEG_INF:
            raise RuntimeError("no available mass to sample from")
        if support_log == _NEG_INF:
            return len(self.indices)
        if zero_log != _NEG_INF:
            p_zero = 1.0 / (1.0 + math.exp(support_log - zero_log))
            if source.uniform() < p_zero:
                return len(self.indices)
        i = 1
        while i < self._base:
            left, right = self._node[2 * i], self._node[2 * i + 1]
            if right == _NEG_INF:
                i = 2 * i
            elif left == _NEG_INF:
                i = 2 * i + 1
            else:
                p_left = 1.0 / (1.0 + math.exp(right - left))
                i = 2 * i if source.uniform() < p_left else 2 * i + 1
        return i - self._base


class BasisExchangeWalk:
    """Reference chain state: the current k-subset plus its weight tree.

    One :meth:`step` removes a uniform element of the current subset and
    re-inserts an element of the complement with probability proportional to
    ``exp(eps * w)``; the just-removed element is itself a candidate.
    """

    def __init__(self, dist: SparseExpDistribution, start: Iterable[int], *, check_tree: bool = False):
        self.dist = dist
        current = sorted(set(start))
        if len(current) != dist.subset_size:
            raise ValueError(
                f"start set has size {len(current)}, expected {dist.subset_size}"
            )
        if current and not (0 <= current[0] and current[-1] < dist.num_items):
            raise ValueError("start set contains out-of-range indices")
        self.tree = WeightTree(
            list(dist.weights.items()), dist.eps, dist.num_items, check=check_tree
        )
        self._members = list(current)
        self._zero_members: set[int] = set()
        for e in current:
            leaf = self.tree.support_position(e)
            if leaf >= 0:
                self.tree.disable(leaf)
            else:
                self._zero_members.add(e)
                self.tree.add_zero_available(-1)
        self.step_count = 0

    @property
    def current(self) -> frozenset[int]:
        return frozenset(self._members)

    def _draw_zero_element(self, source: NoiseSource) -> int:
        # Uniform over ground elements that carry no weight and are outside
        # the current subset.  Rejection is O(1) expected while the subset and
        # support are small relative to N; the scan fallback keeps degenerate
        # small universes (k close to N) terminating.
        for _ in range(256):
            e = source.uniform_index(self.dist.num_items)
            if e in self._zero_members or self.tree.support_position(e) >= 0:
                continue
            return e
        rank = source.uniform_index(self.tree.zero_available)
        for e in range(self.dist.num_items):
            if e in self._zero_members or self.tree.support_position(e) >= 0:
                continue
            if rank == 0:
                return e
            rank -= 1
        raise RuntimeError("zero-aggregate count out of sync")

    def step(self, source: NoiseSource) -> frozenset[int]:
        """One exchange move; returns the new current subset."""
        k = self.dist.subset_size
        if k == 0:
            self.step_count += 1
            return frozenset()
        pos = source.uniform_index(k)
        removed = self._members[pos]
        leaf = self.tree.support_position(removed)
        if leaf >= 0:
            self.tree.enable(leaf)
        else:
            self._zero_members.discard(removed)
            self.tree.add_zero_available(1)
        chosen_leaf = self.tree.sample_leaf(source)
        if chosen_leaf < len(self.tree.indices):
            inserted = int(self.tree.indices[chosen_leaf])
            self.tree.disable(chosen_leaf)
        else:
            inserted = self._draw_zero_element(source)
            self._zero_members.add(inserted)
            self.tree.add_zero_available(-1)
        self._members[pos] = inserted
        self.step_count += 1
        return self.current


def run_walk(
    dist: SparseExpDistribution,
    start: Iterable[int],
    steps: int,
    source: NoiseSource,
    *,
    engine: str = "auto",
    check_tree: bool = False,
) -> frozenset[int]:
    """Run ``steps`` exchange moves from ``start`` and return the final subset.

    ``engine="auto"`` uses the compiled kernel for seeded sources when
    available and falls back to the pure-Python chain (always used for
    scripted sources).  Both engines implement the same transition law.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    start = frozenset(start)
    if len(start) != dist.subset_size:
        raise ValueError(f"start set has size {len(start)}, expected {dist.subset_size}")
    if dist.subset_size == 0 or steps == 0:
        return start
    if engine not in ("auto", "python", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    use_fast = engine == "numba"
    if engine == "auto":
        use_fast = not source.is_scripted and _fast_available(dist)
    if use_fast:
        from . import _fastwalk

        out = _fastwalk.run_batch(dist, start, steps, 1, source.kernel_seed())
        result = frozenset(out[0].tolist())
    else:
        walk = BasisExchangeWalk(dist, start, check_tree=check_tree)
        for _ in range(steps):
            walk.step(source)
        result = walk.current
    if len(result) != dist.subset_size:
        raise AssertionError("walk returned a subset of the wrong size")
    return result


def sample_many(
    dist: SparseExpDistribution,
    start: Iterable[int],
    steps: int,
    runs: int,
    source: NoiseSource,
    *,
    engine: str = "auto",
) -> list[tuple[int, ...]]:
    """Independent walk endpoints as sorted tuples, batched through the kernel."""
    start = frozenset(start)
    if engine == "auto":
        engine = "numba" if (not source.is_scripted and _fast_available(dist)) else "python"
    if engine == "numba":
        from . import _fastwalk

        out = _fastwalk.run_batch(dist, start, steps, runs, source.kernel_seed())
        out.sort(axis=1)
        return [tuple(row) for row in out.tolist()]
    return [
        tuple(sorted(run_walk(dist, start, steps, source, engine="python")))
        for _ in range(runs)
    ]


def _fast_available(dist: SparseExpDistribution) -> bool:
    try:
        from . import _fastwalk

        return _fastwalk.HAVE_NUMBA and _fastwalk.supports(dist)
    except ImportError:  # pragma: no cover
        return False


# -- exact small-instance oracles ---------------------------------------

def _check_state_space(dist: SparseExpDistribution, limit: int) -> int:
    size = math.comb(dist.num_items, dist.subset_size)
    if size > limit:
        raise ValueError(
            f"state space C({dist.num_items}, {dist.subset_size}) = {size} "
            f"exceeds the oracle bound {limit}"
        )
    return size


def exact_pi(dist: SparseExpDistribution) -> dict[frozenset[int], float]:
    """Exact normalized stationary distribution by full enumeration."""
    _check_state_space(dist, EXACT_PI_LIMIT)
    states = [frozenset(c) for c in combinations(range(dist.num_items), dist.subset_size)]
    logs = np.array([dist.log_mass(s) for s in states])
    logs -= logs.max() if len(logs) else 0.0
    masses = np.exp(logs)
    masses /= masses.sum()
    return dict(zip(states, masses.tolist()))


def _insertion_log_weights(dist: SparseExpDistribution, candidates: list[int]) -> np.ndarray:
    return np.array([dist.eps * dist.weights.get(e, 0.0) for e in candidates])


def exact_transition_row(
    dist: SparseExpDistribution, subset: Iterable[int]
) -> dict[frozenset[int], float]:
    """Exact one-step law of the exchange walk from ``subset``."""
    _check_state_space(dist, EXACT_ROW_LIMIT)
    current = frozenset(subset)
    k = dist.subset_size
    if len(current) != k:
        raise ValueError(f"subset has size {len(current)}, expected {k}")
    row: dict[frozenset[int], float] = {}
    if k == 0:
        return {current: 1.0}
    for removed in current:
        rest = current - {removed}
        candidates = [e for e in range(dist.num_items) if e not in rest]
        logw = _insertion_log_weights(dist, candidates)
        logw -= logw.max()
        probs = np.exp(logw)
        probs /= probs.sum()
        for cand, p in zip(candidates, probs.tolist()):
            nxt = rest | {cand}
            row[nxt] = row.get(nxt, 0.0) + p / k
    return row


def exact_transition_matrix(
    dist: SparseExpDistribution,
) -> tuple[list[frozenset[int]], np.ndarray]:
    """All states plus the full exchange-walk transition matrix."""
    size = _check_state_space(dist, EXACT_ROW_LIMIT)
    states = [frozenset(c) for c in combinations(range(dist.num_items), dist.subset_size)]
    index = {s: i for i, s in enumerate(states)}
    matrix = np.zeros((size, size))
    for i, s in enumerate(states):
        for nxt, p in exact_transition_row(dist, s).items():
            matrix[i, index[nxt]] = p
    return states, matrix
