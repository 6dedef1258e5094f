"""Canonical sparse weighted-graph representation and cut/Laplacian primitives.

A graph on ``n`` vertices is a sparse non-negative vector over the
``N = n*(n-1)/2`` unordered vertex pairs, indexed in row-major
upper-triangle order ``(0,1),(0,2),...,(0,n-1),(1,2),...``.  Only strictly
positive weights are stored; an absent index means weight zero, so the edge
set is exactly the support of the vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "GraphFormatError",
    "PrivacyBudget",
    "WeightedGraph",
    "cut_st_value",
    "cut_value",
    "edge_endpoints",
    "edge_endpoints_array",
    "edge_index",
    "eval_linear_worst",
    "l1_distance",
    "laplacian_quadratic",
    "num_edge_slots",
    "read_graph",
    "write_graph",
]


class GraphFormatError(ValueError):
    """Malformed graph text; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class PrivacyBudget:
    """An (eps, delta) pair; eps > 0 and 0 < delta < 1."""

    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def num_edge_slots(n: int) -> int:
    """Number of unordered vertex pairs N = C(n, 2)."""
    return n * (n - 1) // 2


def edge_index(u: int, v: int, n: int) -> int:
    """Rank of the unordered pair {u, v} in row-major upper-triangle order."""
    if u == v:
        raise ValueError(f"self-loop ({u}, {v}) has no edge index")
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"vertices ({u}, {v}) out of range for n={n}")
    if u > v:
        u, v = v, u
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def edge_endpoints(e: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`edge_index`."""
    slots = num_edge_slots(n)
    if not 0 <= e < slots:
        raise ValueError(f"edge index {e} out of range [0, {slots}) for n={n}")
    t = slots - 1 - e
    row_from_end = (math.isqrt(8 * t + 1) - 1) // 2
    u = n - 2 - row_from_end
    v = e - (u * n - u * (u + 1) // 2) + u + 1
    return u, v


def edge_endpoints_array(e: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`edge_endpoints` for sorted or unsorted index arrays."""
    slots = num_edge_slots(n)
    e = np.asarray(e, dtype=np.int64)
    t = slots - 1 - e
    w = np.floor((np.sqrt(8.0 * t + 1.0) - 1.0) / 2.0).astype(np.int64)
    # float sqrt can be off by one near perfect squares; nudge into place
    while True:
        too_big = w * (w + 1) // 2 > t
        if not too_big.any():
            break
        w[too_big] -= 1
    while True:
        too_small = (w + 1) * (w + 2) // 2 <= t
        if not too_small.any():
            break
        w[too_small] += 1
    u = n - 2 - w
    v = e - (u * n - u * (u + 1) // 2) + u + 1
    return u, v


class WeightedGraph:
    """Immutable sparse weighted graph over canonical edge slots.

    ``weights`` maps edge index to a strictly positive finite weight.  The
    instance keeps the support as sorted parallel arrays for O(m) scans and
    exposes a mapping view for point lookups.  Safe to share across threads.
    """

    __slots__ = ("n", "_eidx", "_w", "_map", "_ends")

    def __init__(self, n: int, weights: Mapping[int, float] | None = None):
        if n < 1:
            raise ValueError(f"vertex count must be >= 1, got {n}")
        self.n = int(n)
        items = sorted((weights or {}).items())
        eidx = np.fromiter((e for e, _ in items), dtype=np.int64, count=len(items))
        w = np.fromiter((x for _, x in items), dtype=np.float64, count=len(items))
        slots = num_edge_slots(self.n)
        if len(eidx):
            if eidx[0] < 0 or eidx[-1] >= slots:
                raise ValueError(f"edge index out of range [0, {slots})")
            if not (np.isfinite(w).all() and (w > 0).all()):
                raise ValueError("edge weights must be strictly positive and finite")
        self._eidx = eidx
        self._w = w
        self._map = None
        self._ends = None

    @classmethod
    def _from_sorted_arrays(cls, n: int, eidx: np.ndarray, w: np.ndarray) -> "WeightedGraph":
        """Trusted constructor: ``eidx`` strictly increasing, ``w`` positive."""
        g = cls.__new__(cls)
        g.n = int(n)
        g._eidx = np.ascontiguousarray(eidx, dtype=np.int64)
        g._w = np.ascontiguousarray(w, dtype=np.float64)
        g._map = None
        g._ends = None
        return g

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int, float]]) -> "WeightedGraph":
        weights: dict[int, float] = {}
        for u, v, w in pairs:
            e = edge_index(u, v, n)
            if e in weights:
                raise ValueError(f"duplicate edge ({u}, {v})")
            weights[e] = float(w)
        return cls(n, weights)

    # -- basic views ---------------------------------------------------

    @property
    def num_slots(self) -> int:
        return num_edge_slots(self.n)

    @property
    def edge_count(self) -> int:
        return len(self._eidx)

    @property
    def edge_indices(self) -> np.ndarray:
        return self._eidx

    @property
    def edge_weights(self) -> np.ndarray:
        return self._w

    @property
    def weights(self) -> Mapping[int, float]:
        if self._map is None:
            self._map = MappingProxyType(dict(zip(self._eidx.tolist(), self._w.tolist())))
        return self._map

    def weight(self, e: int) -> float:
        pos = np.searchsorted(self._eidx, e)
        if pos < len(self._eidx) and self._eidx[pos] == e:
            return float(self._w[pos])
        return 0.0

    def __contains__(self, e: int) -> bool:
        pos = np.searchsorted(self._eidx, e)
        return pos < len(self._eidx) and self._eidx[pos] == e

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint arrays (us, vs) aligned with ``edge_indices``."""
        if self._ends is None:
            self._ends = edge_endpoints_array(self._eidx, self.n)
        return self._ends

    @property
    def total_weight(self) -> float:
        return float(self._w.sum())

    def max_unweighted_degree(self) -> int:
        if not len(self._eidx):
            return 0
        us, vs = self.endpoints()
        counts = np.bincount(us, minlength=self.n) + np.bincount(vs, minlength=self.n)
        return int(counts.max())

    def weighted_degrees(self) -> np.ndarray:
        us, vs = self.endpoints()
        return np.bincount(us, weights=self._w, minlength=self.n) + np.bincount(
            vs, weights=self._w, minlength=self.n
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and len(self._eidx) == len(other._eidx)
            and bool(np.array_equal(self._eidx, other._eidx))
            and bool(np.array_equal(self._w, other._w))
        )

    def __hash__(self):
        return hash((self.n, self._eidx.tobytes(), self._w.tobytes()))

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={self.edge_count})"

    def __add__(self, other: "WeightedGraph") -> "WeightedGraph":
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        if self.n != other.n:
            raise ValueError(f"vertex counts differ: {self.n} vs {other.n}")
        if not other.edge_count:
            return self
        if not self.edge_count:
            return other
        eidx = np.concatenate([self._eidx, other._eidx])
        w = np.concatenate([self._w, other._w])
        uniq, inverse = np.unique(eidx, return_inverse=True)
        summed = np.zeros(len(uniq))
        np.add.at(summed, inverse, w)
        return WeightedGraph._from_sorted_arrays(self.n, uniq, summed)

    def to_dense(self) -> np.ndarray:
        """Dense weight vector of length N; guard against huge n."""
        slots = self.num_slots
        if slots > 200_000_000:
            raise ValueError(f"refusing dense vector of {slots} slots")
        dense = np.zeros(slots)
        dense[self._eidx] = self._w
        return dense


def _vertex_mask(n: int, vertices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for v in vertices:
        if not 0 <= v < n:
            raise ValueError(f"vertex {v} out of range [0, {n})")
        mask[v] = True
    return mask


def cut_value(graph: WeightedGraph, vertices: Iterable[int]) -> float:
    """Total weight crossing between ``vertices`` and its complement."""
    mask = _vertex_mask(graph.n, vertices)
    if not graph.edge_count:
        return 0.0
    us, vs = graph.endpoints()
    crossing = mask[us] ^ mask[vs]
    return float(graph.edge_weights[crossing].sum())


def cut_st_value(graph: WeightedGraph, s: Iterable[int], t: Iterable[int]) -> float:
    """Total weight of edges with one endpoint in ``s`` and the other in ``t``."""
    s_mask = _vertex_mask(graph.n, s)
    t_mask = _vertex_mask(graph.n, t)
    if (s_mask & t_mask).any():
        raise ValueError("S and T must be disjoint")
    if not graph.edge_count:
        return 0.0
    us, vs = graph.endpoints()
    crossing = (s_mask[us] & t_mask[vs]) | (t_mask[us] & s_mask[vs])
    return float(graph.edge_weights[crossing].sum())


def laplacian_quadratic(graph: WeightedGraph, x) -> float:
    """Quadratic form sum_e w_e * (x_u - x_v)^2 of the graph Laplacian."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.n,):
        raise ValueError(f"vector length {x.shape} does not match n={graph.n}")
    if not graph.edge_count:
        return 0.0
    us, vs = graph.endpoints()
    diff = x[us] - x[vs]
    return float((graph.edge_weights * diff * diff).sum())


def _aligned_difference(g: WeightedGraph, h: WeightedGraph) -> np.ndarray:
    union = np.union1d(g.edge_indices, h.edge_indices)
    diff = np.zeros(len(union))
    pos = np.searchsorted(union, g.edge_indices)
    diff[pos] = g.edge_weights
    pos = np.searchsorted(union, h.edge_indices)
    diff[pos] -= h.edge_weights
    return diff


def l1_distance(g: WeightedGraph, h: WeightedGraph) -> float:
    """Entrywise l1 distance over the union of supports."""
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} vs {h.n}")
    return float(np.abs(_aligned_difference(g, h)).sum())


def eval_linear_worst(g: WeightedGraph, h: WeightedGraph) -> float:
    """Worst-case linear-query error max over q in [0,1]^N of |q.(g - h)|.

    Closed form: the maximizing q selects either every positive or every
    negative component of the difference, so the value is
    max(sum of positives, -sum of negatives).  Always lies between half the
    l1 distance and the full l1 distance.
    """
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} vs {h.n}")
    diff = _aligned_difference(g, h)
    pos = float(diff[diff > 0].sum())
    neg = float(-diff[diff < 0].sum())
    return max(pos, neg)


# -- text format -------------------------------------------------------

def write_graph(graph: WeightedGraph, path) -> None:
    """Write the TSV graph format: header ``n <count>`` then ``u\\tv\\tw`` lines."""
    us, vs = graph.endpoints()
    lines = [f"n {graph.n}\n"]
    for u, v, w in zip(us.tolist(), vs.tolist(), graph.edge_weights.tolist()):
        lines.append(f"{u}\t{v}\t{w!r}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def read_graph(path) -> WeightedGraph:
    """Parse the TSV graph format; raises :class:`GraphFormatError` with line numbers."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("n "):
            raise GraphFormatError("expected header 'n <vertex_count>'", 1)
        try:
            n = int(header[2:].strip())
        except ValueError:
            raise GraphFormatError(f"bad vertex count {header[2:].strip()!r}", 1) from None
        pairs: list[tuple[int, int, float]] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise GraphFormatError("expected 'u<TAB>v<TAB>w'", lineno)
            try:
                u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise GraphFormatError(f"unparseable edge line {line.strip()!r}", lineno) from None
            if not 0 <= u < v < n:
                raise GraphFormatError(f"edge ({u}, {v}) violates 0 <= u < v < n", lineno)
            if not w > 0:
                raise GraphFormatError(f"weight {w} is not positive", lineno)
            pairs.append((u, v, w))
    try:
        return WeightedGraph.from_pairs(n, pairs)
    except ValueError as exc:
        raise GraphFormatError(str(exc), 0) from exc
