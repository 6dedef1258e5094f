"""Private graph release under continual observation.

The stream model: round ``t`` adds weight ``w`` to one edge; after every
round the mechanism must publish a synthetic graph for the running prefix
sum.  The binary mechanism keeps one partial-sum graph per dyadic level
(level ``j`` of round ``t`` covers the last ``2^j`` updates), privatizes each
partial sum exactly once with a pluggable static mechanism at a reduced
per-call budget, and releases the sum of the current privatized levels.
Each update therefore participates in at most ``ceil(log2 T) + 1`` privatize
calls, giving O(log T) amortized work per round when the static mechanism is
linear-time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .graph import GraphFormatError, WeightedGraph, num_edge_slots
from .randomness import NoiseSource

__all__ = [
    "PartialSumTree",
    "StreamExhausted",
    "StreamUpdate",
    "continual_budget",
    "identity_mechanism",
    "level_index",
    "read_stream",
    "write_stream",
]

StaticMechanism = Callable[[WeightedGraph, NoiseSource], WeightedGraph]


class StreamExhausted(RuntimeError):
    """More updates arrived than the declared horizon T."""


@dataclass(frozen=True)
class StreamUpdate:
    """One round's increment: add weight w >= 0 to edge slot e."""

    e: int
    w: float

    def __post_init__(self):
        if self.e < 0:
            raise ValueError(f"edge index must be >= 0, got {self.e}")
        if self.w < 0 or not math.isfinite(self.w):
            raise ValueError(f"update weight must be >= 0, got {self.w}")


def level_index(t: int) -> int:
    """Index of the lowest set bit of the round counter t >= 1."""
    if t < 1:
        raise ValueError(f"round counter must be >= 1, got {t}")
    return (t & -t).bit_length() - 1


def continual_budget(eps: float, delta: float, horizon) -> tuple[float, float]:
    """Per-call budget (eps / sqrt(ln T * ln(1/delta)), delta).

    The composed stream guarantee is (eps, (T+1) delta).  A horizon of one
    round needs no composition, so the full eps passes through.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if horizon == 1:
        return eps, delta
    return eps / math.sqrt(math.log(horizon) * math.log(1.0 / delta)), delta


def identity_mechanism(graph: WeightedGraph, source: NoiseSource) -> WeightedGraph:
    """Zero-noise static mechanism; the stream then telescopes exactly."""
    return graph


class PartialSumTree:
    """Binary-mechanism state for one stream.

    ``mechanism`` is the static release called once per privatized partial
    sum at the (already reduced) per-call budget.  Strictly sequential; one
    tree per stream.
    """

    def __init__(
        self,
        n: int,
        horizon: int,
        mechanism: StaticMechanism,
        source: NoiseSource,
    ):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.n = int(n)
        self.horizon = int(horizon)
        self.mechanism = mechanism
        self.source = source
        levels = horizon.bit_length()
        self._raw: list[WeightedGraph | None] = [None] * levels
        self._released: list[WeightedGraph | None] = [None] * levels
        self.round = 0
        self.privatize_log: list[tuple[int, int]] = []  # (round, level)
        self.edge_touches = 0

    def _update_graph(self, update: StreamUpdate) -> WeightedGraph:
        slots = num_edge_slots(self.n)
        if update.e >= slots:
            raise ValueError(f"edge index {update.e} out of range [0, {slots})")
        if update.w == 0:
            return WeightedGraph(self.n)
        return WeightedGraph(self.n, {update.e: update.w})

    def step(self, update: StreamUpdate) -> WeightedGraph:
        """Fold one update, privatize the affected level, return the release."""
        if self.round + 1 > self.horizon:
            raise StreamExhausted(f"stream horizon {self.horizon} exceeded")
        self.round += 1
        j = level_index(self.round)
        acc = self._update_graph(update)
        for level in range(j):
            if self._raw[level] is not None:
                self.edge_touches += self._raw[level].edge_count
                acc = acc + self._raw[level]
            self._raw[level] = None
            self._released[level] = None
        self._raw[j] = acc
        self.edge_touches += acc.edge_count
        self._released[j] = self.mechanism(acc, self.source)
        self.privatize_log.append((self.round, j))
        release = WeightedGraph(self.n)
        for level_graph in self._released:
            if level_graph is not None:
                release = release + level_graph
        return release

    def raw_prefix(self) -> WeightedGraph:
        """Sum of the active raw partial sums; equals the exact prefix graph."""
        total = WeightedGraph(self.n)
        for level_graph in self._raw:
            if level_graph is not None:
                total = total + level_graph
        return total

    def inclusion_counts(self) -> dict[int, int]:
        """Per-update number of privatize calls it participated in."""
        counts = {u: 0 for u in range(1, self.round + 1)}
        for when, level in self.privatize_log:
            for u in range(when - (1 << level) + 1, when + 1):
                counts[u] += 1
        return counts


# -- stream text format --------------------------------------------------

def write_stream(path, n: int, horizon: int, updates: Iterable[StreamUpdate]) -> None:
    """Header ``n <count>`` and ``T <rounds>``, then one ``u\\tv\\tw`` per round."""
    from .graph import edge_endpoints

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"n {n}\n")
        fh.write(f"T {horizon}\n")
        for upd in updates:
            u, v = edge_endpoints(upd.e, n)
            fh.write(f"{u}\t{v}\t{upd.w!r}\n")


def read_stream(path) -> tuple[int, int, list[StreamUpdate]]:
    """Parse a stream file; shorter-than-T streams are fine, longer are not."""
    from .graph import edge_index

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("n "):
            raise GraphFormatError("expected header 'n <vertex_count>'", 1)
        try:
            n = int(header[2:].strip())
        except ValueError:
            raise GraphFormatError(f"bad vertex count {header[2:].strip()!r}", 1) from None
        horizon_line = fh.readline()
        if not horizon_line.startswith("T "):
            raise GraphFormatError("expected header 'T <rounds>'", 2)
        try:
            horizon = int(horizon_line[2:].strip())
        except ValueError:
            raise GraphFormatError(
                f"bad horizon {horizon_line[2:].strip()!r}", 2
            ) from None
        updates: list[StreamUpdate] = []
        for lineno, line in enumerate(fh, start=3):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise GraphFormatError("expected 'u<TAB>v<TAB>w'", lineno)
            try:
                u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise GraphFormatError(f"unparseable update {line.strip()!r}", lineno) from None
            if not 0 <= u < v < n:
                raise GraphFormatError(f"update ({u}, {v}) violates 0 <= u < v < n", lineno)
            if w < 0:
                raise GraphFormatError(f"update weight {w} is negative", lineno)
            updates.append(StreamUpdate(edge_index(u, v, n), w))
        if len(updates) > horizon:
            raise GraphFormatError(
                f"stream has {len(updates)} updates but horizon T={horizon}", lineno
            )
    return n, horizon, updates
