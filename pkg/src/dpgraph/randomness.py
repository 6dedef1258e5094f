"""Seeded randomness and noise primitives shared by every mechanism.

All randomness flows through a :class:`NoiseSource`.  A source is either
*random* (backed by a counter-based Philox generator, so independent trials
can derive disjoint streams from ``(seed, trial_id)``) or *scripted* (a fixed
sequence of reals returned verbatim, which enables zero-noise identity tests).
Sources count their draws so tests can verify a mechanism's noise budget.

Known limitation: samples are produced with ordinary double-precision
arithmetic.  Floating-point side channels of the Laplace/Gaussian samplers
(mitigated elsewhere by snapping or discrete noise) are documented here but
not addressed.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "NoiseSource",
    "ScriptedNoiseExhausted",
    "SEED_ENV_VAR",
    "laplace_from_uniform",
    "resolve_seed",
    "rng_from_seed",
]

SEED_ENV_VAR = "DPGRAPH_SEED"


class ScriptedNoiseExhausted(RuntimeError):
    """A scripted source ran out of values."""


def laplace_from_uniform(u: float, scale: float) -> float:
    """Inverse-CDF Laplace transform: ``-scale * sign(u) * ln(1 - 2|u|)``.

    ``u`` must lie in (-1/2, 1/2); ``u = 0`` maps to the median 0.
    """
    if not -0.5 < u < 0.5:
        raise ValueError(f"uniform input {u} outside (-1/2, 1/2)")
    if u == 0.0:
        return 0.0
    return -scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u))


def rng_from_seed(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, *stream))))


def resolve_seed(explicit: int | None) -> tuple[int, str]:
    """Pick the run seed: explicit flag, then DPGRAPH_SEED, then fresh entropy.

    Returns ``(seed, origin)`` where origin names the source so reports can
    record how to replay the run.
    """
    if explicit is not None:
        return int(explicit), "flag"
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env), "env"
    return int(np.random.SeedSequence().entropy % (2**63)), "entropy"


class NoiseSource:
    """Noise and decision randomness with a deterministic injection hook.

    Random mode draws from Philox; scripted mode replays ``values`` verbatim
    (Laplace and Gaussian draws return the scripted value as the final sample,
    integer draws interpret the value as the chosen index) and raises
    :class:`ScriptedNoiseExhausted` when the script runs out.
    """

    def __init__(self, *, _rng=None, _seedseq=None, _script=None):
        self._rng = _rng
        self._seedseq = _seedseq
        self._script = None if _script is None else list(_script)
        self._cursor = 0
        self.laplace_draws = 0
        self.gaussian_draws = 0
        self.uniform_draws = 0

    @classmethod
    def from_seed(cls, seed: int, stream: tuple[int, ...] = ()) -> "NoiseSource":
        seq = np.random.SeedSequence((int(seed), *map(int, stream)))
        return cls(_rng=np.random.Generator(np.random.Philox(seq)), _seedseq=seq)

    @classmethod
    def scripted(cls, values) -> "NoiseSource":
        return cls(_script=values)

    @property
    def is_scripted(self) -> bool:
        return self._script is not None

    @property
    def generator(self) -> np.random.Generator:
        """Underlying generator, for non-noise randomness (graph sampling etc.)."""
        if self._rng is None:
            raise RuntimeError("scripted sources expose no generator")
        return self._rng

    def spawn(self, *key: int) -> "NoiseSource":
        """Derive an independent child stream (random mode only)."""
        if self._seedseq is None:
            raise RuntimeError("cannot spawn from a scripted source")
        child = np.random.SeedSequence(self._seedseq.entropy, spawn_key=tuple(self._seedseq.spawn_key) + tuple(map(int, key)))
        return NoiseSource(_rng=np.random.Generator(np.random.Philox(child)), _seedseq=child)

    def kernel_seed(self) -> np.ndarray:
        """Four nonzero uint64 words seeding the compiled walk kernel."""
        if self._seedseq is None:
            raise RuntimeError("scripted sources cannot seed the walk kernel")
        state = self._seedseq.spawn(1)[0].generate_state(4, np.uint64)
        if not state.any():
            state[0] = np.uint64(1)
        return state

    def _next_scripted(self) -> float:
        if self._cursor >= len(self._script):
            raise ScriptedNoiseExhausted(
                f"scripted noise exhausted after {self._cursor} draws"
            )
        value = self._script[self._cursor]
        self._cursor += 1
        return float(value)

    def laplace(self, scale: float, size: int | None = None):
        """Laplace(scale) via the inverse CDF; scripted values pass through."""
        if scale <= 0 or not math.isfinite(scale):
            raise ValueError(f"laplace scale must be positive, got {scale}")
        if self._script is not None:
            if size is None:
                self.laplace_draws += 1
                return self._next_scripted()
            out = np.array([self._next_scripted() for _ in range(size)])
            self.laplace_draws += size
            return out
        n = 1 if size is None else int(size)
        raw = self._rng.random(n)
        while True:
            zero = raw == 0.0  # u = -1/2 would hit log(0)
            if not zero.any():
                break
            raw[zero] = self._rng.random(int(zero.sum()))
        u = raw - 0.5
        out = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
        self.laplace_draws += n
        return float(out[0]) if size is None else out

    def gaussian(self, sigma: float, size: int | None = None):
        """Mean-zero normal with standard deviation ``sigma``."""
        if sigma <= 0 or not math.isfinite(sigma):
            raise ValueError(f"gaussian sigma must be positive, got {sigma}")
        if self._script is not None:
            if size is None:
                self.gaussian_draws += 1
                return self._next_scripted()
            out = np.array([self._next_scripted() for _ in range(size)])
            self.gaussian_draws += size
            return out
        n = 1 if size is None else int(size)
        out = self._rng.normal(0.0, sigma, n)
        self.gaussian_draws += n
        return float(out[0]) if size is None else out

    def uniform(self) -> float:
        """One uniform draw in [0, 1)."""
        self.uniform_draws += 1
        if self._script is not None:
            value = self._next_scripted()
            if not 0.0 <= value < 1.0:
                raise ValueError(f"scripted uniform {value} outside [0, 1)")
            return value
        return float(self._rng.random())

    def uniform_index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise ValueError(f"uniform_index needs n >= 1, got {n}")
        self.uniform_draws += 1
        if self._script is not None:
            value = self._next_scripted()
            index = int(value)
            if index != value or not 0 <= index < n:
                raise ValueError(f"scripted index {value} invalid for range [0, {n})")
            return index
        return int(self._rng.integers(0, n))
