import math

import numpy as np
import pytest

from dpgraph.randomness import (
    NoiseSource,
    ScriptedNoiseExhausted,
    laplace_from_uniform,
    resolve_seed,
)


def test_laplace_transform_median_and_domain():
    assert laplace_from_uniform(0.0, 2.0) == 0.0
    assert laplace_from_uniform(0.25, 1.0) == pytest.approx(-math.log(0.5))
    with pytest.raises(ValueError):
        laplace_from_uniform(0.5, 1.0)


def test_scripted_passthrough_and_exhaustion():
    src = NoiseSource.scripted([8.5, -1.0, 0.0])
    assert src.laplace(2.0) == 8.5
    assert src.gaussian(1.0) == -1.0
    assert src.laplace(0.5) == 0.0
    assert src.laplace_draws == 2 and src.gaussian_draws == 1
    with pytest.raises(ScriptedNoiseExhausted):
        src.laplace(1.0)


def test_scripted_index_validation():
    src = NoiseSource.scripted([1.0, 2.5])
    assert src.uniform_index(3) == 1
    with pytest.raises(ValueError):
        src.uniform_index(3)  # 2.5 is not an integer index


def test_scale_validation():
    src = NoiseSource.from_seed(0)
    for bad in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            src.laplace(bad)
        with pytest.raises(ValueError):
            src.gaussian(bad)


def test_determinism_and_spawn_independence():
    a = NoiseSource.from_seed(123).laplace(1.0, size=64)
    b = NoiseSource.from_seed(123).laplace(1.0, size=64)
    assert np.array_equal(a, b)
    child1 = NoiseSource.from_seed(123).spawn(1).gaussian(1.0, size=32)
    child2 = NoiseSource.from_seed(123).spawn(2).gaussian(1.0, size=32)
    assert not np.array_equal(child1, child2)
    again = NoiseSource.from_seed(123).spawn(1).gaussian(1.0, size=32)
    assert np.array_equal(child1, again)


def test_kernel_seed_deterministic_and_nonzero():
    s1 = NoiseSource.from_seed(9).kernel_seed()
    s2 = NoiseSource.from_seed(9).kernel_seed()
    assert np.array_equal(s1, s2) and s1.any()
    with pytest.raises(RuntimeError):
        NoiseSource.scripted([]).kernel_seed()


def test_laplace_mean_absolute():
    # E|Z| = b for Laplace(b)
    z = NoiseSource.from_seed(42).laplace(2.0, size=10**6)
    assert 1.99 <= np.abs(z).mean() <= 2.01


def test_gaussian_sample_variance():
    z = NoiseSource.from_seed(43).gaussian(1.0, size=10**6)
    assert 0.99 <= z.var() <= 1.01


def test_laplace_tail_probability():
    # P(|Z| > b ln(1000)) = 1e-3; empirical fraction within 3 sigma
    b = 1.5
    z = NoiseSource.from_seed(44).laplace(b, size=10**6)
    frac = float((np.abs(z) > b * math.log(1000)).mean())
    sigma = math.sqrt(1e-3 * (1 - 1e-3) / 10**6)
    assert abs(frac - 1e-3) <= 3 * sigma


def test_resolve_seed_precedence(monkeypatch):
    assert resolve_seed(7) == (7, "flag")
    monkeypatch.setenv("DPGRAPH_SEED", "99")
    assert resolve_seed(None) == (99, "env")
    monkeypatch.delenv("DPGRAPH_SEED")
    seed, origin = resolve_seed(None)
    assert origin == "entropy" and seed >= 0


def test_scripted_has_no_generator():
    with pytest.raises(RuntimeError):
        NoiseSource.scripted([]).generator
