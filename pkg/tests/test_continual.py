import math

import numpy as np
import pytest

from dpgraph.continual import (
    PartialSumTree,
    StreamExhausted,
    StreamUpdate,
    continual_budget,
    identity_mechanism,
    level_index,
    read_stream,
    write_stream,
)
from dpgraph.graph import GraphFormatError, PrivacyBudget, WeightedGraph, num_edge_slots
from dpgraph.mechanisms import filter_release
from dpgraph.randomness import NoiseSource


def integer_stream(n, rounds, seed, high=5):
    # integer weights keep float sums exactly associative
    rng = np.random.default_rng(seed)
    slots = num_edge_slots(n)
    return [
        StreamUpdate(int(rng.integers(0, slots)), float(rng.integers(0, high)))
        for _ in range(rounds)
    ]


def test_level_index_examples():
    assert level_index(6) == 1
    assert level_index(4) == 2
    assert level_index(7) == 0
    with pytest.raises(ValueError):
        level_index(0)


def test_continual_budget_examples():
    assert continual_budget(1.0, 0.5, 1) == (1.0, 0.5)
    eps0, delta0 = continual_budget(1.0, math.exp(-4), math.exp(4))
    assert eps0 == pytest.approx(0.25, abs=1e-12)
    assert delta0 == math.exp(-4)
    with pytest.raises(ValueError):
        continual_budget(1.0, 0.5, 0)
    with pytest.raises(ValueError):
        continual_budget(0.0, 0.5, 4)


def test_update_validation():
    with pytest.raises(ValueError):
        StreamUpdate(-1, 1.0)
    with pytest.raises(ValueError):
        StreamUpdate(0, -0.5)
    StreamUpdate(0, 0.0)


def test_identity_mechanism_telescopes_exactly():
    n, horizon = 7, 64
    tree = PartialSumTree(n, horizon, identity_mechanism, NoiseSource.from_seed(0))
    prefix = WeightedGraph(n)
    for update in integer_stream(n, horizon, seed=1):
        released = tree.step(update)
        if update.w > 0:
            prefix = prefix + WeightedGraph(n, {update.e: update.w})
        assert released == prefix
        assert tree.raw_prefix() == prefix


def test_single_update_privatized_on_dyadic_rounds():
    # one unit update at round 1 of a horizon-8 stream joins exactly the
    # partial sums privatized at rounds 1, 2, 4, 8
    tree = PartialSumTree(5, 8, identity_mechanism, NoiseSource.from_seed(0))
    tree.step(StreamUpdate(0, 1.0))
    for _ in range(7):
        tree.step(StreamUpdate(1, 0.0))
    rounds_with_update_1 = [t for (t, j) in tree.privatize_log if t - (1 << j) + 1 <= 1 <= t]
    assert rounds_with_update_1 == [1, 2, 4, 8]
    assert max(tree.inclusion_counts().values()) <= math.ceil(math.log2(8)) + 1


def test_inclusion_bound_random_streams():
    for horizon in (13, 64, 100):
        tree = PartialSumTree(6, horizon, identity_mechanism, NoiseSource.from_seed(2))
        for update in integer_stream(6, horizon, seed=horizon):
            tree.step(update)
        bound = math.ceil(math.log2(horizon)) + 1
        assert max(tree.inclusion_counts().values()) <= bound


def test_stream_exhaustion():
    tree = PartialSumTree(4, 2, identity_mechanism, NoiseSource.from_seed(0))
    tree.step(StreamUpdate(0, 1.0))
    tree.step(StreamUpdate(1, 1.0))
    with pytest.raises(StreamExhausted):
        tree.step(StreamUpdate(2, 1.0))


def test_empty_updates_with_filter_mechanism():
    budget = PrivacyBudget(0.5, 0.01)
    static = lambda g, src: filter_release(g, budget, src)
    tree = PartialSumTree(5, 16, static, NoiseSource.from_seed(3))
    for _ in range(16):
        released = tree.step(StreamUpdate(0, 0.0))
        assert released.edge_count == 0


def test_filter_mechanism_stream_outputs_positive():
    budget = PrivacyBudget(1.0, 0.1)
    static = lambda g, src: filter_release(g, budget, src)
    tree = PartialSumTree(6, 32, static, NoiseSource.from_seed(4))
    for update in integer_stream(6, 32, seed=5, high=40):
        released = tree.step(update)
        assert (released.edge_weights > 0).all()


def test_edge_touch_accounting_scales_like_t_log_t():
    n, horizon = 8, 256
    tree = PartialSumTree(n, horizon, identity_mechanism, NoiseSource.from_seed(6))
    for update in integer_stream(n, horizon, seed=7, high=3):
        tree.step(update)
    constant = tree.edge_touches / (horizon * math.log2(horizon))
    assert constant <= 4.0


def test_stream_file_round_trip(tmp_path):
    n, horizon = 9, 12
    updates = integer_stream(n, 10, seed=8, high=4)
    updates = [u if u.w > 0 else StreamUpdate(u.e, 1.0) for u in updates]
    path = tmp_path / "stream.tsv"
    write_stream(path, n, horizon, updates)
    rn, rh, rupd = read_stream(path)
    assert (rn, rh) == (n, horizon)
    assert rupd == updates


def test_stream_file_errors(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("n 5\nT 2\n0\t1\t1.0\n1\t2\t1.0\n2\t3\t1.0\n")
    with pytest.raises(GraphFormatError):
        read_stream(path)  # more updates than the horizon
    path.write_text("n 5\nrounds 2\n")
    with pytest.raises(GraphFormatError) as err:
        read_stream(path)
    assert err.value.line == 2
    path.write_text("n 5\nT 2\n3\t1\t1.0\n")
    with pytest.raises(GraphFormatError) as err:
        read_stream(path)
    assert err.value.line == 3
