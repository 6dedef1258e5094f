import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpgraph.graph import (
    GraphFormatError,
    PrivacyBudget,
    WeightedGraph,
    cut_st_value,
    cut_value,
    edge_endpoints,
    edge_endpoints_array,
    edge_index,
    eval_linear_worst,
    l1_distance,
    laplacian_quadratic,
    num_edge_slots,
    read_graph,
    write_graph,
)


def random_graph(n, rng, density=0.4, high=5.0):
    slots = num_edge_slots(n)
    weights = {}
    for e in range(slots):
        if rng.random() < density:
            weights[e] = float(rng.uniform(0.1, high))
    return WeightedGraph(n, weights)


def test_edge_index_examples():
    assert edge_index(0, 1, 4) == 0
    assert edge_index(2, 3, 4) == 5
    assert edge_index(1, 0, 4) == 0  # symmetric


def test_edge_index_errors():
    with pytest.raises(ValueError):
        edge_index(1, 1, 4)
    with pytest.raises(ValueError):
        edge_index(0, 4, 4)
    with pytest.raises(ValueError):
        edge_index(-1, 2, 4)


def test_edge_index_round_trip_all_small_n():
    for n in range(2, 65):
        expected = 0
        for u in range(n):
            for v in range(u + 1, n):
                e = edge_index(u, v, n)
                assert e == expected
                assert edge_endpoints(e, n) == (u, v)
                expected += 1
        assert expected == num_edge_slots(n)


def test_edge_endpoints_array_matches_scalar():
    for n in (2, 5, 37, 1000):
        slots = num_edge_slots(n)
        idx = np.unique(np.random.default_rng(n).integers(0, slots, 200))
        us, vs = edge_endpoints_array(idx, n)
        for e, u, v in zip(idx.tolist(), us.tolist(), vs.tolist()):
            assert edge_endpoints(e, n) == (u, v)


def test_cut_value_examples():
    triangle = WeightedGraph.from_pairs(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    assert cut_value(triangle, {0}) == 2
    path = WeightedGraph.from_pairs(3, [(0, 1, 5.0), (1, 2, 7.0)])
    assert cut_value(path, {1}) == 12
    assert cut_value(path, set()) == 0
    assert cut_value(path, {0, 1, 2}) == 0


def test_cut_st_examples():
    path = WeightedGraph.from_pairs(3, [(0, 1, 5.0), (1, 2, 7.0)])
    assert cut_st_value(path, {0}, {2}) == 0
    assert cut_st_value(path, {0}, {1}) == 5
    with pytest.raises(ValueError):
        cut_st_value(path, {0, 1}, {1})


def test_cut_st_identity_exhaustive_small():
    rng = np.random.default_rng(7)
    g = random_graph(6, rng)
    vertices = range(g.n)
    for s_bits in range(1 << g.n):
        s = {v for v in vertices if s_bits >> v & 1}
        rest = [v for v in vertices if v not in s]
        for t_bits in range(1 << len(rest)):
            t = {rest[i] for i in range(len(rest)) if t_bits >> i & 1}
            direct = cut_st_value(g, s, t)
            via_cuts = (cut_value(g, s) + cut_value(g, t) - cut_value(g, s | t)) / 2
            assert direct == pytest.approx(via_cuts, abs=1e-9)


def test_laplacian_quadratic():
    k2 = WeightedGraph.from_pairs(2, [(0, 1, 1.0)])
    assert laplacian_quadratic(k2, [1.0, 0.0]) == 1.0
    rng = np.random.default_rng(3)
    g = random_graph(8, rng)
    assert laplacian_quadratic(g, np.ones(8)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        laplacian_quadratic(g, np.ones(5))


def test_cut_equals_quadratic_on_indicators():
    rng = np.random.default_rng(11)
    for n in (4, 7, 10):
        g = random_graph(n, rng)
        for bits in range(1 << n):
            s = {v for v in range(n) if bits >> v & 1}
            x = np.zeros(n)
            x[list(s)] = 1.0
            assert cut_value(g, s) == pytest.approx(laplacian_quadratic(g, x), rel=1e-12, abs=1e-12)


def test_l1_distance_examples():
    g = WeightedGraph(3, {0: 1.0, 1: 2.0})
    h = WeightedGraph(3, {1: 3.0})
    assert l1_distance(g, g) == 0
    assert l1_distance(g, h) == 2.0
    with pytest.raises(ValueError):
        l1_distance(g, WeightedGraph(4, {}))


def test_l1_matches_dense_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        g = random_graph(7, rng)
        h = random_graph(7, rng)
        dense = np.abs(g.to_dense() - h.to_dense()).sum()
        assert l1_distance(g, h) == pytest.approx(dense, rel=1e-12)


def test_eval_linear_worst_examples():
    g = WeightedGraph(3, {0: 1.0, 1: 2.0})
    h = WeightedGraph(3, {1: 3.0})
    assert eval_linear_worst(g, h) == 1.0
    assert eval_linear_worst(WeightedGraph(3, {0: 3.0}), WeightedGraph(3, {1: 2.0})) == 3.0
    assert eval_linear_worst(g, g) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_eval_between_half_and_full_l1(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(6, rng)
    h = random_graph(6, rng)
    ev = eval_linear_worst(g, h)
    l1 = l1_distance(g, h)
    assert l1 / 2 - 1e-12 <= ev <= l1 + 1e-12


def test_weighted_graph_validation():
    with pytest.raises(ValueError):
        WeightedGraph(0)
    with pytest.raises(ValueError):
        WeightedGraph(3, {0: 0.0})
    with pytest.raises(ValueError):
        WeightedGraph(3, {0: -1.0})
    with pytest.raises(ValueError):
        WeightedGraph(3, {3: 1.0})  # slots for n=3 are 0..2
    with pytest.raises(ValueError):
        WeightedGraph.from_pairs(3, [(0, 1, 1.0), (1, 0, 2.0)])


def test_weighted_graph_views():
    g = WeightedGraph.from_pairs(4, [(0, 1, 2.0), (2, 3, 1.5)])
    assert g.edge_count == 2
    assert g.weight(0) == 2.0 and g.weight(1) == 0.0
    assert 0 in g and 1 not in g
    assert g.total_weight == 3.5
    assert g.max_unweighted_degree() == 1
    us, vs = g.endpoints()
    assert us.tolist() == [0, 2] and vs.tolist() == [1, 3]


def test_graph_addition_accumulates():
    a = WeightedGraph(4, {0: 1.0, 2: 2.0})
    b = WeightedGraph(4, {2: 3.0, 5: 1.0})
    c = a + b
    assert dict(c.weights) == {0: 1.0, 2: 5.0, 5: 1.0}
    assert a + WeightedGraph(4) == a


def test_privacy_budget_validation():
    PrivacyBudget(1.0, 0.5)
    for eps, delta in ((0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.0)):
        with pytest.raises(ValueError):
            PrivacyBudget(eps, delta)


def test_text_format_round_trip(tmp_path):
    g = WeightedGraph.from_pairs(5, [(0, 1, 2.5), (1, 4, 1e-5), (3, 4, 7.0)])
    path = tmp_path / "g.tsv"
    write_graph(g, path)
    text = path.read_text()
    assert text.startswith("n 5\n")
    assert "\t" in text and "\r" not in text
    assert read_graph(path) == g


def test_text_format_errors(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("n 4\n0\t1\t1.0\n1\t0\t2.0\n")
    with pytest.raises(GraphFormatError) as err:
        read_graph(path)
    assert err.value.line == 3
    path.write_text("vertices 4\n")
    with pytest.raises(GraphFormatError) as err:
        read_graph(path)
    assert err.value.line == 1
    path.write_text("n 4\n0\t2\t-3.0\n")
    with pytest.raises(GraphFormatError):
        read_graph(path)
