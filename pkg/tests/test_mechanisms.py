import math
from collections import Counter

import numpy as np
import pytest

from dpgraph.evaluation import multinomial_tv_slack, tv_distance
from dpgraph.graph import PrivacyBudget, WeightedGraph, l1_distance
from dpgraph.mechanisms import (
    MECHANISMS,
    MechanismConfig,
    analyze_gauss_release,
    confidential_subset_size,
    exchange_release,
    filter_release,
    filter_threshold,
    gaussian_sigma,
    jl_default_dimension,
    jl_release,
    release,
    topology_known_release,
)
from dpgraph.randomness import NoiseSource
from dpgraph.sampler import SparseExpDistribution, exact_pi, mixing_steps

BUDGET = PrivacyBudget(1.0, 0.1)


def weighted_path(n, weights):
    return WeightedGraph.from_pairs(n, [(i, i + 1, w) for i, w in enumerate(weights)])


# -- filter ----------------------------------------------------------------

def test_filter_threshold_value():
    assert filter_threshold(4, BUDGET) == pytest.approx(2 * math.log(80), abs=1e-12)


def test_filter_scripted_keeps_heavy_drops_light():
    g = WeightedGraph.from_pairs(4, [(0, 1, 100.0), (2, 3, 1.0)])
    out = filter_release(g, BUDGET, NoiseSource.scripted([0.0, 0.0]))
    assert dict(out.weights) == {0: 100.0}


def test_filter_empty_graph_zero_draws():
    src = NoiseSource.scripted([])
    out = filter_release(WeightedGraph(5), BUDGET, src)
    assert out.edge_count == 0 and src.laplace_draws == 0


def test_filter_draw_count_and_support():
    rng = np.random.default_rng(0)
    g = WeightedGraph(8, {int(e): 50.0 + float(rng.uniform(0, 5)) for e in range(0, 28, 3)})
    src = NoiseSource.from_seed(1)
    info = {}
    out = filter_release(g, BUDGET, src, info=info)
    assert src.laplace_draws == g.edge_count
    assert set(out.edge_indices) <= set(g.edge_indices)
    assert (out.edge_weights > info["threshold"]).all()


def test_filter_light_edge_survival_rate():
    # an edge of weight 1 must survive with probability at most delta/n^2
    budget = PrivacyBudget(1.0, 0.5)
    n = 4
    g = WeightedGraph(n, {0: 1.0})
    survived = 0
    trials = 20000
    src = NoiseSource.from_seed(2)
    for _ in range(trials):
        if filter_release(g, budget, src).edge_count:
            survived += 1
    rate = survived / trials
    exact = 0.5 * math.exp(-(filter_threshold(n, budget) - 1.0))
    assert rate <= budget.delta / n**2
    assert rate == pytest.approx(exact, abs=3 * math.sqrt(exact / trials) + 1e-4)


# -- exchange ---------------------------------------------------------------

def test_confidential_size_example():
    k = confidential_subset_size(3, 10, 1.0, math.exp(-2), NoiseSource.scripted([0.0]))
    assert k == 5


def test_confidential_size_clamps():
    assert confidential_subset_size(3, 10, 1.0, 0.5, NoiseSource.scripted([100.0])) == 10
    assert confidential_subset_size(3, 10, 1.0, 0.5, NoiseSource.scripted([-100.0])) == 0


def test_exchange_empty_graph():
    src = NoiseSource.scripted([])
    out = exchange_release(WeightedGraph(5), BUDGET, src)
    assert out.edge_count == 0 and src.laplace_draws == 0


def test_exchange_draw_counts_public_and_confidential():
    g = weighted_path(6, [9.0, 8.0, 7.5, 3.0, 2.0])
    info = {}
    src = NoiseSource.from_seed(3)
    out = exchange_release(g, BUDGET, src, info=info)
    assert info["k"] == g.edge_count
    assert src.laplace_draws == info["k"]
    assert info["walk_steps"] == mixing_steps(info["k"], g.num_slots, BUDGET.eps, BUDGET.delta)
    assert out.edge_count <= info["k"]

    info = {}
    src = NoiseSource.from_seed(4)
    exchange_release(g, BUDGET, src, k_mode="confidential", beta=0.2, info=info)
    assert src.laplace_draws == info["k"] + 1


def test_exchange_start_set_selection():
    from dpgraph.mechanisms import _start_subset

    g = weighted_path(6, [1.0, 50.0, 2.0, 49.0, 0.5])
    eidx = g.edge_indices.tolist()
    # k below |E|: the k heaviest edges win (ties to lower index)
    assert _start_subset(g, 2) == frozenset({eidx[1], eidx[3]})
    # k above |E|: all edges plus the lowest-index non-edges
    start = _start_subset(g, 7)
    assert set(eidx) <= start and len(start) == 7
    non_edges = sorted(start - set(eidx))
    assert non_edges == sorted(set(range(7 + len(eidx))) - set(eidx))[:2]


def test_exchange_concentrates_on_support_at_large_eps():
    g = weighted_path(5, [3.0, 2.5, 4.0, 3.5])
    budget = PrivacyBudget(50.0, 0.1)
    hits = 0
    for t in range(100):
        info = {}
        exchange_release(g, budget, NoiseSource.from_seed(5, (t,)), info=info)
        hits += info["topology"] == frozenset(g.edge_indices.tolist())
    assert hits >= 99


def test_exchange_topology_law_matches_exact_pi():
    # tiny instance: C(6,3) = 20 states observable through the mechanism
    g = WeightedGraph.from_pairs(4, [(0, 1, 1.5), (1, 2, 0.7), (2, 3, 0.2)])
    budget = PrivacyBudget(1.0, 0.2)
    dist = SparseExpDistribution.from_graph(g, budget.eps, 3)
    pi = exact_pi(dist)
    counts = Counter()
    trials = 30000
    for t in range(trials):
        info = {}
        exchange_release(g, budget, NoiseSource.from_seed(6, (t,)), info=info)
        counts[info["topology"]] += 1
    freq = {s: c / trials for s, c in counts.items()}
    bound = budget.delta / (math.exp(2 * budget.eps) + 1) + multinomial_tv_slack(20, trials)
    assert tv_distance(freq, pi) <= bound


def test_exchange_zero_clamp_drops_nonpositive():
    g = WeightedGraph(4, {0: 5.0})
    # public k=1; walk steps consume nothing scripted (python engine draws):
    # scripted removal/coin draws then one weight draw of -10 clamps to zero
    budget = PrivacyBudget(1.0, 0.5)
    steps = mixing_steps(1, 6, budget.eps, budget.delta)
    script = []
    for _ in range(steps):
        script += [0.0, 0.9]  # remove slot 0, stay on the support element
    script += [-10.0]
    out = exchange_release(g, budget, NoiseSource.scripted(script))
    assert out.edge_count == 0


# -- known topology -----------------------------------------------------------

def test_topology_known_identity_under_zero_noise():
    g = weighted_path(4, [5.0, 2.0, 1.0])
    out = topology_known_release(g, 1.0, NoiseSource.scripted([0.0, 0.0, 0.0]))
    assert out == g
    assert topology_known_release(WeightedGraph(3), 1.0, NoiseSource.scripted([])).edge_count == 0


def test_topology_known_mean_absolute_error():
    g = weighted_path(10, [10.0] * 9)
    eps = 2.0
    errors = []
    for t in range(1000):
        out = topology_known_release(g, eps, NoiseSource.from_seed(7, (t,)))
        errors.append(l1_distance(g, out) / g.edge_count)
    assert np.mean(errors) == pytest.approx(1 / eps, rel=0.05)


def test_topology_known_records_zeroed_edges():
    g = weighted_path(4, [0.5, 4.0, 0.5])
    info = {}
    out = topology_known_release(g, 1.0, NoiseSource.scripted([-1.0, 0.0, -0.6]), info=info)
    assert out.edge_count == 1
    assert sorted(info["zeroed_edges"]) == sorted(
        [int(g.edge_indices[0]), int(g.edge_indices[2])]
    )


# -- dense baselines ----------------------------------------------------------

def test_gauss_sigma_calibration():
    assert gaussian_sigma(PrivacyBudget(2.0, 0.1)) == pytest.approx(
        math.sqrt(2 * math.log(12.5)) / 2.0
    )


def test_gauss_scripted_zero_noise_is_identity():
    g = weighted_path(4, [1.0, 2.0, 3.0])
    res = analyze_gauss_release(g, BUDGET, NoiseSource.scripted([0.0] * g.num_slots))
    assert np.allclose(res.dense, g.to_dense())
    assert res.graph == g


def test_gauss_noise_standard_deviation():
    g = WeightedGraph(30)
    res = analyze_gauss_release(g, BUDGET, NoiseSource.from_seed(8))
    assert res.dense.std() == pytest.approx(res.sigma, rel=0.05)


def test_gauss_refuses_huge_n():
    with pytest.raises(ValueError):
        analyze_gauss_release(WeightedGraph(20001), BUDGET, NoiseSource.from_seed(0))


def test_jl_empty_graph_zero_sketch():
    sk = jl_release(WeightedGraph(4), BUDGET, NoiseSource.from_seed(9), dimension=32)
    assert np.all(sk.matrix == 0)


def test_jl_expectation_approaches_laplacian():
    g = WeightedGraph.from_pairs(3, [(0, 1, 2.0), (1, 2, 1.0)])
    sk = jl_release(g, BUDGET, NoiseSource.from_seed(10), dimension=400000)
    expected = np.array([[2, -2, 0], [-2, 3, -1], [0, -1, 1]], dtype=float)
    assert np.abs(sk.matrix - expected).max() <= 0.02 * np.abs(expected).max()


def test_jl_default_dimension_formula():
    budget = PrivacyBudget(1.0, 1e-6)
    assert jl_default_dimension(budget, 0.1) == math.ceil(8 * math.log(2e6) / 0.01)


# -- dispatcher ----------------------------------------------------------------

def test_release_dispatcher_covers_all_mechanisms():
    g = weighted_path(5, [30.0, 20.0, 25.0, 22.0])
    config = MechanismConfig(budget=PrivacyBudget(1.0, 0.2), jl_dimension=16)
    for mech in MECHANISMS:
        result = release(g, mech, config, NoiseSource.from_seed(11))
        assert result.mechanism == mech
        if mech == "jl":
            assert result.sketch is not None
        else:
            assert result.graph is not None
            assert (result.graph.edge_weights > 0).all()
        if mech == "gauss":
            assert result.dense is not None
    with pytest.raises(ValueError):
        release(g, "nonsense", config, NoiseSource.from_seed(12))


def test_mechanism_config_validation():
    budget = PrivacyBudget(1.0, 0.1)
    with pytest.raises(ValueError):
        MechanismConfig(budget=budget, beta=1.5)
    with pytest.raises(ValueError):
        MechanismConfig(budget=budget, mixing_multiplier=0.0)
    with pytest.raises(ValueError):
        MechanismConfig(budget=budget, jl_eta=1.0)


def test_mechanism_determinism_same_seed():
    g = weighted_path(8, [4.0, 9.0, 1.0, 7.0, 3.0, 2.0, 8.0])
    budget = PrivacyBudget(1.0, 0.05)
    a = exchange_release(g, budget, NoiseSource.from_seed(13))
    b = exchange_release(g, budget, NoiseSource.from_seed(13))
    assert a == b
    fa = filter_release(g, budget, NoiseSource.from_seed(14))
    fb = filter_release(g, budget, NoiseSource.from_seed(14))
    assert fa == fb
