import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdnet.errors import EmptyGraph, NonPositiveLog
from crowdnet.graph import (
    CentralityKind,
    Side,
    build_split_graphs,
    centrality,
    degree_centrality,
    eigenvector_centrality,
    graph_from_triples,
    median_filter,
    normalized_active_weight,
    power_iteration,
    weighted_degree_centrality,
)

from conftest import dominant_eigvec, make_snapshot, random_bipartite


def g(triples, side=Side.OVERWEIGHT):
    return graph_from_triples(triples, side)


def star(k, w=1.0):
    return g([("F", f"S{i}", w) for i in range(k)])


# --- normalized active weight -------------------------------------------------


def test_zero_active_weight():
    assert normalized_active_weight(0.03, 0.03, 123456.0) == 0.0


def test_overweight_with_exact_log():
    assert normalized_active_weight(0.05, 0.02, math.exp(10)) == pytest.approx(0.003, abs=1e-15)


def test_underweight_is_symmetric():
    assert normalized_active_weight(0.01, 0.04, math.exp(10)) == pytest.approx(-0.003, abs=1e-15)


@pytest.mark.parametrize("cap", [1.0, 0.5, 0.0, -3.0])
def test_cap_at_or_below_one_rejected(cap):
    with pytest.raises(NonPositiveLog):
        normalized_active_weight(0.1, 0.0, cap)


# --- split graphs ---------------------------------------------------------------


def test_split_one_fund_two_stocks():
    e10 = math.exp(10)
    snap = make_snapshot(
        [("F1", "A", 0.05), ("F1", "B", 0.01)],
        bench={"A": 0.02, "B": 0.04, "C": 0.94},
        caps={"A": e10, "B": e10, "C": e10},
    )
    over, under = build_split_graphs(snap)
    assert over.stock_ids == ("A",) and under.stock_ids == ("B",)
    assert over.edges[0][2] == pytest.approx(0.003)
    assert under.edges[0][2] == pytest.approx(0.003)
    assert over.side is Side.OVERWEIGHT and under.side is Side.UNDERWEIGHT


def test_split_all_zero_active_weights():
    snap = make_snapshot([("F1", "A", 0.5), ("F1", "B", 0.5)], bench={"A": 0.5, "B": 0.5})
    over, under = build_split_graphs(snap)
    assert over.n_edges == 0 and under.n_edges == 0
    assert over.fund_ids == () and under.stock_ids == ()


def test_split_three_funds_overweight_a():
    snap = make_snapshot(
        [(f, "A", 0.2) for f in ("F1", "F2", "F3")], bench={"A": 0.1, "B": 0.9}
    )
    over, under = build_split_graphs(snap)
    a = over.stock_ids.index("A")
    assert sum(1 for _, s, _ in over.edges if s == a) == 3
    assert under.n_edges == 0


def test_off_benchmark_stock_is_fully_active():
    snap = make_snapshot([("F1", "X", 0.1)], bench={"A": 1.0}, caps={"X": math.exp(5), "A": 1e9})
    over, _ = build_split_graphs(snap)
    assert over.edges[0][2] == pytest.approx(0.1 / 5)


def test_adjacency_is_bipartite_and_symmetric():
    rng = np.random.default_rng(0)
    graph = random_bipartite(rng, 6, 9)
    a = graph.adjacency()
    nf = len(graph.fund_ids)
    assert np.all(a[:nf, :nf] == 0) and np.all(a[nf:, nf:] == 0)
    assert np.array_equal(a, a.T)


def test_graph_rejects_duplicate_and_nonpositive_edges():
    with pytest.raises(ValueError):
        g([("F", "S", 1.0), ("F", "S", 2.0)])
    with pytest.raises(ValueError):
        g([("F", "S", 0.0)])


# --- median filter --------------------------------------------------------------


def weights_after(triples):
    return sorted(w for _, _, w in median_filter(g(triples)).edges)


def test_median_odd_count():
    assert weights_after([("F", f"S{w}", float(w)) for w in (1, 2, 3, 4, 5)]) == [4.0, 5.0]


def test_median_even_count():
    assert weights_after([("F", f"S{w}", float(w)) for w in (1, 2, 3, 4)]) == [3.0, 4.0]


def test_median_all_equal_gives_empty_graph():
    filtered = median_filter(g([("F", f"S{i}", 0.7) for i in range(6)]))
    assert filtered.n_edges == 0 and filtered.fund_ids == () and filtered.stock_ids == ()


def test_median_drops_isolated_nodes():
    filtered = median_filter(
        g([("F1", "A", 1.0), ("F1", "D", 2.0), ("F2", "B", 5.0), ("F2", "C", 6.0)])
    )
    assert filtered.fund_ids == ("F2",)
    assert filtered.stock_ids == ("B", "C")


def test_median_on_empty_graph():
    empty = g([])
    assert median_filter(empty) == empty


# --- degree centralities -------------------------------------------------------


def test_degree_three_of_ten_funds():
    triples = [(f"F{i}", "A", 1.0) for i in range(3)] + [(f"F{i}", "B", 1.0) for i in range(10)]
    assert degree_centrality(g(triples)).values["A"] == pytest.approx(0.3)


def test_degree_isolated_stock_absent():
    graph = median_filter(g([("F1", "A", 1.0), ("F1", "B", 2.0), ("F2", "B", 3.0)]))
    values = degree_centrality(graph).values
    assert "A" not in values


def test_degree_single_edge():
    assert degree_centrality(g([("F", "A", 0.2)])).values == {"A": 1.0}


def test_weighted_degree_sums_edges():
    vec = weighted_degree_centrality(g([("F1", "A", 0.001), ("F2", "A", 0.002)]))
    assert vec.values["A"] == pytest.approx(0.003, abs=1e-18)


def test_weighted_degree_empty_and_identity():
    assert weighted_degree_centrality(g([])).values == {}
    assert weighted_degree_centrality(g([("F", "A", 0.37)])).values == {"A": 0.37}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
def test_degree_monotone_when_adding_an_edge(seed, nf, ns):
    rng = np.random.default_rng(seed)
    base = random_bipartite(rng, nf, ns, density=0.4, low=0.1, connected=False)
    triples = [(base.fund_ids[f], base.stock_ids[s], w) for f, s, w in base.edges]
    present = {(f, s) for f, s, _ in triples}
    candidates = [(f"F{i:02d}", f"S{j:02d}") for i in range(nf) for j in range(ns)
                  if (f"F{i:02d}", f"S{j:02d}") not in present]
    if not triples or not candidates:
        return
    f, s = candidates[rng.integers(len(candidates))]
    before = degree_centrality(base).values.get(s, 0.0)
    after = degree_centrality(g(triples + [(f, s, 0.5)])).values[s]
    # adding a brand-new fund grows the denominator; with an existing fund the share can only rise
    if f in base.fund_ids:
        assert after >= before


# --- eigenvector centrality ------------------------------------------------------


@pytest.mark.parametrize("k", [2, 4, 9])
def test_star_closed_form(k):
    vec = eigenvector_centrality(star(k))
    assert vec.converged
    assert vec.fund_values["F"] == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    for v in vec.values.values():
        assert v == pytest.approx(1 / math.sqrt(2 * k), abs=1e-10)


def test_star_k4_value():
    assert eigenvector_centrality(star(4)).values["S0"] == pytest.approx(0.35355, abs=1e-5)


def test_path_fund_stock_fund():
    vec = eigenvector_centrality(g([("F1", "S", 1.0), ("F2", "S", 1.0)]))
    assert vec.values["S"] == pytest.approx(math.sqrt(2) / 2, abs=1e-10)
    assert vec.fund_values["F1"] == pytest.approx(0.5, abs=1e-10)


def test_plain_power_iteration_would_oscillate_on_a_star():
    # documents why the block sweep is used: x <- Ax never settles on K_{1,4}
    a = star(4).adjacency()
    x = np.ones(5) / math.sqrt(5)
    seq = []
    for _ in range(6):
        x = a @ x
        x /= np.linalg.norm(x)
        seq.append(x.copy())
    assert np.max(np.abs(seq[-1] - seq[-2])) > 0.1


def test_random_8x12_matches_dense_oracle():
    rng = np.random.default_rng(20240612)
    graph = random_bipartite(rng, 8, 12, density=0.6)
    vec = eigenvector_centrality(graph)
    oracle, _ = dominant_eigvec(graph.adjacency())
    got = np.array([vec.fund_values[f] for f in graph.fund_ids] + [vec.values[s] for s in graph.stock_ids])
    assert np.max(np.abs(got - oracle)) < 1e-8


def test_full_vector_has_unit_norm_and_is_nonnegative():
    rng = np.random.default_rng(3)
    graph = random_bipartite(rng, 7, 11, density=0.3)
    u, v, converged, _ = power_iteration(graph.biadjacency())
    assert converged
    assert np.linalg.norm(np.concatenate([u, v])) == pytest.approx(1.0, abs=1e-12)
    assert np.all(u >= 0) and np.all(v >= 0)


def test_nonnegative_at_every_iteration():
    rng = np.random.default_rng(8)
    b = random_bipartite(rng, 5, 7, density=0.4).biadjacency()
    for it in range(1, 15):
        u, v, _, _ = power_iteration(b, tol=0.0, max_iter=it)
        assert np.all(u >= 0) and np.all(v >= 0)


def test_empty_graph_raises():
    with pytest.raises(EmptyGraph):
        eigenvector_centrality(g([]))


def test_max_iter_reached_still_returns_result():
    rng = np.random.default_rng(1)
    vec = eigenvector_centrality(random_bipartite(rng, 6, 8, density=0.5), tol=0.0, max_iter=3)
    assert not vec.converged and vec.iterations == 3
    assert all(v >= 0 for v in vec.values.values())


def test_disconnected_weaker_component_decays():
    strong = [("F1", f"A{i}", 1.0) for i in range(4)]
    weak = [("F2", "B", 0.1)]
    vec = eigenvector_centrality(g(strong + weak))
    assert vec.values["B"] < 1e-8
    assert vec.values["A0"] == pytest.approx(1 / math.sqrt(8), abs=1e-10)


def test_determinism_bit_identical():
    rng = np.random.default_rng(42)
    graph = random_bipartite(rng, 10, 15, density=0.3)
    assert eigenvector_centrality(graph).values == eigenvector_centrality(graph).values


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1e4))
def test_eigenvector_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    graph = random_bipartite(rng, 5, 8, density=0.5, low=0.1)
    scaled = graph_from_triples(
        [(graph.fund_ids[f], graph.stock_ids[s], w * c) for f, s, w in graph.edges], graph.side
    )
    a = eigenvector_centrality(graph, tol=1e-13, max_iter=100000).values
    b = eigenvector_centrality(scaled, tol=1e-13, max_iter=100000).values
    for s in a:
        assert b[s] == pytest.approx(a[s], abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.integers(1, 25), st.floats(0.05, 0.9))
def test_power_iteration_agrees_with_dense_solver(seed, nf, ns, density):
    rng = np.random.default_rng(seed)
    graph = random_bipartite(rng, nf, ns, density=density, low=0.1)
    u, v, converged, _ = power_iteration(graph.biadjacency(), tol=1e-13, max_iter=200000)
    oracle, vals = dominant_eigvec(graph.adjacency())
    assert converged
    assert np.max(np.abs(np.concatenate([u, v]) - oracle)) < 1e-8


def test_centrality_dispatch_on_empty_graph():
    for kind in CentralityKind:
        assert centrality(g([]), kind).values == {}
