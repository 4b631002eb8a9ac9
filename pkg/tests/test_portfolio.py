import datetime as dt
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdnet.errors import Infeasible, MissingFactors, UniverseTooSmall
from crowdnet.graph import CentralityKind
from crowdnet.ingest import ReturnsPanel
from crowdnet.portfolio import (
    Portfolio,
    build_longshort,
    check_longshort,
    factor_matrix,
    portfolio_factor_exposure,
    quintile_portfolios,
)
from crowdnet.signal import CrowdingScores

from conftest import AS_OF

BOUND = 0.02


def scores_of(values):
    values = dict(values)
    return CrowdingScores(AS_OF, CentralityKind.EIGENVECTOR, values, tuple(sorted(values)))


def panel_of(loadings):
    return ReturnsPanel((), {}, {}, {(s, AS_OF): tuple(map(float, v)) for s, v in loadings.items()})


def random_universe(seed, n=300, scale=1.0):
    rng = np.random.default_rng(seed)
    stocks = [f"S{i:04d}" for i in range(n)]
    scores = scores_of({s: float(x) for s, x in zip(stocks, rng.normal(size=n))})
    panel = panel_of({s: rng.normal(0, scale, 5) for s in stocks})
    return scores, panel


# --- quintiles ---------------------------------------------------------------------


def test_ten_distinct_scores():
    scores = scores_of({f"S{i}": float(i) for i in range(10)})
    qs, bench = quintile_portfolios(scores)
    assert [len(q.weights) for q in qs] == [2] * 5
    assert set(qs[4].weights) == {"S8", "S9"}
    assert all(w == 0.5 for q in qs for w in q.weights.values())
    assert len(bench.weights) == 10 and all(w == 0.1 for w in bench.weights.values())


def test_seven_stocks_remainder_rule():
    qs, _ = quintile_portfolios(scores_of({f"S{i}": -float(i) for i in range(7)}))
    assert [len(q.weights) for q in qs] == [2, 2, 1, 1, 1]


def test_all_equal_scores_follow_stock_id():
    qs, _ = quintile_portfolios(scores_of({s: 0.0 for s in "JABCDEFGHI"}))
    assert [sorted(q.weights) for q in qs] == [["A", "B"], ["C", "D"], ["E", "F"], ["G", "H"], ["I", "J"]]


def test_too_small_universe():
    with pytest.raises(UniverseTooSmall):
        quintile_portfolios(scores_of({"A": 0.0, "B": 1.0}))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=5, max_size=80))
def test_quintiles_partition_universe(values):
    scores = scores_of({f"S{i:03d}": v for i, v in enumerate(values)})
    qs, bench = quintile_portfolios(scores)
    members = [set(q.weights) for q in qs]
    assert sum(len(m) for m in members) == len(values)
    assert set().union(*members) == set(scores.universe) == set(bench.weights)
    sizes = [len(m) for m in members]
    assert max(sizes) - min(sizes) <= 1
    for q in qs:
        assert sum(q.weights.values()) == pytest.approx(1.0, abs=1e-12)
        assert len(set(q.weights.values())) == 1
    for lo, hi in zip(qs, qs[1:]):
        assert max(scores.scores[s] for s in lo.weights) <= min(scores.scores[s] for s in hi.weights)


# --- exposures -----------------------------------------------------------------------


def test_single_stock_exposure():
    p = Portfolio(AS_OF, {"A": 1.0}, "x")
    exp = portfolio_factor_exposure(p, panel_of({"A": (0.5, 0, 0, 0, 0)}), AS_OF)
    assert exp.tolist() == [0.5, 0, 0, 0, 0]


def test_neutral_pair_cancels():
    p = Portfolio(AS_OF, {"A": 0.5, "B": -0.5}, "x")
    exp = portfolio_factor_exposure(p, panel_of({"A": (1, 2, 3, 4, 5), "B": (1, 2, 3, 4, 5)}), AS_OF)
    assert exp.tolist() == [0.0] * 5


def test_relative_tilt_against_itself():
    panel = panel_of({s: np.arange(5) * (i + 1) for i, s in enumerate("ABC")})
    p = Portfolio(AS_OF, {s: 1 / 3 for s in "ABC"}, "benchmark")
    assert np.all(portfolio_factor_exposure(p, panel, AS_OF, benchmark=p) == 0)


def test_exposure_missing_factors():
    with pytest.raises(MissingFactors):
        portfolio_factor_exposure(Portfolio(AS_OF, {"A": 1.0}, "x"), panel_of({}), AS_OF)


# --- long/short ----------------------------------------------------------------------


def test_zero_loadings_keep_equal_weights():
    scores = scores_of({f"S{i}": float(i) for i in range(10)})
    p = build_longshort(scores, panel_of({s: (0,) * 5 for s in scores.universe}), AS_OF, n_per_side=3)
    assert p.weights == {"S0": 1 / 3, "S1": 1 / 3, "S2": 1 / 3, "S7": -1 / 3, "S8": -1 / 3, "S9": -1 / 3}
    assert p.meta["exposure"] == (0.0,) * 5


def test_symmetric_two_plus_two():
    a = 0.7
    scores = scores_of({"L1": 0.0, "L2": 0.1, "S1": 0.9, "S2": 1.0})
    panel = panel_of({"L1": (a, 0, 0, 0, 0), "L2": (-a, 0, 0, 0, 0), "S1": (a, 0, 0, 0, 0), "S2": (-a, 0, 0, 0, 0)})
    p = build_longshort(scores, panel, AS_OF, n_per_side=2)
    for s, w in {"L1": 0.5, "L2": 0.5, "S1": -0.5, "S2": -0.5}.items():
        assert p.weights[s] == pytest.approx(w, abs=1e-15)


def _simplex_grid(k, res=64):
    # every weight vector with entries in {0, 1/res, ..., 1} summing to 1
    cuts = np.array(list(itertools.combinations(range(res + k - 1), k - 1)))
    edges = np.hstack([np.full((len(cuts), 1), -1), cuts, np.full((len(cuts), 1), res + k - 1)])
    return (np.diff(edges, axis=1) - 1) / res


GRID4 = _simplex_grid(4)


def grid_feasible(long_loadings, short_loadings, bound=BOUND):
    """Is there a grid point with long weights on the simplex, shorts on the negative simplex, |exposure| <= bound?"""
    el = np.sort(GRID4 @ long_loadings)
    es = np.sort(GRID4 @ short_loadings)
    # need el - es in [-bound, bound] for some pair: nearest short exposure to each long one
    idx = np.clip(np.searchsorted(es, el), 1, len(es) - 1)
    gap = np.minimum(np.abs(el - es[idx - 1]), np.abs(el - es[idx]))
    return bool(np.any(gap <= bound))


def test_simplex_grid_is_complete():
    assert GRID4.shape == (47905, 4)
    assert np.allclose(GRID4.sum(axis=1), 1.0) and GRID4.min() >= 0


@pytest.mark.parametrize("seed", range(40))
def test_four_plus_four_against_grid_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    loads = rng.uniform(-1, 1, 8)
    names = [f"S{i}" for i in range(8)]
    scores = scores_of({s: float(i) for i, s in enumerate(names)})
    panel = panel_of({s: (x, 0, 0, 0, 0) for s, x in zip(names, loads)})
    try:
        p = build_longshort(scores, panel, AS_OF, n_per_side=4)
    except Infeasible:
        return
    assert check_longshort(p, panel, AS_OF, n_per_side=4) == []
    assert grid_feasible(loads[:4], loads[4:])


def test_one_sided_loadings_infeasible():
    # every long loads +1 and every short -1: net exposure is always 2
    scores = scores_of({f"S{i}": float(i) for i in range(4)})
    panel = panel_of({"S0": (1, 0, 0, 0, 0), "S1": (1, 0, 0, 0, 0), "S2": (-1, 0, 0, 0, 0), "S3": (-1, 0, 0, 0, 0)})
    assert not grid_feasible(np.array([1.0] * 4), np.array([-1.0] * 4))
    with pytest.raises(Infeasible):
        build_longshort(scores, panel, AS_OF, n_per_side=2)


def test_too_few_candidates():
    scores, panel = random_universe(0, n=150)
    with pytest.raises(Infeasible):
        build_longshort(scores, panel, AS_OF)


def test_missing_factor_row():
    scores = scores_of({f"S{i}": float(i) for i in range(4)})
    with pytest.raises(MissingFactors):
        build_longshort(scores, panel_of({"S0": (0,) * 5}), AS_OF, n_per_side=2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 3.0))
def test_longshort_invariants(seed, scale):
    scores, panel = random_universe(seed, scale=scale)
    try:
        p = build_longshort(scores, panel, AS_OF)
    except Infeasible:
        return
    w = np.array(list(p.weights.values()))
    assert abs(w.sum()) <= 1e-9
    assert abs(np.abs(w).sum() - 2.0) <= 1e-9
    assert abs(sum(p.longs.values()) - 1) <= 1e-9 and abs(sum(p.shorts.values()) + 1) <= 1e-9
    assert len(p.longs) <= 100 and len(p.shorts) <= 100
    assert np.all(np.abs(portfolio_factor_exposure(p, panel, AS_OF)) <= BOUND)
    assert max(scores.scores[s] for s in p.longs) <= min(scores.scores[s] for s in p.shorts)


def test_projection_exact_without_repairs():
    scores, panel = random_universe(7, scale=0.05)
    p = build_longshort(scores, panel, AS_OF)
    assert p.meta["sign_repairs"] == 0 and p.meta["drops"] == 0
    stocks = sorted(p.weights)
    w = np.array([p.weights[s] for s in stocks])
    c = np.vstack([(w > 0).astype(float), (w < 0).astype(float), factor_matrix(stocks, panel, AS_OF)])
    b = np.array([1.0, -1.0, 0, 0, 0, 0, 0])
    assert np.max(np.abs(c @ w - b)) < 1e-9


def test_longshort_deterministic():
    scores, panel = random_universe(3)
    a = build_longshort(scores, panel, AS_OF, construction_date=dt.date(2014, 5, 31))
    b = build_longshort(scores, panel, AS_OF, construction_date=dt.date(2014, 5, 31))
    assert a == b and list(a.weights) == list(b.weights)
