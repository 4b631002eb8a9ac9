"""Quintile sleeves and the factor-neutral dollar-neutral long/short book."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, MissingFactors, UniverseTooSmall
from .ingest import FACTOR_NAMES, ReturnsPanel
from .signal import CrowdingScores

log = logging.getLogger(__name__)

N_QUINTILES = 5
SUM_TOL = 1e-9
MAX_REPAIR_ROUNDS = 20


@dataclass(frozen=True)
class Portfolio:
    construction_date: dt.date | None
    weights: dict[str, float]
    label: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def longs(self) -> dict[str, float]:
        return {s: w for s, w in self.weights.items() if w > 0}

    @property
    def shorts(self) -> dict[str, float]:
        return {s: w for s, w in self.weights.items() if w < 0}


def ranked(scores: CrowdingScores) -> list[str]:
    """Universe sorted by ascending score, ties broken by stock_id."""
    return sorted(scores.universe, key=lambda s: (scores.scores[s], s))


def quintile_portfolios(
    scores: CrowdingScores, construction_date: dt.date | None = None
) -> tuple[list[Portfolio], Portfolio]:
    """Five equal-weighted quintiles (Q1 least crowded) and the equal-weighted benchmark.

    With ``n = 5q + r`` stocks the first ``r`` quintiles get ``q + 1`` names.
    """
    order = ranked(scores)
    n = len(order)
    if n < N_QUINTILES:
        raise UniverseTooSmall(f"need at least {N_QUINTILES} stocks for quintiles, have {n}")
    base, rem = divmod(n, N_QUINTILES)
    quintiles = []
    start = 0
    for q in range(N_QUINTILES):
        size = base + (1 if q < rem else 0)
        members = order[start : start + size]
        start += size
        quintiles.append(Portfolio(construction_date, {s: 1.0 / size for s in members}, f"Q{q + 1}"))
    benchmark = Portfolio(construction_date, {s: 1.0 / n for s in order}, "benchmark")
    return quintiles, benchmark


def factor_matrix(stocks: list[str], panel: ReturnsPanel, as_of: dt.date) -> np.ndarray:
    """Loadings as a (5, n_stocks) array."""
    if not stocks:
        return np.zeros((len(FACTOR_NAMES), 0))
    return np.array([panel.factors(s, as_of) for s in stocks], dtype=float).T


def portfolio_factor_exposure(
    portfolio: Portfolio,
    panel: ReturnsPanel,
    as_of: dt.date,
    benchmark: Portfolio | None = None,
) -> np.ndarray:
    """Weighted sum of loadings; with ``benchmark`` given, the tilt relative to it."""
    stocks = sorted(portfolio.weights)
    w = np.array([portfolio.weights[s] for s in stocks])
    exposure = factor_matrix(stocks, panel, as_of) @ w if stocks else np.zeros(len(FACTOR_NAMES))
    if benchmark is not None:
        exposure = exposure - portfolio_factor_exposure(benchmark, panel, as_of)
    return exposure


def _project(w: np.ndarray, c: np.ndarray, b: np.ndarray) -> np.ndarray:
    # minimum-L2-norm correction onto {x : c x = b}
    residual = c @ w - b
    return w - c.T @ (np.linalg.pinv(c @ c.T) @ residual)


def build_longshort(
    scores: CrowdingScores,
    panel: ReturnsPanel,
    as_of: dt.date,
    n_per_side: int = 100,
    bound: float = 0.02,
    construction_date: dt.date | None = None,
) -> Portfolio:
    """Long the least crowded, short the most crowded, then neutralise factors.

    Starting from equal weights +1/|L| and -1/|S|, the weights are moved by
    the smallest L2 correction that sets the long sum to 1, the short sum to
    -1 and all five factor exposures to 0. Positions that flip sign are
    removed and the projection repeated. If exposures still breach
    ``bound`` the name contributing most to the worst factor is dropped.
    """
    order = ranked(scores)
    for s in order:
        if not panel.has_factors(s, as_of):
            raise MissingFactors(s, as_of)
    if len(order) < 2 * n_per_side:
        raise Infeasible(f"need {2 * n_per_side} candidates with factor data, have {len(order)}")

    longs = order[:n_per_side]
    shorts = order[-n_per_side:]
    stocks = longs + shorts
    loadings = factor_matrix(stocks, panel, as_of)
    is_long = np.array([True] * len(longs) + [False] * len(shorts))
    w = np.where(is_long, 1.0 / len(longs), -1.0 / len(shorts))
    active = np.ones(len(stocks), dtype=bool)
    n_factors = loadings.shape[0]
    target = np.concatenate([[1.0, -1.0], np.zeros(n_factors)])
    drops = 0
    repairs_total = 0

    while True:
        if not (active & is_long).any() or not (active & ~is_long).any():
            raise Infeasible("one side of the long/short book emptied before the factor box was met")
        for round_no in range(MAX_REPAIR_ROUNDS + 1):
            idx = np.flatnonzero(active)
            c = np.vstack([is_long[idx].astype(float), (~is_long[idx]).astype(float), loadings[:, idx]])
            w_active = _project(w[idx], c, target)
            w = np.zeros_like(w)
            w[idx] = w_active
            wrong = active & ((is_long & (w < 0)) | (~is_long & (w > 0)))
            if not wrong.any():
                break
            if round_no == MAX_REPAIR_ROUNDS:
                raise Infeasible(f"sign repair did not settle within {MAX_REPAIR_ROUNDS} rounds")
            w[wrong] = 0.0
            active &= ~wrong
            repairs_total += int(wrong.sum())
            if not (active & is_long).any() or not (active & ~is_long).any():
                raise Infeasible("sign repair emptied one side of the book")

        exposure = loadings @ w
        sums_ok = (
            abs(w[is_long].sum() - 1.0) <= SUM_TOL and abs(w[~is_long].sum() + 1.0) <= SUM_TOL
        )
        if sums_ok and np.all(np.abs(exposure) <= bound):
            break
        worst = int(np.argmax(np.abs(exposure)))
        contrib = np.where(active, np.abs(w * loadings[worst]), -1.0)
        victim = int(np.argmax(contrib))
        active[victim] = False
        w[victim] = 0.0
        drops += 1
        log.debug("dropping %s to cut %s exposure %.4g", stocks[victim], FACTOR_NAMES[worst], exposure[worst])

    weights = {stocks[i]: float(w[i]) for i in np.flatnonzero(active) if w[i] != 0.0}
    meta = {"drops": drops, "sign_repairs": repairs_total, "exposure": tuple(float(e) for e in exposure)}
    return Portfolio(construction_date, dict(sorted(weights.items())), "longshort", meta)


def check_longshort(portfolio: Portfolio, panel: ReturnsPanel, as_of: dt.date, n_per_side: int = 100,
                    bound: float = 0.02) -> list[str]:
    """Return the list of broken long/short invariants (empty when valid)."""
    problems = []
    longs, shorts = portfolio.longs, portfolio.shorts
    if abs(sum(longs.values()) - 1.0) > SUM_TOL:
        problems.append(f"long sum {sum(longs.values())!r}")
    if abs(sum(shorts.values()) + 1.0) > SUM_TOL:
        problems.append(f"short sum {sum(shorts.values())!r}")
    if len(longs) > n_per_side or len(shorts) > n_per_side:
        problems.append(f"too many names: {len(longs)} long, {len(shorts)} short")
    exposure = portfolio_factor_exposure(portfolio, panel, as_of)
    for name, e in zip(FACTOR_NAMES, exposure):
        if abs(e) > bound:
            problems.append(f"{name} exposure {e!r}")
    return problems
