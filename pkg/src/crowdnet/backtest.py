"""Lagged quarterly rebalancing, forward returns and the four return metrics."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dates import add_months, is_quarter_end
from .errors import CrowdnetError, DegenerateSeries, MissingReturns, NotQuarterEnd, RankDeficient
from .graph import CentralityKind
from .ingest import ReturnsPanel
from .portfolio import Portfolio, build_longshort, portfolio_factor_exposure, quintile_portfolios
from .signal import CrowdingScores

log = logging.getLogger(__name__)

DEFAULT_HORIZONS = (1, 3, 6, 12)
DEFAULT_LAG_MONTHS = 2
PORTFOLIO_LABELS = ("Q1", "Q2", "Q3", "Q4", "Q5", "benchmark", "longshort")


# --- schedule ----------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    holdings_date: dt.date
    construction_date: dt.date
    horizons: tuple[int, ...]
    available: Mapping[int, bool]

    def window(self, horizon: int) -> list[dt.date]:
        return forward_months(self.construction_date, horizon)


@dataclass(frozen=True)
class RebalanceSchedule:
    entries: tuple[ScheduleEntry, ...]
    lag_months: int = DEFAULT_LAG_MONTHS


def forward_months(start: dt.date, horizon: int) -> list[dt.date]:
    """Month ends strictly after ``start``'s month, ``horizon`` of them."""
    return [add_months(start, k) for k in range(1, horizon + 1)]


def build_schedule(
    holdings_dates: Sequence[dt.date],
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    lag_months: int = DEFAULT_LAG_MONTHS,
    panel_dates: Sequence[dt.date] | None = None,
) -> RebalanceSchedule:
    """Construction dates ``lag_months`` after each quarter end.

    With ``panel_dates`` given, each horizon is flagged available only when
    every month of its window is in the panel.
    """
    for d in holdings_dates:
        if not is_quarter_end(d):
            raise NotQuarterEnd(d)
    horizons = tuple(sorted(set(horizons)))
    have = set(panel_dates) if panel_dates is not None else None
    entries = []
    for d in sorted(set(holdings_dates)):
        construction = add_months(d, lag_months)
        available = {
            h: have is None or all(m in have for m in forward_months(construction, h)) for h in horizons
        }
        entries.append(ScheduleEntry(d, construction, horizons, available))
    return RebalanceSchedule(tuple(entries), lag_months)


# --- returns -----------------------------------------------------------------


def compounded(returns: Sequence[float]) -> float:
    growth = 1.0
    for r in returns:
        growth *= 1.0 + r
    return growth - 1.0


def portfolio_return(portfolio: Portfolio, panel: ReturnsPanel, start: dt.date, horizon_months: int) -> float:
    """Buy-and-hold return of fixed weights over the months after ``start``."""
    months = forward_months(start, horizon_months)
    total = 0.0
    for stock in sorted(portfolio.weights):
        rets = []
        for m in months:
            r = panel.stock_return(stock, m)
            if r is None:
                raise MissingReturns(stock, m)
            rets.append(r)
        total += portfolio.weights[stock] * compounded(rets)
    return total


def market_return(panel: ReturnsPanel, start: dt.date, horizon_months: int) -> float:
    rets = []
    for m in forward_months(start, horizon_months):
        if m not in panel.market_returns:
            raise MissingReturns("<market>", m)
        rets.append(panel.market_returns[m])
    return compounded(rets)


def alpha_series(
    quintiles: Sequence[Portfolio],
    benchmarks: Sequence[Portfolio],
    panel: ReturnsPanel,
    schedule: RebalanceSchedule,
    horizon: int,
) -> list[float]:
    """Quintile minus benchmark return, one value per schedule entry."""
    if not (len(quintiles) == len(benchmarks) == len(schedule.entries)):
        raise ValueError("quintiles, benchmarks and schedule entries must align")
    out = []
    for q, b, entry in zip(quintiles, benchmarks, schedule.entries):
        start = entry.construction_date
        out.append(portfolio_return(q, panel, start, horizon) - portfolio_return(b, panel, start, horizon))
    return out


# --- metrics -----------------------------------------------------------------


def sample_skewness(xs: Sequence[float]) -> float:
    """Adjusted Fisher-Pearson skewness G1."""
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n < 3:
        raise DegenerateSeries(f"skewness needs at least 3 values, got {n}")
    if np.all(x == x[0]):
        raise DegenerateSeries("skewness of a constant series")
    d = x - x.mean()
    m2 = np.mean(d**2)
    m3 = np.mean(d**3)
    g1 = m3 / m2**1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def market_correlation(port: Sequence[float], mkt: Sequence[float]) -> float:
    x = np.asarray(port, dtype=float)
    y = np.asarray(mkt, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-d and equally long")
    if x.size < 2:
        raise DegenerateSeries("correlation needs at least 2 points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateSeries("correlation with a constant series")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return max(-1.0, min(1.0, r))


def quadratic_beta(port: Sequence[float], mkt: Sequence[float]) -> tuple[float, float, float]:
    """OLS of ``port`` on [1, mkt, mkt**2]; returns (a, b, c), c being the quadratic beta."""
    y = np.asarray(port, dtype=float)
    x = np.asarray(mkt, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-d and equally long")
    if x.size < 4:
        raise RankDeficient(f"quadratic fit needs at least 4 points, got {x.size}")
    design = np.column_stack([np.ones_like(x), x, x * x])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise RankDeficient("design matrix [1, m, m^2] is rank deficient")
    a, b, c = (float(v) for v in coef)
    return a, b, c


@dataclass(frozen=True)
class Metrics:
    mean: float
    skewness: float
    market_correlation: float
    quadratic_beta: float


@dataclass(frozen=True)
class BacktestReport:
    portfolio_label: str
    horizon: int
    period_returns: tuple[tuple[dt.date, float, float], ...]
    metrics: Metrics
    quad_fit: tuple[float, float, float]

    @property
    def n_periods(self) -> int:
        return len(self.period_returns)


def _or_nan(fn, *args):
    try:
        return fn(*args)
    except CrowdnetError:
        return math.nan


def summarize(label: str, horizon: int, period_returns: Sequence[tuple[dt.date, float, float]]) -> BacktestReport:
    """Metrics of a stored return series; undefined metrics come back as NaN."""
    period_returns = tuple(period_returns)
    port = [p for _, p, _ in period_returns]
    mkt = [m for _, _, m in period_returns]
    fit = _or_nan(quadratic_beta, port, mkt)
    if not isinstance(fit, tuple):
        fit = (math.nan, math.nan, math.nan)
    metrics = Metrics(
        mean=float(np.mean(port)) if port else math.nan,
        skewness=_or_nan(sample_skewness, port),
        market_correlation=_or_nan(market_correlation, port, mkt),
        quadratic_beta=fit[2],
    )
    return BacktestReport(label, horizon, period_returns, metrics, fit)


# --- full run ----------------------------------------------------------------


@dataclass(frozen=True)
class BacktestConfig:
    n_per_side: int = 100
    factor_bound: float = 0.02
    horizons: tuple[int, ...] = DEFAULT_HORIZONS


@dataclass(frozen=True)
class QuintileAlpha:
    quintile: str
    horizon: int
    alphas: tuple[float, ...]
    mean_alpha: float
    skewness: float


@dataclass
class BacktestResult:
    kind: CentralityKind
    reports: dict[tuple[str, int], BacktestReport]
    quintile_alpha: dict[tuple[str, int], QuintileAlpha]
    factor_tilts: list[tuple[dt.date, str, tuple[float, ...]]]
    portfolios: dict[dt.date, dict[str, Portfolio]]
    failed_quarters: list[tuple[dt.date, str]] = field(default_factory=list)
    skipped_periods: list[tuple[dt.date, str, int, str]] = field(default_factory=list)


def run_backtest(
    scores_by_quarter: Mapping[dt.date, CrowdingScores],
    panel: ReturnsPanel,
    schedule: RebalanceSchedule,
    config: BacktestConfig = BacktestConfig(),
) -> BacktestResult:
    """Quintiles, benchmark and long/short book at every schedule entry.

    A quarter whose portfolios cannot be built is listed in
    ``failed_quarters`` and left out; a horizon whose window runs past the
    data is skipped for that entry only.
    """
    kinds = {s.kind for s in scores_by_quarter.values()}
    if len(kinds) > 1:
        raise ValueError(f"scores mix centrality kinds: {sorted(k.value for k in kinds)}")
    kind = kinds.pop() if kinds else CentralityKind.EIGENVECTOR

    series: dict[tuple[str, int], list[tuple[dt.date, float, float]]] = {
        (label, h): [] for label in PORTFOLIO_LABELS for h in config.horizons
    }
    alphas: dict[tuple[str, int], list[float]] = {(f"Q{q}", h): [] for q in range(1, 6) for h in config.horizons}
    tilts: list[tuple[dt.date, str, tuple[float, ...]]] = []
    built: dict[dt.date, dict[str, Portfolio]] = {}
    failed: list[tuple[dt.date, str]] = []
    skipped: list[tuple[dt.date, str, int, str]] = []

    for entry in schedule.entries:
        scores = scores_by_quarter.get(entry.holdings_date)
        if scores is None:
            failed.append((entry.holdings_date, "NoScores"))
            continue
        construction = entry.construction_date
        try:
            quintiles, benchmark = quintile_portfolios(scores, construction)
            longshort = build_longshort(
                scores, panel, entry.holdings_date, config.n_per_side, config.factor_bound, construction
            )
            quarter_tilts = [
                (entry.holdings_date, q.label,
                 tuple(float(v) for v in portfolio_factor_exposure(q, panel, entry.holdings_date, benchmark)))
                for q in quintiles
            ]
        except CrowdnetError as exc:
            log.warning("quarter %s failed: %s", entry.holdings_date, exc)
            failed.append((entry.holdings_date, f"{type(exc).__name__}: {exc}"))
            continue
        tilts.extend(quarter_tilts)
        books = {q.label: q for q in quintiles}
        books["benchmark"] = benchmark
        books["longshort"] = longshort
        built[entry.holdings_date] = books

        for h in config.horizons:
            if not entry.available.get(h, True):
                skipped.append((entry.holdings_date, "*", h, "window beyond data"))
                continue
            try:
                mkt = market_return(panel, construction, h)
                rets = {label: portfolio_return(p, panel, construction, h) for label, p in books.items()}
            except MissingReturns as exc:
                skipped.append((entry.holdings_date, "*", h, str(exc)))
                continue
            for label, r in rets.items():
                series[(label, h)].append((construction, r, mkt))
            for q in quintiles:
                alphas[(q.label, h)].append(rets[q.label] - rets["benchmark"])

    reports = {key: summarize(key[0], key[1], rows) for key, rows in series.items()}
    quintile_alpha = {}
    for (label, h), xs in alphas.items():
        quintile_alpha[(label, h)] = QuintileAlpha(
            label, h, tuple(xs),
            float(np.mean(xs)) if xs else math.nan,
            _or_nan(sample_skewness, xs),
        )
    return BacktestResult(kind, reports, quintile_alpha, tilts, built, failed, skipped)


COMPARISON_COLUMNS = ("mean", "skewness", "market_correlation", "quadratic_beta")


def signal_comparison(
    results: Mapping[CentralityKind, BacktestResult], horizon: int = 1, label: str = "longshort"
) -> list[tuple[CentralityKind, Metrics]]:
    """Long/short metrics per centrality kind, in Degree, WeightedDegree, Eigenvector order."""
    rows = []
    for kind in CentralityKind:
        if kind in results:
            rows.append((kind, results[kind].reports[(label, horizon)].metrics))
    return rows
