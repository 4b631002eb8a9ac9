"""Quarter-by-quarter scoring over a whole dataset."""

from __future__ import annotations

import datetime as dt
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Sequence

from .backtest import BacktestConfig, BacktestResult, RebalanceSchedule, build_schedule, run_backtest
from .graph import DEFAULT_MAX_ITER, DEFAULT_TOL, CentralityKind
from .ingest import HoldingsSnapshot, ReturnsPanel, UniverseReport, validate_universe
from .signal import QuarterScore, score_quarter, scoring_universe


def thread_count(env: Mapping[str, str] = os.environ) -> int:
    """Worker count from ``CROWDNET_THREADS`` (0 or unset means one per CPU)."""
    raw = env.get("CROWDNET_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("CROWDNET_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def universe_for(
    snapshot: HoldingsSnapshot,
    panel: ReturnsPanel,
    schedule: RebalanceSchedule,
    mode: str = "index",
) -> tuple[list[str], UniverseReport]:
    """Scoring universe for one quarter.

    The forward-return requirement is the longest horizon the schedule can
    observe for this quarter (12 months when the data reaches that far).
    """
    entry = next(e for e in schedule.entries if e.holdings_date == snapshot.as_of_date)
    observable = [h for h in entry.horizons if entry.available.get(h, True)]
    report = validate_universe(
        snapshot, panel, schedule.lag_months, max(observable) if observable else 1
    )
    return scoring_universe(snapshot, report.usable, mode), report


def score_all(
    snapshots: Mapping[dt.date, HoldingsSnapshot] | Sequence[HoldingsSnapshot],
    panel: ReturnsPanel,
    kind: CentralityKind,
    schedule: RebalanceSchedule | None = None,
    universe_mode: str = "index",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int = 1,
) -> dict[dt.date, QuarterScore]:
    """Score every quarter; output order is by date whatever the thread count."""
    if not isinstance(snapshots, Mapping):
        snapshots = {s.as_of_date: s for s in snapshots}
    if schedule is None:
        schedule = build_schedule(sorted(snapshots), panel_dates=panel.dates)
    dates = sorted(snapshots)

    def work(d: dt.date) -> QuarterScore:
        universe, _ = universe_for(snapshots[d], panel, schedule, universe_mode)
        return score_quarter(snapshots[d], kind, universe, tol, max_iter)

    if threads > 1 and len(dates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, dates))
    else:
        results = [work(d) for d in dates]
    return dict(zip(dates, results))


def backtest_dataset(
    snapshots: Mapping[dt.date, HoldingsSnapshot] | Sequence[HoldingsSnapshot],
    panel: ReturnsPanel,
    kind: CentralityKind,
    config: BacktestConfig = BacktestConfig(),
    lag_months: int = 2,
    universe_mode: str = "index",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int = 1,
) -> tuple[BacktestResult, dict[dt.date, QuarterScore]]:
    if not isinstance(snapshots, Mapping):
        snapshots = {s.as_of_date: s for s in snapshots}
    schedule = build_schedule(sorted(snapshots), config.horizons, lag_months, panel.dates)
    scored = score_all(snapshots, panel, kind, schedule, universe_mode, tol, max_iter, threads)
    result = run_backtest({d: q.scores for d, q in scored.items()}, panel, schedule, config)
    return result, scored
