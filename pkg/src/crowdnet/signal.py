"""Crowding scores: overweight-graph centrality minus underweight-graph centrality."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable

from .errors import KindMismatch
from .graph import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    CentralityKind,
    CentralityVector,
    build_split_graphs,
    centrality,
    median_filter,
)
from .ingest import HoldingsSnapshot


@dataclass(frozen=True)
class CrowdingScores:
    as_of_date: dt.date
    kind: CentralityKind
    scores: dict[str, float]
    universe: tuple[str, ...]


def crowding_score(
    over: CentralityVector,
    under: CentralityVector,
    universe: Iterable[str],
    as_of_date: dt.date | None = None,
) -> CrowdingScores:
    """Per-stock over minus under centrality; missing stocks count as 0."""
    if over.kind != under.kind:
        raise KindMismatch(f"cannot difference {over.kind.value} against {under.kind.value}")
    universe = tuple(universe)
    scores = {s: over.values.get(s, 0.0) - under.values.get(s, 0.0) for s in universe}
    return CrowdingScores(as_of_date, over.kind, scores, universe)


@dataclass(frozen=True)
class QuarterScore:
    scores: CrowdingScores
    over: CentralityVector
    under: CentralityVector


def score_quarter(
    snapshot: HoldingsSnapshot,
    kind: CentralityKind,
    universe: Iterable[str],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> QuarterScore:
    """Scores together with the two centrality vectors they came from."""
    over_g, under_g = build_split_graphs(snapshot)
    over = centrality(median_filter(over_g), kind, tol, max_iter)
    under = centrality(median_filter(under_g), kind, tol, max_iter)
    return QuarterScore(crowding_score(over, under, universe, snapshot.as_of_date), over, under)


def score_pipeline(
    snapshot: HoldingsSnapshot,
    kind: CentralityKind,
    universe: Iterable[str],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CrowdingScores:
    return score_quarter(snapshot, kind, universe, tol, max_iter).scores


def scoring_universe(snapshot: HoldingsSnapshot, usable: Iterable[str], mode: str = "index") -> list[str]:
    """Usable stocks restricted to benchmark constituents ("index") or held names ("holdings")."""
    usable = set(usable)
    if mode == "index":
        base = set(snapshot.benchmark_weights)
    elif mode == "holdings":
        base = set(snapshot.held_stock_ids)
    elif mode == "all":
        base = usable
    else:
        raise ValueError(f"unknown universe mode {mode!r}")
    return sorted(base & usable)
