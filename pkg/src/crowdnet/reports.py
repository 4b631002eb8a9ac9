"""CSV writers for scores, portfolios and backtest reports.

Every file starts with ``#``-prefixed metadata lines (tool version, config
hash, input digests) followed by a fixed header row.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .backtest import COMPARISON_COLUMNS, BacktestResult, Metrics, signal_comparison
from .graph import CentralityKind
from .ingest import FACTOR_NAMES
from .portfolio import Portfolio
from .signal import QuarterScore

SCORES_HEADER = ["as_of_date", "kind", "stock_id", "score"]
CENTRALITY_HEADER = ["as_of_date", "side", "kind", "stock_id", "value", "converged", "iterations"]
QUINTILES_HEADER = ["construction_date", "quintile", "stock_id", "weight"]
HEDGE_HEADER = ["construction_date", "stock_id", "weight"]
METRICS_HEADER = [
    "signal_kind", "portfolio", "horizon_months", "mean", "skewness",
    "market_correlation", "quadratic_beta", "n_periods",
]
QUINTILE_ALPHA_HEADER = ["quintile", "horizon_months", "mean_alpha", "skewness"]
FACTOR_TILTS_HEADER = ["as_of_date", "quintile", *FACTOR_NAMES]
LS_SCATTER_HEADER = ["construction_date", "ls_return", "market_return"]
COMPARISON_HEADER = ["signal_kind", *COMPARISON_COLUMNS]


def fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    if isinstance(x, dt.date):
        return x.isoformat()
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(x)


def file_digest(path: Path | str) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def metadata_lines(
    config_hash: str,
    inputs: Iterable[Path] = (),
    base_dir: Path | None = None,
    extra: Mapping[str, str] | None = None,
) -> list[str]:
    lines = [f"crowdnet_version: {__version__}", f"config_hash: {config_hash}"]
    for path in inputs:
        name = Path(path).relative_to(base_dir).as_posix() if base_dir else Path(path).name
        lines.append(f"input: {name} sha256={file_digest(path)}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {value}")
    return lines


def write_csv(
    path: Path | str,
    header: Sequence[str],
    rows: Iterable[Sequence],
    meta: Sequence[str] = (),
    footer: Sequence[str] = (),
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        for line in footer:
            fh.write(f"# {line}\n")
    return path


def write_scores(path, scored: Mapping[dt.date, QuarterScore], meta=()) -> Path:
    rows = (
        (d, q.scores.kind.value, s, q.scores.scores[s])
        for d, q in sorted(scored.items())
        for s in q.scores.universe
    )
    return write_csv(path, SCORES_HEADER, rows, meta)


def write_centrality(path, scored: Mapping[dt.date, QuarterScore], meta=()) -> Path:
    def rows():
        for d, q in sorted(scored.items()):
            for side, vec in (("overweight", q.over), ("underweight", q.under)):
                for stock, value in sorted(vec.values.items()):
                    yield d, side, vec.kind.value, stock, value, vec.converged, vec.iterations

    return write_csv(path, CENTRALITY_HEADER, rows(), meta)


def write_quintiles(path, books: Mapping[dt.date, Sequence[Portfolio]], meta=()) -> Path:
    rows = (
        (p.construction_date, p.label, s, w)
        for _, ps in sorted(books.items())
        for p in ps
        for s, w in sorted(p.weights.items())
    )
    return write_csv(path, QUINTILES_HEADER, rows, meta)


def write_hedge(path, books: Mapping[dt.date, Portfolio], meta=()) -> Path:
    rows = (
        (p.construction_date, s, w) for _, p in sorted(books.items()) for s, w in sorted(p.weights.items())
    )
    return write_csv(path, HEDGE_HEADER, rows, meta)


def _metric_row(m: Metrics) -> list[float]:
    return [m.mean, m.skewness, m.market_correlation, m.quadratic_beta]


def write_backtest(
    report_dir: Path | str,
    results: Mapping[CentralityKind, BacktestResult],
    primary: CentralityKind,
    meta: Sequence[str] = (),
    comparison_horizon: int = 1,
) -> dict[str, Path]:
    """Write metrics, quintile alpha, factor tilts, the L/S scatter and the signal comparison."""
    report_dir = Path(report_dir)
    main = results[primary]
    failed = "; ".join(f"{d.isoformat()} {why}" for d, why in main.failed_quarters) or "none"
    run_meta = [*meta, f"failed_quarters: {failed}",
                "windows: overlapping buy-and-hold windows from quarterly construction"]

    metric_rows = []
    for kind in CentralityKind:
        if kind not in results:
            continue
        for (label, h), rep in results[kind].reports.items():
            metric_rows.append([kind.value, label, h, *_metric_row(rep.metrics), rep.n_periods])
    out = {"metrics": write_csv(report_dir / "metrics.csv", METRICS_HEADER, metric_rows, run_meta)}

    alpha_rows = [
        [qa.quintile, qa.horizon, qa.mean_alpha, qa.skewness]
        for (_, h), qa in sorted(main.quintile_alpha.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    ]
    out["quintile_alpha"] = write_csv(report_dir / "quintile_alpha.csv", QUINTILE_ALPHA_HEADER, alpha_rows, run_meta)

    tilt_rows = [[d, label, *vec] for d, label, vec in main.factor_tilts]
    out["factor_tilts"] = write_csv(report_dir / "factor_tilts.csv", FACTOR_TILTS_HEADER, tilt_rows, run_meta)

    ls = main.reports[("longshort", comparison_horizon)]
    a, b, c = ls.quad_fit
    out["ls_scatter"] = write_csv(
        report_dir / "ls_scatter.csv",
        LS_SCATTER_HEADER,
        [list(row) for row in ls.period_returns],
        run_meta,
        footer=["fit_columns: a,b,c", f"fit: {fmt(a)},{fmt(b)},{fmt(c)}"],
    )

    comparison_rows = [[kind.value, *_metric_row(m)] for kind, m in signal_comparison(results, comparison_horizon)]
    out["signal_comparison"] = write_csv(
        report_dir / "signal_comparison.csv", COMPARISON_HEADER, comparison_rows,
        [*run_meta, f"comparison: longshort, {comparison_horizon}-month horizon"],
    )
    return out
