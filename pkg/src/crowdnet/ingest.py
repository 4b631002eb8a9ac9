"""CSV ingestion and validation for holdings, benchmark, caps, returns and factors.

Data directory layout used by the CLI and the synthetic generator::

    DIR/holdings/holdings_YYYY-MM-DD.csv   as_of_date,fund_id,stock_id,weight
    DIR/benchmark.csv                      as_of_date,stock_id,weight
    DIR/caps.csv                           as_of_date,stock_id,market_cap_usd
    DIR/returns.csv                        date,stock_id,return
    DIR/market.csv                         date,return
    DIR/factors.csv                        as_of_date,stock_id,beta,growth,momentum,volatility,size

A single ``DIR/holdings.csv`` holding every quarter is accepted as well.
Lines starting with ``#`` are treated as comments.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .dates import add_months, is_month_end
from .errors import (
    BadWeight,
    DuplicateKey,
    InvalidSnapshot,
    MissingFactors,
    MissingMarketCap,
    SchemaError,
)

log = logging.getLogger(__name__)

FACTOR_NAMES = ("beta", "growth", "momentum", "volatility", "size")

HOLDINGS_HEADER = ["as_of_date", "fund_id", "stock_id", "weight"]
BENCHMARK_HEADER = ["as_of_date", "stock_id", "weight"]
CAPS_HEADER = ["as_of_date", "stock_id", "market_cap_usd"]
RETURNS_HEADER = ["date", "stock_id", "return"]
MARKET_HEADER = ["date", "return"]
FACTORS_HEADER = ["as_of_date", "stock_id", *FACTOR_NAMES]

FUND_SUM_EPS = 1e-6
BENCHMARK_SUM_EPS = 1e-6


@dataclass(frozen=True)
class Holding:
    fund_id: str
    stock_id: str
    weight: float


@dataclass(frozen=True)
class HoldingsSnapshot:
    """One quarter of fund holdings with the benchmark and market caps.

    Holdings are kept sorted by (fund_id, stock_id) and the maps sorted by
    key, so two snapshots built from permuted rows compare equal.
    """

    as_of_date: dt.date
    holdings: tuple[Holding, ...] = ()
    benchmark_weights: Mapping[str, float] = field(default_factory=dict)
    market_caps: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "holdings", tuple(sorted(self.holdings, key=lambda h: (h.fund_id, h.stock_id)))
        )
        object.__setattr__(self, "benchmark_weights", dict(sorted(self.benchmark_weights.items())))
        object.__setattr__(self, "market_caps", dict(sorted(self.market_caps.items())))
        _check_snapshot(self)

    @property
    def fund_ids(self) -> list[str]:
        return sorted({h.fund_id for h in self.holdings})

    @property
    def held_stock_ids(self) -> list[str]:
        return sorted({h.stock_id for h in self.holdings})

    def is_empty(self) -> bool:
        return not self.holdings and not self.benchmark_weights


def _check_snapshot(snap: HoldingsSnapshot) -> None:
    seen = set()
    fund_sums: dict[str, float] = defaultdict(float)
    for h in snap.holdings:
        key = (h.fund_id, h.stock_id)
        if key in seen:
            raise DuplicateKey(f"{h.fund_id}/{h.stock_id}", snap.as_of_date, "holdings")
        seen.add(key)
        if not (0.0 <= h.weight <= 1.0):
            raise BadWeight(h.fund_id, h.stock_id, h.weight)
        fund_sums[h.fund_id] += h.weight
    for fund, total in sorted(fund_sums.items()):
        if total > 1.0 + FUND_SUM_EPS:
            raise InvalidSnapshot(f"fund {fund!r} weights sum to {total!r} > 1 at {snap.as_of_date}")

    for stock, w in snap.benchmark_weights.items():
        if not (0.0 <= w <= 1.0):
            raise BadWeight("<benchmark>", stock, w)
    if snap.benchmark_weights:
        total = math.fsum(snap.benchmark_weights.values())
        if abs(total - 1.0) > BENCHMARK_SUM_EPS:
            raise InvalidSnapshot(f"benchmark weights sum to {total!r} at {snap.as_of_date}")

    for stock, cap in snap.market_caps.items():
        if not cap > 1.0:
            raise InvalidSnapshot(f"market cap of {stock!r} must exceed 1 dollar, got {cap!r}")
    for h in snap.holdings:
        if h.stock_id not in snap.market_caps:
            raise MissingMarketCap(h.stock_id, f"held by {h.fund_id} at {snap.as_of_date}")
    for stock in snap.benchmark_weights:
        if stock not in snap.market_caps:
            raise MissingMarketCap(stock, f"benchmark constituent at {snap.as_of_date}")


@dataclass(frozen=True)
class ReturnsPanel:
    """Monthly simple returns, market returns and dated factor loadings."""

    dates: tuple[dt.date, ...]
    stock_returns: Mapping[tuple[str, dt.date], float]
    market_returns: Mapping[dt.date, float]
    factor_loadings: Mapping[tuple[str, dt.date], tuple[float, ...]]

    def __post_init__(self):
        dates = tuple(self.dates)
        object.__setattr__(self, "dates", dates)
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise SchemaError(f"panel dates not strictly increasing at {b}")
        for d in dates:
            if not is_month_end(d):
                raise SchemaError(f"panel date {d} is not a month end")
        for key, r in self.stock_returns.items():
            if not r > -1.0:
                raise SchemaError(f"return {r!r} for {key} is not above -1")
        for d, r in self.market_returns.items():
            if not r > -1.0:
                raise SchemaError(f"market return {r!r} at {d} is not above -1")
        for key, vec in self.factor_loadings.items():
            if len(vec) != len(FACTOR_NAMES):
                raise SchemaError(f"factor vector for {key} has {len(vec)} values, expected 5")

    def stock_return(self, stock_id: str, date: dt.date) -> float | None:
        return self.stock_returns.get((stock_id, date))

    def factors(self, stock_id: str, as_of: dt.date) -> tuple[float, ...]:
        try:
            return self.factor_loadings[(stock_id, as_of)]
        except KeyError:
            raise MissingFactors(stock_id, as_of) from None

    def has_factors(self, stock_id: str, as_of: dt.date) -> bool:
        return (stock_id, as_of) in self.factor_loadings


@dataclass(frozen=True)
class UniverseReport:
    usable: tuple[str, ...]
    excluded: tuple[tuple[str, str], ...]


def validate_universe(
    snapshot: HoldingsSnapshot,
    panel: ReturnsPanel,
    lag_months: int = 2,
    min_forward_months: int = 12,
) -> UniverseReport:
    """Split the snapshot's stocks into usable and excluded-with-reason.

    A stock is usable when it has a market cap, a factor vector at the
    holdings date and a return for each of the ``min_forward_months`` months
    following the construction date.
    """
    candidates = sorted(
        set(snapshot.benchmark_weights) | set(snapshot.held_stock_ids) | set(snapshot.market_caps)
    )
    construction = add_months(snapshot.as_of_date, lag_months)
    months = [add_months(construction, k) for k in range(1, min_forward_months + 1)]
    usable, excluded = [], []
    for stock in candidates:
        if stock not in snapshot.market_caps:
            excluded.append((stock, "MissingMarketCap"))
        elif not panel.has_factors(stock, snapshot.as_of_date):
            excluded.append((stock, "MissingFactors"))
        elif any((stock, m) not in panel.stock_returns for m in months):
            excluded.append((stock, "MissingReturns"))
        else:
            usable.append(stock)
    return UniverseReport(tuple(usable), tuple(excluded))


# --- reading -----------------------------------------------------------------


def _read_rows(
    path: Path, header: list[str], strict_width: bool = True
) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        seen_header = False
        for row in reader:
            line_no = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in row]
            if not seen_header:
                if cells != header:
                    raise SchemaError(
                        f"expected header {','.join(header)!r}, got {','.join(cells)!r}",
                        str(path),
                        line_no,
                    )
                seen_header = True
                continue
            if strict_width and len(cells) != len(header):
                raise SchemaError(
                    f"expected {len(header)} fields, got {len(cells)}", str(path), line_no
                )
            yield line_no, cells
    if not seen_header:
        raise SchemaError("missing header row", str(path), None)


def _float(text: str, path: Path, line_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"not a number: {text!r}", str(path), line_no) from None
    if not math.isfinite(value):
        raise SchemaError(f"non-finite number: {text!r}", str(path), line_no)
    return value


def _date(text: str, path: Path, line_no: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise SchemaError(f"bad ISO date: {text!r}", str(path), line_no) from None


def _read_dated_map(
    path: Path, header: list[str], as_of: dt.date, what: str
) -> dict[str, tuple[float, int]]:
    out: dict[str, tuple[float, int]] = {}
    for line_no, (date_s, stock, value_s) in _read_rows(path, header):
        if _date(date_s, path, line_no) != as_of:
            continue
        if stock in out:
            raise DuplicateKey(stock, as_of, f"{path}:{line_no} ({what})")
        out[stock] = (_float(value_s, path, line_no), line_no)
    return out


def load_snapshot(
    holdings_path: Path | str,
    benchmark_path: Path | str,
    caps_path: Path | str,
    as_of: dt.date,
) -> HoldingsSnapshot:
    """Load and validate one quarter's snapshot; rows of other dates are skipped."""
    holdings_path, benchmark_path, caps_path = map(Path, (holdings_path, benchmark_path, caps_path))
    holdings: list[Holding] = []
    seen: dict[tuple[str, str], int] = {}
    fund_sums: dict[str, float] = defaultdict(float)
    fund_last_line: dict[str, int] = {}
    for line_no, (date_s, fund, stock, w_s) in _read_rows(holdings_path, HOLDINGS_HEADER):
        if _date(date_s, holdings_path, line_no) != as_of:
            continue
        w = _float(w_s, holdings_path, line_no)
        if not (0.0 <= w <= 1.0):
            raise BadWeight(fund, stock, w, f"{holdings_path}:{line_no}")
        if (fund, stock) in seen:
            raise DuplicateKey(f"{fund}/{stock}", as_of, f"{holdings_path}:{line_no}")
        seen[(fund, stock)] = line_no
        fund_sums[fund] += w
        fund_last_line[fund] = line_no
        holdings.append(Holding(fund, stock, w))
    for fund, total in fund_sums.items():
        if total > 1.0 + FUND_SUM_EPS:
            raise SchemaError(
                f"fund {fund!r} weights sum to {total!r} > 1", str(holdings_path), fund_last_line[fund]
            )

    bench = _read_dated_map(benchmark_path, BENCHMARK_HEADER, as_of, "benchmark")
    for stock, (w, line_no) in bench.items():
        if not (0.0 <= w <= 1.0):
            raise BadWeight("<benchmark>", stock, w, f"{benchmark_path}:{line_no}")
    caps = _read_dated_map(caps_path, CAPS_HEADER, as_of, "caps")
    for stock, (cap, line_no) in caps.items():
        if not cap > 1.0:
            raise SchemaError(f"market cap must exceed 1 dollar, got {cap!r}", str(caps_path), line_no)

    for h in holdings:
        if h.stock_id not in caps:
            raise MissingMarketCap(h.stock_id, f"{holdings_path}:{seen[(h.fund_id, h.stock_id)]}")
    for stock, (_, line_no) in bench.items():
        if stock not in caps:
            raise MissingMarketCap(stock, f"{benchmark_path}:{line_no}")

    try:
        return HoldingsSnapshot(
            as_of_date=as_of,
            holdings=tuple(holdings),
            benchmark_weights={s: w for s, (w, _) in bench.items()},
            market_caps={s: c for s, (c, _) in caps.items()},
        )
    except InvalidSnapshot as exc:
        raise SchemaError(str(exc), str(benchmark_path), None) from None


def load_returns(
    returns_path: Path | str, market_path: Path | str, factors_path: Path | str
) -> ReturnsPanel:
    returns_path, market_path, factors_path = map(Path, (returns_path, market_path, factors_path))
    stock_returns: dict[tuple[str, dt.date], float] = {}
    for line_no, (date_s, stock, r_s) in _read_rows(returns_path, RETURNS_HEADER):
        d = _date(date_s, returns_path, line_no)
        if not is_month_end(d):
            raise SchemaError(f"{d} is not a month end", str(returns_path), line_no)
        r = _float(r_s, returns_path, line_no)
        if not r > -1.0:
            raise SchemaError(f"return {r!r} is not above -1", str(returns_path), line_no)
        if (stock, d) in stock_returns:
            raise DuplicateKey(stock, d, f"{returns_path}:{line_no}")
        stock_returns[(stock, d)] = r

    market: dict[dt.date, float] = {}
    for line_no, (date_s, r_s) in _read_rows(market_path, MARKET_HEADER):
        d = _date(date_s, market_path, line_no)
        if not is_month_end(d):
            raise SchemaError(f"{d} is not a month end", str(market_path), line_no)
        r = _float(r_s, market_path, line_no)
        if not r > -1.0:
            raise SchemaError(f"market return {r!r} is not above -1", str(market_path), line_no)
        if d in market:
            raise DuplicateKey("<market>", d, f"{market_path}:{line_no}")
        market[d] = r

    factors: dict[tuple[str, dt.date], tuple[float, ...]] = {}
    for line_no, cells in _read_rows(factors_path, FACTORS_HEADER, strict_width=False):
        if len(cells) != len(FACTORS_HEADER):
            raise SchemaError(
                f"factor row needs {len(FACTOR_NAMES)} loadings, got {len(cells) - 2}",
                str(factors_path),
                line_no,
            )
        d = _date(cells[0], factors_path, line_no)
        stock = cells[1]
        if (stock, d) in factors:
            raise DuplicateKey(stock, d, f"{factors_path}:{line_no}")
        factors[(stock, d)] = tuple(_float(c, factors_path, line_no) for c in cells[2:])

    dates = sorted({d for _, d in stock_returns} | set(market))
    return ReturnsPanel(tuple(dates), stock_returns, market, factors)


# --- writing -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_holdings(snapshots: Iterable[HoldingsSnapshot], path: Path | str) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOLDINGS_HEADER)
        for snap in snapshots:
            for h in snap.holdings:
                w.writerow([snap.as_of_date.isoformat(), h.fund_id, h.stock_id, _fmt(h.weight)])


def write_benchmark(snapshots: Iterable[HoldingsSnapshot], path: Path | str) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCHMARK_HEADER)
        for snap in snapshots:
            for stock, weight in snap.benchmark_weights.items():
                w.writerow([snap.as_of_date.isoformat(), stock, _fmt(weight)])


def write_caps(snapshots: Iterable[HoldingsSnapshot], path: Path | str) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CAPS_HEADER)
        for snap in snapshots:
            for stock, cap in snap.market_caps.items():
                w.writerow([snap.as_of_date.isoformat(), stock, _fmt(cap)])


def write_panel(panel: ReturnsPanel, directory: Path | str) -> dict[str, Path]:
    directory = Path(directory)
    paths = {
        "returns": directory / "returns.csv",
        "market": directory / "market.csv",
        "factors": directory / "factors.csv",
    }
    with paths["returns"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RETURNS_HEADER)
        for (stock, d), r in sorted(panel.stock_returns.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            w.writerow([d.isoformat(), stock, _fmt(r)])
    with paths["market"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKET_HEADER)
        for d, r in sorted(panel.market_returns.items()):
            w.writerow([d.isoformat(), _fmt(r)])
    with paths["factors"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FACTORS_HEADER)
        for (stock, d), vec in sorted(panel.factor_loadings.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            w.writerow([d.isoformat(), stock, *(_fmt(v) for v in vec)])
    return paths


# --- data directories --------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    snapshots: dict[dt.date, HoldingsSnapshot]
    panel: ReturnsPanel
    input_files: tuple[Path, ...]

    @property
    def holdings_dates(self) -> list[dt.date]:
        return sorted(self.snapshots)


def holdings_files(data_dir: Path | str) -> list[Path]:
    data_dir = Path(data_dir)
    files = sorted((data_dir / "holdings").glob("*.csv")) if (data_dir / "holdings").is_dir() else []
    if (data_dir / "holdings.csv").is_file():
        files.append(data_dir / "holdings.csv")
    return files


def _dates_in(path: Path) -> set[dt.date]:
    return {_date(cells[0], path, line_no) for line_no, cells in _read_rows(path, HOLDINGS_HEADER)}


def load_dataset(data_dir: Path | str) -> Dataset:
    """Load every quarter found under ``data_dir`` plus the returns panel."""
    data_dir = Path(data_dir)
    files = holdings_files(data_dir)
    if not files:
        raise SchemaError("no holdings files found", str(data_dir / "holdings"), None)
    benchmark = data_dir / "benchmark.csv"
    caps = data_dir / "caps.csv"
    for required in (benchmark, data_dir / "returns.csv", data_dir / "market.csv", data_dir / "factors.csv"):
        if not required.is_file():
            raise SchemaError("required input file is missing", str(required), None)
    if not caps.is_file():
        # with no caps at all, the first held stock is the one reported
        first = next((cells[2] for p in files for _, cells in _read_rows(p, HOLDINGS_HEADER)), "<none>")
        raise MissingMarketCap(first, f"{caps} does not exist")

    date_files: dict[dt.date, Path] = {}
    for path in files:
        for d in sorted(_dates_in(path)):
            if d in date_files:
                raise DuplicateKey("<holdings quarter>", d, f"{path} and {date_files[d]}")
            date_files[d] = path
    snapshots = {d: load_snapshot(p, benchmark, caps, d) for d, p in sorted(date_files.items())}
    panel = load_returns(data_dir / "returns.csv", data_dir / "market.csv", data_dir / "factors.csv")
    inputs = tuple(sorted([*files, benchmark, caps, data_dir / "returns.csv", data_dir / "market.csv", data_dir / "factors.csv"]))
    log.info("loaded %d quarters and %d monthly dates from %s", len(snapshots), len(panel.dates), data_dir)
    return Dataset(snapshots, panel, inputs)
