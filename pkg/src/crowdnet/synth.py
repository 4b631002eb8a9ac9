"""Seeded synthetic holdings/returns with a planted crowded block and crash.

Every random draw comes from ``SeedSequence(seed, spawn_key=(domain, ...))``
so a quarter, fund or month can be regenerated on its own and results do
not depend on generation order.

Holdings: each fund holds each stock with probability ``hold_prob`` at its
benchmark weight plus N(0, noise_scale) active noise. For a block stock the
fund additionally crowds in with probability ``i / (1 + i)``, where ``i`` is
``crowd_intensity``; a crowding fund always holds the name and adds
``i * noise_scale`` of active weight, rescaled by ln(cap) / mean ln(cap) so
the planted edges are equal after market-cap normalization.

Returns: one-factor model. Block stocks carry a higher market beta and a
concave penalty in the market move. In the crash month (first month after
the crash quarter's construction date) the market factor falls by
``crash_magnitude / 2`` and block stocks take a further negatively skewed
hit averaging ``crash_magnitude / 2``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dates import add_months, is_quarter_end
from .errors import BadConfig
from .ingest import (
    FACTOR_NAMES,
    Holding,
    HoldingsSnapshot,
    ReturnsPanel,
    write_benchmark,
    write_caps,
    write_holdings,
    write_panel,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

# spawn-key domains
_CAPS, _BLOCK, _HOLD, _FACTORS, _MARKET, _IDIO, _CRASH = range(7)

LAG_MONTHS = 2
FORWARD_MONTHS = 12

MARKET_MEAN = 0.008
MARKET_VOL = 0.04
IDIO_VOL = 0.05
BLOCK_BETA_EXCESS = 0.3
BLOCK_CONVEXITY = 3.0


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; ``crowd_intensity`` is in units of ``noise_scale``.

    Keep ``crowd_intensity * noise_scale * crowded_block_size`` below
    ``1 - hold_prob``. Past that, crowding funds exceed a full book, every
    weight is rescaled and block scores stop growing with intensity.
    """

    n_funds: int = 40
    n_stocks: int = 300
    n_quarters: int = 12
    crowded_block_size: int = 20
    crowd_intensity: float = 10.0
    crash_quarter: int | None = None
    crash_magnitude: float = -0.3
    seed: int = 0
    noise_scale: float = 0.001
    hold_prob: float = 0.3
    start: dt.date = dt.date(2014, 3, 31)

    def validate(self) -> None:
        if self.n_funds < 1:
            raise BadConfig("n_funds must be at least 1")
        if self.n_stocks < 1:
            raise BadConfig("n_stocks must be at least 1 (empty universe)")
        if self.n_quarters < 1:
            raise BadConfig("n_quarters must be at least 1")
        if not 0 <= self.crowded_block_size < self.n_stocks:
            raise BadConfig("crowded_block_size must lie in [0, n_stocks)")
        if self.crowd_intensity < 0:
            raise BadConfig("crowd_intensity must be non-negative")
        if self.crash_quarter is not None and not 0 <= self.crash_quarter < self.n_quarters:
            raise BadConfig("crash_quarter must lie in [0, n_quarters)")
        if not self.crash_magnitude < 0:
            raise BadConfig("crash_magnitude must be negative")
        if not self.noise_scale > 0:
            raise BadConfig("noise_scale must be positive")
        if not 0 < self.hold_prob <= 1:
            raise BadConfig("hold_prob must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise BadConfig("seed must be a 64-bit unsigned integer")
        if not is_quarter_end(self.start):
            raise BadConfig(f"start {self.start} is not a quarter end")


def load_config(path: Path | str, **overrides) -> SynthConfig:
    """Read a TOML file whose keys mirror :class:`SynthConfig` fields."""
    with Path(path).open("rb") as fh:
        raw = tomllib.load(fh)
    raw = dict(raw.get("synth", raw))
    known = {f.name for f in dataclasses.fields(SynthConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise BadConfig(f"unknown config keys: {', '.join(unknown)}")
    if "start" in raw and not isinstance(raw["start"], dt.date):
        raw["start"] = dt.date.fromisoformat(str(raw["start"]))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = SynthConfig(**raw)
    except TypeError as exc:
        raise BadConfig(str(exc)) from None
    config.validate()
    return config


@dataclass(frozen=True)
class SynthData:
    config: SynthConfig
    snapshots: tuple[HoldingsSnapshot, ...]
    panel: ReturnsPanel
    block: tuple[str, ...]
    crash_month: dt.date | None

    @property
    def holdings_dates(self) -> list[dt.date]:
        return [s.as_of_date for s in self.snapshots]


def _rng(config: SynthConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=key))


def stock_ids(n: int) -> list[str]:
    width = max(4, len(str(n)))
    return [f"S{i:0{width}d}" for i in range(n)]


def fund_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"F{i:0{width}d}" for i in range(n)]


def generate(config: SynthConfig) -> SynthData:
    config.validate()
    stocks = stock_ids(config.n_stocks)
    funds = fund_ids(config.n_funds)
    n = config.n_stocks

    block_idx = np.sort(_rng(config, _BLOCK).permutation(n)[: config.crowded_block_size])
    in_block = np.zeros(n, dtype=bool)
    in_block[block_idx] = True
    base_log_cap = _rng(config, _CAPS).normal(np.log(5e9), 1.0, n)

    quarter_ends = [add_months(config.start, 3 * q) for q in range(config.n_quarters)]
    p_crowd = config.crowd_intensity / (1.0 + config.crowd_intensity)

    snapshots = []
    factor_loadings: dict[tuple[str, dt.date], tuple[float, ...]] = {}
    for q, as_of in enumerate(quarter_ends):
        drift = _rng(config, _CAPS, q).normal(0.0, 0.05, n)
        caps = np.exp(base_log_cap + drift)
        bench = caps / caps.sum()
        # planted excess is equal in normalized (active / ln cap) units across the block
        log_caps = np.log(caps)
        excess = config.crowd_intensity * config.noise_scale * log_caps / log_caps.mean()
        holdings = []
        for f, fund in enumerate(funds):
            rng = _rng(config, _HOLD, q, f)
            held = rng.random(n) < config.hold_prob
            noise = rng.normal(0.0, config.noise_scale, n)
            crowd = in_block & (rng.random(n) < p_crowd)
            weights = np.maximum(bench + noise + crowd * excess, 0.0)
            held = (held | crowd) & (weights > 0)
            total = weights[held].sum()
            if total > 1.0:
                weights = weights / total
            holdings.extend(Holding(fund, stocks[i], float(weights[i])) for i in np.flatnonzero(held))
        snapshots.append(
            HoldingsSnapshot(
                as_of,
                tuple(holdings),
                {s: float(b) for s, b in zip(stocks, bench)},
                {s: float(c) for s, c in zip(stocks, caps)},
            )
        )
        loadings = _rng(config, _FACTORS, q).normal(0.0, 1.0, (n, len(FACTOR_NAMES)))
        for i, s in enumerate(stocks):
            factor_loadings[(s, as_of)] = tuple(float(v) for v in loadings[i])

    last = add_months(quarter_ends[-1], LAG_MONTHS + FORWARD_MONTHS)
    months = []
    m = add_months(config.start, 1)
    while m <= last:
        months.append(m)
        m = add_months(m, 1)
    crash_month = None
    if config.crash_quarter is not None:
        crash_month = add_months(quarter_ends[config.crash_quarter], LAG_MONTHS + 1)

    betas = _rng(config, _MARKET, 1).uniform(0.8, 1.2, n) + BLOCK_BETA_EXCESS * in_block
    market_draws = _rng(config, _MARKET).normal(MARKET_MEAN, MARKET_VOL, len(months))
    stock_returns: dict[tuple[str, dt.date], float] = {}
    market: dict[dt.date, float] = {}
    for t, month in enumerate(months):
        factor = market_draws[t]
        idio = _rng(config, _IDIO, t).normal(0.0, IDIO_VOL, n)
        r = betas * factor + idio - BLOCK_CONVEXITY * in_block * (factor - MARKET_MEAN) ** 2
        if month == crash_month:
            factor = config.crash_magnitude / 2.0
            shock = _rng(config, _CRASH).lognormal(0.0, 0.75, n)
            shock /= np.exp(0.75**2 / 2.0)
            r = betas * factor + idio * 0.5 + in_block * shock * config.crash_magnitude / 2.0
        r = np.maximum(r, -0.95)
        for i, s in enumerate(stocks):
            stock_returns[(s, month)] = float(r[i])
        market[month] = float(r.mean())

    panel = ReturnsPanel(tuple(months), stock_returns, market, factor_loadings)
    return SynthData(config, tuple(snapshots), panel, tuple(stocks[i] for i in block_idx), crash_month)


def write_dataset(data: SynthData, directory: Path | str) -> list[Path]:
    """Write the ingest-format CSV set plus ``truth.json`` describing the planted structure."""
    directory = Path(directory)
    if data.config.n_stocks < 1:
        raise BadConfig("empty universe")
    hold_dir = directory / "holdings"
    hold_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in data.snapshots:
        p = hold_dir / f"holdings_{snap.as_of_date.isoformat()}.csv"
        write_holdings([snap], p)
        paths.append(p)
    write_benchmark(data.snapshots, directory / "benchmark.csv")
    write_caps(data.snapshots, directory / "caps.csv")
    paths += [directory / "benchmark.csv", directory / "caps.csv"]
    paths += list(write_panel(data.panel, directory).values())
    truth = {
        "block": list(data.block),
        "crash_month": data.crash_month.isoformat() if data.crash_month else None,
        "config": {
            k: (v.isoformat() if isinstance(v, dt.date) else v)
            for k, v in dataclasses.asdict(data.config).items()
        },
    }
    (directory / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    paths.append(directory / "truth.json")
    log.info("wrote %d files to %s", len(paths), directory)
    return paths
