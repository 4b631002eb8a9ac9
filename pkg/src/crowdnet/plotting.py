"""Figures for the report command.

All figures are written with fixed metadata so repeated runs produce
identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .backtest import BacktestReport, BacktestResult  # noqa: E402
from .ingest import FACTOR_NAMES  # noqa: E402

SVG_SIZE = (800, 600)
QUINTILES = ("Q1", "Q2", "Q3", "Q4", "Q5")

_RC = {
    "font.size": 11,
    "axes.titlesize": 12,
    "axes.labelsize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "crowdnet",
    "svg.fonttype": "none",
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = path.suffix.lstrip(".").lower()
    metadata = {"Date": None} if fmt in ("svg", "pdf") else {"Software": None}
    fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)
    return path


def plot_quintile_alpha(result: BacktestResult, path: Path, horizon: int = 1) -> Path:
    """Mean and skewness of quintile alpha side by side."""
    means = [result.quintile_alpha[(q, horizon)].mean_alpha * 100 for q in QUINTILES]
    skews = [result.quintile_alpha[(q, horizon)].skewness for q in QUINTILES]
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8), constrained_layout=True)
        ax1.bar(QUINTILES, means, color="#4C72B0")
        ax1.set_ylabel(f"mean {horizon}m alpha (%)")
        ax1.axhline(0, color="black", lw=0.8)
        ax2.bar(QUINTILES, skews, color="#C44E52")
        ax2.set_ylabel("skewness")
        ax2.axhline(0, color="black", lw=0.8)
        fig.suptitle(f"{result.kind.value} quintiles vs equal-weight benchmark")
        return _save(fig, path)


def plot_factor_tilts(result: BacktestResult, path: Path) -> Path:
    """Average factor tilt of each quintile relative to the benchmark."""
    tilts = {q: [] for q in QUINTILES}
    for _, label, vec in result.factor_tilts:
        tilts[label].append(vec)
    avg = np.array([np.mean(tilts[q], axis=0) if tilts[q] else np.zeros(len(FACTOR_NAMES)) for q in QUINTILES])
    x = np.arange(len(FACTOR_NAMES))
    width = 0.16
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 4), constrained_layout=True)
        for i, q in enumerate(QUINTILES):
            ax.bar(x + (i - 2) * width, avg[i], width, label=q)
        ax.set_xticks(x, FACTOR_NAMES)
        ax.axhline(0, color="black", lw=0.8)
        ax.set_ylabel("exposure relative to benchmark")
        ax.legend(ncol=5, loc="upper center")
        return _save(fig, path)


def plot_ls_vs_market(report: BacktestReport, path: Path) -> Path:
    """Long/short and market returns, periods sorted by market return."""
    rows = sorted(report.period_returns, key=lambda r: r[2])
    ls = np.array([r[1] for r in rows]) * 100
    mkt = np.array([r[2] for r in rows]) * 100
    x = np.arange(len(rows))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 4), constrained_layout=True)
        ax.bar(x - 0.2, mkt, 0.4, label="market", color="#8C8C8C")
        ax.bar(x + 0.2, ls, 0.4, label="long/short", color="#4C72B0")
        ax.axhline(0, color="black", lw=0.8)
        ax.set_xlabel("period (sorted by market return)")
        ax.set_ylabel(f"{report.horizon}m return (%)")
        ax.set_title(f"correlation {report.metrics.market_correlation:.2f}")
        ax.legend()
        return _save(fig, path)


def plot_ls_scatter(report: BacktestReport, path: Path) -> Path:
    """Scatter of long/short against market returns with the fitted quadratic.

    An ``.svg`` path gets the fixed 800x600 viewport.
    """
    mkt = np.array([r[2] for r in report.period_returns])
    ls = np.array([r[1] for r in report.period_returns])
    a, b, c = report.quad_fit
    figsize = (SVG_SIZE[0] / 72, SVG_SIZE[1] / 72) if str(path).endswith(".svg") else (6, 4.5)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=figsize, constrained_layout=True)
        ax.scatter(mkt, ls, s=18, color="#4C72B0")
        if len(mkt) and np.isfinite(c):
            grid = np.linspace(mkt.min(), mkt.max(), 200)
            ax.plot(grid, a + b * grid + c * grid**2, color="red", lw=1.5,
                    label=f"fit: {a:.4f} {b:+.3f} m {c:+.3f} m²")
            ax.legend()
        ax.axhline(0, color="black", lw=0.6)
        ax.axvline(0, color="black", lw=0.6)
        ax.set_xlabel(f"market {report.horizon}m return")
        ax.set_ylabel(f"long/short {report.horizon}m return")
        return _save(fig, path)


def write_figures(result: BacktestResult, report_dir: Path, svg: bool = False, horizon: int = 1) -> list[Path]:
    report_dir = Path(report_dir)
    ls = result.reports[("longshort", horizon)]
    paths = [
        plot_quintile_alpha(result, report_dir / "quintile_alpha.png", horizon),
        plot_factor_tilts(result, report_dir / "factor_tilts.png"),
        plot_ls_vs_market(ls, report_dir / "ls_vs_market.png"),
        plot_ls_scatter(ls, report_dir / "ls_scatter.png"),
    ]
    if svg:
        paths.append(plot_ls_scatter(ls, report_dir / "ls_scatter.svg"))
    return paths
