"""``crowdnet`` command line: synth, score, quintiles, hedge, backtest, report.

Exit status is 0 on success, 1 on a data or validation error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .backtest import DEFAULT_HORIZONS, BacktestConfig, build_schedule, run_backtest
from .errors import CrowdnetError
from .graph import DEFAULT_MAX_ITER, DEFAULT_TOL, CentralityKind
from .ingest import load_dataset
from .pipeline import score_all, thread_count
from .portfolio import build_longshort, quintile_portfolios
from . import reports

log = logging.getLogger("crowdnet")


@dataclass(frozen=True)
class RunConfig:
    data_dir: Path | None = None
    out_dir: Path | None = None
    centrality_kind: CentralityKind = CentralityKind.EIGENVECTOR
    n_per_side: int = 100
    factor_bound: float = 0.02
    lag_months: int = 2
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    eigen_tol: float = DEFAULT_TOL
    eigen_max_iter: int = DEFAULT_MAX_ITER
    universe: str = "index"
    seed: int | None = None

    def hashed_fields(self) -> dict:
        """Everything except the two paths; the input digests cover the data."""
        d = dataclasses.asdict(self)
        d.pop("data_dir")
        d.pop("out_dir")
        d["centrality_kind"] = self.centrality_kind.value
        d["horizons"] = list(self.horizons)
        return d


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(config.hashed_fields(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _horizons(text: str) -> tuple[int, ...]:
    try:
        values = tuple(sorted({int(x) for x in text.split(",") if x.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad horizon list {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("horizons must be positive month counts")
    return values


def _kind(text: str) -> CentralityKind:
    try:
        return CentralityKind.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown centrality {text!r} (choose degree, weighted-degree, eigenvector)"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic dataset with a planted crowded block")
    p.add_argument("--config", type=Path, help="TOML file with SynthConfig keys")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)

    def data_args(p, portfolio=True):
        p.add_argument("--data-dir", type=Path, required=True)
        p.add_argument("--out-dir", type=Path, required=True)
        p.add_argument("--kind", type=_kind, default=CentralityKind.EIGENVECTOR)
        p.add_argument("--universe", choices=["index", "holdings"], default="index")
        p.add_argument("--lag-months", type=int, default=2)
        p.add_argument("--horizons", type=_horizons, default=DEFAULT_HORIZONS)
        p.add_argument("--eigen-tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--eigen-max-iter", type=int, default=DEFAULT_MAX_ITER)
        if portfolio:
            p.add_argument("--n-per-side", type=int, default=100)
            p.add_argument("--factor-bound", type=float, default=0.02)

    p = sub.add_parser("score", help="crowding scores per quarter")
    data_args(p, portfolio=False)
    p.add_argument("--dump-centrality", action="store_true", help="also write centrality.csv")

    p = sub.add_parser("quintiles", help="equal-weighted quintile portfolios")
    data_args(p, portfolio=False)

    p = sub.add_parser("hedge", help="factor-neutral long/short portfolios")
    data_args(p)

    p = sub.add_parser("backtest", help="full backtest, report CSVs")
    data_args(p)
    p.add_argument("--no-compare", action="store_true", help="skip the other centralities")

    p = sub.add_parser("report", help="backtest plus figures")
    data_args(p)
    p.add_argument("--no-compare", action="store_true")
    p.add_argument("--svg", action="store_true", help="also write ls_scatter.svg")
    return parser


def run_config(args) -> RunConfig:
    return RunConfig(
        data_dir=args.data_dir,
        out_dir=args.out_dir,
        centrality_kind=args.kind,
        n_per_side=getattr(args, "n_per_side", 100),
        factor_bound=getattr(args, "factor_bound", 0.02),
        lag_months=args.lag_months,
        horizons=tuple(args.horizons),
        eigen_tol=args.eigen_tol,
        eigen_max_iter=args.eigen_max_iter,
        universe=args.universe,
    )


def _eigen_meta(cfg: RunConfig) -> dict[str, str]:
    return {"eigenvector": f"norm=L2 start=uniform tol={cfg.eigen_tol!r} max_iter={cfg.eigen_max_iter}"}


def _cmd_synth(args) -> int:
    from .synth import SynthConfig, generate, load_config, write_dataset

    if args.config is not None:
        config = load_config(args.config, seed=args.seed)
    else:
        config = SynthConfig(**({"seed": args.seed} if args.seed is not None else {}))
    paths = write_dataset(generate(config), args.out)
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def _score(cfg: RunConfig, kind: CentralityKind | None):
    dataset = load_dataset(cfg.data_dir)
    schedule = build_schedule(dataset.holdings_dates, cfg.horizons, cfg.lag_months, dataset.panel.dates)
    if kind is None:
        return dataset, schedule, None
    scored = score_all(
        dataset.snapshots, dataset.panel, kind, schedule, cfg.universe,
        cfg.eigen_tol, cfg.eigen_max_iter, thread_count(),
    )
    return dataset, schedule, scored


def _meta(cfg: RunConfig, dataset) -> list[str]:
    return reports.metadata_lines(config_hash(cfg), dataset.input_files, cfg.data_dir, _eigen_meta(cfg))


def _cmd_score(args) -> int:
    cfg = run_config(args)
    dataset, _, scored = _score(cfg, cfg.centrality_kind)
    meta = _meta(cfg, dataset)
    reports.write_scores(cfg.out_dir / "scores.csv", scored, meta)
    if args.dump_centrality:
        reports.write_centrality(cfg.out_dir / "centrality.csv", scored, meta)
    unconverged = [d for d, q in scored.items() if not (q.over.converged and q.under.converged)]
    if unconverged:
        log.warning("power iteration hit max_iter for %s", ", ".join(map(str, unconverged)))
    return 0


def _cmd_quintiles(args) -> int:
    cfg = run_config(args)
    dataset, schedule, scored = _score(cfg, cfg.centrality_kind)
    books = {}
    for entry in schedule.entries:
        quintiles, _ = quintile_portfolios(scored[entry.holdings_date].scores, entry.construction_date)
        books[entry.holdings_date] = quintiles
    reports.write_quintiles(cfg.out_dir / "quintiles.csv", books, _meta(cfg, dataset))
    return 0


def _cmd_hedge(args) -> int:
    cfg = run_config(args)
    dataset, schedule, scored = _score(cfg, cfg.centrality_kind)
    books, failed = {}, []
    for entry in schedule.entries:
        try:
            books[entry.holdings_date] = build_longshort(
                scored[entry.holdings_date].scores, dataset.panel, entry.holdings_date,
                cfg.n_per_side, cfg.factor_bound, entry.construction_date,
            )
        except CrowdnetError as exc:
            failed.append(f"{entry.holdings_date.isoformat()} {type(exc).__name__}: {exc}")
    meta = _meta(cfg, dataset) + [f"failed_quarters: {'; '.join(failed) or 'none'}"]
    reports.write_hedge(cfg.out_dir / "hedge.csv", books, meta)
    return 0


def _backtest(args, cfg: RunConfig):
    kinds = [cfg.centrality_kind] if args.no_compare else list(CentralityKind)
    bt_config = BacktestConfig(cfg.n_per_side, cfg.factor_bound, cfg.horizons)
    dataset, schedule, _ = _score(cfg, None)
    results = {}
    for kind in kinds:
        scored = score_all(
            dataset.snapshots, dataset.panel, kind, schedule, cfg.universe,
            cfg.eigen_tol, cfg.eigen_max_iter, thread_count(),
        )
        results[kind] = run_backtest({d: q.scores for d, q in scored.items()}, dataset.panel, schedule, bt_config)
    report_dir = cfg.out_dir / "report"
    horizon = 1 if 1 in cfg.horizons else min(cfg.horizons)
    reports.write_backtest(report_dir, results, cfg.centrality_kind, _meta(cfg, dataset), horizon)
    return results, report_dir, horizon


def _cmd_backtest(args) -> int:
    cfg = run_config(args)
    _backtest(args, cfg)
    return 0


def _cmd_report(args) -> int:
    from .plotting import write_figures

    cfg = run_config(args)
    results, report_dir, horizon = _backtest(args, cfg)
    write_figures(results[cfg.centrality_kind], report_dir, svg=args.svg, horizon=horizon)
    return 0


COMMANDS = {
    "synth": _cmd_synth,
    "score": _cmd_score,
    "quintiles": _cmd_quintiles,
    "hedge": _cmd_hedge,
    "backtest": _cmd_backtest,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except CrowdnetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
