"""Command-line entry point: ``aoi-auction {train,eval,baseline,figures}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, experiments
from .config import load_config
from .errors import CheckpointError, ConfigError, InvalidInput, TrainingError
from .market import BidProfile, make_rng, sample_bids
from .mechanism import MonotoneNetParams, hard_outcomes, ic_regret
from .training import EvalRecord, checkpoint_metadata, load_checkpoint, save_checkpoint, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CHECKPOINT = 4
EXIT_TRAINING = 5

HISTORY_COLUMNS = tuple(f.name for f in dataclasses.fields(EvalRecord))
IC_GRID_POINTS = 200


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default", help="config file, name, or 'default'")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--samples", type=int, help="evaluation profiles per revenue estimate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="aoi-auction", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[common], help="train a mechanism")
    p.add_argument("--out", default="runs/train", help="output directory")

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", help="CSV file for the revenue rows")
    p.add_argument("--aoi", type=float, help="worker AoI override")
    p.add_argument("--bidders", type=int, help="bidder count override (shared transforms only)")
    p.add_argument("--ic-profiles", type=int, default=200, help="profiles audited for IC regret")

    p = sub.add_parser("baseline", parents=[common], help="revenue of a classical mechanism")
    p.add_argument("mechanism", choices=("spa", "fpa", "myerson"))
    p.add_argument("--reserve", type=float, default=0.0)
    p.add_argument("--out", help="CSV file")

    p = sub.add_parser("figures", parents=[common], help="reproduce evaluation figures as CSV")
    p.add_argument("figures", nargs="+", choices=experiments.FIGURES + ("all",))
    p.add_argument("--out", default="results", help="output directory")
    return parser


def _history_csv(history) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for rec in history.records:
        writer.writerow([experiments._fmt(getattr(rec, c)) for c in HISTORY_COLUMNS])
    return buf.getvalue()


def cmd_train(args, config) -> int:
    out = Path(args.out)
    try:
        params, history = train(config.train)
    except TrainingError as exc:
        out.mkdir(parents=True, exist_ok=True)
        if exc.params is not None:
            save_checkpoint(exc.params, config.train, out / "checkpoint.json")
        (out / "history.csv").write_text(_history_csv(exc.history), encoding="utf-8")
        raise
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, config.train, out / "checkpoint.json")
    (out / "history.csv").write_text(_history_csv(history), encoding="utf-8")
    experiments.write_sidecar(config, out / "history.csv")
    final = history.final
    print(f"iteration {final.iteration}: dl {final.dl_revenue:.6f} +- {final.dl_stderr:.6f}, "
          f"spa {final.spa_revenue:.6f} +- {final.spa_stderr:.6f} -> {out}")
    return EXIT_OK


def _with_bidders(params: MonotoneNetParams, n: int) -> MonotoneNetParams:
    if n == params.n_bidders:
        return params
    if not params.shared_weights:
        raise InvalidInput("per-bidder transforms cannot be evaluated with a different bidder count")
    return MonotoneNetParams(n, params.alpha, params.beta, True)


def cmd_eval(args, config) -> int:
    params = load_checkpoint(args.ckpt)
    market = config.market
    if args.config == "default":
        saved = checkpoint_metadata(args.ckpt).get("config")
        if saved:
            market = dataclasses.replace(
                market,
                n_bidders=saved["market"]["n_bidders"],
                worker_aoi=saved["market"]["worker_aoi"],
                pref_range=tuple(saved["market"]["pref_range"]),
                req_range=tuple(saved["market"]["req_range"]),
                value_floor=saved["market"]["value_floor"],
            )
    if args.aoi is not None:
        market = dataclasses.replace(market, worker_aoi=args.aoi)
    market = dataclasses.replace(market, n_bidders=args.bidders or params.n_bidders)
    params = _with_bidders(params, market.n_bidders)

    rng = make_rng(config.seed, config.train.rng)
    bids = sample_bids(market, rng, config.train.eval_samples)
    winners, dl = hard_outcomes(params, bids)
    spa = baselines.spa_revenue(bids)
    sold = winners >= 0
    ir = np.ones(len(bids), dtype=bool)
    ir[sold] = dl[sold] <= bids[sold, winners[sold]]

    audited = bids[: args.ic_profiles]
    regrets = []
    for row in audited:
        profile = BidProfile(market.worker_aoi, row)
        for i in range(market.n_bidders):
            grid = np.linspace(0.0, 2.0 * row[i], IC_GRID_POINTS)
            regrets.append(ic_regret(params, profile, i, grid))

    records = []
    for label, rev in (("dl", dl), ("spa", spa)):
        mean, se = baselines.mean_stderr(rev)
        records.append(experiments.ExperimentRecord(
            "custom", 0, label, market.n_bidders, market.worker_aoi, mean, se, len(rev), config.seed))
    if args.out:
        experiments.write_results(records, args.out, config)
    for rec in records:
        print(f"{rec.mechanism}: revenue {rec.revenue_mean:.6f} +- {rec.revenue_stderr:.6f}")
    print(f"IR satisfied: {ir.mean():.2%} of {len(bids)} auctions")
    print(f"IC regret: mean {np.mean(regrets):.3g}, max {np.max(regrets):.3g} "
          f"(mean valuation {audited.mean():.4g})")
    return EXIT_OK


def cmd_baseline(args, config) -> int:
    rng = make_rng(config.seed, config.train.rng)
    market, samples = config.market, config.train.eval_samples
    if args.mechanism == "myerson":
        mean, se = baselines.myerson_uniform_revenue(market.n_bidders, samples, rng)
        aoi = 1.0
    else:
        bids = sample_bids(market, rng, samples)
        if args.mechanism == "spa":
            rev = baselines.spa_revenue(bids, args.reserve)
        else:
            rev = baselines.fpa_revenue(bids)
        mean, se = baselines.mean_stderr(rev)
        aoi = market.worker_aoi
    mechanism = "spa" if args.mechanism == "myerson" else args.mechanism
    rec = experiments.ExperimentRecord("custom", 0, mechanism, market.n_bidders, aoi, mean, se,
                                       samples, config.seed)
    if args.out:
        experiments.write_results([rec], args.out, config)
    print(f"{args.mechanism}: revenue {mean:.6f} +- {se:.6f} ({samples} samples)")
    return EXIT_OK


def cmd_figures(args, config) -> int:
    names = experiments.FIGURES if "all" in args.figures else tuple(dict.fromkeys(args.figures))
    out = Path(args.out)
    for name in names:
        path = out / f"{name}.csv"
        try:
            records = experiments.run_figure(name, config)
        except TrainingError as exc:
            experiments.write_results(getattr(exc, "records", []), path, config)
            raise
        experiments.write_results(records, path, config)
        print(f"{name}: {len(records)} rows -> {path}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "baseline": cmd_baseline, "figures": cmd_figures}


def cli_main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"aoi-auction: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config).with_overrides(seed=args.seed, samples=args.samples)
        return COMMANDS[args.command](args, config)
    except (ConfigError, InvalidInput) as exc:
        print(f"aoi-auction: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"aoi-auction: load failure: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except TrainingError as exc:
        print(f"aoi-auction: training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except OSError as exc:
        print(f"aoi-auction: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
