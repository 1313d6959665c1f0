"""Figure reproductions as CSV tables.

Every figure cell (one bidder count and worker AoI) trains its own mechanism
with a seed derived from the master seed and the cell's (N, AoI). Equal cells
therefore give equal rows, whichever figure they appear in.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import InvalidInput, TrainingError
from .training import EvalRecord, TrainConfig, train

log = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "iteration", "mechanism", "n_bidders", "worker_aoi",
               "revenue_mean", "revenue_stderr", "samples", "seed")
FIGURES = ("fig3", "fig4", "fig5", "fig6")


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    iteration: int
    mechanism: str
    n_bidders: int
    worker_aoi: float
    revenue_mean: float
    revenue_stderr: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.revenue_mean < 0 or self.revenue_stderr < 0 or self.samples < 1:
            raise InvalidInput(f"invalid experiment record {self}")

    def row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_COLUMNS]


def _fmt(value) -> str:
    # repr() of a float is the shortest round-trip form and ignores locale
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cell_seed(master_seed: int, n_bidders: int, worker_aoi: float) -> int:
    aoi_key = int(round(worker_aoi * 1_000_000))
    return int(np.random.SeedSequence([master_seed, n_bidders, aoi_key]).generate_state(1)[0])


def _records_from_eval(label: str, rec: EvalRecord, n: int, aoi: float, seed: int) -> list[ExperimentRecord]:
    common = dict(experiment=label, iteration=rec.iteration, n_bidders=n, worker_aoi=aoi,
                  samples=rec.samples, seed=seed)
    return [
        ExperimentRecord(mechanism="dl", revenue_mean=rec.dl_revenue, revenue_stderr=rec.dl_stderr, **common),
        ExperimentRecord(mechanism="spa", revenue_mean=rec.spa_revenue, revenue_stderr=rec.spa_stderr, **common),
    ]


def cell_config(config: ExperimentConfig, n_bidders: int, worker_aoi: float) -> TrainConfig:
    market = dataclasses.replace(config.market, n_bidders=n_bidders, worker_aoi=worker_aoi)
    seed = cell_seed(config.seed, n_bidders, worker_aoi)
    return dataclasses.replace(config.train, market=market, seed=seed)


def train_cell(config: ExperimentConfig, n_bidders: int, worker_aoi: float):
    """Train one figure cell; returns ``(seed, params, history)``."""
    train_config = cell_config(config, n_bidders, worker_aoi)
    log.info("training cell N=%d aoi=%g seed=%d", n_bidders, worker_aoi, train_config.seed)
    params, history = train(train_config)
    return train_config.seed, params, history


def _final_rows(label, config, cells) -> list[ExperimentRecord]:
    records = []
    for n, aoi in cells:
        seed, _, history = train_cell(config, n, aoi)
        records.extend(_records_from_eval(label, history.final, n, aoi, seed))
    return records


def run_fig3(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Learning curve: DL and SPA revenue on the same eval draw at every checkpoint."""
    n, aoi = config.market.n_bidders, config.market.worker_aoi
    try:
        seed, _, history = train_cell(config, n, aoi)
    except TrainingError as exc:
        # the caller flushes these before reporting the failure
        seed = cell_seed(config.seed, n, aoi)
        partial = exc.history.records if exc.history else []
        exc.records = [r for rec in partial for r in _records_from_eval("fig3", rec, n, aoi, seed)]
        raise
    return [r for rec in history.records for r in _records_from_eval("fig3", rec, n, aoi, seed)]


def run_fig4(config: ExperimentConfig) -> list[ExperimentRecord]:
    return _final_rows("fig4", config, [(config.market.n_bidders, a) for a in config.fig4_aoi])


def run_fig5(config: ExperimentConfig) -> list[ExperimentRecord]:
    return _final_rows("fig5", config, [(n, config.market.worker_aoi) for n in config.fig5_bidders])


def run_fig6(config: ExperimentConfig) -> list[ExperimentRecord]:
    return _final_rows("fig6", config, [(n, a) for n in config.fig6_bidders for a in config.fig6_aoi])


RUNNERS = {"fig3": run_fig3, "fig4": run_fig4, "fig5": run_fig5, "fig6": run_fig6}


def run_figure(name: str, config: ExperimentConfig) -> list[ExperimentRecord]:
    if name not in RUNNERS:
        raise InvalidInput(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    return RUNNERS[name](config)


def to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def read_csv(path) -> list[ExperimentRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidInput(f"{path}: unexpected header {reader.fieldnames}")
        return [
            ExperimentRecord(
                experiment=row["experiment"], iteration=int(row["iteration"]),
                mechanism=row["mechanism"], n_bidders=int(row["n_bidders"]),
                worker_aoi=float(row["worker_aoi"]), revenue_mean=float(row["revenue_mean"]),
                revenue_stderr=float(row["revenue_stderr"]), samples=int(row["samples"]),
                seed=int(row["seed"]),
            )
            for row in reader
        ]


def write_results(records, csv_path, config: ExperimentConfig) -> Path:
    """Write the CSV and a ``<stem>.config.json`` sidecar holding the resolved config."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(to_csv(records), encoding="utf-8")
    write_sidecar(config, csv_path)
    return csv_path


def write_sidecar(config: ExperimentConfig, data_path) -> Path:
    data_path = Path(data_path)
    sidecar = data_path.with_name(data_path.stem + ".config.json")
    sidecar.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar
