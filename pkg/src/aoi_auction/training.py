"""Minibatch SGD on the negated soft-allocation revenue, plus checkpoints.

The gradient is written out by hand. The transform is piecewise linear, so
derivatives only reach the active (group, unit) of each min/max; ties pick
the lowest index. Per-parameter sums use ``np.bincount``, which reduces in a
fixed sequential order and keeps gradients bit-reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .errors import CheckpointError, InvalidInput, TrainingError
from .market import DEFAULT_RNG, AoIMarketParams, BidProfile, make_rng, sample_bids
from .mechanism import (
    DEFAULT_GROUPS,
    DEFAULT_TEMPERATURE,
    DEFAULT_UNITS,
    MonotoneNetParams,
    competing_thresholds,
    hard_outcomes,
    minmax_forward_select,
    minmax_inverse_select,
    softmax_with_dummy,
    transform_bids,
)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "aoi-auction-checkpoint"
CHECKPOINT_VERSION = 1

INIT_RESERVE_QUANTILE = 0.25
PILOT_SAMPLES = 1000


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    iterations: int = 3000
    learning_rate: float = 1e-3
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0
    market: AoIMarketParams = field(default_factory=AoIMarketParams)
    groups: int = DEFAULT_GROUPS
    units: int = DEFAULT_UNITS
    shared_weights: bool = True
    eval_every: int = 500
    eval_samples: int = 10_000
    init: str = "random"
    rng: str = DEFAULT_RNG

    def __post_init__(self):
        for name in ("batch_size", "iterations", "groups", "units", "eval_every", "eval_samples"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"{name} must be >= 1")
        # zero is allowed: it freezes the initial mechanism
        if not self.learning_rate >= 0:
            raise InvalidInput("learning_rate must be nonnegative")
        if not self.temperature > 0:
            raise InvalidInput("temperature must be positive")
        if self.init not in ("random", "identity"):
            raise InvalidInput(f"init must be 'random' or 'identity', got {self.init!r}")


@dataclass(frozen=True)
class EvalRecord:
    iteration: int
    train_revenue: float
    dl_revenue: float
    dl_stderr: float
    spa_revenue: float
    spa_stderr: float
    gain_stderr: float  # stderr of the per-profile (dl - spa) difference
    samples: int


@dataclass
class TrainHistory:
    records: list[EvalRecord] = field(default_factory=list)

    @property
    def final(self) -> EvalRecord:
        return self.records[-1]


def _as_bids(batch) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        bids = np.atleast_2d(batch.astype(float))
    else:
        batch = list(batch)
        if not batch:
            raise InvalidInput("empty batch")
        bids = np.stack([p.bids if isinstance(p, BidProfile) else np.asarray(p, float) for p in batch])
    if bids.shape[0] == 0:
        raise InvalidInput("empty batch")
    return bids


def _forward(params: MonotoneNetParams, bids: np.ndarray, temperature: float):
    idx = params.net_index
    a, b = params.alpha[idx], params.beta[idx]
    t, gf, kf = minmax_forward_select(a, b, bids)
    probs = softmax_with_dummy(t, temperature)
    thresholds, rival = competing_thresholds(t)
    prices, gi, ki = minmax_inverse_select(a, b, thresholds)
    revenue = (probs[:, :-1] * prices).sum(axis=1)
    return dict(t=t, gf=gf, kf=kf, probs=probs, thresholds=thresholds, rival=rival,
                prices=prices, gi=gi, ki=ki, revenue=revenue)


def revenue_loss(params: MonotoneNetParams, batch, temperature: float = DEFAULT_TEMPERATURE) -> float:
    """Negated mean expected payment over the batch under soft allocation."""
    bids = _as_bids(batch)
    return -float(_forward(params, bids, temperature)["revenue"].mean())


def loss_and_gradient(params: MonotoneNetParams, batch, temperature: float = DEFAULT_TEMPERATURE):
    """Return ``(loss, grad_alpha, grad_beta)``; gradients match ``params.alpha`` in shape."""
    bids = _as_bids(batch)
    s, n = bids.shape
    f = _forward(params, bids, temperature)
    probs, prices, revenue = f["probs"][:, :-1], f["prices"], f["revenue"]

    # d loss / d price_i and d loss / d t_i through the softmax
    d_price = -probs / s
    d_t = -temperature * probs * (prices - revenue[:, None]) / s

    idx = params.net_index
    n_nets, g_count, k_count = params.alpha.shape
    net = np.broadcast_to(idx, (s, n))
    a_inv = params.alpha[net, f["gi"], f["ki"]]
    # price = exp(-a) * (threshold - b) on the active inverse unit
    d_threshold = d_price * np.exp(-a_inv)
    rows, cols = np.nonzero(f["rival"] >= 0)
    np.add.at(d_t, (rows, f["rival"][rows, cols]), d_threshold[rows, cols])

    a_fwd = params.alpha[net, f["gf"], f["kf"]]
    size = n_nets * g_count * k_count
    flat_fwd = ((net * g_count + f["gf"]) * k_count + f["kf"]).ravel()
    flat_inv = ((net * g_count + f["gi"]) * k_count + f["ki"]).ravel()

    grad_alpha = (
        np.bincount(flat_fwd, (d_t * np.exp(a_fwd) * bids).ravel(), minlength=size)
        + np.bincount(flat_inv, (-d_price * prices).ravel(), minlength=size)
    )
    grad_beta = (
        np.bincount(flat_fwd, d_t.ravel(), minlength=size)
        + np.bincount(flat_inv, (-d_threshold).ravel(), minlength=size)
    )
    shape = params.alpha.shape
    return -float(revenue.mean()), grad_alpha.reshape(shape), grad_beta.reshape(shape)


def gradient(params: MonotoneNetParams, batch, temperature: float = DEFAULT_TEMPERATURE):
    _, ga, gb = loss_and_gradient(params, batch, temperature)
    return ga, gb


def selection_state(params: MonotoneNetParams, batch, temperature: float = DEFAULT_TEMPERATURE):
    """Every discrete choice the loss depends on; used to spot kinks in gradient checks."""
    f = _forward(params, _as_bids(batch), temperature)
    return np.stack([f["gf"], f["kf"], f["gi"], f["ki"], f["rival"]])


def evaluate(params: MonotoneNetParams, bids: np.ndarray) -> dict:
    """Hard-mode revenue of the mechanism and of SPA (zero reserve) on the same bids."""
    _, dl = hard_outcomes(params, bids)
    spa = baselines.spa_revenue(bids, 0.0)
    dl_mean, dl_se = baselines.mean_stderr(dl)
    spa_mean, spa_se = baselines.mean_stderr(spa)
    _, gain_se = baselines.mean_stderr(dl - spa)
    return dict(dl_revenue=dl_mean, dl_stderr=dl_se, spa_revenue=spa_mean,
                spa_stderr=spa_se, gain_stderr=gain_se, samples=int(bids.shape[0]))


def initial_params(config: TrainConfig, rng) -> MonotoneNetParams:
    """Random U[-1, 1] parameters, shifted so each transform crosses zero at a low bid quantile.

    Without the shift the transform is positive on the whole bid support:
    the dummy never gets softmax weight and the reserve has no gradient.
    """
    n = config.market.n_bidders
    if config.init == "identity":
        return MonotoneNetParams.identity(n, config.groups, config.units, config.shared_weights)
    params = MonotoneNetParams.random(n, rng, config.groups, config.units, config.shared_weights)
    pilot = sample_bids(config.market, rng, PILOT_SAMPLES)
    if params.shared_weights:
        anchor = np.full((1, n), np.quantile(pilot, INIT_RESERVE_QUANTILE))
    else:
        anchor = np.quantile(pilot, INIT_RESERVE_QUANTILE, axis=0)[None, :]
    offset = transform_bids(params, anchor)[0]
    params.beta -= offset[: params.alpha.shape[0], None, None]
    return params


def train(config: TrainConfig) -> tuple[MonotoneNetParams, TrainHistory]:
    """Run SGD; evaluates every ``eval_every`` iterations and after the last one.

    Initialization, training batches and evaluation draws use independent
    streams spawned from ``config.seed``.
    """
    init_seq, train_seq, eval_seq = np.random.SeedSequence(config.seed).spawn(3)
    train_rng = make_rng(train_seq, config.rng)
    eval_rng = make_rng(eval_seq, config.rng)
    params = initial_params(config, make_rng(init_seq, config.rng))
    history = TrainHistory()

    for it in range(1, config.iterations + 1):
        bids = sample_bids(config.market, train_rng, config.batch_size)
        # overflow shows up as non-finite values, handled just below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, ga, gb = loss_and_gradient(params, bids, config.temperature)
        if not (np.isfinite(loss) and np.all(np.isfinite(ga)) and np.all(np.isfinite(gb))):
            raise TrainingError(f"non-finite loss or gradient at iteration {it}", params, history)
        candidate = MonotoneNetParams(
            params.n_bidders,
            params.alpha - config.learning_rate * ga,
            params.beta - config.learning_rate * gb,
            params.shared_weights,
        )
        if not (np.all(np.isfinite(candidate.alpha)) and np.all(np.isfinite(candidate.beta))):
            raise TrainingError(f"parameters diverged at iteration {it}", params, history)
        params = candidate
        if it % config.eval_every == 0 or it == config.iterations:
            eval_bids = sample_bids(config.market, eval_rng, config.eval_samples)
            stats = evaluate(params, eval_bids)
            history.records.append(EvalRecord(iteration=it, train_revenue=-loss, **stats))
            log.info("iter %d  soft %.5f  dl %.5f  spa %.5f", it, -loss,
                     stats["dl_revenue"], stats["spa_revenue"])
    return params, history


# ---------------------------------------------------------------------------
# checkpoints

def _market_dict(market: AoIMarketParams) -> dict:
    return {
        "n_bidders": market.n_bidders,
        "worker_aoi": market.worker_aoi,
        "pref_range": list(market.pref_range),
        "req_range": list(market.req_range),
        "value_floor": market.value_floor,
    }


def config_to_dict(config: TrainConfig) -> dict:
    d = dataclasses.asdict(config)
    d["market"] = _market_dict(config.market)
    return d


def save_checkpoint(params: MonotoneNetParams, config: TrainConfig | None, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_bidders": params.n_bidders,
        "groups": params.groups,
        "units": params.units,
        "shared_weights": params.shared_weights,
        "seed": None if config is None else config.seed,
        "config": None if config is None else config_to_dict(config),
        "alpha": params.alpha.tolist(),
        "beta": params.beta.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path, *, groups=None, units=None, n_bidders=None) -> MonotoneNetParams:
    """Read a checkpoint; the keyword arguments assert the expected shape."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')} not supported (expected {CHECKPOINT_VERSION})")
    expected = {"groups": groups, "units": units, "n_bidders": n_bidders}
    for key, want in expected.items():
        if want is not None and doc.get(key) != want:
            raise CheckpointError(f"shape mismatch: checkpoint has {key}={doc.get(key)}, expected {want}")
    try:
        params = MonotoneNetParams(int(doc["n_bidders"]), doc["alpha"], doc["beta"],
                                   bool(doc["shared_weights"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    if params.groups != doc.get("groups") or params.units != doc.get("units"):
        raise CheckpointError(f"shape mismatch: parameter arrays disagree with the declared G/K in {path}")
    return params


def checkpoint_metadata(path) -> dict:
    """The non-parameter fields of a checkpoint (config, seed, shapes)."""
    load_checkpoint(path)
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k: v for k, v in doc.items() if k not in ("alpha", "beta")}
