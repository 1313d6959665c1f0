"""Experiment configuration with dotted keys (``market.worker_aoi`` ...).

Files are TOML, or JSON with the same tables (the resolved-config sidecars
written next to every CSV are JSON and load back unchanged).

``--config default`` (or no config) uses the built-in defaults. A bare name
that is not an existing file is looked up as ``<name>.toml`` inside the
directory named by ``AOI_AUCTION_CONFIG_DIR``.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, InvalidInput
from .market import AoIMarketParams
from .training import TrainConfig

CONFIG_DIR_ENV = "AOI_AUCTION_CONFIG_DIR"

KNOWN_KEYS = {
    "market": {"n_bidders", "worker_aoi", "pref_lo", "pref_hi", "req_lo", "req_hi",
               "value_floor", "seed", "rng"},
    "train": {"batch_size", "iterations", "learning_rate", "temperature", "eval_every",
              "eval_samples", "init", "seed"},
    "net": {"groups", "units", "shared_weights"},
    "experiments": {"fig4_aoi", "fig5_bidders", "fig6_aoi", "fig6_bidders"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    fig4_aoi: tuple[float, ...] = (0.3, 0.8)
    fig5_bidders: tuple[int, ...] = (10, 15, 20)
    fig6_aoi: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    fig6_bidders: tuple[int, ...] = (10, 15, 20)

    @property
    def seed(self) -> int:
        return self.train.seed

    @property
    def market(self) -> AoIMarketParams:
        return self.train.market

    def with_overrides(self, seed=None, samples=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if samples is not None:
            changes["eval_samples"] = int(samples)
        if not changes:
            return self
        return dataclasses.replace(self, train=dataclasses.replace(self.train, **changes))

    def to_dict(self) -> dict:
        """Resolved configuration in the same dotted-key layout as the file."""
        t, m = self.train, self.train.market
        return {
            "market": {
                "n_bidders": m.n_bidders, "worker_aoi": m.worker_aoi,
                "pref_lo": m.pref_range[0], "pref_hi": m.pref_range[1],
                "req_lo": m.req_range[0], "req_hi": m.req_range[1],
                "value_floor": m.value_floor, "seed": t.seed, "rng": t.rng,
            },
            "train": {
                "batch_size": t.batch_size, "iterations": t.iterations,
                "learning_rate": t.learning_rate, "temperature": t.temperature,
                "eval_every": t.eval_every, "eval_samples": t.eval_samples, "init": t.init,
                "seed": t.seed,
            },
            "net": {"groups": t.groups, "units": t.units, "shared_weights": t.shared_weights},
            "experiments": {
                "fig4_aoi": list(self.fig4_aoi), "fig5_bidders": list(self.fig5_bidders),
                "fig6_aoi": list(self.fig6_aoi), "fig6_bidders": list(self.fig6_bidders),
            },
        }


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def from_dict(doc: dict) -> ExperimentConfig:
    """Build a config from nested tables or flat dotted keys; unknown keys are errors."""
    flat = _flatten(doc)
    sections: dict[str, dict] = {name: {} for name in KNOWN_KEYS}
    for dotted, value in flat.items():
        section, _, key = dotted.partition(".")
        if section not in KNOWN_KEYS or key not in KNOWN_KEYS[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        sections[section][key] = value

    base = ExperimentConfig()
    dm, dt = base.market, base.train
    m, t, net, ex = sections["market"], sections["train"], sections["net"], sections["experiments"]
    # train.seed wins over market.seed when both are given
    seed = t.get("seed", m.get("seed", dt.seed))
    try:
        market = AoIMarketParams(
            n_bidders=m.get("n_bidders", dm.n_bidders),
            worker_aoi=m.get("worker_aoi", dm.worker_aoi),
            pref_range=(m.get("pref_lo", dm.pref_range[0]), m.get("pref_hi", dm.pref_range[1])),
            req_range=(m.get("req_lo", dm.req_range[0]), m.get("req_hi", dm.req_range[1])),
            value_floor=m.get("value_floor", dm.value_floor),
        )
        train = TrainConfig(
            batch_size=t.get("batch_size", dt.batch_size),
            iterations=t.get("iterations", dt.iterations),
            learning_rate=t.get("learning_rate", dt.learning_rate),
            temperature=t.get("temperature", dt.temperature),
            seed=int(seed),
            market=market,
            groups=net.get("groups", dt.groups),
            units=net.get("units", dt.units),
            shared_weights=bool(net.get("shared_weights", dt.shared_weights)),
            eval_every=t.get("eval_every", dt.eval_every),
            eval_samples=t.get("eval_samples", dt.eval_samples),
            init=t.get("init", dt.init),
            rng=m.get("rng", dt.rng),
        )
        return ExperimentConfig(
            train=train,
            fig4_aoi=tuple(float(x) for x in ex.get("fig4_aoi", base.fig4_aoi)),
            fig5_bidders=tuple(int(x) for x in ex.get("fig5_bidders", base.fig5_bidders)),
            fig6_aoi=tuple(float(x) for x in ex.get("fig6_aoi", base.fig6_aoi)),
            fig6_bidders=tuple(int(x) for x in ex.get("fig6_bidders", base.fig6_bidders)),
        )
    except (InvalidInput, TypeError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def resolve_path(name: str) -> Path | None:
    """Map a ``--config`` argument to a file, or ``None`` for the built-in defaults."""
    if name in (None, "", "default"):
        return None
    path = Path(name)
    if path.is_file():
        return path
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        for candidate in (Path(config_dir) / name, Path(config_dir) / f"{name}.toml"):
            if candidate.is_file():
                return candidate
    raise ConfigError(f"config {name!r} not found")


def load_config(name: str | None = None) -> ExperimentConfig:
    path = resolve_path(name)
    if path is None:
        return ExperimentConfig()
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(doc)
