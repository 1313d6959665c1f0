"""Classical comparison mechanisms and the Myerson benchmark for U[0, 1] values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .mechanism import AuctionOutcome


@dataclass(frozen=True)
class SpaConfig:
    reserve: float = 0.0

    def __post_init__(self):
        if not self.reserve >= 0:
            raise InvalidInput(f"reserve must be nonnegative, got {self.reserve}")


def _bids(bids) -> np.ndarray:
    b = np.asarray(bids, float)
    if b.ndim != 1 or b.size == 0:
        raise InvalidInput("expected a nonempty flat list of bids")
    return b


def _one_hot(n, winner):
    probs = np.zeros(n + 1)
    probs[n if winner is None else winner] = 1.0
    return probs


def spa_outcomes(bids, reserve: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Second-price winners (-1 for no sale) and prices for a (S, N) bid matrix."""
    b = np.atleast_2d(np.asarray(bids, float))
    top = b.argmax(axis=-1)
    best = np.take_along_axis(b, top[:, None], axis=-1)[:, 0]
    if b.shape[1] > 1:
        rest = b.copy()
        np.put_along_axis(rest, top[:, None], -np.inf, axis=-1)
        second = rest.max(axis=-1)
    else:
        second = np.full(b.shape[0], -np.inf)
    sold = best >= reserve
    price = np.maximum(second, reserve)
    return np.where(sold, top, -1), np.where(sold, price, 0.0)


def spa(bids: Sequence[float], reserve: float = 0.0) -> AuctionOutcome:
    b = _bids(bids)
    SpaConfig(reserve)
    winners, prices = spa_outcomes(b[None, :], reserve)
    w = int(winners[0])
    winner = None if w < 0 else w
    return AuctionOutcome(winner, float(prices[0]), _one_hot(b.size, winner))


def fpa(bids: Sequence[float]) -> AuctionOutcome:
    b = _bids(bids)
    w = int(b.argmax())
    return AuctionOutcome(w, float(b[w]), _one_hot(b.size, w))


def spa_revenue(bids, reserve: float = 0.0) -> np.ndarray:
    return spa_outcomes(bids, reserve)[1]


def fpa_revenue(bids) -> np.ndarray:
    return np.atleast_2d(np.asarray(bids, float)).max(axis=-1)


def mean_stderr(samples) -> tuple[float, float]:
    x = np.asarray(samples, float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def myerson_uniform_revenue(n: int, samples: int, rng) -> tuple[float, float]:
    """Monte-Carlo revenue of the optimal auction for ``n`` i.i.d. U[0, 1] bidders.

    Virtual value ``2v - 1`` gives a second-price auction with reserve 1/2.
    Returns (mean, standard error).
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    bids = rng.uniform(0.0, 1.0, size=(samples, n))
    return mean_stderr(spa_revenue(bids, reserve=0.5))
