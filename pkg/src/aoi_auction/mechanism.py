"""Deep-learning optimal auction: monotone bid transforms, SPA allocation
over transformed bids with a zero reserve, and threshold payments.

Each bidder's transform is a min over groups of a max over units of
positive-slope affine maps, ``phi(b) = min_g max_k (exp(alpha[g,k]) * b + beta[g,k])``.
Positive slopes make ``phi`` strictly increasing, so the winner's payment is
the inverse transform of the best competing transformed bid.

Array functions (``transform_bids``, ``hard_outcomes``, ...) take a bid
matrix of shape (profiles, bidders); the single-profile functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInput
from .market import BidProfile

DEFAULT_GROUPS = 5
DEFAULT_UNITS = 10
DEFAULT_TEMPERATURE = 100.0


@dataclass
class MonotoneNetParams:
    """Transform parameters; ``alpha``/``beta`` have shape (n_nets, G, K).

    ``n_nets`` is 1 when ``shared_weights`` is true and ``n_bidders`` otherwise.
    """

    n_bidders: int
    alpha: np.ndarray
    beta: np.ndarray
    shared_weights: bool = True

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=float)
        self.beta = np.array(self.beta, dtype=float)
        if self.n_bidders < 1:
            raise InvalidInput("n_bidders must be >= 1")
        n_nets = 1 if self.shared_weights else self.n_bidders
        if self.alpha.ndim != 3 or self.alpha.shape[0] != n_nets:
            raise InvalidInput(f"alpha must have shape ({n_nets}, G, K), got {self.alpha.shape}")
        if self.beta.shape != self.alpha.shape:
            raise InvalidInput(f"beta shape {self.beta.shape} != alpha shape {self.alpha.shape}")
        if min(self.alpha.shape[1:]) < 1:
            raise InvalidInput("G and K must be >= 1")

    @property
    def groups(self) -> int:
        return self.alpha.shape[1]

    @property
    def units(self) -> int:
        return self.alpha.shape[2]

    @property
    def slopes(self) -> np.ndarray:
        return np.exp(self.alpha)

    @property
    def net_index(self) -> np.ndarray:
        """Which parameter slice each bidder uses."""
        if self.shared_weights:
            return np.zeros(self.n_bidders, dtype=int)
        return np.arange(self.n_bidders)

    def copy(self) -> "MonotoneNetParams":
        return MonotoneNetParams(self.n_bidders, self.alpha.copy(), self.beta.copy(), self.shared_weights)

    @classmethod
    def identity(cls, n_bidders, groups=1, units=1, shared_weights=True):
        """Every unit is ``b -> b``, so the transform is the identity."""
        n_nets = 1 if shared_weights else n_bidders
        zeros = np.zeros((n_nets, groups, units))
        return cls(n_bidders, zeros, zeros.copy(), shared_weights)

    @classmethod
    def random(cls, n_bidders, rng, groups=DEFAULT_GROUPS, units=DEFAULT_UNITS,
               shared_weights=True, scale=1.0):
        """``alpha`` and ``beta`` drawn from U[-scale, scale]."""
        n_nets = 1 if shared_weights else n_bidders
        shape = (n_nets, groups, units)
        alpha = rng.uniform(-scale, scale, size=shape)
        beta = rng.uniform(-scale, scale, size=shape)
        return cls(n_bidders, alpha, beta, shared_weights)


@dataclass
class AuctionOutcome:
    winner: Optional[int]
    payment: float
    alloc_probs: np.ndarray


# ---------------------------------------------------------------------------
# min-max network primitives; alpha/beta (..., G, K) broadcast against x (...)

def minmax_forward(alpha, beta, x):
    z = np.exp(alpha) * np.asarray(x, float)[..., None, None] + beta
    return z.max(axis=-1).min(axis=-1)


def minmax_inverse(alpha, beta, y):
    u = np.exp(-alpha) * (np.asarray(y, float)[..., None, None] - beta)
    return u.min(axis=-1).max(axis=-1)


def minmax_forward_select(alpha, beta, x):
    """Forward pass returning the active (group, unit) per element.

    Ties go to the lowest index, matching ``argmax``/``argmin``.
    """
    z = np.exp(alpha) * np.asarray(x, float)[..., None, None] + beta
    k_all = z.argmax(axis=-1)
    inner = np.take_along_axis(z, k_all[..., None], axis=-1)[..., 0]
    g = inner.argmin(axis=-1)
    k = np.take_along_axis(k_all, g[..., None], axis=-1)[..., 0]
    value = np.take_along_axis(inner, g[..., None], axis=-1)[..., 0]
    return value, g, k


def minmax_inverse_select(alpha, beta, y):
    u = np.exp(-alpha) * (np.asarray(y, float)[..., None, None] - beta)
    k_all = u.argmin(axis=-1)
    inner = np.take_along_axis(u, k_all[..., None], axis=-1)[..., 0]
    g = inner.argmax(axis=-1)
    k = np.take_along_axis(k_all, g[..., None], axis=-1)[..., 0]
    value = np.take_along_axis(inner, g[..., None], axis=-1)[..., 0]
    return value, g, k


# ---------------------------------------------------------------------------
# batch operations over bid matrices of shape (S, N)

def _check_width(params: MonotoneNetParams, bids: np.ndarray):
    if bids.shape[-1] != params.n_bidders:
        raise InvalidInput(f"expected {params.n_bidders} bids per profile, got {bids.shape[-1]}")


def transform_bids(params: MonotoneNetParams, bids) -> np.ndarray:
    bids = np.asarray(bids, float)
    _check_width(params, bids)
    idx = params.net_index
    return minmax_forward(params.alpha[idx], params.beta[idx], bids)


def inverse_bids(params: MonotoneNetParams, values) -> np.ndarray:
    values = np.asarray(values, float)
    _check_width(params, values)
    idx = params.net_index
    return minmax_inverse(params.alpha[idx], params.beta[idx], values)


def competing_thresholds(transformed) -> tuple[np.ndarray, np.ndarray]:
    """For every bidder, ``max(0, best rival transformed bid)`` and the rival's index.

    The index is -1 where the zero reserve binds (ties with 0 go to the
    reserve). Rival ties go to the lowest index.
    """
    t = np.asarray(transformed, float)
    n = t.shape[-1]
    if n == 1:
        return np.zeros_like(t), np.full(t.shape, -1)
    first = t.argmax(axis=-1)
    masked = t.copy()
    np.put_along_axis(masked, first[..., None], -np.inf, axis=-1)
    second = masked.argmax(axis=-1)
    rival = np.where(np.arange(n) == first[..., None], second[..., None], first[..., None])
    best = np.take_along_axis(t, rival, axis=-1)
    active = best > 0
    return np.where(active, best, 0.0), np.where(active, rival, -1)


def softmax_with_dummy(transformed, temperature: float) -> np.ndarray:
    """Softmax of ``temperature * [t_1, ..., t_N, 0]`` along the last axis."""
    if not temperature > 0:
        raise InvalidInput(f"temperature must be positive, got {temperature}")
    t = np.asarray(transformed, float)
    logits = temperature * np.concatenate([t, np.zeros(t.shape[:-1] + (1,))], axis=-1)
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def hard_outcomes(params: MonotoneNetParams, bids) -> tuple[np.ndarray, np.ndarray]:
    """Winners (-1 for no sale) and payments for a batch of profiles."""
    bids = np.atleast_2d(np.asarray(bids, float))
    t = transform_bids(params, bids)
    winners = np.where(t.max(axis=-1) > 0, t.argmax(axis=-1), -1)
    thresholds, _ = competing_thresholds(t)
    prices = inverse_bids(params, thresholds)
    sold = winners >= 0
    w = np.where(sold, winners, 0)
    price = np.take_along_axis(prices, w[:, None], axis=-1)[:, 0]
    own = np.take_along_axis(bids, w[:, None], axis=-1)[:, 0]
    # inverse(forward(b)) can exceed b by an ulp
    price = np.minimum(price, own)
    return winners, np.where(sold, price, 0.0)


def soft_revenue(params: MonotoneNetParams, bids, temperature: float) -> np.ndarray:
    """Per-profile expected payment under softmax allocation."""
    bids = np.atleast_2d(np.asarray(bids, float))
    t = transform_bids(params, bids)
    probs = softmax_with_dummy(t, temperature)
    thresholds, _ = competing_thresholds(t)
    prices = inverse_bids(params, thresholds)
    return (probs[..., :-1] * prices).sum(axis=-1)


# ---------------------------------------------------------------------------
# single-profile API

def _bidder_net(params: MonotoneNetParams, bidder: int):
    if not 0 <= bidder < params.n_bidders:
        raise InvalidInput(f"bidder index {bidder} out of range for {params.n_bidders} bidders")
    i = 0 if params.shared_weights else bidder
    return params.alpha[i], params.beta[i]


def transform(params: MonotoneNetParams, bidder: int, b: float) -> float:
    alpha, beta = _bidder_net(params, bidder)
    if not np.isfinite(b):
        raise InvalidInput("bid must be finite")
    return float(minmax_forward(alpha, beta, b))


def inverse_transform(params: MonotoneNetParams, bidder: int, y: float) -> float:
    alpha, beta = _bidder_net(params, bidder)
    if not np.isfinite(y):
        raise InvalidInput("transformed value must be finite")
    return float(minmax_inverse(alpha, beta, y))


def allocate_soft(transformed: Sequence[float], temperature: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """Winning probabilities for each bidder plus a trailing no-sale entry."""
    t = np.asarray(transformed, float)
    if t.ndim != 1:
        raise InvalidInput("expected a flat list of transformed bids")
    return softmax_with_dummy(t, temperature)


def allocate_hard(transformed: Sequence[float]) -> Optional[int]:
    t = np.asarray(transformed, float)
    if t.size == 0:
        raise InvalidInput("no transformed bids")
    i = int(t.argmax())
    return i if t[i] > 0 else None


def payment(params: MonotoneNetParams, profile: BidProfile, winner: int) -> float:
    """Threshold price: the winner's bid that would just tie the best rival or the reserve."""
    if not 0 <= winner < profile.n_bidders:
        raise InvalidInput(f"winner index {winner} out of range")
    t = transform_bids(params, profile.bids[None, :])[0]
    rivals = np.delete(t, winner)
    threshold = max(0.0, float(rivals.max())) if rivals.size else 0.0
    price = inverse_transform(params, winner, threshold)
    if threshold <= t[winner]:
        price = min(price, float(profile.bids[winner]))
    return price


def run_auction(params: MonotoneNetParams, profile: BidProfile, mode: str = "hard",
                temperature: float = DEFAULT_TEMPERATURE) -> AuctionOutcome:
    """Run one auction. ``mode`` is ``"hard"`` (argmax) or ``"soft"`` (softmax at ``temperature``)."""
    bids = profile.bids
    _check_width(params, bids)
    n = bids.size
    if mode == "hard":
        winners, prices = hard_outcomes(params, bids[None, :])
        w = int(winners[0])
        probs = np.zeros(n + 1)
        probs[w if w >= 0 else n] = 1.0
        return AuctionOutcome(None if w < 0 else w, float(prices[0]), probs)
    if mode == "soft":
        t = transform_bids(params, bids[None, :])
        probs = softmax_with_dummy(t, temperature)[0]
        thresholds, _ = competing_thresholds(t)
        prices = inverse_bids(params, thresholds)[0]
        w = int(probs[:n].argmax())
        winner = w if probs[w] > probs[n] else None
        return AuctionOutcome(winner, float(probs[:n] @ prices), probs)
    raise InvalidInput(f"unknown mode {mode!r}")


def utilities(params: MonotoneNetParams, bids, values, bidder: int) -> np.ndarray:
    """Hard-mode utility of ``bidder`` (true value ``values``) for each bid row."""
    winners, prices = hard_outcomes(params, bids)
    return np.where(winners == bidder, values - prices, 0.0)


def ic_regret(params: MonotoneNetParams, profile: BidProfile, bidder: int,
              deviation_grid: Sequence[float]) -> float:
    """Largest utility gain ``bidder`` gets by misreporting to a grid point."""
    grid = np.asarray(deviation_grid, float)
    if grid.size == 0:
        raise InvalidInput("deviation grid is empty")
    _bidder_net(params, bidder)
    value = profile.bids[bidder]
    rows = np.tile(profile.bids, (grid.size + 1, 1))
    rows[:-1, bidder] = grid
    u = utilities(params, rows, value, bidder)
    return max(0.0, float(u[:-1].max() - u[-1]))


def check_ir(outcome: AuctionOutcome, profile: BidProfile) -> bool:
    if outcome.winner is None:
        return outcome.payment == 0
    return outcome.payment <= profile.bids[outcome.winner]
