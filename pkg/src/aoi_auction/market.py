"""AoI-parameterized bidder valuations and auction instances.

A model owner with freshness preference ``theta`` and AoI requirement ``r``
values a worker whose data has age ``a`` at ``theta / a`` when the data is
fresh enough (``a <= r``) and at ``value_floor * theta / r`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

RNG_ALGORITHMS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")
DEFAULT_RNG = "PCG64"


def make_rng(seed, algorithm: str = DEFAULT_RNG) -> np.random.Generator:
    """Seeded generator with an explicit bit-generator name.

    ``seed`` is an int or a ``SeedSequence``.
    """
    if algorithm not in RNG_ALGORITHMS:
        raise InvalidInput(f"unknown rng algorithm {algorithm!r}; choose from {RNG_ALGORITHMS}")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    bitgen = getattr(np.random, algorithm)(seed)
    return np.random.Generator(bitgen)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(int(rng))


@dataclass(frozen=True)
class AoIMarketParams:
    n_bidders: int = 3
    worker_aoi: float = 0.3
    pref_range: tuple[float, float] = (0.1, 1.0)
    req_range: tuple[float, float] = (0.2, 1.0)
    value_floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pref_range", tuple(float(x) for x in self.pref_range))
        object.__setattr__(self, "req_range", tuple(float(x) for x in self.req_range))
        p_lo, p_hi = self.pref_range
        r_lo, r_hi = self.req_range
        if int(self.n_bidders) != self.n_bidders or self.n_bidders < 1:
            raise InvalidInput(f"n_bidders must be a positive integer, got {self.n_bidders}")
        if not 0.0 < self.worker_aoi <= 1.0:
            raise InvalidInput(f"worker_aoi must lie in (0, 1], got {self.worker_aoi}")
        # lo == 0 is accepted so that U[0, 1] valuations can be generated
        if not 0.0 <= p_lo <= p_hi or p_hi <= 0.0:
            raise InvalidInput(f"bad pref_range {self.pref_range}")
        if not 0.0 < r_lo <= r_hi <= 1.0:
            raise InvalidInput(f"bad req_range {self.req_range}")
        if not 0.0 <= self.value_floor < 1.0:
            raise InvalidInput(f"value_floor must lie in [0, 1), got {self.value_floor}")


@dataclass(frozen=True, eq=False)
class BidProfile:
    """Worker AoI plus one truthful bid per model owner."""

    worker_aoi: float
    bids: np.ndarray = field(repr=True)

    def __post_init__(self):
        bids = np.array(self.bids, dtype=float).reshape(-1)
        bids.setflags(write=False)
        object.__setattr__(self, "bids", bids)
        if bids.size == 0:
            raise InvalidInput("a profile needs at least one bid")
        if not np.all(np.isfinite(bids)) or np.any(bids < 0):
            raise InvalidInput("bids must be finite and nonnegative")
        if not 0.0 < self.worker_aoi <= 1.0:
            raise InvalidInput(f"worker_aoi must lie in (0, 1], got {self.worker_aoi}")

    @property
    def n_bidders(self) -> int:
        return int(self.bids.size)


def valuation(theta, r, a, f=0.0):
    """Value of data with age ``a`` to a bidder with preference ``theta`` and requirement ``r``.

    Works elementwise on arrays.
    """
    theta, r, a = np.asarray(theta, float), np.asarray(r, float), np.asarray(a, float)
    if np.any(a <= 0) or np.any(a > 1):
        raise InvalidInput("worker AoI must lie in (0, 1]")
    if np.any(theta < 0):
        raise InvalidInput("preference must be nonnegative")
    if np.any(r <= 0) or np.any(r > 1):
        raise InvalidInput("requirement must lie in (0, 1]")
    if not 0.0 <= f < 1.0:
        raise InvalidInput("value_floor must lie in [0, 1)")
    value = np.where(a <= r, theta / a, f * theta / r)
    return float(value) if value.ndim == 0 else value


def sample_bidder(params: AoIMarketParams, rng) -> tuple[float, float]:
    rng = _as_rng(rng)
    theta = rng.uniform(*params.pref_range)
    r = rng.uniform(*params.req_range)
    return float(theta), float(r)


def sample_profile(params: AoIMarketParams, rng) -> BidProfile:
    rng = _as_rng(rng)
    bids = []
    for _ in range(params.n_bidders):
        theta, r = sample_bidder(params, rng)
        bids.append(valuation(theta, r, params.worker_aoi, params.value_floor))
    return BidProfile(params.worker_aoi, np.array(bids))


def sample_bids(params: AoIMarketParams, rng, count: int) -> np.ndarray:
    """Vectorized draw of ``count`` profiles as a (count, n_bidders) bid matrix.

    Preferences for the whole block are drawn before requirements, so the
    stream differs from repeated :func:`sample_profile` calls.
    """
    rng = _as_rng(rng)
    shape = (count, params.n_bidders)
    theta = rng.uniform(*params.pref_range, size=shape)
    r = rng.uniform(*params.req_range, size=shape)
    return valuation(theta, r, params.worker_aoi, params.value_floor)
