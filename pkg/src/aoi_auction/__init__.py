"""Revenue-optimal auctions for pricing fresh federated-learning data.

A worker's data has an Age of Information (AoI); model owners bid for it and
value fresher data more. The mechanism learns strictly increasing bid
transforms, then runs a zero-reserve second-price auction on the
transformed bids.
"""

from .baselines import SpaConfig, fpa, myerson_uniform_revenue, spa
from .errors import CheckpointError, ConfigError, InvalidInput, TrainingError
from .market import AoIMarketParams, BidProfile, make_rng, sample_bidder, sample_bids, sample_profile, valuation
from .mechanism import (
    AuctionOutcome,
    MonotoneNetParams,
    allocate_hard,
    allocate_soft,
    check_ir,
    ic_regret,
    inverse_transform,
    payment,
    run_auction,
    transform,
)
from .training import TrainConfig, TrainHistory, gradient, load_checkpoint, revenue_loss, save_checkpoint, train

__version__ = "0.1.0"
