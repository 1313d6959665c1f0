import dataclasses
import json

import numpy as np
import pytest

from aoi_auction.errors import CheckpointError, InvalidInput, TrainingError
from aoi_auction.market import AoIMarketParams, BidProfile, make_rng
from aoi_auction.mechanism import MonotoneNetParams, inverse_transform, transform
from aoi_auction.training import (
    TrainConfig,
    gradient,
    initial_params,
    load_checkpoint,
    loss_and_gradient,
    revenue_loss,
    save_checkpoint,
    train,
)
from oracles import fd_gradient_check, naive_expected_payment

SMALL = TrainConfig(
    batch_size=32, iterations=40, eval_every=20, eval_samples=2000,
    market=AoIMarketParams(n_bidders=3), groups=2, units=3,
)


def test_loss_symmetric_tie():
    ident = MonotoneNetParams.identity(2)
    assert revenue_loss(ident, [BidProfile(0.5, [1.0, 1.0])], 1e3) == pytest.approx(-1.0, abs=1e-12)


def test_loss_no_sale_limit():
    p = MonotoneNetParams(2, np.zeros((1, 1, 1)), -50 * np.ones((1, 1, 1)))
    assert abs(revenue_loss(p, [BidProfile(0.5, [1.0, 2.0])], 100.0)) <= 1e-12


def test_loss_matches_naive_reimplementation(rng):
    for shared in (True, False):
        p = MonotoneNetParams.random(4, rng, groups=3, units=4, shared_weights=shared)
        bids = rng.uniform(0, 2, size=(100, 4))
        expected = -np.mean([naive_expected_payment(p, row, 7.0) for row in bids])
        assert abs(revenue_loss(p, bids, 7.0) - expected) <= 1e-9


def test_loss_accepts_profiles_and_arrays(rng):
    p = MonotoneNetParams.random(2, rng)
    bids = rng.uniform(0, 1, size=(5, 2))
    profiles = [BidProfile(0.5, row) for row in bids]
    assert revenue_loss(p, profiles) == revenue_loss(p, bids)
    with pytest.raises(InvalidInput):
        revenue_loss(p, [])


def test_gradient_flat_in_no_sale_region():
    p = MonotoneNetParams(3, np.zeros((1, 2, 2)), -50 * np.ones((1, 2, 2)))
    bids = np.random.default_rng(0).uniform(0, 1, size=(20, 3))
    ga, gb = gradient(p, bids, 100.0)
    assert np.linalg.norm(ga) + np.linalg.norm(gb) <= 1e-12


@pytest.mark.parametrize("shared", [True, False])
def test_gradient_matches_finite_differences(rng, shared):
    for _ in range(5):
        n = int(rng.integers(1, 5))
        p = MonotoneNetParams.random(n, rng, groups=3, units=4, shared_weights=shared)
        bids = rng.uniform(0, 2, size=(16, n))
        kappa = float(rng.choice([1.0, 10.0, 100.0]))
        worst, checked, skipped = fd_gradient_check(p, bids, kappa, gradient(p, bids, kappa))
        assert checked > skipped
        assert worst <= 1e-4


def test_gradient_deterministic(rng):
    p = MonotoneNetParams.random(3, rng)
    bids = rng.uniform(0, 2, size=(64, 3))
    a = loss_and_gradient(p, bids, 100.0)
    b = loss_and_gradient(p, bids, 100.0)
    assert a[0] == b[0]
    assert a[1].tobytes() == b[1].tobytes() and a[2].tobytes() == b[2].tobytes()


def test_zero_learning_rate_keeps_initial_params():
    config = dataclasses.replace(SMALL, learning_rate=0.0)
    params, _ = train(config)
    init_seq = np.random.SeedSequence(config.seed).spawn(3)[0]
    initial = initial_params(config, make_rng(init_seq))
    assert np.array_equal(params.alpha, initial.alpha)
    assert np.array_equal(params.beta, initial.beta)


def test_identity_init_zero_rate_equals_spa():
    config = dataclasses.replace(SMALL, learning_rate=0.0, init="identity")
    _, history = train(config)
    for rec in history.records:
        assert rec.dl_revenue == rec.spa_revenue


def test_initial_transform_crosses_zero_inside_bid_support():
    config = dataclasses.replace(SMALL, market=AoIMarketParams(n_bidders=2))
    p = initial_params(config, np.random.default_rng(3))
    reserve = inverse_transform(p, 0, 0.0)
    assert 0.0 < reserve < 1.0 / config.market.worker_aoi


def test_train_is_deterministic():
    a_params, a_hist = train(SMALL)
    b_params, b_hist = train(SMALL)
    assert a_hist == b_hist
    assert a_params.alpha.tobytes() == b_params.alpha.tobytes()


def test_history_shape():
    _, history = train(SMALL)
    iterations = [r.iteration for r in history.records]
    assert iterations == [20, 40]
    for r in history.records:
        assert np.isfinite(r.dl_revenue) and r.dl_revenue >= 0 and r.spa_revenue >= 0


def test_training_keeps_slopes_positive():
    params, _ = train(dataclasses.replace(SMALL, learning_rate=0.5))
    assert np.all(params.slopes > 0)


def test_divergence_raises_with_last_good_params():
    config = dataclasses.replace(SMALL, learning_rate=1e300, temperature=1e3)
    with pytest.raises(TrainingError) as info:
        train(config)
    assert info.value.params is not None
    assert np.all(np.isfinite(info.value.params.alpha))


@pytest.mark.parametrize("kwargs", [
    dict(batch_size=0), dict(iterations=0), dict(learning_rate=-1.0), dict(temperature=0.0),
    dict(init="zeros"),
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidInput):
        TrainConfig(**kwargs)


def test_checkpoint_round_trip(tmp_path, rng):
    p = MonotoneNetParams.random(3, rng, shared_weights=False)
    path = tmp_path / "ck.json"
    save_checkpoint(p, SMALL, path)
    q = load_checkpoint(path)
    for b in rng.uniform(-2, 2, size=100):
        for i in range(3):
            assert transform(q, i, b) == transform(p, i, b)
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["groups"] == 5 and doc["units"] == 10
    assert doc["config"]["market"]["n_bidders"] == 3 and doc["seed"] == SMALL.seed


def test_truncated_checkpoint_rejected(tmp_path, rng):
    path = tmp_path / "ck.json"
    save_checkpoint(MonotoneNetParams.random(2, rng), SMALL, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_shape_mismatch(tmp_path, rng):
    path = tmp_path / "ck.json"
    save_checkpoint(MonotoneNetParams.random(2, rng, groups=5, units=10), None, path)
    with pytest.raises(CheckpointError, match="shape mismatch"):
        load_checkpoint(path, groups=3)


def test_checkpoint_version_and_garbage(tmp_path, rng):
    path = tmp_path / "ck.json"
    save_checkpoint(MonotoneNetParams.random(2, rng), None, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)
    doc["version"] = 1
    doc["alpha"] = [[1, 2], [3]]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.json")
