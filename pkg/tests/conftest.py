"""Shared fixtures: small trained models reused across test modules."""

import numpy as np
import pytest

from accguard import QuantMLPClassifier
from accguard.data import make_blobs


@pytest.fixture(scope="session")
def blobs6():
    return make_blobs(n_samples=240, n_features=6, n_classes=3, seed=11)


@pytest.fixture(scope="session")
def trained_wnq(blobs6):
    """Small WNQ model trained for a handful of epochs; has a checkpoint."""
    X, y = blobs6
    est = QuantMLPClassifier(
        hidden_layer_sizes=(10,), weight_bits=4, act_bits=4,
        epochs=8, seed=7,
    )
    est.fit(X, y)
    return est


@pytest.fixture(scope="session")
def trained_baseline(blobs6):
    X, y = blobs6
    est = QuantMLPClassifier(
        hidden_layer_sizes=(10,), quantizer="baseline",
        weight_bits=4, act_bits=4, epochs=8, seed=7,
    )
    est.fit(X, y)
    return est


@pytest.fixture(scope="session")
def wnq_checkpoint(trained_wnq):
    return trained_wnq.checkpoint_


def random_int_inputs(ckpt, n, seed=0):
    rng = np.random.default_rng(seed)
    dt = ckpt.input_dtype
    k = ckpt.layers[0].in_features
    return rng.integers(dt.min, dt.max + 1, size=(n, k))
