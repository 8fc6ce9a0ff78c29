"""Sklearn-style estimator wrapping the quantized training loop."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .bounds import BoundQuery, datatype_bound
from .network import build_network
from .qcore import DType
from .serde import checkpoint_from_network, config_hash
from .train import TrainConfig, fit as train_fit


class QuantMLPClassifier(BaseEstimator, ClassifierMixin):
    """MLP classifier trained with accumulator-constrained quantization.

    quantizer: "wnq" (l1-capped weight normalization), "baseline"
    (standard symmetric quantization), or "float" (no quantization).
    acc_bits sets the uniform accumulator target P* directly; when None
    it is derived as (largest per-layer data-type bound) - acc_offset.
    """

    def __init__(
        self,
        hidden_layer_sizes=(16,),
        quantizer="wnq",
        weight_bits=4,
        act_bits=4,
        io_bits=8,
        acc_bits=None,
        acc_offset=0,
        epochs=30,
        batch_size=32,
        lr=1e-2,
        lr_factor=0.5,
        lr_period=10,
        weight_decay=0.0,
        lam=1e-2,
        optimizer="adam",
        momentum=0.9,
        seed=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.quantizer = quantizer
        self.weight_bits = weight_bits
        self.act_bits = act_bits
        self.io_bits = io_bits
        self.acc_bits = acc_bits
        self.acc_offset = acc_offset
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_factor = lr_factor
        self.lr_period = lr_period
        self.weight_decay = weight_decay
        self.lam = lam
        self.optimizer = optimizer
        self.momentum = momentum
        self.seed = seed

    def _layer_sizes(self, n_features, n_classes):
        return [n_features, *self.hidden_layer_sizes, n_classes]

    def auto_p_star(self, n_features, n_classes):
        """Largest data-type bound over layers, minus the configured offset."""
        sizes = self._layer_sizes(n_features, n_classes)
        n_layers = len(sizes) - 1
        bound = 2
        in_dtype = DType(self.io_bits, signed=True)
        for i in range(n_layers):
            first_or_last = i == 0 or i == n_layers - 1
            m = self.io_bits if first_or_last else self.weight_bits
            q = BoundQuery(K=sizes[i], input_dtype=in_dtype,
                           weight_dtype=DType(m, signed=True))
            bound = max(bound, datatype_bound(q).min_bits)
            in_dtype = DType(self.act_bits, signed=False)
        return max(2, bound - self.acc_offset)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        sizes = self._layer_sizes(self.n_features_in_, len(self.classes_))
        if self.quantizer == "wnq":
            p_star = (
                int(self.acc_bits)
                if self.acc_bits is not None
                else self.auto_p_star(self.n_features_in_, len(self.classes_))
            )
        else:
            p_star = None
        self.p_star_ = p_star
        amax = max(float(np.abs(X).max()), 1e-12)
        input_d = math.log2(amax / DType(self.io_bits, signed=True).max)
        rng = np.random.default_rng([self.seed, 0])
        net = build_network(
            sizes,
            quantizer=self.quantizer,
            weight_bits=self.weight_bits,
            act_bits=self.act_bits,
            io_bits=self.io_bits,
            p_star=p_star,
            input_d=input_d,
            input_signed=True,
            rng=rng,
        )
        config = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            lr_factor=self.lr_factor,
            lr_period=self.lr_period,
            weight_decay=self.weight_decay,
            lam=self.lam,
            seed=self.seed,
            optimizer=self.optimizer,
            momentum=self.momentum,
        )
        self.history_ = train_fit(net, X, y_idx, config)
        self.network_ = net
        if net.quantized:
            self.checkpoint_ = checkpoint_from_network(
                net, seed=self.seed, cfg_hash=config_hash(self.get_params())
            )
        else:
            self.checkpoint_ = None
        return self

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before predict")

    def decision_function(self, X):
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        return self.network_.predict_logits(X)

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(axis=1)]

    def predict_proba(self, X):
        z = self.decision_function(X)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)
