"""Checkpoint serialization: canonical JSON and invariant validation."""

import copy
import json

import numpy as np
import pytest

from accguard.serde import (
    CheckpointError,
    config_hash,
    dumps,
    load,
    loads,
    network_from_checkpoint,
    save,
    validate,
)

from conftest import random_int_inputs


class TestRoundTrip:
    def test_byte_stable(self, wnq_checkpoint):
        text = dumps(wnq_checkpoint)
        assert dumps(loads(text)) == text

    def test_file_round_trip(self, wnq_checkpoint, tmp_path):
        path = tmp_path / "model.json"
        save(wnq_checkpoint, str(path))
        again = load(str(path))
        assert dumps(again) == dumps(wnq_checkpoint)

    def test_trailing_newline_and_compact(self, wnq_checkpoint):
        text = dumps(wnq_checkpoint)
        assert text.endswith("\n")
        assert ": " not in text  # canonical compact separators

    def test_floats_survive_exactly(self, wnq_checkpoint):
        again = loads(dumps(wnq_checkpoint))
        for a, b in zip(wnq_checkpoint.layers, again.layers):
            np.testing.assert_array_equal(a.v, b.v)
            np.testing.assert_array_equal(a.t, b.t)
            np.testing.assert_array_equal(a.d, b.d)
            np.testing.assert_array_equal(a.w_int, b.w_int)
            assert a.act_d == b.act_d
        assert again.input_d == wnq_checkpoint.input_d

    def test_baseline_round_trip(self, trained_baseline):
        ckpt = trained_baseline.checkpoint_
        assert dumps(loads(dumps(ckpt))) == dumps(ckpt)

    def test_rebuilt_network_predicts_identically(self, wnq_checkpoint):
        net = network_from_checkpoint(wnq_checkpoint)
        x = random_int_inputs(wnq_checkpoint, 20, seed=1).astype(np.float64)
        logits1, _ = net.forward(x)
        net2 = network_from_checkpoint(loads(dumps(wnq_checkpoint)))
        logits2, _ = net2.forward(x)
        np.testing.assert_array_equal(logits1.data, logits2.data)


class TestValidation:
    def test_malformed_json(self):
        with pytest.raises(CheckpointError, match="malformed"):
            loads("{not json")

    def test_version_checked(self, wnq_checkpoint):
        obj = json.loads(dumps(wnq_checkpoint))
        obj["format_version"] = 99
        with pytest.raises(CheckpointError, match="format_version"):
            loads(json.dumps(obj))

    def test_missing_field(self, wnq_checkpoint):
        obj = json.loads(dumps(wnq_checkpoint))
        del obj["layers"][0]["w_int"]
        with pytest.raises(CheckpointError):
            loads(json.dumps(obj))

    def test_out_of_range_weights_rejected(self, wnq_checkpoint):
        obj = json.loads(dumps(wnq_checkpoint))
        obj["layers"][0]["w_int"][0][0] = 10**6
        with pytest.raises(CheckpointError):
            loads(json.dumps(obj))

    def test_budget_violation_rejected(self, wnq_checkpoint):
        # Shrinking P* to 2 collapses the budget below the stored l1 norms.
        ckpt = copy.deepcopy(wnq_checkpoint)
        rec = ckpt.layers[1]
        rec.p_star = 2
        rec.acc_bits = 2
        with pytest.raises(CheckpointError, match="budget"):
            validate(ckpt)

    def test_tampered_weights_rejected(self, wnq_checkpoint):
        obj = json.loads(dumps(wnq_checkpoint))
        row = obj["layers"][-1]["w_int"][0]
        idx = next(i for i, v in enumerate(row) if v != 0)
        row[idx] = -row[idx]
        with pytest.raises(CheckpointError, match="match"):
            loads(json.dumps(obj))


class TestConfigHash:
    def test_stable_and_short(self):
        h = config_hash({"a": 1, "b": [2, 3]})
        assert h == config_hash({"b": [2, 3], "a": 1})
        assert len(h) == 16
        int(h, 16)

    def test_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})
