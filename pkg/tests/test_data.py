"""Dataset generation and file ingestion."""

import struct

import numpy as np
import pytest

from accguard.data import load_csv, load_idx, make_blobs, train_test_split


class TestBlobs:
    def test_deterministic(self):
        a = make_blobs(seed=1)
        b = make_blobs(seed=1)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_shapes_and_labels(self):
        X, y = make_blobs(n_samples=50, n_features=3, n_classes=4, seed=0)
        assert X.shape == (50, 3)
        assert set(np.unique(y)) <= set(range(4))

    def test_split_partitions(self):
        X, y = make_blobs(n_samples=40, seed=0)
        Xtr, ytr, Xte, yte = train_test_split(X, y, 0.25, seed=0)
        assert len(Xte) == 10 and len(Xtr) == 30
        assert len(ytr) == 30 and len(yte) == 10


class TestCsv:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,0.5,-2.0\n0,1.25,3.0\n")
        X, y = load_csv(str(p))
        np.testing.assert_array_equal(y, [1, 0])
        np.testing.assert_array_equal(X, [[0.5, -2.0], [1.25, 3.0]])

    def test_bad_row_points_at_line(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,0.5\nx,1.0\n")
        with pytest.raises(ValueError, match=":2"):
            load_csv(str(p))

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(str(p))

    def test_ragged_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,0.5\n0,1.0,2.0\n")
        with pytest.raises(ValueError, match="feature counts"):
            load_csv(str(p))


class TestIdx:
    def test_uint8_images(self, tmp_path):
        p = tmp_path / "imgs.idx"
        payload = bytes(range(24))
        p.write_bytes(struct.pack(">BBBBIII", 0, 0, 0x08, 3, 2, 3, 4) + payload)
        arr = load_idx(str(p))
        assert arr.shape == (2, 3, 4)
        assert arr[0, 0, 1] == 1.0

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(b"\x01\x00\x08\x01")
        with pytest.raises(ValueError, match="magic"):
            load_idx(str(p))

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "short.idx"
        p.write_bytes(struct.pack(">BBBBI", 0, 0, 0x08, 1, 10) + b"\x00" * 5)
        with pytest.raises(ValueError, match="elements"):
            load_idx(str(p))
