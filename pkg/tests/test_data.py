import gzip

import numpy as np
import pytest

from feelsim import (IdxFormatError, LabeledDataset, load_idx, parse_idx,
                     shard_single_class, synth_classification, write_idx)
from feelsim import LogisticRegression, evaluate
from feelsim.data import load_idx_dataset


class TestParseIdx:
    def test_minimal_vector(self):
        data = bytes([0, 0, 0x08, 1, 0, 0, 0, 3, 7, 2, 9])
        assert np.array_equal(parse_idx(data), [7, 2, 9])

    def test_rank_three(self):
        body = bytes(range(8))
        data = bytes([0, 0, 0x08, 3,
                      0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2]) + body
        arr = parse_idx(data)
        assert arr.shape == (2, 2, 2)
        assert arr[1, 1, 1] == 7

    def test_truncated_body(self):
        data = bytes([0, 0, 0x08, 1, 0, 0, 0, 10]) + bytes(9)
        with pytest.raises(IdxFormatError, match="declared 10 bytes, found 9"):
            parse_idx(data)

    def test_bad_magic(self):
        with pytest.raises(IdxFormatError, match="bad magic"):
            parse_idx(bytes([1, 0, 0x08, 1, 0, 0, 0, 1, 5]))

    def test_unsupported_dtype(self):
        with pytest.raises(IdxFormatError, match="unsupported dtype 0x0a"):
            parse_idx(bytes([0, 0, 0x0A, 1, 0, 0, 0, 1, 5]))

    def test_truncated_header(self):
        with pytest.raises(IdxFormatError, match="truncated"):
            parse_idx(bytes([0, 0, 0x08, 2, 0, 0]))

    @pytest.mark.parametrize("arr", [
        np.arange(6, dtype=np.uint8),
        np.arange(6, dtype=np.int32).reshape(2, 3) - 3,
        np.linspace(0, 1, 8, dtype=np.float32).reshape(2, 2, 2),
        np.linspace(-1, 1, 4, dtype=np.float64),
    ])
    def test_write_parse_round_trip(self, arr):
        back = parse_idx(write_idx(arr))
        assert back.dtype == arr.dtype
        assert np.array_equal(back, arr)

    def test_gzip_transparent(self, tmp_path):
        arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
        raw = tmp_path / "raw.idx"
        gz = tmp_path / "packed.idx.gz"
        raw.write_bytes(write_idx(arr))
        gz.write_bytes(gzip.compress(write_idx(arr)))
        assert np.array_equal(load_idx(raw), arr)
        assert np.array_equal(load_idx(gz), arr)

    def test_dataset_pair_loader(self, tmp_path):
        r = np.random.default_rng(0)
        images = r.integers(0, 256, size=(30, 4, 4), dtype=np.uint8)
        labels = r.integers(0, 10, size=30, dtype=np.uint8)
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        ip.write_bytes(write_idx(images))
        lp.write_bytes(write_idx(labels))
        ds = load_idx_dataset(ip, lp)
        assert ds.features.shape == (30, 16)
        assert ds.features.max() <= 1.0 and ds.features.min() >= 0.0
        assert np.array_equal(ds.labels, labels)


def blob_dataset(seed=0, classes=10, per_class=30):
    return synth_classification(classes, per_class, 12, 3.0,
                                np.random.default_rng(seed))


class TestSharding:
    def test_disjoint_cover_single_class(self):
        ds = blob_dataset()
        plan = shard_single_class(ds, 20, np.random.default_rng(1))
        all_idx = np.concatenate(plan.assignment)
        assert len(all_idx) == len(set(all_idx.tolist()))  # disjoint
        assert len(all_idx) + plan.dropped == len(ds)
        for shard in plan.assignment:
            assert len(np.unique(ds.labels[shard])) == 1  # single class
        # each class covered by exactly M/10 devices
        owners = [int(ds.labels[s[0]]) for s in plan.assignment]
        assert sorted(owners) == sorted(list(range(10)) * 2)

    def test_one_device_per_class(self):
        ds = blob_dataset(per_class=7)
        plan = shard_single_class(ds, 10, np.random.default_rng(2))
        assert plan.dropped == 0
        for c, shard in enumerate(plan.assignment):
            assert np.all(ds.labels[shard] == c)
            assert len(shard) == 7

    def test_remainder_dropped(self):
        ds = blob_dataset(per_class=31)  # 31 examples over 2 devices -> 1 dropped/class
        plan = shard_single_class(ds, 20, np.random.default_rng(3))
        assert plan.dropped == 10
        assert all(len(s) == 15 for s in plan.assignment)

    def test_indivisible_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            shard_single_class(blob_dataset(), 15, np.random.default_rng(0))


class TestSynth:
    def test_sizes_and_labels(self):
        ds = synth_classification(4, 1, 6, 2.0, np.random.default_rng(0))
        assert len(ds) == 4
        assert sorted(ds.labels.tolist()) == [0, 1, 2, 3]
        assert ds.features.shape == (4, 6)

    def test_deterministic_per_seed(self):
        a = synth_classification(3, 5, 4, 1.0, np.random.default_rng(42))
        b = synth_classification(3, 5, 4, 1.0, np.random.default_rng(42))
        assert np.array_equal(a.features, b.features)

    def test_low_dim_directions(self):
        ds = synth_classification(10, 5, 3, 2.0, np.random.default_rng(1))
        assert ds.features.shape == (50, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            synth_classification(3, 5, 0, 1.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            synth_classification(3, 5, 4, -1.0, np.random.default_rng(0))

    def _train_centralized(self, ds, steps=300, lr=0.5):
        learner = LogisticRegression(ds.features.shape[1], ds.num_classes)
        theta = np.zeros(learner.dim)
        for _ in range(steps):
            theta = theta - lr * learner.gradient(theta, ds.features, ds.labels)
        return learner, theta

    def test_zero_separation_is_chance_level(self):
        train = synth_classification(4, 100, 8, 0.0, np.random.default_rng(5))
        test = synth_classification(4, 100, 8, 0.0, np.random.default_rng(6))
        learner, theta = self._train_centralized(train)
        acc = evaluate(learner, theta, test.features, test.labels)
        assert abs(acc - 0.25) < 0.05

    def test_wide_separation_is_separable(self):
        train = synth_classification(4, 100, 8, 10.0, np.random.default_rng(7))
        test = synth_classification(4, 100, 8, 10.0, np.random.default_rng(8))
        learner, theta = self._train_centralized(train)
        assert evaluate(learner, theta, test.features, test.labels) > 0.95


class TestLabeledDataset:
    def test_validation(self):
        with pytest.raises(ValueError):
            LabeledDataset(features=np.zeros((3, 2)),
                           labels=np.array([0, 1]), num_classes=2)
        with pytest.raises(ValueError):
            LabeledDataset(features=np.zeros((2, 2)),
                           labels=np.array([0, 5]), num_classes=2)
