# test_data.py
# © 2025 Colt McVey
# Tests for synthetic data, the IDX reader/writer and keyed sample streams.

import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np
from scipy.stats import chisquare
from sklearn.linear_model import Perceptron

from data import Dataset, SampleStream, draw, generate_synthetic, read_idx, write_idx
from errors import InvalidParam, EmptyDataset, SamplerExhausted, BadMagic, TruncatedFile, CountMismatch


class TestSyntheticData(unittest.TestCase):
    def test_same_seed_same_bytes(self):
        first = generate_synthetic(5, 8, 500, 4.0, seed=3)
        second = generate_synthetic(5, 8, 500, 4.0, seed=3)
        self.assertEqual(first.checksum(), second.checksum())
        self.assertNotEqual(first.checksum(), generate_synthetic(5, 8, 500, 4.0, seed=4).checksum())

    def test_features_are_scaled(self):
        ds = generate_synthetic(4, 6, 400, 3.0, seed=0)
        self.assertGreaterEqual(ds.inputs.min(), 0.0)
        self.assertLessEqual(ds.inputs.max(), 1.0)
        self.assertEqual((ds.size, ds.dim, ds.num_classes), (400, 6, 4))

    def test_classes_are_balanced(self):
        ds = generate_synthetic(7, 3, 101, 2.0, seed=1)
        counts = np.bincount(ds.labels, minlength=7)
        self.assertLessEqual(counts.max() - counts.min(), 1)

    def test_one_sample_per_class(self):
        ds = generate_synthetic(6, 2, 6, 2.0, seed=2)
        np.testing.assert_array_equal(np.sort(ds.labels), np.arange(6))

    def test_well_separated_classes_are_linearly_separable(self):
        ds = generate_synthetic(2, 5, 1000, 10.0, seed=8, noise=0.5)
        oracle = Perceptron(max_iter=1000, random_state=0).fit(ds.inputs, ds.labels)
        self.assertGreaterEqual(oracle.score(ds.inputs, ds.labels), 0.99)

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidParam):
            generate_synthetic(1, 3, 10, 2.0, seed=0)
        with self.assertRaises(InvalidParam):
            generate_synthetic(3, 3, 2, 2.0, seed=0)
        with self.assertRaises(InvalidParam):
            generate_synthetic(3, 3, 30, 0.0, seed=0)


class TestDataset(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(EmptyDataset):
            Dataset(np.zeros((0, 2)), np.zeros(0), 2)
        with self.assertRaises(InvalidParam):
            Dataset(np.full((2, 2), 1.5), np.zeros(2), 2)
        with self.assertRaises(InvalidParam):
            Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)
        with self.assertRaises(CountMismatch):
            Dataset(np.zeros((3, 2)), np.zeros(2), 2)

    def test_arrays_are_read_only(self):
        ds = Dataset(np.zeros((2, 2)), np.zeros(2), 2)
        with self.assertRaises(ValueError):
            ds.inputs[0, 0] = 0.5


class TestIdx(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _write(self, name, payload):
        path = self.dir / name
        path.write_bytes(payload)
        return path

    def test_hand_built_fixture(self):
        images = self._write("img", struct.pack(">IIII", 0x803, 1, 2, 2) + bytes([0, 255, 0, 255]))
        labels = self._write("lbl", struct.pack(">II", 0x801, 1) + bytes([7]))
        ds = read_idx(images, labels)
        self.assertEqual((ds.size, ds.dim), (1, 4))
        np.testing.assert_array_equal(ds.inputs[0], [0.0, 1.0, 0.0, 1.0])
        self.assertEqual(int(ds.labels[0]), 7)

    def test_count_mismatch(self):
        images = self._write("img", struct.pack(">IIII", 0x803, 2, 1, 1) + bytes([1, 2]))
        labels = self._write("lbl", struct.pack(">II", 0x801, 1) + bytes([0]))
        with self.assertRaises(CountMismatch):
            read_idx(images, labels)

    def test_bad_magic(self):
        images = self._write("img", struct.pack(">IIII", 0x802, 1, 1, 1) + bytes([1]))
        labels = self._write("lbl", struct.pack(">II", 0x801, 1) + bytes([0]))
        with self.assertRaises(BadMagic):
            read_idx(images, labels)

    def test_truncated_files(self):
        labels = self._write("lbl", struct.pack(">II", 0x801, 1) + bytes([0]))
        short_pixels = self._write("img", struct.pack(">IIII", 0x803, 1, 2, 2) + bytes([1, 2]))
        with self.assertRaises(TruncatedFile):
            read_idx(short_pixels, labels)
        short_header = self._write("img2", struct.pack(">II", 0x803, 1))
        with self.assertRaises(TruncatedFile):
            read_idx(short_header, labels)

    def test_writer_fixture_is_reconstructed_exactly(self):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(12, 3, 4), dtype=np.uint8)
        labels = rng.integers(0, 10, size=12, dtype=np.uint8)
        write_idx(images, labels, self.dir / "img", self.dir / "lbl")
        ds = read_idx(self.dir / "img", self.dir / "lbl", num_classes=10)
        np.testing.assert_array_equal(np.rint(ds.inputs * 255).astype(np.uint8), images.reshape(12, 12))
        np.testing.assert_array_equal(ds.labels, labels)


class TestSampleStream(unittest.TestCase):
    def setUp(self):
        self.dataset = Dataset(np.linspace(0, 1, 20)[:, None], np.arange(20) % 2, 2)

    def test_same_key_same_slice(self):
        stream = SampleStream(self.dataset, seed=42)
        first = draw(stream, 3, 1, 10)
        second = SampleStream(self.dataset, seed=42).draw(3, 1, 10)
        np.testing.assert_array_equal(first.inputs, second.inputs)

    def test_draws_do_not_depend_on_call_order(self):
        a = SampleStream(self.dataset, seed=1)
        b = SampleStream(self.dataset, seed=1)
        a.draw(1, 0, 5)
        np.testing.assert_array_equal(a.indices(2, 3, 5), b.indices(2, 3, 5))

    def test_nodes_draw_uniform_independent_slices(self):
        stream = SampleStream(self.dataset, seed=7)
        first = stream.indices(1, 0, 20000)
        second = stream.indices(1, 1, 20000)
        self.assertFalse(np.array_equal(first[:100], second[:100]))
        for indices in (first, second):
            self.assertGreater(chisquare(np.bincount(indices, minlength=20)).pvalue, 1e-3)
        joint = np.bincount(first * 20 + second, minlength=400)
        self.assertGreater(chisquare(joint).pvalue, 1e-3)

    def test_count_must_be_positive(self):
        with self.assertRaises(InvalidParam):
            SampleStream(self.dataset, seed=0).draw(1, 0, 0)

    def test_budget(self):
        stream = SampleStream(self.dataset, seed=0, budget=10)
        stream.draw(1, 0, 6)
        with self.assertRaises(SamplerExhausted):
            stream.draw(1, 1, 6)


if __name__ == '__main__':
    unittest.main()
