# test_plot_data.py
# © 2025 Colt McVey
# Tests for the gnuplot series writer.

import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from errors import ConfigError, EmptyResult
from manifest import RunManifest
from plot_data import emit_plots
from runner import RunResult, run_experiment
from tests.test_runner import small_config


class TestEmitPlots(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.result = run_experiment(small_config(rounds=40, gap_every=10), write=False)

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_self_ratio_is_constant_one(self):
        paths = emit_plots([self.result], "ratio_vs_rounds", self.dir)
        self.assertEqual(len(paths), 1)
        series = np.loadtxt(paths[0])
        self.assertEqual(series.shape, (40, 2))
        np.testing.assert_array_equal(series[:, 1], np.ones(40))

    def test_ratio_divides_regret_per_sample(self):
        larger = run_experiment(small_config(n=8, rounds=40, gap_every=10), write=False)
        path, = emit_plots([self.result, larger], "ratio_vs_rounds", self.dir)
        self.assertEqual(path.name, "unit-n4_over_unit-n8.ratio_vs_rounds.dat")
        expected = (self.result.seed_mean("regret_per_sample") / larger.seed_mean("regret_per_sample")).to_numpy()
        np.testing.assert_allclose(np.loadtxt(path)[:, 1], expected, rtol=1e-10)

    def test_regret_series(self):
        for kind, x_column in (("regret_vs_time", "runtime_units"), ("regret_vs_samples", "samples_seen")):
            with self.subTest(kind=kind):
                path, = emit_plots(self.result, kind, self.dir)
                self.assertEqual(path.name, f"unit-n4.{kind}.dat")
                self.assertTrue(path.read_text().startswith(f"# {x_column} regret_per_sample"))
                series = np.loadtxt(path)
                np.testing.assert_allclose(series[:, 0], self.result.seed_mean(x_column).to_numpy(), rtol=1e-11)

    def test_gap_series_only_has_measured_rounds(self):
        path, = emit_plots(self.result, "gap_vs_rounds", self.dir)
        np.testing.assert_array_equal(np.loadtxt(path)[:, 0], [10, 20, 30, 40])

    def test_gap_series_needs_measurements(self):
        result = run_experiment(small_config(rounds=5, gap_every=0, seeds=[0]), write=False)
        with self.assertRaises(EmptyResult):
            emit_plots(result, "gap_vs_rounds", self.dir)

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError):
            emit_plots(self.result, "heatmap", self.dir)

    def test_empty_input(self):
        with self.assertRaises(EmptyResult):
            emit_plots([], "regret_vs_time", self.dir)
        empty = RunResult(pd.DataFrame(columns=self.result.frame.columns), RunManifest())
        with self.assertRaises(EmptyResult):
            emit_plots(empty, "regret_vs_time", self.dir)


if __name__ == '__main__':
    unittest.main()
