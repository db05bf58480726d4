# plot_data.py
# © 2025 Colt McVey
# Writes gnuplot-compatible two-column series from run results. Nothing is rendered here.

import io
import logging
from pathlib import Path

import numpy as np

from config import RATIO_COLUMN
from data_manager import get_output_dir, atomic_write_text
from errors import ConfigError, EmptyResult
from metrics import regret_ratio_curve

PLOT_KINDS = ("regret_vs_time", "regret_vs_samples", "ratio_vs_rounds", "gap_vs_rounds")


def _series_text(x, y, x_label: str, y_label: str) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, np.column_stack([x, y]), fmt="%.12g", header=f"{x_label} {y_label}")
    return buffer.getvalue()


def _stem(result) -> str:
    run_id = str(result.frame["run_id"].iloc[0])
    return run_id.rsplit("-s", 1)[0]


def _regret_series(result, x_column: str):
    means = result.frame.groupby("round")[[x_column, "regret_per_sample"]].mean()
    return means[x_column].to_numpy(), means["regret_per_sample"].to_numpy()


def _gap_series(result):
    gaps = result.frame.dropna(subset=["gap_est"]).groupby("round")["gap_est"].mean()
    if gaps.empty:
        raise EmptyResult(f"Run {_stem(result)} has no optimality-gap estimates (gap_every = 0?)")
    return gaps.index.to_numpy(), gaps.to_numpy()


def emit_plots(results, kind: str, out_dir: str | Path | None = None) -> list[Path]:
    """
    Writes one series file per curve and returns their paths.

    regret_vs_time and regret_vs_samples plot seed-mean regret per sample;
    ratio_vs_rounds divides the first result's regret per sample by each
    other result's (a single result is compared with itself);
    gap_vs_rounds plots the seed-mean optimality gap where it was measured.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"Unknown plot kind '{kind}'. Expected one of {PLOT_KINDS}", field="kind")
    if not isinstance(results, (list, tuple)):
        results = [results]
    if not results or any(r.frame.empty for r in results):
        raise EmptyResult("Nothing to plot: no result rows")

    target = get_output_dir(out_dir)
    written = []
    if kind == "ratio_vs_rounds":
        base = results[0]
        base_regret = base.seed_mean(RATIO_COLUMN)
        for other in results[1:] or results:
            curve = regret_ratio_curve(base_regret.to_numpy(), other.seed_mean(RATIO_COLUMN).to_numpy())
            text = _series_text(base_regret.index.to_numpy(), curve.ratios, "round", "ratio")
            path = target / f"{_stem(base)}_over_{_stem(other)}.{kind}.dat"
            written.append(atomic_write_text(path, text))
    else:
        for result in results:
            if kind == "gap_vs_rounds":
                x, y = _gap_series(result)
                labels = ("round", "gap")
            else:
                x_column = "runtime_units" if kind == "regret_vs_time" else "samples_seen"
                x, y = _regret_series(result, x_column)
                labels = (x_column, "regret_per_sample")
            path = target / f"{_stem(result)}.{kind}.dat"
            written.append(atomic_write_text(path, _series_text(x, y, *labels)))

    for path in written:
        logging.info(f"Wrote plot series {path}")
    return written
