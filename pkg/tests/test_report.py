"""Delimited output and figure rendering."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from opcap.distributions import FrequencyModel
from opcap.report import (
    STUDY_COLUMNS,
    render_convexity_figure,
    render_study_figure,
    study_rows,
    write_convexity_csv,
    write_study_csv,
)
from opcap.simharness import StudyConfig, run_study

from conftest import CENTRAL_MODELS


@pytest.fixture(scope="module")
def result():
    cfg = StudyConfig(truth=CENTRAL_MODELS["lognormal"],
                      freq=FrequencyModel(25.0, 10), replications=10,
                      master_seed=6)
    return run_study(cfg)


def test_study_rows_layout(result):
    rows = study_rows(result)
    assert len(rows) == len(result.config.alphas)
    for row in rows:
        assert list(row) == STUDY_COLUMNS
        assert row["Dist"] == "lognormal"
        assert row["TrueCap"] == result.true_capital[row["Alpha"]]
        assert row["RMSE_Ratio"] == pytest.approx(
            row["RCE_RMSE"] / row["MLE_RMSE"])


def test_csv_round_trips_bit_for_bit(result, tmp_path):
    path = write_study_csv(result, tmp_path / "study.csv")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        parsed = list(reader)
    rows = study_rows(result)
    assert len(parsed) == len(rows)
    for got, want in zip(parsed, rows):
        for col in STUDY_COLUMNS:
            value = want[col]
            if isinstance(value, float):
                assert float(got[col]) == value  # exact, not approximate
            elif value is None:
                assert got[col] == ""
            else:
                assert got[col] == str(value)


def test_convexity_csv_round_trip(tmp_path):
    rows = [(0.8, 0.999, 1.25e9), (0.9, 0.999, 2.5e9 + 1e-3)]
    path = write_convexity_csv(rows, tmp_path / "c.csv")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        parsed = [tuple(float(tok) for tok in line) for line in reader]
    assert header == ["param_value", "p", "var"]
    assert parsed == rows


def test_figures_are_rendered(result, tmp_path):
    fig1 = render_study_figure(result, tmp_path / "study.png")
    rows = [(x, 0.999, 1e9 * (1 + x) ** 2) for x in np.linspace(0, 1, 11)]
    fig2 = render_convexity_figure(rows, tmp_path / "conv.png")
    for path in (fig1, fig2):
        assert path.exists()
        assert path.stat().st_size > 1000
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
