# tests/test_monte_carlo.py
#
# Long-running statistical checks. Skipped unless pytest runs with --runslow.

import pathlib

import pandas as pd
import pytest

from ocs_arc.config import load_config
from ocs_arc.experiment import apply_overrides, run_experiment
from ocs_arc.settings import parse_config

ROOT = pathlib.Path(__file__).resolve().parents[1]

pytestmark = pytest.mark.slow


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _run(name: str, out_dir, workers: int = 4, **edits) -> pd.DataFrame:
    raw = load_config(ROOT / "experiments" / name)
    for section, values in edits.items():
        raw[section].update(values)
    cfg = apply_overrides(parse_config(raw), out_dir=out_dir, workers=workers)
    return run_experiment(cfg).summary


def _assert_fdr_controlled(summary: pd.DataFrame, q: float) -> None:
    bound = q + 3 * summary["se_fdp"]
    over = summary[summary["mean_fdp"] > bound]
    assert over.empty, over[["experiment_id", "method", "score", "t", "mean_fdp", "se_fdp"]]


# ---------------------------------------------------------------------------
# Acceptance runs
# ---------------------------------------------------------------------------

def test_repeated_selection_deselects_and_online_bh_does_not(tmp_path):
    summary = _run("arc_violation.yaml", tmp_path)
    last = summary[summary["t"] == 500]
    repeated = last[last["method"] == "repeated_cs"]["mean_r2a"].iloc[0]
    online = summary[summary["method"] == "ocs_arc"]["mean_r2a"]
    assert repeated > 0
    assert (online == 0).all()


def test_fdr_control_and_power_ordering(tmp_path):
    summary = _run(
        "synthetic.yaml",
        tmp_path,
        data={"sigma": [1.0]},
        split={"n_train": 500, "n_cal": [500], "n_test": 300},
        evaluation={"checkpoints": [100, 200, 300], "replicates": 100},
    )
    _assert_fdr_controlled(summary, 0.1)

    for cell, rows in summary.groupby("experiment_id"):
        def power(method, score):
            sel = rows[(rows["method"] == method) & (rows["score"] == score)]
            return sel.sort_values("t")["mean_power"].to_numpy()

        assert (power("ocs_arc", "clip") >= power("ob", "clip")).all(), cell
        assert int((power("ocs_arc", "clip") >= power("ocs_arc", "res")).sum()) >= 2, cell


def test_multivariate_fdr_control(tmp_path):
    _assert_fdr_controlled(_run("multivariate.yaml", tmp_path), 0.1)


def test_sensitivity_grid_keeps_fdr_control(tmp_path):
    _assert_fdr_controlled(_run("sensitivity.yaml", tmp_path), 0.1)


def test_csv_candidates_keep_fdr_control(tmp_path, monkeypatch):
    monkeypatch.chdir(ROOT)
    _assert_fdr_controlled(_run("candidates_csv.yaml", tmp_path, workers=1), 0.2)
