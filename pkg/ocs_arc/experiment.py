"""
ocs_arc/experiment.py
---------------------

Monte Carlo experiment runner.

For every grid cell and every replicate:

  1. training   : generate (or re-split) data and fit the configured model
  2. calibration: score the calibration split with its observed responses
  3. thresholding: stream the test split (responses withheld) through each
                   configured method x score pair, sharing data, model and
                   tie randomizers across the pairs

Replicate i of a run uses seed base_seed + i and three sub-streams
(data, split, tie randomizers). Replicates may run in a process pool;
results are collected in replicate order, so aggregation and every
output byte are independent of scheduling. Outputs are written by the
parent process only:

    <out>/summary.csv
    <out>/manifest.json
    <out>/trajectories/<experiment_id>/<method>-<score>/rep0000.csv   (optional)
"""

from __future__ import annotations

import dataclasses
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import pydantic

from .selection_runtime.atomic_store import write_csv, write_json
from .selection_runtime.datagen import (
    CsvSchema,
    SimSetting,
    generate,
    generate_bivariate,
    read_table,
    split_indices,
    to_stream,
)
from .selection_runtime.metrics import RunResult, TruthLabels, aggregate, evaluate_trajectory
from .selection_runtime.models import (
    BoostedTreesParams,
    Dataset,
    fit_boosted_trees,
    fit_logistic,
    fit_multi_output,
    fit_ridge,
)
from .selection_runtime.multivariate import RegionalScoreFunction, TargetRegion, region_contains
from .selection_runtime.pipeline import OnlineSelector
from .selection_runtime.procedures import Method
from .selection_runtime.pvalues import build_calibration
from .selection_runtime.scores import Predictor, ScoreFunction
from .selection_runtime.utils import replicate_seed, spawn_rngs
from .settings import ExperimentCell, ExperimentConfig, ModelConf, expand_grid, parse_config

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "experiment_id",
    "method",
    "score",
    "t",
    "mean_fdp",
    "se_fdp",
    "mean_power",
    "se_power",
    "mean_r2a",
    "n_runs",
    "std_fdp",
    "std_power",
]

Table = Tuple[Dataset, Optional[np.ndarray]]


# ---------------------------------------------------------------------------
# Replicate
# ---------------------------------------------------------------------------


def fit_model(mc: ModelConf, train: Dataset, thresholds: np.ndarray) -> Predictor:
    """Classifier kinds learn 1{y > c}; regression kinds learn y."""
    params = BoostedTreesParams(
        n_trees=mc.n_trees,
        max_depth=mc.max_depth,
        learning_rate=mc.learning_rate,
        min_samples_leaf=mc.min_samples_leaf,
    )
    if mc.kind in ("boosted_classifier", "logistic"):
        labels = Dataset(train.features, (train.targets > thresholds).astype(float))
        if mc.kind == "logistic":
            return fit_logistic(labels, l2=mc.l2)
        return fit_boosted_trees(
            labels,
            dataclasses.replace(params, loss="logistic"),
        )
    if mc.kind == "ridge":
        fit_one = partial(fit_ridge, l2=mc.l2)
    else:
        fit_one = partial(fit_boosted_trees, params=params)
    if train.targets.ndim == 2:
        return fit_multi_output(train, fit_one)
    return fit_one(train)


def build_region(cfg: ExperimentConfig) -> TargetRegion:
    rc = cfg.selection.region
    return TargetRegion.box(rc.lower, rc.upper, rc.representative)


def _replicate_data(
    cfg: ExperimentConfig, cell: ExperimentCell, seed: int, table: Optional[Table]
) -> Tuple[List[Dataset], List[np.ndarray], np.random.Generator]:
    data_rng, split_rng, u_rng = spawn_rngs(seed, 3)
    sizes = [cfg.split.n_train, cell.n_cal, cfg.split.n_test]
    if cell.source == "csv":
        data, thresholds = table
    elif cell.source == "bivariate":
        data, thresholds = generate_bivariate(cell.sigma, sum(sizes), data_rng), None
    else:
        data, thresholds = generate(SimSetting(cell.setting, cell.sigma, seed), sum(sizes), data_rng), None
    if thresholds is None:
        thresholds = np.full(data.n_rows, cfg.data.threshold, dtype=float)
    parts = split_indices(data.n_rows, sizes, split_rng)
    return [data.take(rows) for rows in parts], [thresholds[rows] for rows in parts], u_rng


def run_replicate(
    cfg: ExperimentConfig,
    cell: ExperimentCell,
    replicate_index: int,
    table: Optional[Table] = None,
    keep_trajectories: bool = False,
) -> List[RunResult]:
    """One replicate of one grid cell: a RunResult per method x score pair."""
    seed = replicate_seed(cfg.evaluation.base_seed, replicate_index)
    log.debug("%s replicate %s start (seed=%s)", cell.experiment_id, replicate_index, seed)
    (train, cal, test), (c_train, _, c_test), u_rng = _replicate_data(cfg, cell, seed, table)
    model = fit_model(cfg.model, train, c_train)
    u = u_rng.uniform(size=test.n_rows)

    scorers: Dict[str, object] = {}
    calibrations = {}
    region = None
    if cell.source == "bivariate":
        region = build_region(cfg)
        regional = RegionalScoreFunction(model, membership_margin=cfg.selection.clip_constant)
        scorers["regional"] = regional
        calibrations["regional"] = build_calibration(regional.score_batch(region, cal.features, cal.targets))
        truths = TruthLabels(np.array([region_contains(region, y) for y in test.targets]))
        points, truths = to_stream(test.features, None, truths)
    else:
        for name in cfg.selection.scores:
            sf = (
                ScoreFunction.clip(model, cfg.selection.clip_constant, cfg.data.threshold)
                if name == "clip"
                else ScoreFunction.res(model)
            )
            scorers[name] = sf
            calibrations[name] = build_calibration(sf.score_batch(cal.features, cal.targets))
        points, truths = to_stream(
            test.features, c_test, TruthLabels.from_responses(test.targets, c_test)
        )

    results: List[RunResult] = []
    for method in cfg.selection.methods:
        for name in cfg.selection.scores:
            selector = OnlineSelector(
                Method(method),
                calibrations[name],
                q=cell.q,
                r=cell.r,
                score=scorers[name],
                region=region,
            )
            for point, u_t in zip(points, u):
                selector.offer(point, float(u_t))
            results.append(
                evaluate_trajectory(
                    method,
                    name,
                    selector.trajectory,
                    truths,
                    cfg.evaluation.checkpoints,
                    keep_trajectory=keep_trajectories,
                )
            )
    log.debug("%s replicate %s done", cell.experiment_id, replicate_index)
    return results


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


@dataclass
class RunOutputs:
    summary: pd.DataFrame
    summary_path: Path
    manifest_path: Path
    trajectory_paths: List[Path] = field(default_factory=list)


def apply_overrides(
    cfg: ExperimentConfig,
    out_dir: Optional[str] = None,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    trajectories: Optional[bool] = None,
    workers: Optional[int] = None,
) -> ExperimentConfig:
    """Command-line flags win over the file; the result is validated again."""
    raw = cfg.model_dump(by_alias=True)
    if out_dir is not None:
        raw["output"]["dir"] = str(out_dir)
    if replicates is not None:
        raw["evaluation"]["replicates"] = int(replicates)
    if seed is not None:
        raw["evaluation"]["base_seed"] = int(seed)
    if trajectories is not None:
        raw["output"]["trajectories"] = bool(trajectories)
    if workers is not None:
        raw["runtime"]["workers"] = int(workers)
    return parse_config(raw)


def load_table(cfg: ExperimentConfig) -> Optional[Table]:
    if cfg.data.source != "csv":
        return None
    csv = cfg.data.csv
    schema = CsvSchema(
        target=csv.target,
        threshold_column=csv.threshold_column,
        features=tuple(csv.features) if csv.features else None,
    )
    return read_table(csv.path, schema)


def _run_cell(
    cfg: ExperimentConfig, cell: ExperimentCell, table: Optional[Table]
) -> List[List[RunResult]]:
    job = partial(
        run_replicate, cfg, cell, table=table, keep_trajectories=cfg.output.trajectories
    )
    indices = range(cfg.evaluation.replicates)
    if cfg.runtime.workers == 1:
        return [job(i) for i in indices]
    with ProcessPoolExecutor(max_workers=cfg.runtime.workers) as pool:
        return list(pool.map(job, indices))


def summarise(cell: ExperimentCell, per_replicate: List[List[RunResult]],
              checkpoints: List[int]) -> List[dict]:
    rows = []
    for k, first in enumerate(per_replicate[0]):
        runs = [rep[k] for rep in per_replicate]
        for s in aggregate(runs, checkpoints):
            rows.append(
                {
                    "experiment_id": cell.experiment_id,
                    "method": first.method,
                    "score": first.score,
                    "t": s.t,
                    "mean_fdp": s.mean_fdp,
                    "se_fdp": s.se_fdp,
                    "mean_power": s.mean_power,
                    "se_power": s.se_power,
                    "mean_r2a": s.mean_r2a,
                    "n_runs": s.n_runs,
                    "std_fdp": s.std_fdp,
                    "std_power": s.std_power,
                }
            )
    return rows


def _versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
    }


def run_experiment(cfg: ExperimentConfig) -> RunOutputs:
    out = Path(cfg.output.dir)
    cells = expand_grid(cfg)
    log.info("experiment %s: %s grid cells x %s replicates",
             cfg.experiment.name, len(cells), cfg.evaluation.replicates)
    table = load_table(cfg)

    rows: List[dict] = []
    trajectory_paths: List[Path] = []
    for cell in cells:
        per_replicate = _run_cell(cfg, cell, table)
        rows.extend(summarise(cell, per_replicate, cfg.evaluation.checkpoints))
        if cfg.output.trajectories:
            for idx, results in enumerate(per_replicate):
                for res in results:
                    path = (out / "trajectories" / cell.experiment_id
                            / f"{res.method}-{res.score}" / f"rep{idx:04d}.csv")
                    trajectory_paths.append(write_csv(path, res.trajectory.to_frame()))
        log.info("cell %s done", cell.experiment_id)

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    summary_path = write_csv(out / "summary.csv", summary)
    manifest = {
        "experiment": cfg.experiment.name,
        "config": cfg.echo(),
        "cells": [cell.experiment_id for cell in cells],
        "replicate_seeds": [
            replicate_seed(cfg.evaluation.base_seed, i) for i in range(cfg.evaluation.replicates)
        ],
        "versions": _versions(),
        "outputs": {
            "summary": summary_path.name,
            "trajectories": [p.relative_to(out).as_posix() for p in trajectory_paths],
        },
    }
    manifest_path = write_json(out / "manifest.json", manifest)
    log.info("wrote %s and %s (%s trajectory files)", summary_path, manifest_path, len(trajectory_paths))
    return RunOutputs(summary, summary_path, manifest_path, trajectory_paths)
