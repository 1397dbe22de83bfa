"""
ocs_arc/selection_runtime/datagen.py
------------------------------------

Synthetic data and CSV ingestion.

Simulation settings (X ~ Uniform[-1, 1]^20, Y = mu(X) + N(0, sigma^2)):

    setting 1: mu(x) = 4 x1 1{x2 > 0} max(0.5, x3) + 4 x1 1{x2 <= 0} min(-0.5, x3)
    setting 2: mu(x) = 5 x1 x2 + exp(x4 - 1)
    bivariate: mu(x) = (setting 1, setting 2 - 1), independent noise per coordinate

Random draws come from numpy PCG64 generators; the same seed gives the
same bytes.

CSV files: UTF-8, header row, "." decimal separator. The schema names
the target column, an optional per-row threshold column and optionally
the feature columns (default: every other column).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .metrics import TruthLabels
from .models import Dataset
from .utils import (
    DataParseError,
    EmptyDatasetError,
    InvalidInputError,
    SchemaError,
    _require,
    as_vector,
    make_rng,
)

log = logging.getLogger(__name__)

SIM_DIM = 20


@dataclass(frozen=True)
class SimSetting:
    setting_id: int
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        _require(self.setting_id in (1, 2), f"unknown simulation setting {self.setting_id!r}")
        _require(self.sigma >= 0, "sigma must be >= 0")


@dataclass(frozen=True)
class StreamPoint:
    """One arriving candidate. Selection code only accepts points with y_true=None."""

    x: np.ndarray
    c_t: Optional[float] = None
    y_true: Optional[object] = None


# ---------------------------------------------------------------------------
# Mean functions
# ---------------------------------------------------------------------------


def _check_point(x) -> np.ndarray:
    x = as_vector(x)
    if x.shape[0] != SIM_DIM:
        raise InvalidInputError(f"simulation covariates have length {SIM_DIM}, got {x.shape[0]}")
    return x


def _mu1_rows(X: np.ndarray) -> np.ndarray:
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    pos = 4.0 * x1 * (x2 > 0) * np.maximum(0.5, x3)
    neg = 4.0 * x1 * (x2 <= 0) * np.minimum(-0.5, x3)
    return pos + neg


def _mu2_rows(X: np.ndarray) -> np.ndarray:
    return 5.0 * X[:, 0] * X[:, 1] + np.exp(X[:, 3] - 1.0)


def mu_setting1(x) -> float:
    return float(_mu1_rows(_check_point(x).reshape(1, -1))[0])


def mu_setting2(x) -> float:
    return float(_mu2_rows(_check_point(x).reshape(1, -1))[0])


def mu_bivariate(x) -> np.ndarray:
    X = _check_point(x).reshape(1, -1)
    return np.array([_mu1_rows(X)[0], _mu2_rows(X)[0] - 1.0])


_MU_ROWS = {1: _mu1_rows, 2: _mu2_rows}


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def generate(setting: SimSetting, n: int, rng: Optional[np.random.Generator] = None) -> Dataset:
    _require(int(n) >= 1, "n must be >= 1")
    rng = rng if rng is not None else make_rng(setting.seed)
    X = rng.uniform(-1.0, 1.0, size=(int(n), SIM_DIM))
    noise = rng.normal(0.0, 1.0, size=int(n)) * setting.sigma
    return Dataset(X, _MU_ROWS[setting.setting_id](X) + noise)


def generate_bivariate(sigma: float, n: int, rng: np.random.Generator) -> Dataset:
    _require(int(n) >= 1, "n must be >= 1")
    _require(sigma >= 0, "sigma must be >= 0")
    X = rng.uniform(-1.0, 1.0, size=(int(n), SIM_DIM))
    noise = rng.normal(0.0, 1.0, size=(int(n), 2)) * sigma
    mean = np.column_stack([_mu1_rows(X), _mu2_rows(X) - 1.0])
    return Dataset(X, mean + noise)


def split_indices(n_rows: int, sizes: Sequence[int], rng: np.random.Generator) -> List[np.ndarray]:
    sizes = [int(s) for s in sizes]
    _require(all(s >= 1 for s in sizes), "split sizes must be >= 1")
    if sum(sizes) > n_rows:
        raise InvalidInputError(f"splits need {sum(sizes)} rows, dataset has {n_rows}")
    order = rng.permutation(n_rows)
    bounds = np.cumsum([0] + sizes)
    return [order[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def split_dataset(data: Dataset, sizes: Sequence[int], rng: np.random.Generator) -> List[Dataset]:
    """Random disjoint splits of the requested sizes (e.g. train / cal / test)."""
    return [data.take(rows) for rows in split_indices(data.n_rows, sizes, rng)]


def to_stream(
    features: np.ndarray,
    thresholds: Optional[Sequence[float]],
    truths: TruthLabels,
) -> Tuple[List[StreamPoint], TruthLabels]:
    """Arriving points without their responses, and the labels kept for scoring runs."""
    n = features.shape[0]
    _require(len(truths) == n, "one truth label per stream point")
    if thresholds is None:
        cs: List[Optional[float]] = [None] * n
    else:
        cs = [float(c) for c in np.broadcast_to(np.asarray(thresholds, dtype=float), (n,))]
    return [StreamPoint(x=features[i], c_t=cs[i]) for i in range(n)], truths


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    target: str
    threshold_column: Optional[str] = None
    features: Optional[Tuple[str, ...]] = None


_LINE_RE = re.compile(r"line (\d+)")


def read_table(path: Union[str, Path], schema: CsvSchema) -> Tuple[Dataset, Optional[np.ndarray]]:
    """Parse a CSV into a Dataset plus the per-row thresholds (if the schema names a column)."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise InvalidInputError(f"{path}: file not found") from e
    except pd.errors.EmptyDataError as e:
        raise EmptyDatasetError(f"{path}: no header row") from e
    except pd.errors.ParserError as e:
        m = _LINE_RE.search(str(e))
        row = int(m.group(1)) - 1 if m else None
        raise DataParseError(f"{path}: malformed row {row}: {e}", row=row) from e

    header = list(frame.columns)
    wanted = [schema.target]
    if schema.threshold_column:
        wanted.append(schema.threshold_column)
    features = list(schema.features) if schema.features else [
        c for c in header if c not in wanted
    ]
    unknown = [c for c in wanted + features if c not in header]
    if unknown:
        raise SchemaError(f"{path}: unknown columns {unknown}; header has {header}")
    _require(len(features) >= 1, f"{path}: no feature columns", SchemaError)
    if frame.empty:
        raise EmptyDatasetError(f"{path}: header only, no data rows")

    used = frame[features + wanted].apply(lambda col: col.str.strip())
    missing_rows = used.index[(used == "").any(axis=1)]
    if len(missing_rows):
        rows = [int(i) + 1 for i in missing_rows]
        log.warning("%s: dropping %s rows with missing values: %s", path, len(rows), rows)
        used = used.drop(index=missing_rows)
    if used.empty:
        raise EmptyDatasetError(f"{path}: every row has missing values")

    numeric = used.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        row = int(used.index[r]) + 1
        column = used.columns[c]
        raise DataParseError(
            f"{path}: row {row}, column {column!r}: not a finite number: {used.iat[r, c]!r}",
            row=row,
            column=column,
        )

    data = Dataset(numeric[features].to_numpy(dtype=float), numeric[schema.target].to_numpy(dtype=float))
    thresholds = (
        numeric[schema.threshold_column].to_numpy(dtype=float) if schema.threshold_column else None
    )
    log.debug("%s: loaded %s rows x %s features", path, data.n_rows, data.n_features)
    return data, thresholds


def load_csv(path: Union[str, Path], schema: CsvSchema) -> Dataset:
    return read_table(path, schema)[0]
