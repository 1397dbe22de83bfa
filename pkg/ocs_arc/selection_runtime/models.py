"""
ocs_arc/selection_runtime/models.py
-----------------------------------

Built-in predictors so experiments run without external model code:

  - BoostedTreesModel : gradient-boosted regression trees (squared loss),
                        or the logistic-loss variant for 0/1 targets
  - LogisticModel     : L2-regularised logistic regression fitted by
                        gradient descent
  - RidgeModel        : closed-form L2-regularised least squares
  - MultiOutputModel  : one fitted predictor per response coordinate

Tree splits scan every sorted unique feature value of the node,
threshold at the midpoint, and keep the largest variance reduction
(first feature / lowest threshold wins ties). No randomness is used
anywhere, so fits are reproducible without a seed.

Models save to a versioned JSON document (`save_model` / `load_model`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .atomic_store import read_json, write_json
from .multivariate import MultiOutputPredictor
from .scores import Predictor
from .utils import (
    EmptyDatasetError,
    InvalidInputError,
    ModelFitError,
    NonConvergenceError,
    _require,
    as_matrix,
)

log = logging.getLogger(__name__)

MODEL_FORMAT = "ocs-arc-model"
MODEL_FORMAT_VERSION = 1

_MIN_GAIN = 1e-12


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (rows, d)
    targets: np.ndarray   # (rows,) or (rows, d') for vector responses

    def __post_init__(self) -> None:
        X = as_matrix(self.features, "features")
        y = np.asarray(self.targets, dtype=float)
        _require(y.ndim in (1, 2), "targets must be a vector or a matrix")
        _require(y.shape[0] == X.shape[0], f"row counts differ: {X.shape[0]} features vs {y.shape[0]} targets")
        _require(not np.isnan(y).any(), "targets contain NaN")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.targets[rows])


def _require_rows(data: Dataset) -> None:
    if data.n_rows == 0:
        raise EmptyDatasetError("cannot fit a model on an empty dataset")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _prior_log_odds(y: np.ndarray) -> float:
    p = (float(np.sum(y)) + 0.5) / (y.shape[0] + 1.0)
    return math.log(p / (1.0 - p))


# ---------------------------------------------------------------------------
# Boosted trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoostedTreesParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    loss: str = "squared"  # squared | logistic

    def __post_init__(self) -> None:
        _require(self.n_trees >= 0, "n_trees must be >= 0")
        _require(self.max_depth >= 0, "max_depth must be >= 0")
        _require(0.0 <= self.learning_rate <= 1.0, "learning_rate must lie in [0, 1]")
        _require(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")
        _require(self.loss in ("squared", "logistic"), f"unknown loss {self.loss!r}")


@dataclass
class _Tree:
    feature: List[int] = field(default_factory=list)  # -1 marks a leaf
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature, dtype=int)
        threshold = np.asarray(self.threshold, dtype=float)
        left = np.asarray(self.left, dtype=int)
        right = np.asarray(self.right, dtype=int)
        node = np.zeros(X.shape[0], dtype=int)
        while True:
            active = np.nonzero(feature[node] >= 0)[0]
            if active.size == 0:
                break
            at = node[active]
            go_left = X[active, feature[at]] <= threshold[at]
            node[active] = np.where(go_left, left[at], right[at])
        return np.asarray(self.value, dtype=float)[node]

    def to_dict(self) -> Dict[str, list]:
        return asdict(self)


def _best_split(X: np.ndarray, resid: np.ndarray, rows: np.ndarray, min_leaf: int):
    n = rows.shape[0]
    if n < 2 * min_leaf:
        return None
    r = resid[rows]
    total = float(r.sum())
    parent = total * total / n
    n_left = np.arange(1, n, dtype=float)
    size_ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)

    best_gain, best_feature, best_threshold = _MIN_GAIN, -1, 0.0
    for f in range(X.shape[1]):
        xs = X[rows, f]
        order = np.argsort(xs, kind="mergesort")
        xs_sorted = xs[order]
        left_sum = np.cumsum(r[order])[:-1]
        valid = size_ok & (xs_sorted[:-1] < xs_sorted[1:])
        if not valid.any():
            continue
        right_sum = total - left_sum
        gain = left_sum ** 2 / n_left + right_sum ** 2 / (n - n_left) - parent
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain, best_feature = float(gain[i]), f
            best_threshold = (xs_sorted[i] + xs_sorted[i + 1]) / 2.0
    if best_feature < 0:
        return None
    return best_feature, best_threshold


def _grow(tree: _Tree, X: np.ndarray, resid: np.ndarray, rows: np.ndarray,
          depth: int, params: BoostedTreesParams) -> int:
    node = tree.add_leaf(resid[rows].mean())
    if depth >= params.max_depth:
        return node
    split = _best_split(X, resid, rows, params.min_samples_leaf)
    if split is None:
        return node
    f, thr = split
    mask = X[rows, f] <= thr
    tree.feature[node] = f
    tree.threshold[node] = thr
    tree.left[node] = _grow(tree, X, resid, rows[mask], depth + 1, params)
    tree.right[node] = _grow(tree, X, resid, rows[~mask], depth + 1, params)
    return node


class BoostedTreesModel(Predictor):
    def __init__(self, params: BoostedTreesParams, n_features: int, base: float,
                 trees: Optional[List[_Tree]] = None):
        self.params = params
        self.n_features = int(n_features)
        self.base = float(base)
        self.trees: List[_Tree] = list(trees or [])
        self.loss_path: List[float] = []

    def raw_batch(self, X) -> np.ndarray:
        X = self._check_features(X)
        out = np.full(X.shape[0], self.base, dtype=float)
        for tree in self.trees:
            out += self.params.learning_rate * tree.predict(X)
        return out

    def predict_batch(self, X) -> np.ndarray:
        raw = self.raw_batch(X)
        return _sigmoid(raw) if self.params.loss == "logistic" else raw


def fit_boosted_trees(data: Dataset, params: Optional[BoostedTreesParams] = None) -> BoostedTreesModel:
    params = params or BoostedTreesParams()
    _require_rows(data)
    X, y = data.features, data.targets
    _require(y.ndim == 1, "boosted trees fit one response; wrap vector responses in MultiOutputModel")
    logistic = params.loss == "logistic"
    if logistic:
        _require(bool(np.all((y == 0) | (y == 1))), "logistic loss needs 0/1 targets")

    base = _prior_log_odds(y) if logistic else float(y.mean())
    model = BoostedTreesModel(params, X.shape[1], base)
    raw = np.full(y.shape[0], base, dtype=float)
    rows = np.arange(y.shape[0])
    loss = float(np.mean((y - raw) ** 2))
    model.loss_path.append(loss)

    for _ in range(params.n_trees):
        resid = y - (_sigmoid(raw) if logistic else raw)
        tree = _Tree()
        _grow(tree, X, resid, rows, 0, params)
        model.trees.append(tree)
        raw = raw + params.learning_rate * tree.predict(X)
        if logistic:
            continue
        new_loss = float(np.mean((y - raw) ** 2))
        if new_loss > loss * (1.0 + 1e-12) + 1e-15:
            raise ModelFitError(f"training loss increased from {loss} to {new_loss}")
        loss = new_loss
        model.loss_path.append(loss)

    log.debug("boosted trees fitted: %s trees, loss=%s, train mse=%.6g",
              len(model.trees), params.loss, float(np.mean((y - model.predict_batch(X)) ** 2)))
    return model


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------


class LogisticModel(Predictor):
    def __init__(self, weights: np.ndarray, intercept: float):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.n_features = int(self.weights.shape[0])

    def predict_batch(self, X) -> np.ndarray:
        X = self._check_features(X)
        return _sigmoid(X @ self.weights + self.intercept)


def logistic_loss_and_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray,
                           l2: float, b0: float = 0.0):
    """
    Mean log-loss + l2/2 * (|w|^2 + (b - b0)^2); theta = (w..., b).
    Returns (loss, gradient).
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * l2 * (float(w @ w) + (b - b0) ** 2)
    err = _sigmoid(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ err / y.shape[0] + l2 * w
    grad[-1] = float(err.mean()) + l2 * (b - b0)
    return loss, grad


def fit_logistic(data: Dataset, l2: float = 1.0, tol: float = 1e-8,
                 max_iter: int = 100_000) -> LogisticModel:
    _require_rows(data)
    _require(l2 >= 0, "l2 must be >= 0")
    X, y = data.features, data.targets
    _require(y.ndim == 1 and bool(np.all((y == 0) | (y == 1))), "logistic regression needs 0/1 targets")
    if l2 == 0 and (y.min() == y.max()):
        raise NonConvergenceError("single-class targets without regularisation have no finite optimum")

    b0 = _prior_log_odds(y)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    lipschitz = 0.25 * np.linalg.norm(Xa, 2) ** 2 / X.shape[0] + l2
    step = 1.0 / lipschitz
    theta = np.zeros(X.shape[1] + 1)
    theta[-1] = b0

    for it in range(max_iter):
        _, grad = logistic_loss_and_grad(theta, X, y, l2, b0)
        if float(np.max(np.abs(grad))) < tol:
            log.debug("logistic fit converged after %s iterations", it)
            return LogisticModel(theta[:-1].copy(), float(theta[-1]))
        theta = theta - step * grad
    raise NonConvergenceError(f"gradient descent did not reach tol={tol} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------


class RidgeModel(Predictor):
    def __init__(self, weights: np.ndarray, intercept: float):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.n_features = int(self.weights.shape[0])

    def predict_batch(self, X) -> np.ndarray:
        X = self._check_features(X)
        return X @ self.weights + self.intercept


def fit_ridge(data: Dataset, l2: float = 1.0) -> RidgeModel:
    _require_rows(data)
    _require(l2 >= 0, "l2 must be >= 0")
    X, y = data.features, data.targets
    _require(y.ndim == 1, "ridge fits one response")
    x_mean, y_mean = X.mean(axis=0), float(y.mean())
    Xc, yc = X - x_mean, y - y_mean
    if l2 > 0:
        w = np.linalg.solve(Xc.T @ Xc + l2 * np.eye(X.shape[1]), Xc.T @ yc)
    else:
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    return RidgeModel(w, y_mean - float(x_mean @ w))


# ---------------------------------------------------------------------------
# Multi-output wrapper
# ---------------------------------------------------------------------------


class MultiOutputModel(MultiOutputPredictor):
    def __init__(self, models: Sequence[Predictor]):
        _require(len(models) >= 1, "need at least one output model")
        dims = {m.n_features for m in models}
        _require(len(dims) == 1, "output models disagree on the feature count")
        self.models = list(models)
        self.n_features = dims.pop()
        self.n_outputs = len(self.models)

    def predict_batch(self, X) -> np.ndarray:
        X = self._check_features(X)
        return np.column_stack([m.predict_batch(X) for m in self.models])

    def predict(self, x) -> np.ndarray:  # type: ignore[override]
        return self.predict_batch(np.asarray(x, dtype=float).reshape(1, -1))[0]


def fit_multi_output(data: Dataset, fit_one) -> MultiOutputModel:
    """Fit `fit_one(Dataset) -> Predictor` separately on each response column."""
    _require(data.targets.ndim == 2, "multi-output fit needs a target matrix")
    return MultiOutputModel(
        [fit_one(Dataset(data.features, data.targets[:, k])) for k in range(data.targets.shape[1])]
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _encode(model: Predictor) -> Dict[str, Any]:
    if isinstance(model, BoostedTreesModel):
        return {
            "kind": "boosted_trees",
            "params": asdict(model.params),
            "n_features": model.n_features,
            "base": model.base,
            "trees": [t.to_dict() for t in model.trees],
        }
    if isinstance(model, (LogisticModel, RidgeModel)):
        return {
            "kind": "logistic" if isinstance(model, LogisticModel) else "ridge",
            "weights": model.weights.tolist(),
            "intercept": model.intercept,
        }
    if isinstance(model, MultiOutputModel):
        return {"kind": "multi_output", "models": [_encode(m) for m in model.models]}
    raise InvalidInputError(f"cannot save predictor of type {type(model).__name__}")


def _decode(doc: Dict[str, Any]) -> Predictor:
    kind = doc.get("kind")
    if kind == "boosted_trees":
        trees = [_Tree(**t) for t in doc["trees"]]
        return BoostedTreesModel(BoostedTreesParams(**doc["params"]), doc["n_features"], doc["base"], trees)
    if kind == "logistic":
        return LogisticModel(np.asarray(doc["weights"]), doc["intercept"])
    if kind == "ridge":
        return RidgeModel(np.asarray(doc["weights"]), doc["intercept"])
    if kind == "multi_output":
        return MultiOutputModel([_decode(m) for m in doc["models"]])
    raise InvalidInputError(f"unknown model kind {kind!r}")


def save_model(model: Predictor, path: Union[str, Path]) -> Path:
    doc = {"format": MODEL_FORMAT, "version": MODEL_FORMAT_VERSION, "model": _encode(model)}
    return write_json(path, doc)


def load_model(path: Union[str, Path]) -> Predictor:
    doc = read_json(path)
    if doc is None:
        raise InvalidInputError(f"no readable model document at {path}")
    if doc.get("format") != MODEL_FORMAT:
        raise InvalidInputError(f"{path} is not an {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise InvalidInputError(f"unsupported model format version {doc.get('version')!r}")
    return _decode(doc["model"])
