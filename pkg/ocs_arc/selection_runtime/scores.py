"""
ocs_arc/selection_runtime/scores.py
-----------------------------------

Non-conformity scores V(x, y) built on a pluggable predictor.

Two built-in monotone scores:

    CLIP:  V(x, y) = M * 1{y > cutoff} - mu(x)
    RES:   V(x, y) = y - mu(x)

Both are non-decreasing in y for every fixed x, which is what lets the
selection code replace an unobserved response by its threshold c_t.
Custom scores are accepted but carry no such guarantee; use
`check_monotone` on them before trusting FDR numbers.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .utils import InvalidInputError, _require, as_matrix, as_vector

DEFAULT_CLIP_CONSTANT = 1000.0
DEFAULT_CLIP_CUTOFF = 0.0


# ---------------------------------------------------------------------------
# Predictor interface
# ---------------------------------------------------------------------------


class Predictor(ABC):
    """
    Fitted model mapping a feature vector of length d to a real score.

    Subclasses implement `predict_batch`; classifiers return a
    positive-class probability in [0, 1].
    """

    n_features: int = 0

    @abstractmethod
    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        ...

    def _check_features(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        return X

    def predict(self, x) -> float:
        x = as_vector(x)
        return float(self.predict_batch(x.reshape(1, -1))[0])


class CallablePredictor(Predictor):
    """Wrap a plain function of one feature vector (fixtures, external models)."""

    def __init__(self, fn: Callable[[np.ndarray], float], n_features: int):
        _require(n_features >= 1, "n_features must be >= 1")
        self.fn = fn
        self.n_features = int(n_features)

    def predict_batch(self, X) -> np.ndarray:
        X = self._check_features(X)
        return np.array([float(self.fn(row)) for row in X], dtype=float)


# ---------------------------------------------------------------------------
# Score functions
# ---------------------------------------------------------------------------


class ScoreKind(str, Enum):
    CLIP = "clip"
    RES = "res"
    CUSTOM = "custom"


def score_clip(
    pred: Predictor,
    x,
    y: float,
    clip_constant: float = DEFAULT_CLIP_CONSTANT,
    clip_cutoff: float = DEFAULT_CLIP_CUTOFF,
) -> float:
    _require(clip_constant >= 0, "clip_constant must be >= 0")
    indicator = 1.0 if float(y) > clip_cutoff else 0.0
    return clip_constant * indicator - pred.predict(x)


def score_res(pred: Predictor, x, y: float) -> float:
    return float(y) - pred.predict(x)


@dataclass(frozen=True)
class ScoreFunction:
    kind: ScoreKind
    predictor: Predictor
    clip_constant: float = DEFAULT_CLIP_CONSTANT
    clip_cutoff: float = DEFAULT_CLIP_CUTOFF
    custom: Optional[Callable[[Predictor, np.ndarray, float], float]] = field(
        default=None, compare=False
    )

    def __post_init__(self) -> None:
        _require(self.clip_constant >= 0, "clip_constant must be >= 0")
        if self.kind == ScoreKind.CUSTOM:
            _require(self.custom is not None, "custom score needs a callable")

    @classmethod
    def clip(cls, predictor: Predictor, clip_constant: float = DEFAULT_CLIP_CONSTANT,
             clip_cutoff: float = DEFAULT_CLIP_CUTOFF) -> "ScoreFunction":
        return cls(ScoreKind.CLIP, predictor, float(clip_constant), float(clip_cutoff))

    @classmethod
    def res(cls, predictor: Predictor) -> "ScoreFunction":
        return cls(ScoreKind.RES, predictor)

    @classmethod
    def from_callable(cls, predictor: Predictor, fn) -> "ScoreFunction":
        return cls(ScoreKind.CUSTOM, predictor, custom=fn)

    def __call__(self, x, y: float) -> float:
        if self.kind == ScoreKind.CLIP:
            return score_clip(self.predictor, x, y, self.clip_constant, self.clip_cutoff)
        if self.kind == ScoreKind.RES:
            return score_res(self.predictor, x, y)
        return float(self.custom(self.predictor, as_vector(x), float(y)))

    def score_batch(self, X, y) -> np.ndarray:
        """
        Scores for many points at once; y is one response (or threshold)
        per row. Calibration sets go through here.
        """
        X = as_matrix(X)
        y = np.broadcast_to(np.asarray(y, dtype=float), (X.shape[0],))
        if self.kind == ScoreKind.CUSTOM:
            return np.array([self(row, yi) for row, yi in zip(X, y)], dtype=float)
        mu = self.predictor.predict_batch(X)
        if self.kind == ScoreKind.CLIP:
            return self.clip_constant * (y > self.clip_cutoff).astype(float) - mu
        return y - mu


def check_monotone(sf: ScoreFunction, x, y_grid: Sequence[float]) -> bool:
    """True iff V(x, y_grid[i]) <= V(x, y_grid[i+1]) for every i."""
    grid = [float(y) for y in y_grid]
    _require(all(a <= b for a, b in zip(grid, grid[1:])), "y_grid must be sorted ascending")
    values = [sf(x, y) for y in grid]
    return all(a <= b for a, b in zip(values, values[1:]))
