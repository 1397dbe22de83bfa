"""
ocs_arc/selection_runtime/pvalues.py
------------------------------------

Randomized conformal p-values against a fixed calibration set:

    p = [#{V_i < v} + u * (1 + #{V_i = v})] / (n + 1)

Counts come from binary search on the sorted calibration scores.
Ties are exact floating-point equality; callers with near-tie data
should round their scores first if they want those treated as ties.
The tie randomizer u is always supplied by the caller (one seeded draw
per test point) so every stream is replayable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .utils import InvalidInputError, _require, is_finite_real


@dataclass(frozen=True)
class CalibrationScores:
    scores: np.ndarray  # sorted, read-only

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    def counts(self, v: float) -> Tuple[int, int]:
        """(#{V_i < v}, #{V_i == v}) in O(log n)."""
        lo = int(np.searchsorted(self.scores, v, side="left"))
        hi = int(np.searchsorted(self.scores, v, side="right"))
        return lo, hi - lo


@dataclass(frozen=True)
class PValueRecord:
    p: float
    u: float
    v_hat: float


def build_calibration(scores: Sequence[float]) -> CalibrationScores:
    arr = np.asarray(scores, dtype=float).reshape(-1)
    if np.isnan(arr).any():
        raise InvalidInputError("calibration scores contain NaN")
    arr = np.sort(arr, kind="mergesort")
    arr.setflags(write=False)
    return CalibrationScores(scores=arr)


def conformal_p(cal: CalibrationScores, v_hat: float, u: float) -> PValueRecord:
    _require(0.0 <= float(u) <= 1.0, f"u must lie in [0, 1], got {u}")
    _require(is_finite_real(v_hat), f"test score must be finite, got {v_hat}")
    v_hat = float(v_hat)
    below, ties = cal.counts(v_hat)
    p = (below + float(u) * (1 + ties)) / (cal.n + 1)
    return PValueRecord(p=p, u=float(u), v_hat=v_hat)


def oracle_p(cal: CalibrationScores, v_true: float, u: float) -> PValueRecord:
    """
    Same formula evaluated at V(X, Y) with the observed response.
    Only meaningful in simulations where Y is known.
    """
    return conformal_p(cal, v_true, u)


def conformal_p_naive(cal: CalibrationScores, v_hat: float, u: float) -> float:
    """Linear-scan reference for the binary-search counts."""
    below = sum(1 for s in cal.scores if s < v_hat)
    ties = sum(1 for s in cal.scores if s == v_hat)
    return (below + u * (1 + ties)) / (cal.n + 1)
