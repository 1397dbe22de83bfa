"""
ocs_arc/selection_runtime/multivariate.py
-----------------------------------------

Selection for vector responses (mOCS-ARC).

Hypotheses per stream index: null Y ∈ R^c, alternative Y ∈ R, where R
is a closed axis-aligned box (bounds may be infinite).

Score:

    V(x, y) = M * 1{y ∈ R} - s(x)

    s(x) = -dist(mu(x), R)             if mu(x) ∉ R
           +dist(mu(x), boundary of R) if mu(x) ∈ R   (0 when R has no finite bound)

The y-dependence is the indicator alone, so V(x, y) <= V(x, y') for any
y ∉ R, y' ∈ R (regional monotone). The test score is taken at a point
of R^c, where the indicator is 0 and V̂ = -s(x) bounds V(X, Y) for
every null Y. Only when R^c is empty does the in-region point r_t
stand in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .pvalues import CalibrationScores, conformal_p
from .procedures import OnlineSelectionState, online_bh_step
from .scores import DEFAULT_CLIP_CONSTANT, Predictor
from .utils import InvalidInputError, _require, as_matrix, as_vector


def _parse_bound(v) -> float:
    if isinstance(v, str):
        token = v.strip().lower()
        if token in ("inf", "+inf", "infinity"):
            return math.inf
        if token in ("-inf", "-infinity"):
            return -math.inf
    return float(v)


@dataclass(frozen=True)
class TargetRegion:
    lower: np.ndarray
    upper: np.ndarray
    representative: np.ndarray

    @classmethod
    def box(cls, lower: Sequence, upper: Sequence, representative: Optional[Sequence] = None) -> "TargetRegion":
        lo = np.array([_parse_bound(v) for v in lower], dtype=float)
        hi = np.array([_parse_bound(v) for v in upper], dtype=float)
        _require(lo.shape == hi.shape and lo.ndim == 1 and lo.size >= 1,
                 "lower and upper must be vectors of the same length")
        _require(not (np.isnan(lo).any() or np.isnan(hi).any()), "region bounds contain NaN")
        _require(bool(np.all(lo <= hi)), "region lower bound must not exceed upper bound")
        rep = default_representative(lo, hi) if representative is None else as_vector(representative, "representative")
        region = cls(lower=lo, upper=hi, representative=rep)
        _require(region_contains(region, rep), "representative point must lie in the region")
        return region

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def is_whole_space(self) -> bool:
        return bool(np.all(np.isneginf(self.lower)) and np.all(np.isposinf(self.upper)))

    def null_point(self) -> Optional[np.ndarray]:
        """A point outside R (None when R is the whole space)."""
        for k in range(self.dim):
            point = self.representative.copy()
            if np.isfinite(self.lower[k]):
                point[k] = self.lower[k] - 1.0
                return point
            if np.isfinite(self.upper[k]):
                point[k] = self.upper[k] + 1.0
                return point
        return None


def default_representative(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Midpoint of finite bounds, bound ± 1 for one-sided, 0 for unbounded coordinates."""
    rep = np.zeros_like(lower)
    for k, (lo, hi) in enumerate(zip(lower, upper)):
        if np.isfinite(lo) and np.isfinite(hi):
            rep[k] = (lo + hi) / 2.0
        elif np.isfinite(lo):
            rep[k] = lo + 1.0
        elif np.isfinite(hi):
            rep[k] = hi - 1.0
    return rep


def region_contains(region: TargetRegion, y) -> bool:
    y = as_vector(y, "y")
    if y.shape[0] != region.dim:
        raise InvalidInputError(f"response has dimension {y.shape[0]}, region has {region.dim}")
    return bool(np.all(region.lower <= y) and np.all(y <= region.upper))


def _contains_rows(region: TargetRegion, Y: np.ndarray) -> np.ndarray:
    return np.all((region.lower <= Y) & (Y <= region.upper), axis=1)


def signed_depth(region: TargetRegion, mu) -> float:
    """s(x) as a function of the prediction mu(x)."""
    return float(_signed_depth_rows(region, as_vector(mu, "prediction").reshape(1, -1))[0])


def _signed_depth_rows(region: TargetRegion, M: np.ndarray) -> np.ndarray:
    if M.shape[1] != region.dim:
        raise InvalidInputError(f"prediction has dimension {M.shape[1]}, region has {region.dim}")
    clipped = np.clip(M, region.lower, region.upper)
    outside = np.linalg.norm(M - clipped, axis=1)
    with np.errstate(invalid="ignore"):
        gaps = np.minimum(M - region.lower, region.upper - M)
    gaps = np.where(np.isfinite(gaps), gaps, np.inf)
    depth = gaps.min(axis=1)
    depth = np.where(np.isfinite(depth), depth, 0.0)
    return np.where(outside > 0.0, -outside, depth)


class MultiOutputPredictor(Predictor):
    """Interface for predictors returning one estimate per response coordinate."""

    n_outputs: int = 0


@dataclass(frozen=True)
class RegionalScoreFunction:
    predictor: MultiOutputPredictor
    membership_margin: float = DEFAULT_CLIP_CONSTANT

    def __post_init__(self) -> None:
        _require(self.membership_margin > 0, "membership_margin must be positive")

    def score_batch(self, region: TargetRegion, X, Y) -> np.ndarray:
        X = as_matrix(X)
        Y = as_matrix(Y, "Y")
        _require(Y.shape[0] == X.shape[0], "X and Y row counts differ")
        if Y.shape[1] != region.dim:
            raise InvalidInputError(f"response has dimension {Y.shape[1]}, region has {region.dim}")
        s = _signed_depth_rows(region, self.predictor.predict_batch(X))
        return self.membership_margin * _contains_rows(region, Y).astype(float) - s


def regional_score(sf: RegionalScoreFunction, region: TargetRegion, x, y) -> float:
    x = as_vector(x)
    y = as_vector(y, "y")
    return float(sf.score_batch(region, x.reshape(1, -1), y.reshape(1, -1))[0])


def check_regional_monotone(sf: RegionalScoreFunction, region: TargetRegion, x, y_out, y_in) -> bool:
    _require(not region_contains(region, y_out), "y_out must lie outside the region")
    _require(region_contains(region, y_in), "y_in must lie inside the region")
    return regional_score(sf, region, x, y_out) <= regional_score(sf, region, x, y_in)


def stream_score(sf: RegionalScoreFunction, region: TargetRegion, x) -> float:
    """V̂ for one arriving point."""
    point = region.null_point()
    if point is None:
        point = region.representative
    return regional_score(sf, region, x, point)


def mocs_arc_step(
    state: OnlineSelectionState,
    cal: CalibrationScores,
    sf: RegionalScoreFunction,
    x_t,
    region: TargetRegion,
    u_t: float,
) -> List[int]:
    record = conformal_p(cal, stream_score(sf, region, x_t), u_t)
    return online_bh_step(state, record.p)
