"""
ocs_arc/selection_runtime/pipeline.py
-------------------------------------

OnlineSelector binds one selection method to a fitted score function,
a calibration set and a gamma sequence, then consumes StreamPoints one
at a time:

    score at the threshold -> conformal p-value -> procedure step

Points must arrive without their response; `offer` refuses a point
that still carries `y_true`, so the selection path cannot read it.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Set, Union

from .datagen import StreamPoint
from .multivariate import RegionalScoreFunction, TargetRegion, mocs_arc_step
from .procedures import (
    GammaSequence,
    Method,
    OnlineSelectionState,
    SelectionTrajectory,
    Snapshot,
    gamma_at,
    ob_step,
    online_bh_step,
    repeated_cs_step,
)
from .pvalues import CalibrationScores, conformal_p
from .scores import ScoreFunction
from .utils import InvalidInputError, _require, is_finite_real

log = logging.getLogger(__name__)


class OnlineSelector:
    def __init__(
        self,
        method: Union[Method, str],
        calibration: CalibrationScores,
        q: float,
        r: float,
        score: Optional[Union[ScoreFunction, RegionalScoreFunction]] = None,
        region: Optional[TargetRegion] = None,
        record: bool = True,
    ):
        self.method = Method(method)
        self.calibration = calibration
        self.score = score
        self.region = region
        if self.method == Method.MOCS_ARC:
            _require(isinstance(score, RegionalScoreFunction), "mocs_arc needs a regional score function")
            _require(region is not None, "mocs_arc needs a target region")
        else:
            _require(isinstance(score, ScoreFunction), f"{self.method.value} needs a monotone score function")
        self.state = OnlineSelectionState(q=q, gamma=GammaSequence(r))
        self.trajectory: Optional[SelectionTrajectory] = SelectionTrajectory() if record else None
        self._current: Set[int] = set()

    @property
    def t(self) -> int:
        return self.state.t

    @property
    def selected(self) -> frozenset:
        """R_t after the latest step."""
        return frozenset(self._current)

    def _test_score(self, point: StreamPoint) -> float:
        if point.c_t is None or not is_finite_real(point.c_t):
            raise InvalidInputError(f"stream point {self.t + 1} has no finite threshold c_t")
        return self.score(point.x, float(point.c_t))

    def offer(self, point: StreamPoint, u: float) -> List[int]:
        """Process one arriving point; returns the indices newly selected at this step."""
        if point.y_true is not None:
            raise InvalidInputError("stream points must not carry a response on the selection path")
        deselected: tuple = ()

        if self.method == Method.MOCS_ARC:
            newly = mocs_arc_step(self.state, self.calibration, self.score, point.x, self.region, u)
            self._record(newly, deselected)
            return list(newly)

        record = conformal_p(self.calibration, self._test_score(point), u)
        if self.method == Method.OB:
            newly = ob_step(self.state, record.p)
        elif self.method == Method.REPEATED_CS:
            self.state.pvals.append(record.p)
            self.state.gammas.append(gamma_at(self.state.gamma, self.state.t))
            current = repeated_cs_step(self.state.pvals, self.state.q)
            newly = sorted(current - self._current)
            deselected = tuple(sorted(self._current - current))
            if deselected:
                log.debug("repeated_cs dropped %s at t=%s", list(deselected), self.t)
            self.state.k_star = len(current)
        else:
            newly = online_bh_step(self.state, record.p)

        self._record(newly, deselected)
        return list(newly)

    def _record(self, newly: List[int], deselected: tuple) -> None:
        self._current.difference_update(deselected)
        self._current.update(newly)
        if self.trajectory is not None:
            self.trajectory.append(
                Snapshot(
                    t=self.t,
                    p_t=self.state.pvals[-1],
                    gamma_t=self.state.gammas[-1],
                    k_star=self.state.k_star,
                    newly_selected=tuple(newly),
                    cum_selected=len(self._current),
                    deselected=deselected,
                )
            )
