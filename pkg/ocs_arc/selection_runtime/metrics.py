"""
ocs_arc/selection_runtime/metrics.py
------------------------------------

Evaluation of selection runs against hidden truths:

    FDP_t   = |R_t ∩ H0_t| / |R_t|          (0/0 := 0)
    Power_t = |R_t ∩ H1_t| / |H1_t|         (0/0 := 0)

plus reject-to-accept counting and aggregation over Monte Carlo
replicates (sample std with n-1 denominator, SE = std / sqrt(runs)).

Truth labels only ever enter here; selection code never sees them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set

import numpy as np

from .procedures import SelectionTrajectory
from .utils import InvalidInputError, _require


@dataclass(frozen=True)
class TruthLabels:
    """non_null[i - 1] is True iff stream index i satisfies the alternative."""

    non_null: np.ndarray

    @classmethod
    def from_responses(cls, y_true: Sequence[float], thresholds: Sequence[float]) -> "TruthLabels":
        y = np.asarray(y_true, dtype=float)
        c = np.broadcast_to(np.asarray(thresholds, dtype=float), y.shape)
        return cls(non_null=y > c)

    def __post_init__(self) -> None:
        arr = np.asarray(self.non_null, dtype=bool).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "non_null", arr)

    def __len__(self) -> int:
        return int(self.non_null.shape[0])

    def _check(self, selected: Iterable[int]) -> List[int]:
        idx = [int(i) for i in selected]
        bad = [i for i in idx if not 1 <= i <= len(self)]
        if bad:
            raise InvalidInputError(f"unlabeled stream indices in selection: {sorted(bad)[:5]}")
        return idx

    def nulls(self, t: Optional[int] = None) -> Set[int]:
        t = len(self) if t is None else int(t)
        return {i + 1 for i in np.nonzero(~self.non_null[:t])[0]}

    def non_nulls(self, t: Optional[int] = None) -> Set[int]:
        t = len(self) if t is None else int(t)
        return {i + 1 for i in np.nonzero(self.non_null[:t])[0]}


def fdp(selected: Iterable[int], truths: TruthLabels) -> float:
    idx = truths._check(selected)
    if not idx:
        return 0.0
    false = sum(1 for i in idx if not truths.non_null[i - 1])
    return false / len(idx)


def power(selected: Iterable[int], truths: TruthLabels, t: Optional[int] = None) -> float:
    """Share of the non-nulls among the first t indices that were selected."""
    idx = truths._check(selected)
    t = len(truths) if t is None else int(t)
    _require(0 <= t <= len(truths), f"t={t} outside the labeled stream")
    positives = int(np.count_nonzero(truths.non_null[:t]))
    if positives == 0:
        return 0.0
    hits = sum(1 for i in idx if i <= t and truths.non_null[i - 1])
    return hits / positives


def reject_to_accept(sets: Iterable[Iterable[int]]) -> int:
    """Σ_t |R_{t-1} \\ R_t|: previously selected indices that were dropped."""
    total = 0
    prev: Set[int] = set()
    for s in sets:
        cur = set(s)
        total += len(prev - cur)
        prev = cur
    return total


@dataclass
class RunResult:
    method: str
    score: str
    fdp_at: Dict[int, float]
    power_at: Dict[int, float]
    reject_to_accept_count: int
    r2a_at: Dict[int, int] = field(default_factory=dict)
    trajectory: Optional[SelectionTrajectory] = None

    def __post_init__(self) -> None:
        for t, v in list(self.fdp_at.items()) + list(self.power_at.items()):
            _require(0.0 <= v <= 1.0, f"metric at t={t} outside [0, 1]: {v}")


def evaluate_trajectory(
    method: str,
    score: str,
    trajectory: SelectionTrajectory,
    truths: TruthLabels,
    checkpoints: Sequence[int],
    keep_trajectory: bool = False,
) -> RunResult:
    wanted = sorted(set(int(t) for t in checkpoints))
    _require(all(1 <= t <= len(trajectory) for t in wanted),
             f"checkpoints {wanted} exceed trajectory length {len(trajectory)}")
    fdp_at: Dict[int, float] = {}
    power_at: Dict[int, float] = {}
    r2a_at: Dict[int, int] = {}
    prev: Set[int] = set()
    dropped = 0
    for t, current in enumerate(trajectory.sets(), start=1):
        dropped += len(prev - current)
        prev = set(current)
        if t in wanted:
            fdp_at[t] = fdp(current, truths)
            power_at[t] = power(current, truths, t)
            r2a_at[t] = dropped
    return RunResult(
        method=method,
        score=score,
        fdp_at=fdp_at,
        power_at=power_at,
        reject_to_accept_count=dropped,
        r2a_at=r2a_at,
        trajectory=trajectory if keep_trajectory else None,
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckpointSummary:
    t: int
    n_runs: int
    mean_fdp: float
    std_fdp: float
    se_fdp: float
    mean_power: float
    std_power: float
    se_power: float
    mean_r2a: float
    se_defined: bool


def _mean_std_se(values: Sequence[float]):
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.shape[0] < 2:
        return mean, 0.0, 0.0
    std = float(arr.std(ddof=1))
    return mean, std, std / math.sqrt(arr.shape[0])


def aggregate(results: Sequence[RunResult], t_checkpoints: Sequence[int]) -> List[CheckpointSummary]:
    _require(len(results) >= 1, "aggregate needs at least one run")
    out: List[CheckpointSummary] = []
    for t in sorted(set(int(t) for t in t_checkpoints)):
        missing = [i for i, r in enumerate(results) if t not in r.fdp_at or t not in r.power_at]
        if missing:
            raise InvalidInputError(f"checkpoint t={t} missing from runs {missing[:5]}")
        m_fdp, s_fdp, se_fdp = _mean_std_se([r.fdp_at[t] for r in results])
        m_pow, s_pow, se_pow = _mean_std_se([r.power_at[t] for r in results])
        m_r2a = float(np.mean([r.r2a_at.get(t, r.reject_to_accept_count) for r in results]))
        out.append(
            CheckpointSummary(
                t=t,
                n_runs=len(results),
                mean_fdp=m_fdp,
                std_fdp=s_fdp,
                se_fdp=se_fdp,
                mean_power=m_pow,
                std_power=s_pow,
                se_power=se_pow,
                mean_r2a=m_r2a,
                se_defined=len(results) > 1,
            )
        )
    return out
